//! Dichotomy spectra of matrix cocycles, non-resonance and spectral-gap
//! checking, nonautonomous center manifolds and Takens normal forms at
//! polynomial-jet level, with residual-based conjugacy verification.
//!
//! All numerical code is generic over the scalar type through
//! [`scalar::Scalar`]; the `*64` aliases below fix `f64`, which is what the
//! CLI and the test suites use.

pub mod cocycle;
pub mod error;
pub mod homological;
pub mod jets;
pub mod linalg;
pub mod manifold;
pub mod pipeline;
pub mod resonance;
pub mod scalar;
pub mod spectrum;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Concrete `f64` aliases for the main public types.
pub type Mat64 = linalg::Mat<f64>;
pub type Cocycle64 = cocycle::CocycleSpec<f64>;
pub type Trichotomy64 = cocycle::TrichotomyData<f64>;
pub type System64 = cocycle::NonlinearSystem<f64>;
pub type Jet64 = jets::JetPoly<f64>;
pub type JetSeq64 = jets::TimeJetSeq<f64>;
