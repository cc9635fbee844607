//! Shared fixtures for the integration suites.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use takens::cocycle::{FamilySpec, NonlinearSystem};
use takens::jets::{JetPoly, SpaceSplit, TimeJetSeq};
use takens::spectrum::{Interval, SpectrumResult};

/// Jet truncation order of the 3D suite.
pub const SUITE_ORDER: u32 = 5;
/// Window half-width of the 3D suite.
pub const SUITE_WINDOW: i64 = 288;
/// Nonlinearity scale of the 3D suite.
pub const SUITE_DELTA: f64 = 0.05;

/// The seed-fixed 3D system: diagonal hyperbolic rates (0.2, 1, 3) with a
/// random degree-2..3 nonlinearity whose coefficients are cosine-modulated
/// in time. One stable, one center, one unstable direction.
pub fn suite_system(seed: u64) -> NonlinearSystem<f64> {
    suite_system_sized(seed, SUITE_WINDOW, SUITE_ORDER, SUITE_DELTA)
}

pub fn suite_system_sized(
    seed: u64,
    window: i64,
    order: u32,
    delta: f64,
) -> NonlinearSystem<f64> {
    let split = SpaceSplit::elementary(1, 1, 1);
    let linear = FamilySpec::Autonomous {
        matrix: vec![
            vec![0.2, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 3.0],
        ],
    }
    .build(window, 0)
    .unwrap();

    // Seeded monomial table: (alpha, beta, row, base coefficient, phase).
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms: Vec<([u32; 2], [u32; 1], usize, f64, f64)> = Vec::new();
    for total in 2..=3u32 {
        for vs in 0..=total {
            for vu in 0..=(total - vs) {
                let c = total - vs - vu;
                for row in 0..3usize {
                    let base: f64 = rng.gen_range(-1.0..1.0);
                    let phase: f64 = rng.gen_range(0.0..6.28);
                    terms.push(([vs, vu], [c], row, base, phase));
                }
            }
        }
    }
    // One admissible linear coupling term (hyperbolic into center).
    let coupling_base: f64 = rng.gen_range(-1.0..1.0);
    let coupling_phase: f64 = rng.gen_range(0.0..6.28);

    let f = TimeJetSeq::from_fn(window, |n| {
        let mut jet = JetPoly::zero(split.clone(), split.clone(), order);
        let t = n as f64;
        for (alpha, beta, row, base, phase) in &terms {
            let coeff = delta * base * (1.0 + 0.5 * (0.7 * t + phase).cos());
            if coeff != 0.0 {
                jet.add_to(alpha, beta, *row, coeff);
            }
        }
        let coupling = delta * coupling_base * (1.0 + 0.5 * (0.7 * t + coupling_phase).cos());
        jet.add_to(&[1, 0], &[0], 1, coupling);
        jet
    });
    NonlinearSystem::new(linear, split, f, delta, 1.0).unwrap()
}

/// The exact point spectrum of the suite's linear part.
pub fn suite_exact_spectrum() -> SpectrumResult<f64> {
    SpectrumResult::from_intervals(
        vec![
            Interval::point(0.2),
            Interval::point(1.0),
            Interval::point(3.0),
        ],
        Vec::new(),
    )
    .unwrap()
}
