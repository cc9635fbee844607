//! Bounded invertible matrix sequences on a finite window, evaluation of
//! the associated linear cocycle, built-in families, and verification of
//! exponential-trichotomy data.

use crate::error::{Error, Result};
use crate::jets::{SpaceSplit, TimeJetSeq};
use crate::linalg::Mat;
use crate::scalar::Scalar;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Condition-number guard for numerically inverted generators.
pub const COND_GUARD: f64 = 1e12;
/// Tolerance for the `A_n * A_n^{-1} = Id` invertibility check.
pub const INV_CHECK_TOL: f64 = 1e-10;

/// A two-sided sequence of invertible matrices sampled on [-W, W].
///
/// Inverses are supplied analytically where the family allows it and are
/// otherwise computed once at construction behind a condition guard;
/// evaluation never inverts matrices on the fly.
#[derive(Debug, Clone)]
pub struct CocycleSpec<T> {
    dim: usize,
    window: i64,
    mats: Vec<Mat<T>>,
    invs: Vec<Mat<T>>,
    /// (sup ||A_n||, sup ||A_n^{-1}||) over the window, spectral norms.
    bounds: (T, T),
}

impl<T: Scalar> CocycleSpec<T> {
    /// Build from a generator and, optionally, an analytic inverse
    /// generator. Validates invertibility of every slice.
    pub fn from_generator(
        dim: usize,
        window: i64,
        gen: impl Fn(i64) -> Mat<T>,
        inv_gen: Option<&dyn Fn(i64) -> Mat<T>>,
    ) -> Result<Self> {
        assert!(dim > 0, "dimension must be positive");
        assert!(window >= 0, "window must be nonnegative");
        let mut mats = Vec::with_capacity((2 * window + 1) as usize);
        let mut invs = Vec::with_capacity(mats.capacity());
        for n in -window..=window {
            let a = gen(n);
            if a.rows() != dim || a.cols() != dim {
                return Err(Error::BadParams(format!(
                    "generator at n={n} has shape {}x{}, expected {dim}x{dim}",
                    a.rows(),
                    a.cols()
                )));
            }
            let inv = match inv_gen {
                Some(ig) => ig(n),
                None => a.inverse_guarded(T::of(COND_GUARD), n)?,
            };
            let defect = a.matmul(&inv).sub(&Mat::identity(dim)).spectral_norm();
            if defect > T::of(INV_CHECK_TOL) {
                return Err(Error::SingularMatrix {
                    index: n,
                    defect: defect.as_f64(),
                });
            }
            mats.push(a);
            invs.push(inv);
        }
        let sup_a = mats
            .iter()
            .fold(T::zero(), |acc, m| acc.max(m.spectral_norm()));
        let sup_inv = invs
            .iter()
            .fold(T::zero(), |acc, m| acc.max(m.spectral_norm()));
        Ok(CocycleSpec {
            dim,
            window,
            mats,
            invs,
            bounds: (sup_a, sup_inv),
        })
    }

    /// Build from explicit per-slice matrices (index 0 of `mats` is n=-W).
    pub fn from_matrices(window: i64, mats: Vec<Mat<T>>) -> Result<Self> {
        assert_eq!(mats.len() as i64, 2 * window + 1, "slice count");
        let dim = mats[0].rows();
        Self::from_generator(dim, window, |n| mats[(n + window) as usize].clone(), None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn window(&self) -> i64 {
        self.window
    }

    pub fn bounds(&self) -> (T, T) {
        self.bounds
    }

    fn check_index(&self, n: i64) -> Result<usize> {
        if n.abs() > self.window {
            return Err(Error::OutOfWindow {
                index: n,
                window: self.window,
            });
        }
        Ok((n + self.window) as usize)
    }

    /// A_n.
    pub fn mat(&self, n: i64) -> Result<&Mat<T>> {
        Ok(&self.mats[self.check_index(n)?])
    }

    /// A_n^{-1}.
    pub fn inv(&self, n: i64) -> Result<&Mat<T>> {
        Ok(&self.invs[self.check_index(n)?])
    }

    /// The cocycle: A_{m-1}...A_n for m > n, Id for m = n,
    /// A_m^{-1}...A_{n-1}^{-1} for m < n.
    pub fn eval(&self, m: i64, n: i64) -> Result<Mat<T>> {
        self.check_index(m)?;
        self.check_index(n)?;
        let mut out = Mat::identity(self.dim);
        if m > n {
            for k in n..m {
                out = self.mats[(k + self.window) as usize].matmul(&out);
            }
        } else if m < n {
            for k in (m..n).rev() {
                out = self.invs[(k + self.window) as usize].matmul(&out);
            }
        }
        Ok(out)
    }

    /// The cocycle with every factor divided by `gamma`; avoids overflow in
    /// long products.
    pub fn eval_scaled(&self, m: i64, n: i64, gamma: T) -> Result<Mat<T>> {
        let inv_gamma = T::one() / gamma;
        self.check_index(m)?;
        self.check_index(n)?;
        let mut out = Mat::identity(self.dim);
        if m > n {
            for k in n..m {
                out = self.mats[(k + self.window) as usize]
                    .scale(inv_gamma)
                    .matmul(&out);
            }
        } else if m < n {
            for k in (m..n).rev() {
                out = self.invs[(k + self.window) as usize]
                    .scale(gamma)
                    .matmul(&out);
            }
        }
        Ok(out)
    }

    /// Cocycle with every generator scaled by `c` (used for covariance
    /// checks): returns a new spec.
    pub fn scaled(&self, c: T) -> Result<Self> {
        Self::from_generator(
            self.dim,
            self.window,
            |n| self.mats[(n + self.window) as usize].scale(c),
            Some(&|n: i64| self.invs[(n + self.window) as usize].scale(T::one() / c)),
        )
    }
}

/// Evaluate the linear cocycle of `spec` from time `n` to time `m`.
pub fn eval_cocycle<T: Scalar>(spec: &CocycleSpec<T>, m: i64, n: i64) -> Result<Mat<T>> {
    spec.eval(m, n)
}

/// Trichotomy rates 0 < mu- <= mu+ < lam- <= 1 <= lam+ < rho- <= rho+.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrichotomyRates<T> {
    pub mu_minus: T,
    pub mu_plus: T,
    pub lam_minus: T,
    pub lam_plus: T,
    pub rho_minus: T,
    pub rho_plus: T,
}

impl<T: Scalar> TrichotomyRates<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = T::zero() < self.mu_minus
            && self.mu_minus <= self.mu_plus
            && self.mu_plus < self.lam_minus
            && self.lam_minus <= T::one()
            && T::one() <= self.lam_plus
            && self.lam_plus < self.rho_minus
            && self.rho_minus <= self.rho_plus;
        if ok {
            Ok(())
        } else {
            Err(Error::BadParams(format!(
                "trichotomy rates must satisfy 0 < {:?} <= {:?} < {:?} <= 1 <= {:?} < {:?} <= {:?}",
                self.mu_minus.as_f64(),
                self.mu_plus.as_f64(),
                self.lam_minus.as_f64(),
                self.lam_plus.as_f64(),
                self.rho_minus.as_f64(),
                self.rho_plus.as_f64(),
            )))
        }
    }
}

/// Per-time projections onto stable/center/unstable subspaces together
/// with the trichotomy constants. Defined on a band [lo, hi] that may be
/// smaller than the cocycle window when extracted numerically.
#[derive(Debug, Clone)]
pub struct TrichotomyData<T> {
    band: (i64, i64),
    proj_s: Vec<Mat<T>>,
    proj_c: Vec<Mat<T>>,
    proj_u: Vec<Mat<T>>,
    pub k_const: T,
    pub rates: TrichotomyRates<T>,
}

impl<T: Scalar> TrichotomyData<T> {
    /// Validates the structural invariants: the three projections sum to
    /// the identity (1e-10), are idempotent (1e-10) and are equivariant
    /// under the cocycle (1e-8).
    pub fn new(
        spec: &CocycleSpec<T>,
        band: (i64, i64),
        proj_s: Vec<Mat<T>>,
        proj_c: Vec<Mat<T>>,
        proj_u: Vec<Mat<T>>,
        k_const: T,
        rates: TrichotomyRates<T>,
    ) -> Result<Self> {
        rates.validate()?;
        if k_const <= T::zero() {
            return Err(Error::BadParams("K must be positive".into()));
        }
        let len = (band.1 - band.0 + 1) as usize;
        if proj_s.len() != len || proj_c.len() != len || proj_u.len() != len {
            return Err(Error::BadParams("projection count != band length".into()));
        }
        let d = spec.dim();
        let id = Mat::identity(d);
        let sum_tol = T::of(1e-10);
        let equi_tol = T::of(1e-8);
        for (i, n) in (band.0..=band.1).enumerate() {
            let ps = &proj_s[i];
            let pc = &proj_c[i];
            let pu = &proj_u[i];
            let sum_defect = ps.add(pc).add(pu).sub(&id).spectral_norm();
            if sum_defect > sum_tol {
                return Err(Error::Invariant(format!(
                    "projections at n={n} do not sum to identity (defect {:.3e})",
                    sum_defect.as_f64()
                )));
            }
            for (name, p) in [("s", ps), ("c", pc), ("u", pu)] {
                let idem = p.matmul(p).sub(p).spectral_norm();
                if idem > sum_tol {
                    return Err(Error::Invariant(format!(
                        "projection {name} at n={n} not idempotent (defect {:.3e})",
                        idem.as_f64()
                    )));
                }
            }
            if n < band.1 {
                let a = spec.mat(n)?;
                for (name, pn, pn1) in [
                    ("s", ps, &proj_s[i + 1]),
                    ("c", pc, &proj_c[i + 1]),
                    ("u", pu, &proj_u[i + 1]),
                ] {
                    let defect = pn1.matmul(a).sub(&a.matmul(pn)).spectral_norm();
                    if defect > equi_tol {
                        return Err(Error::Invariant(format!(
                            "projection {name} not equivariant at n={n} (defect {:.3e})",
                            defect.as_f64()
                        )));
                    }
                }
            }
        }
        Ok(TrichotomyData {
            band,
            proj_s,
            proj_c,
            proj_u,
            k_const,
            rates,
        })
    }

    pub fn band(&self) -> (i64, i64) {
        self.band
    }

    fn idx(&self, n: i64) -> Result<usize> {
        if n < self.band.0 || n > self.band.1 {
            return Err(Error::OutOfWindow {
                index: n,
                window: self.band.1,
            });
        }
        Ok((n - self.band.0) as usize)
    }

    pub fn proj_s(&self, n: i64) -> Result<&Mat<T>> {
        Ok(&self.proj_s[self.idx(n)?])
    }

    pub fn proj_c(&self, n: i64) -> Result<&Mat<T>> {
        Ok(&self.proj_c[self.idx(n)?])
    }

    pub fn proj_u(&self, n: i64) -> Result<&Mat<T>> {
        Ok(&self.proj_u[self.idx(n)?])
    }
}

/// One growth inequality of the trichotomy verification.
#[derive(Debug, Clone, Serialize)]
pub struct InequalityCheck {
    /// Identifier such as "stable-forward".
    pub id: &'static str,
    /// Worst observed constant max ||...|| / rate^k.
    pub k_obs: f64,
    pub pass: bool,
}

/// Outcome of `verify_trichotomy`.
#[derive(Debug, Clone, Serialize)]
pub struct TrichotomyReport {
    pub inequalities: Vec<InequalityCheck>,
    /// Worst constant over all six inequalities.
    pub k_obs: f64,
    pub k_claimed: f64,
    pub pass: bool,
}

impl TrichotomyReport {
    pub fn failed_ids(&self) -> Vec<&'static str> {
        self.inequalities
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.id)
            .collect()
    }
}

/// Check the projection identities and all six growth inequalities of a
/// strong exponential trichotomy over every pair (m, n) in the data band.
pub fn verify_trichotomy<T: Scalar>(
    spec: &CocycleSpec<T>,
    data: &TrichotomyData<T>,
    tol: T,
) -> Result<TrichotomyReport> {
    let (lo, hi) = data.band;
    if hi - lo < 8 {
        return Err(Error::WindowTooSmall {
            have: hi - lo,
            need: 8,
        });
    }
    // Rank consistency across the band.
    let rank = |p: &Mat<T>| -> usize {
        p.singular_values()
            .iter()
            .filter(|&&s| s > T::of(0.5))
            .count()
    };
    let r0 = (
        rank(data.proj_s(lo)?),
        rank(data.proj_c(lo)?),
        rank(data.proj_u(lo)?),
    );
    for n in lo + 1..=hi {
        let r = (
            rank(data.proj_s(n)?),
            rank(data.proj_c(n)?),
            rank(data.proj_u(n)?),
        );
        if r != r0 {
            return Err(Error::RankInconsistent(format!(
                "ranks {r:?} at n={n} differ from {r0:?} at n={lo}"
            )));
        }
    }

    let rates = &data.rates;
    // (id, forward?, projection accessor, rate) -- forward means the bound
    // || A(m,n) P_n || <= K rate^{m-n} for m >= n; backward means
    // || A(n,m) P_m || <= K rate^{n-m} for m >= n (rate^{n-m} with n <= m).
    let mut k_obs = [T::zero(); 6];
    for j in lo..=hi {
        // Forward sweep: A(m, j) for m > j applied to the three projections.
        let mut ms = data.proj_s(j)?.clone();
        let mut mc = data.proj_c(j)?.clone();
        let mut mu = data.proj_u(j)?.clone();
        let update = |k_obs: &mut [T; 6], dist: i64, ms: &Mat<T>, mc: &Mat<T>, mu: &Mat<T>| {
            let p = dist as i32;
            k_obs[0] = k_obs[0].max(ms.spectral_norm() / rates.mu_plus.powi(p));
            k_obs[1] = k_obs[1].max(mc.spectral_norm() / rates.lam_plus.powi(p));
            k_obs[2] = k_obs[2].max(mu.spectral_norm() / rates.rho_plus.powi(p));
        };
        update(&mut k_obs, 0, &ms, &mc, &mu);
        for m in j + 1..=hi {
            let a = spec.mat(m - 1)?;
            ms = a.matmul(&ms);
            mc = a.matmul(&mc);
            mu = a.matmul(&mu);
            update(&mut k_obs, m - j, &ms, &mc, &mu);
        }
        // Backward sweep: A(n, j) for n < j.
        let mut ms = data.proj_s(j)?.clone();
        let mut mc = data.proj_c(j)?.clone();
        let mut mu = data.proj_u(j)?.clone();
        let update = |k_obs: &mut [T; 6], dist: i64, ms: &Mat<T>, mc: &Mat<T>, mu: &Mat<T>| {
            let p = dist as i32;
            k_obs[3] = k_obs[3].max(ms.spectral_norm() / rates.mu_minus.powi(-p));
            k_obs[4] = k_obs[4].max(mc.spectral_norm() / rates.lam_minus.powi(-p));
            k_obs[5] = k_obs[5].max(mu.spectral_norm() / rates.rho_minus.powi(-p));
        };
        update(&mut k_obs, 0, &ms, &mc, &mu);
        for n in (lo..j).rev() {
            let ainv = spec.inv(n)?;
            ms = ainv.matmul(&ms);
            mc = ainv.matmul(&mc);
            mu = ainv.matmul(&mu);
            update(&mut k_obs, j - n, &ms, &mc, &mu);
        }
    }

    let ids = [
        "stable-forward",
        "center-forward",
        "unstable-forward",
        "stable-backward",
        "center-backward",
        "unstable-backward",
    ];
    let slack = data.k_const * (T::one() + tol);
    let inequalities: Vec<InequalityCheck> = ids
        .iter()
        .zip(k_obs.iter())
        .map(|(&id, &k)| InequalityCheck {
            id,
            k_obs: k.as_f64(),
            pass: k <= slack,
        })
        .collect();
    let worst = k_obs.iter().fold(T::zero(), |a, &b| a.max(b));
    Ok(TrichotomyReport {
        pass: inequalities.iter().all(|c| c.pass),
        inequalities,
        k_obs: worst.as_f64(),
        k_claimed: data.k_const.as_f64(),
    })
}

/// Nonlinear system x_{n+1} = A_n x_n + f_n(x_n) with polynomial-jet
/// nonlinearities on a window.
///
/// The linear part must be block-diagonal with respect to the split; the
/// jets must vanish at 0. Their derivative at 0 may carry a hyperbolic ->
/// center coupling block (it is removed by the first elimination stage);
/// all other blocks of d_0 f_n must vanish so that A_n is the true
/// block-diagonalized linearization and the center manifold stays tangent
/// to the center subspace.
#[derive(Debug, Clone)]
pub struct NonlinearSystem<T> {
    pub linear: CocycleSpec<T>,
    pub split: SpaceSplit,
    pub nonlinearity: TimeJetSeq<T>,
    /// Slices on which the jets are trusted.
    band: (i64, i64),
    /// Lipschitz-type smallness bound for the nonlinearity.
    pub smallness: T,
    /// Bound on higher derivatives of the nonlinearity.
    pub deriv_bound: T,
}

impl<T: Scalar> NonlinearSystem<T> {
    pub fn new(
        linear: CocycleSpec<T>,
        split: SpaceSplit,
        nonlinearity: TimeJetSeq<T>,
        smallness: T,
        deriv_bound: T,
    ) -> Result<Self> {
        let w = linear.window();
        let band = (-w, w);
        Self::with_band(linear, split, nonlinearity, band, smallness, deriv_bound)
    }

    pub fn with_band(
        linear: CocycleSpec<T>,
        split: SpaceSplit,
        nonlinearity: TimeJetSeq<T>,
        band: (i64, i64),
        smallness: T,
        deriv_bound: T,
    ) -> Result<Self> {
        let d = linear.dim();
        if split.dim() != d {
            return Err(Error::ShapeMismatch(format!(
                "split dimension {} != cocycle dimension {d}",
                split.dim()
            )));
        }
        if nonlinearity.window() < linear.window() {
            return Err(Error::ShapeMismatch(
                "jet window smaller than cocycle window".into(),
            ));
        }
        let ds = split.ds();
        let dc = split.dc;
        let block_tol = T::of(1e-12);
        // Linear part block-diagonal over (s, c, u).
        let region = |i: usize| -> u8 {
            if i < ds {
                0
            } else if i < ds + dc {
                1
            } else {
                2
            }
        };
        for n in band.0..=band.1 {
            let a = linear.mat(n)?;
            for i in 0..d {
                for j in 0..d {
                    if region(i) != region(j) && a[(i, j)].abs() > block_tol {
                        return Err(Error::Invariant(format!(
                            "linear part not block-diagonal at n={n}, entry ({i},{j})"
                        )));
                    }
                }
            }
            let f = nonlinearity.get(n)?;
            let cst = f.constant_part();
            if cst.iter().any(|&c| c != T::zero()) {
                return Err(Error::Invariant(format!("f_{n}(0) != 0")));
            }
            let lin = f.linear_part();
            for i in 0..d {
                for j in 0..d {
                    // Allowed: center rows against hyperbolic columns.
                    let allowed = region(i) == 1 && region(j) != 1;
                    if !allowed && lin[(i, j)].abs() > block_tol {
                        return Err(Error::Invariant(format!(
                            "d_0 f_{n} has forbidden entry ({i},{j}) = {:.3e}",
                            lin[(i, j)].as_f64()
                        )));
                    }
                }
            }
        }
        Ok(NonlinearSystem {
            linear,
            split,
            nonlinearity,
            band,
            smallness,
            deriv_bound,
        })
    }

    pub fn band(&self) -> (i64, i64) {
        self.band
    }

    pub fn dim(&self) -> usize {
        self.linear.dim()
    }

    pub fn max_order(&self) -> u32 {
        self.nonlinearity.iter().next().unwrap().1.max_order()
    }

    /// Full map F_n = A_n + f_n as a jet.
    pub fn full_map(&self, n: i64) -> Result<crate::jets::JetPoly<T>> {
        let a = self.linear.mat(n)?;
        let lin = crate::jets::JetPoly::linear(
            self.split.clone(),
            self.split.clone(),
            a,
            self.max_order(),
        );
        Ok(lin.add(self.nonlinearity.get(n)?))
    }
}

/// A scalar or a per-axis list in family parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FloatOrVec {
    One(f64),
    Many(Vec<f64>),
}

impl FloatOrVec {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            FloatOrVec::One(x) => vec![*x],
            FloatOrVec::Many(v) => v.clone(),
        }
    }
}

fn default_zero() -> FloatOrVec {
    FloatOrVec::One(0.0)
}

/// Built-in cocycle families addressable from CLI configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    /// Constant generator.
    Autonomous { matrix: Vec<Vec<f64>> },
    /// Scalar step: a_n = left for n < 0, right for n >= 0.
    Step { left: f64, right: f64 },
    /// Diagonal entries exp(c_i + beta_i cos(omega_i n)).
    QuasiperiodicDiagonal {
        #[serde(default = "default_zero")]
        c: FloatOrVec,
        beta: FloatOrVec,
        omega: FloatOrVec,
    },
    /// D (Id + delta R_n) with R_n uniform in [-1, 1], seeded.
    RandomBounded { diag: Vec<f64>, delta: f64 },
    /// Block-diagonal family realizing chosen spectral intervals: each
    /// block is a scalar step hitting [lo, hi]; optional global random
    /// perturbation A_n (Id + delta S_n).
    BlockTrichotomic {
        stable: Vec<[f64; 2]>,
        center: Option<[f64; 2]>,
        unstable: Vec<[f64; 2]>,
        #[serde(default)]
        delta: f64,
    },
}

impl FamilySpec {
    /// Dimension of the generated cocycle.
    pub fn dim(&self) -> usize {
        match self {
            FamilySpec::Autonomous { matrix } => matrix.len(),
            FamilySpec::Step { .. } => 1,
            FamilySpec::QuasiperiodicDiagonal { beta, .. } => beta.to_vec().len(),
            FamilySpec::RandomBounded { diag, .. } => diag.len(),
            FamilySpec::BlockTrichotomic {
                stable,
                center,
                unstable,
                ..
            } => stable.len() + usize::from(center.is_some()) + unstable.len(),
        }
    }

    /// Coordinate split implied by a block-trichotomic family.
    pub fn implied_split(&self) -> Option<SpaceSplit> {
        match self {
            FamilySpec::BlockTrichotomic {
                stable,
                center,
                unstable,
                ..
            } => Some(SpaceSplit::elementary(
                stable.len(),
                usize::from(center.is_some()),
                unstable.len(),
            )),
            _ => None,
        }
    }

    pub fn build<T: Scalar>(&self, window: i64, seed: u64) -> Result<CocycleSpec<T>> {
        match self {
            FamilySpec::Autonomous { matrix } => {
                let d = matrix.len();
                for row in matrix {
                    if row.len() != d {
                        return Err(Error::BadParams("matrix must be square".into()));
                    }
                }
                let a = Mat::from_fn(d, d, |i, j| T::of(matrix[i][j]));
                CocycleSpec::from_generator(d, window, |_| a.clone(), None)
            }
            FamilySpec::Step { left, right } => {
                if *left == 0.0 || *right == 0.0 {
                    return Err(Error::BadParams("step values must be nonzero".into()));
                }
                let (l, r) = (T::of(*left), T::of(*right));
                CocycleSpec::from_generator(
                    1,
                    window,
                    |n| Mat::diag(&[if n < 0 { l } else { r }]),
                    Some(&|n: i64| Mat::diag(&[T::one() / if n < 0 { l } else { r }])),
                )
            }
            FamilySpec::QuasiperiodicDiagonal { c, beta, omega } => {
                let c = c.to_vec();
                let beta = beta.to_vec();
                let omega = omega.to_vec();
                let d = beta.len();
                if c.len() != d || omega.len() != d {
                    return Err(Error::BadParams(
                        "c, beta, omega must have equal lengths".into(),
                    ));
                }
                let entry = |n: i64, i: usize| {
                    T::of((c[i] + beta[i] * (omega[i] * n as f64).cos()).exp())
                };
                CocycleSpec::from_generator(
                    d,
                    window,
                    |n| Mat::from_fn(d, d, |i, j| if i == j { entry(n, i) } else { T::zero() }),
                    Some(&|n: i64| {
                        Mat::from_fn(
                            d,
                            d,
                            |i, j| if i == j { T::one() / entry(n, i) } else { T::zero() },
                        )
                    }),
                )
            }
            FamilySpec::RandomBounded { diag, delta } => {
                if diag.iter().any(|&x| x == 0.0) {
                    return Err(Error::BadParams("diagonal entries must be nonzero".into()));
                }
                let base: Vec<T> = diag.iter().map(|&x| T::of(x)).collect();
                let slices = random_perturbed_slices(&base, *delta, window, seed)?;
                CocycleSpec::from_matrices(window, slices)
            }
            FamilySpec::BlockTrichotomic {
                stable,
                center,
                unstable,
                delta,
            } => {
                let mut intervals: Vec<[f64; 2]> = Vec::new();
                intervals.extend_from_slice(stable);
                if let Some(cc) = center {
                    intervals.push(*cc);
                }
                intervals.extend_from_slice(unstable);
                if intervals.is_empty() {
                    return Err(Error::BadParams("at least one block required".into()));
                }
                for iv in &intervals {
                    if iv[0] <= 0.0 || iv[1] < iv[0] {
                        return Err(Error::BadParams(format!(
                            "interval [{}, {}] must satisfy 0 < lo <= hi",
                            iv[0], iv[1]
                        )));
                    }
                }
                let d = intervals.len();
                // Step realization: hi before time zero, lo after, so the
                // window products sweep out [lo, hi].
                let diag_at = |n: i64, i: usize| {
                    let [lo, hi] = intervals[i];
                    T::of(if n < 0 { hi } else { lo })
                };
                if *delta == 0.0 {
                    CocycleSpec::from_generator(
                        d,
                        window,
                        |n| {
                            Mat::from_fn(
                                d,
                                d,
                                |i, j| if i == j { diag_at(n, i) } else { T::zero() },
                            )
                        },
                        Some(&|n: i64| {
                            Mat::from_fn(d, d, |i, j| {
                                if i == j {
                                    T::one() / diag_at(n, i)
                                } else {
                                    T::zero()
                                }
                            })
                        }),
                    )
                } else {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let mut slices = Vec::with_capacity((2 * window + 1) as usize);
                    for n in -window..=window {
                        let mut a = Mat::zeros(d, d);
                        for i in 0..d {
                            a[(i, i)] = diag_at(n, i);
                        }
                        let mut pert = Mat::zeros(d, d);
                        for i in 0..d {
                            for j in 0..d {
                                pert[(i, j)] = T::of(delta * rng.gen_range(-1.0..1.0));
                            }
                        }
                        slices.push(a.matmul(&Mat::identity(d).add(&pert)));
                    }
                    CocycleSpec::from_matrices(window, slices)
                }
            }
        }
    }
}

fn random_perturbed_slices<T: Scalar>(
    base: &[T],
    delta: f64,
    window: i64,
    seed: u64,
) -> Result<Vec<Mat<T>>> {
    let d = base.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity((2 * window + 1) as usize);
    for _ in -window..=window {
        let mut pert = Mat::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                pert[(i, j)] = T::of(delta * rng.gen_range(-1.0..1.0));
            }
        }
        let a = Mat::diag(base).matmul(&Mat::identity(d).add(&pert));
        out.push(a);
    }
    Ok(out)
}

/// Build a cocycle from a named family with JSON-style parameters.
pub fn builtin_family<T: Scalar>(
    spec: &FamilySpec,
    window: i64,
    seed: u64,
) -> Result<CocycleSpec<T>> {
    spec.build(window, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn autonomous(diag: &[f64], window: i64) -> CocycleSpec<f64> {
        FamilySpec::Autonomous {
            matrix: diag
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let mut row = vec![0.0; diag.len()];
                    row[i] = x;
                    row
                })
                .collect(),
        }
        .build(window, 0)
        .unwrap()
    }

    #[test]
    fn identity_at_equal_times() {
        let spec = autonomous(&[2.0, 1.0, 0.5], 8);
        let a = spec.eval(3, 3).unwrap();
        assert!(a.sub(&Mat::identity(3)).max_abs() < 1e-15);
    }

    #[test]
    fn autonomous_matrix_power() {
        let spec = autonomous(&[2.0, 1.0, 0.5], 8);
        let a = spec.eval(3, 0).unwrap();
        assert!((a[(0, 0)] - 8.0).abs() < 1e-12);
        assert!((a[(1, 1)] - 1.0).abs() < 1e-12);
        assert!((a[(2, 2)] - 0.125).abs() < 1e-12);
    }

    #[test]
    fn scalar_step_product() {
        let spec = FamilySpec::Step {
            left: 2.0,
            right: 0.5,
        }
        .build::<f64>(8, 0)
        .unwrap();
        // a_1 a_0 a_{-1} = 0.5 * 0.5 * 2 = 0.5
        let a = spec.eval(2, -1).unwrap();
        assert!((a[(0, 0)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn cocycle_identity_and_inversion() {
        let spec = FamilySpec::RandomBounded {
            diag: vec![0.5, 1.0, 2.0],
            delta: 0.05,
        }
        .build::<f64>(8, 42)
        .unwrap();
        let scale = spec.eval(6, -6).unwrap().spectral_norm();
        for (m, k, n) in [(5, 2, -3), (-4, 0, 6), (3, -2, 1)] {
            let lhs = spec
                .eval(m, k)
                .unwrap()
                .matmul(&spec.eval(k, n).unwrap());
            let rhs = spec.eval(m, n).unwrap();
            assert!(lhs.sub(&rhs).spectral_norm() <= 1e-8 * scale.max(1.0));
        }
        let fwd = spec.eval(5, -5).unwrap();
        let bwd = spec.eval(-5, 5).unwrap();
        let id = fwd.matmul(&bwd);
        assert!(id.sub(&Mat::identity(3)).spectral_norm() < 1e-8);
    }

    #[test]
    fn out_of_window_rejected() {
        let spec = autonomous(&[2.0], 4);
        assert!(matches!(
            spec.eval(5, 0),
            Err(Error::OutOfWindow { index: 5, .. })
        ));
    }

    #[test]
    fn singular_family_rejected() {
        let err = FamilySpec::Autonomous {
            matrix: vec![vec![1.0, 0.0], vec![0.0, 0.0]],
        }
        .build::<f64>(4, 0);
        assert!(err.is_err());
    }

    fn coordinate_trichotomy(
        spec: &CocycleSpec<f64>,
        rates: TrichotomyRates<f64>,
        k: f64,
    ) -> TrichotomyData<f64> {
        let w = spec.window();
        let n = (2 * w + 1) as usize;
        let ps = Mat::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ]);
        let pc = Mat::from_rows(&[
            vec![0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ]);
        let pu = Mat::from_rows(&[
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        TrichotomyData::new(
            spec,
            (-w, w),
            vec![ps; n],
            vec![pc; n],
            vec![pu; n],
            k,
            rates,
        )
        .unwrap()
    }

    #[test]
    fn trichotomy_diagonal_passes_with_k_one() {
        let spec = autonomous(&[0.5, 1.0, 2.0], 8);
        let rates = TrichotomyRates {
            mu_minus: 0.5,
            mu_plus: 0.5,
            lam_minus: 1.0,
            lam_plus: 1.0,
            rho_minus: 2.0,
            rho_plus: 2.0,
        };
        let data = coordinate_trichotomy(&spec, rates, 1.0);
        let report = verify_trichotomy(&spec, &data, 1e-9).unwrap();
        assert!(report.pass, "{:?}", report);
        assert!((report.k_obs - 1.0).abs() < 1e-9);
    }

    #[test]
    fn trichotomy_too_tight_rate_fails_named() {
        let spec = autonomous(&[0.5, 1.0, 2.0], 8);
        let rates = TrichotomyRates {
            mu_minus: 0.4,
            mu_plus: 0.4, // claims faster contraction than actual 0.5
            lam_minus: 1.0,
            lam_plus: 1.0,
            rho_minus: 2.0,
            rho_plus: 2.0,
        };
        let data = coordinate_trichotomy(&spec, rates, 1.0);
        let report = verify_trichotomy(&spec, &data, 1e-9).unwrap();
        assert!(!report.pass);
        assert_eq!(report.failed_ids(), vec!["stable-forward"]);
    }

    #[test]
    fn random_bounded_deterministic_under_seed() {
        let a = FamilySpec::RandomBounded {
            diag: vec![0.5, 2.0],
            delta: 0.01,
        }
        .build::<f64>(6, 7)
        .unwrap();
        let b = FamilySpec::RandomBounded {
            diag: vec![0.5, 2.0],
            delta: 0.01,
        }
        .build::<f64>(6, 7)
        .unwrap();
        for n in -6..=6 {
            assert_eq!(a.mat(n).unwrap(), b.mat(n).unwrap());
        }
    }
}
