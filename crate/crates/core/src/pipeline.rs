//! The full reduction pipeline: straighten the center manifold, eliminate
//! the center coupling orders 1..N0 and the hyperbolic coupling orders
//! 2..N0, compose the transforms, extract the normal form and measure the
//! conjugacy residuals. Also the polynomial Taylor splitting and the
//! homotopy-series conjugacy verifier.

use crate::cocycle::{NonlinearSystem, TrichotomyData};
use crate::error::{Error, Result};
use crate::homological::{
    a_su_map_jet, solve_homological_center, solve_homological_hyperbolic, w_map_jet,
};
use crate::jets::{AxisGroup, JetPoly, SpaceSplit, TimeJetSeq};
use crate::linalg::Mat;
use crate::manifold::{center_manifold_jets, straighten, CenterManifoldJets};
use crate::scalar::Scalar;
use crate::spectrum::SpectrumResult;
use serde::Serialize;

/// Which stage produced a transform sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Provenance {
    Straighten,
    CenterOrder(u32),
    HyperbolicOrder(u32),
    Composed,
}

/// A sequence of near-identity polynomial coordinate changes with
/// truncated inverses.
#[derive(Debug, Clone)]
pub struct TransformSeq<T> {
    pub maps: TimeJetSeq<T>,
    pub invs: TimeJetSeq<T>,
    pub band: (i64, i64),
    pub provenance: Provenance,
}

impl<T: Scalar> TransformSeq<T> {
    /// Check the structural invariants: zero constant term, identity
    /// linear part (up to the hyperbolic->center coupling block that the
    /// first center stage carries), and inverses composing to the
    /// identity within 1e-9 up to the truncation order.
    pub fn validate(&self, split: &SpaceSplit) -> Result<()> {
        let ds = split.ds();
        let dc = split.dc;
        let tol = T::of(1e-9);
        for n in self.band.0..=self.band.1 {
            let map = self.maps.get(n)?;
            let inv = self.invs.get(n)?;
            let cst = map.constant_part();
            if cst.iter().any(|&c| c != T::zero()) {
                return Err(Error::Invariant(format!("transform at n={n} moves 0")));
            }
            let lin = map.linear_part();
            let d = split.dim();
            for i in 0..d {
                for j in 0..d {
                    let expect = if i == j { T::one() } else { T::zero() };
                    let coupling_block =
                        i >= ds && i < ds + dc && (j < ds || j >= ds + dc);
                    if !coupling_block && (lin[(i, j)] - expect).abs() > tol {
                        return Err(Error::Invariant(format!(
                            "transform linear part at n={n} deviates at ({i},{j})"
                        )));
                    }
                }
            }
            let comp = map.compose_map(inv, map.max_order())?;
            let id = JetPoly::identity(split.clone(), map.max_order());
            if comp.sub(&id).coeff_norm() > tol {
                return Err(Error::Invariant(format!(
                    "transform inverse at n={n} defective: {:.3e}",
                    comp.sub(&id).coeff_norm().as_f64()
                )));
            }
        }
        Ok(())
    }
}

/// Conjugate the system by the given transform sequence:
/// G_n = H_{n+1} o F_n o H_n^{-1}, truncated at the system's jet order.
fn conjugate<T: Scalar>(
    system: &NonlinearSystem<T>,
    transform: &TransformSeq<T>,
) -> Result<NonlinearSystem<T>> {
    let order = system.max_order();
    let split = system.split.clone();
    let window = system.linear.window();
    let band = (
        system.band().0.max(transform.band.0),
        system.band().1.min(transform.band.1 - 1),
    );
    let zero = JetPoly::zero(split.clone(), split.clone(), order);
    let mut new_f: Vec<JetPoly<T>> = Vec::with_capacity((2 * window + 1) as usize);
    for n in -window..=window {
        if n < band.0 || n > band.1 {
            new_f.push(zero.clone());
            continue;
        }
        let fg = system
            .full_map(n)?
            .compose_map(transform.invs.get(n)?, order)?;
        let conj = transform.maps.get(n + 1)?.compose_map(&fg, order)?;
        let lin = JetPoly::linear(split.clone(), split.clone(), system.linear.mat(n)?, order);
        new_f.push(conj.sub(&lin));
    }
    NonlinearSystem::with_band(
        system.linear.clone(),
        split,
        TimeJetSeq::from_fn(window, |n| new_f[(n + window) as usize].clone()),
        band,
        system.smallness,
        system.deriv_bound,
    )
}

/// Assert that the selected coefficients are tiny, then remove them
/// exactly. Returns the largest removed magnitude.
fn assert_and_clear<T: Scalar>(
    system: &mut NonlinearSystem<T>,
    stage: &str,
    keep_tol: T,
    pred: impl Fn(&crate::jets::JetKey) -> bool + Copy,
    group: AxisGroup,
) -> Result<f64> {
    let band = system.band();
    let mut worst = T::zero();
    let window = system.linear.window();
    let mut cleaned: Vec<JetPoly<T>> = Vec::new();
    for n in -window..=window {
        let f = system.nonlinearity.get(n)?;
        if n < band.0 || n > band.1 {
            cleaned.push(f.clone());
            continue;
        }
        let part = f.filter(|k| pred(k)).project_target(group)?;
        let norm = part.coeff_norm();
        if norm > keep_tol {
            return Err(Error::OrderBookkeeping {
                stage: stage.into(),
                detail: format!(
                    "coefficient {:.3e} at n={n} exceeds {:.3e}",
                    norm.as_f64(),
                    keep_tol.as_f64()
                ),
            });
        }
        worst = worst.max(norm);
        cleaned.push(f.sub(&part));
    }
    system.nonlinearity = TimeJetSeq::from_fn(window, |n| cleaned[(n + window) as usize].clone());
    Ok(worst.as_f64())
}

/// Eliminate the v-order-p center coupling: solve the homological
/// equation, apply H_n = Id + (h_n, 0), and clear the cancelled
/// coefficients after checking they dropped below tol.
pub fn eliminate_center_order<T: Scalar>(
    system: &NonlinearSystem<T>,
    spectrum: &SpectrumResult<T>,
    p: u32,
    j_max: u32,
    tol: T,
) -> Result<(NonlinearSystem<T>, TransformSeq<T>)> {
    let order = system.max_order();
    let j_solve = j_max.min(order.saturating_sub(p));
    // Orders 1..p-1 must already be gone.
    for n in system.band().0..=system.band().1 {
        let f = system.nonlinearity.get(n)?;
        for q in 1..p {
            let left = f
                .v_homogeneous(q)
                .project_target(AxisGroup::Center)?
                .coeff_norm();
            if left > T::of(1e-10) {
                return Err(Error::OrderBookkeeping {
                    stage: format!("center-{p}"),
                    detail: format!("v-order {q} center coefficient {:.3e} at n={n}", left.as_f64()),
                });
            }
        }
    }

    let solve = solve_homological_center(system, spectrum, p, j_solve, tol)
        .map_err(|e| e.at_stage(&format!("center-{p}")))?;
    let window = system.linear.window();
    let split = system.split.clone();
    let id = JetPoly::identity(split.clone(), order);
    let band = solve.h.band;
    let maps = TimeJetSeq::from_band(
        window,
        band,
        |n| id.add(&solve.h.jets.get(n).unwrap().resized(order)),
        id.clone(),
    );
    let invs = TimeJetSeq::from_band(
        window,
        band,
        |n| maps.get(n).unwrap().invert(order).unwrap(),
        id.clone(),
    );
    let transform = TransformSeq {
        maps,
        invs,
        band,
        provenance: Provenance::CenterOrder(p),
    };
    let mut new_system = conjugate(system, &transform)?;

    // The targeted coefficients must have collapsed; clear them exactly.
    let keep_tol = tol * T::of(100.0);
    assert_and_clear(
        &mut new_system,
        &format!("center-{p}"),
        keep_tol,
        |k| k.v_degree() == p && k.c_degree() <= j_solve,
        AxisGroup::Center,
    )?;
    // Lower orders must not have been re-introduced.
    for n in new_system.band().0..=new_system.band().1 {
        let f = new_system.nonlinearity.get(n)?;
        for q in 1..p {
            let left = f
                .v_homogeneous(q)
                .project_target(AxisGroup::Center)?
                .coeff_norm();
            if left > T::of(1e-10) {
                return Err(Error::OrderBookkeeping {
                    stage: format!("center-{p}"),
                    detail: format!("stage re-introduced v-order {q} at n={n}"),
                });
            }
        }
    }
    Ok((new_system, transform))
}

/// Eliminate the v-order-p nonlinear hyperbolic coupling with
/// H_n = Id + (0, h_n).
pub fn eliminate_hyperbolic_order<T: Scalar>(
    system: &NonlinearSystem<T>,
    spectrum: &SpectrumResult<T>,
    p: u32,
    j_max: u32,
    tol: T,
) -> Result<(NonlinearSystem<T>, TransformSeq<T>)> {
    let order = system.max_order();
    let j_solve = j_max.min(order.saturating_sub(p));
    for n in system.band().0..=system.band().1 {
        let f = system.nonlinearity.get(n)?;
        for q in 2..p {
            let left = f
                .v_homogeneous(q)
                .project_target(AxisGroup::Hyperbolic)?
                .coeff_norm();
            if left > T::of(1e-10) {
                return Err(Error::OrderBookkeeping {
                    stage: format!("hyperbolic-{p}"),
                    detail: format!(
                        "v-order {q} hyperbolic coefficient {:.3e} at n={n}",
                        left.as_f64()
                    ),
                });
            }
        }
    }

    let solve = solve_homological_hyperbolic(system, spectrum, p, j_solve, tol)
        .map_err(|e| e.at_stage(&format!("hyperbolic-{p}")))?;
    let window = system.linear.window();
    let split = system.split.clone();
    let order = system.max_order();
    let id = JetPoly::identity(split.clone(), order);
    let band = solve.band;
    let maps = TimeJetSeq::from_band(
        window,
        band,
        |n| id.add(&solve.jets.get(n).unwrap().resized(order)),
        id.clone(),
    );
    let invs = TimeJetSeq::from_band(
        window,
        band,
        |n| maps.get(n).unwrap().invert(order).unwrap(),
        id.clone(),
    );
    let transform = TransformSeq {
        maps,
        invs,
        band,
        provenance: Provenance::HyperbolicOrder(p),
    };
    let mut new_system = conjugate(system, &transform)?;
    let keep_tol = tol * T::of(100.0);
    assert_and_clear(
        &mut new_system,
        &format!("hyperbolic-{p}"),
        keep_tol,
        |k| k.v_degree() == p && k.c_degree() <= j_solve,
        AxisGroup::Hyperbolic,
    )?;
    Ok((new_system, transform))
}

/// The Takens normal form data: center dynamics and the center-dependent
/// linear hyperbolic transports.
#[derive(Debug, Clone)]
pub struct TakensForm<T> {
    /// w_n(x_c) = A_n^c x_c + f_n^c(x_c) as full-target jets.
    pub w: TimeJetSeq<T>,
    /// A_n^s(x_c) x_s as jets (linear in v, stable rows).
    pub a_s: TimeJetSeq<T>,
    /// A_n^u(x_c) x_u as jets (linear in v, unstable rows).
    pub a_u: TimeJetSeq<T>,
    pub order: u32,
    pub band: (i64, i64),
}

/// Residuals of the conjugacy equation sampled at shrinking radii.
#[derive(Debug, Clone, Serialize)]
pub struct ConjugacyReport {
    pub radii: Vec<f64>,
    pub max_residuals: Vec<f64>,
    /// Fitted log-log slope of residual against radius.
    pub slope: f64,
    pub samples_per_radius: usize,
    pub band: (i64, i64),
}

/// Everything the full reduction produces.
pub struct TakensOutcome<T> {
    pub form: TakensForm<T>,
    pub transform: TransformSeq<T>,
    pub report: ConjugacyReport,
    pub normal_system: NonlinearSystem<T>,
    pub stage_transforms: Vec<TransformSeq<T>>,
}

/// Default sampling radii of the conjugacy report.
pub const REPORT_RADII: [f64; 5] = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1];

fn fit_slope(radii: &[f64], residuals: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(residuals)
        .filter(|(_, &res)| res > 0.0)
        .map(|(&r, &res)| (r.ln(), res.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::INFINITY;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Deterministic unit directions used for residual sampling.
fn sample_directions<T: Scalar>(d: usize) -> Vec<Vec<T>> {
    let mut dirs: Vec<Vec<T>> = Vec::new();
    for k in 0..d {
        let mut v = vec![T::zero(); d];
        v[k] = T::one();
        dirs.push(v);
    }
    let norm = T::of((d as f64).sqrt());
    dirs.push((0..d).map(|_| T::one() / norm).collect());
    dirs.push(
        (0..d)
            .map(|k| if k % 2 == 0 { T::one() } else { -T::one() } / norm)
            .collect(),
    );
    if d >= 2 {
        let mut v = vec![T::zero(); d];
        v[0] = T::of(0.6);
        v[1] = T::of(-0.8);
        dirs.push(v);
    }
    dirs
}

/// Run the full reduction: straighten, eliminate center orders 1..N0 and
/// hyperbolic orders 2..N0, compose the stage transforms and measure the
/// conjugacy residual against the produced normal form.
pub fn takens_normal_form<T: Scalar>(
    system: &NonlinearSystem<T>,
    spectrum: &SpectrumResult<T>,
    data: &TrichotomyData<T>,
    n0: u32,
    j_max: u32,
    tol: T,
) -> Result<TakensOutcome<T>> {
    let order = system.max_order();
    if order < n0 + 1 {
        return Err(Error::MissingJetOrders {
            have: order,
            need: n0 + 1,
        });
    }
    let split = system.split.clone();
    let window = system.linear.window();

    // Straightening stage: solve to the full jet order so every
    // representable pure-center hyperbolic coefficient is removed.
    let cm: CenterManifoldJets<T> = center_manifold_jets(system, data, order, tol)
        .map_err(|e| e.at_stage("straighten"))?;
    let id = JetPoly::identity(split.clone(), order);
    let straighten_band = (cm.band.0, cm.band.1 - 1);
    let straighten_tf = TransformSeq {
        maps: TimeJetSeq::from_band(
            window,
            cm.band,
            |n| id.sub(&cm.phi.get(n).unwrap().resized(order)),
            id.clone(),
        ),
        invs: TimeJetSeq::from_band(
            window,
            cm.band,
            |n| id.add(&cm.phi.get(n).unwrap().resized(order)),
            id.clone(),
        ),
        band: cm.band,
        provenance: Provenance::Straighten,
    };
    let mut current = straighten(system, &cm).map_err(|e| e.at_stage("straighten"))?;
    let _ = straighten_band;

    let mut stage_transforms: Vec<TransformSeq<T>> = vec![straighten_tf];
    for p in 1..=n0 {
        let (next, tf) = eliminate_center_order(&current, spectrum, p, j_max, tol)?;
        current = next;
        stage_transforms.push(tf);
    }
    for p in 2..=n0 {
        let (next, tf) = eliminate_hyperbolic_order(&current, spectrum, p, j_max, tol)?;
        current = next;
        stage_transforms.push(tf);
    }

    // Compose Psi_n = H_last o ... o H_1 and its truncated inverse.
    let final_band = current.band();
    let compose_band = (final_band.0, final_band.1 + 1);
    let psi = TimeJetSeq::from_band(
        window,
        compose_band,
        |n| {
            let mut acc = stage_transforms[0].maps.get(n).unwrap().clone();
            for tf in &stage_transforms[1..] {
                acc = tf.maps.get(n).unwrap().compose_map(&acc, order).unwrap();
            }
            acc
        },
        id.clone(),
    );
    let psi_inv = TimeJetSeq::from_band(
        window,
        compose_band,
        |n| {
            let mut acc = stage_transforms.last().unwrap().invs.get(n).unwrap().clone();
            for tf in stage_transforms[..stage_transforms.len() - 1].iter().rev() {
                acc = tf.invs.get(n).unwrap().compose_map(&acc, order).unwrap();
            }
            acc
        },
        id.clone(),
    );
    let transform = TransformSeq {
        maps: psi,
        invs: psi_inv,
        band: compose_band,
        provenance: Provenance::Composed,
    };
    transform.validate(&split)?;

    // Extract the normal-form data and assert its structure.
    let zero = JetPoly::zero(split.clone(), split.clone(), order);
    let wseq = TimeJetSeq::from_band(
        window,
        final_band,
        |n| w_map_jet(&current, n).unwrap(),
        zero.clone(),
    );
    let aseq_full = TimeJetSeq::from_band(
        window,
        final_band,
        |n| a_su_map_jet(&current, n).unwrap(),
        zero.clone(),
    );
    let a_s = aseq_full.map(|_, j| j.project_target(AxisGroup::Stable).unwrap());
    let a_u = aseq_full.map(|_, j| j.project_target(AxisGroup::Unstable).unwrap());
    let structural_tol = T::of(1e-9);
    for n in final_band.0..=final_band.1 {
        let f = current.nonlinearity.get(n)?;
        let center_v = f
            .filter(|k| k.v_degree() >= 1 && k.v_degree() <= n0)
            .project_target(AxisGroup::Center)?
            .coeff_norm();
        let hyp_nonlin = f
            .filter(|k| k.v_degree() >= 2 && k.v_degree() <= n0)
            .project_target(AxisGroup::Hyperbolic)?
            .coeff_norm();
        if center_v > structural_tol || hyp_nonlin > structural_tol {
            return Err(Error::OrderBookkeeping {
                stage: "normal-form".into(),
                detail: format!(
                    "structure violated at n={n}: center {:.3e}, hyperbolic {:.3e}",
                    center_v.as_f64(),
                    hyp_nonlin.as_f64()
                ),
            });
        }
    }
    let form = TakensForm {
        w: wseq,
        a_s,
        a_u,
        order: n0,
        band: final_band,
    };

    // Conjugacy residual sampling.
    let dirs = sample_directions::<T>(split.dim());
    let sample_ns: Vec<i64> = {
        let span = final_band.1 - final_band.0;
        let count = 9i64.min(span);
        (0..=count)
            .map(|k| final_band.0 + k * span / count.max(1))
            .filter(|&n| n < final_band.1)
            .collect()
    };
    let mut max_residuals = Vec::new();
    for &r in REPORT_RADII.iter() {
        let radius = T::of(r);
        let mut worst = T::zero();
        for &n in &sample_ns {
            let f = system.full_map(n)?;
            let g = current.full_map(n)?;
            let psi_n = transform.maps.get(n)?;
            let psi_n1 = transform.maps.get(n + 1)?;
            for dir in &dirs {
                let x: Vec<T> = dir.iter().map(|&v| v * radius).collect();
                let fx = f.evaluate(&x);
                let lhs = psi_n1.evaluate(&fx);
                let px = psi_n.evaluate(&x);
                let rhs = g.evaluate(&px);
                let res: T = lhs
                    .iter()
                    .zip(&rhs)
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .sum::<T>()
                    .sqrt();
                worst = worst.max(res);
            }
        }
        max_residuals.push(worst.as_f64());
    }
    let slope = fit_slope(&REPORT_RADII, &max_residuals);
    let report = ConjugacyReport {
        radii: REPORT_RADII.to_vec(),
        max_residuals,
        slope,
        samples_per_radius: sample_ns.len() * dirs.len(),
        band: final_band,
    };

    Ok(TakensOutcome {
        form,
        transform,
        report,
        normal_system: current,
        stage_transforms,
    })
}

/// Split a polynomial by the degree in the unstable variables: terms with
/// x_u-degree <= floor(N/2) go to the first part. The sum reproduces the
/// input exactly.
pub fn taylor_split<T: Scalar>(r: &JetPoly<T>, n: u32) -> (JetPoly<T>, JetPoly<T>) {
    let threshold = n / 2;
    let ds = r.src().ds();
    let u_degree = |k: &crate::jets::JetKey| -> u32 { k.alpha[ds..].iter().sum() };
    let r1 = r.filter(|k| u_degree(k) <= threshold);
    let r2 = r.filter(|k| u_degree(k) > threshold);
    (r1, r2)
}

/// Result of the homotopy-series evaluation at one state.
#[derive(Debug, Clone, Serialize)]
pub struct HomotopyEval {
    pub h: Vec<f64>,
    pub terms_used: usize,
    /// Residual of the homotopy equation at (x, tau).
    pub residual: f64,
}

fn jet_jacobian<T: Scalar>(derivs: &[JetPoly<T>], x: &[T], d: usize) -> Mat<T> {
    let mut jac = Mat::zeros(d, d);
    for (j, dj) in derivs.iter().enumerate() {
        let col = dj.evaluate(x);
        for i in 0..d {
            jac[(i, j)] = col[i];
        }
    }
    jac
}

/// Evaluate the homotopy series
/// h(x, tau) = -sum_{n>=1} D(G_tau^{-n})(G_tau^n x) R1(G_tau^{n-1} x)
/// by accumulating inverse Jacobians along the forward orbit, and return
/// the residual of the homotopy equation at (x, tau).
pub fn homotopy_series<T: Scalar>(
    g0: &JetPoly<T>,
    r1: &JetPoly<T>,
    x: &[T],
    tau: T,
    tol: T,
) -> Result<HomotopyEval> {
    let d = g0.src().dim();
    // Flatness: every term of r1 must carry stable degree >= 2 so the
    // series tail is geometric.
    let ds = g0.src().ds();
    for (key, _) in r1.terms() {
        let s_deg: u32 = key.alpha[..ds].iter().sum();
        if s_deg < 2 {
            return Err(Error::BadParams(format!(
                "perturbation term {key} has stable degree {s_deg} < 2"
            )));
        }
    }
    let g_tau = g0.add(&r1.scale(tau));
    let derivs: Vec<JetPoly<T>> = (0..d).map(|v| g_tau.partial_derivative(v)).collect();

    let eval_h = |x0: &[T]| -> Result<(Vec<T>, usize)> {
        let mut z = x0.to_vec();
        let mut p = Mat::identity(d);
        let mut sum = vec![T::zero(); d];
        let mut norms: Vec<T> = Vec::new();
        for k in 1..=400usize {
            let jac = jet_jacobian(&derivs, &z, d);
            let jac_inv = jac.inverse_guarded(T::of(1e12), k as i64)?;
            p = p.matmul(&jac_inv);
            let r1z = r1.evaluate(&z);
            let term = p.matvec(&r1z);
            for (s, t) in sum.iter_mut().zip(&term) {
                *s = *s - *t;
            }
            let tnorm = term.iter().map(|&v| v * v).sum::<T>().sqrt();
            if !tnorm.is_finite() {
                return Err(Error::SeriesDiverged { terms: k });
            }
            norms.push(tnorm);
            if tnorm < tol {
                return Ok((sum, k));
            }
            if k > 10 && tnorm > norms[k - 11] {
                return Err(Error::SeriesDiverged { terms: k });
            }
            z = g_tau.evaluate(&z);
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::SeriesDiverged { terms: k });
            }
        }
        Ok((sum, 400))
    };

    let (h, terms_used) = eval_h(x)?;
    // Residual: DG_tau(x) h(x) - h(G_tau(x)) + R1(x).
    let gx = g_tau.evaluate(x);
    let (h_gx, _) = eval_h(&gx)?;
    let jac = jet_jacobian(&derivs, x, d);
    let lhs = jac.matvec(&h);
    let r1x = r1.evaluate(x);
    let mut res = T::zero();
    for i in 0..d {
        let v = lhs[i] - h_gx[i] + r1x[i];
        res = res + v * v;
    }
    Ok(HomotopyEval {
        h: h.iter().map(|v| v.as_f64()).collect(),
        terms_used,
        residual: res.sqrt().as_f64(),
    })
}

/// Integrate the tau-flow of (h, 1) from tau = 0 to 1 with 64 classical
/// 4-stage steps, giving the conjugacy H between G_0 and G_1; returns
/// H(x) and the defect || H(G_0 x) - G_1(H x) ||.
pub fn homotopy_flow_conjugacy<T: Scalar>(
    g0: &JetPoly<T>,
    r1: &JetPoly<T>,
    x: &[T],
    tol: T,
) -> Result<(Vec<T>, f64)> {
    let d = g0.src().dim();
    let steps = 64usize;
    let dt = T::one() / T::of(steps as f64);
    let flow = |start: &[T]| -> Result<Vec<T>> {
        let mut y = start.to_vec();
        let mut tau = T::zero();
        let f = |y: &[T], tau: T| -> Result<Vec<T>> {
            Ok(homotopy_series(g0, r1, y, tau, tol)?
                .h
                .iter()
                .map(|&v| T::of(v))
                .collect())
        };
        for _ in 0..steps {
            let k1 = f(&y, tau)?;
            let y2: Vec<T> = y
                .iter()
                .zip(&k1)
                .map(|(&a, &b)| a + dt * b / T::of(2.0))
                .collect();
            let k2 = f(&y2, tau + dt / T::of(2.0))?;
            let y3: Vec<T> = y
                .iter()
                .zip(&k2)
                .map(|(&a, &b)| a + dt * b / T::of(2.0))
                .collect();
            let k3 = f(&y3, tau + dt / T::of(2.0))?;
            let y4: Vec<T> = y.iter().zip(&k3).map(|(&a, &b)| a + dt * b).collect();
            let k4 = f(&y4, tau + dt)?;
            for i in 0..d {
                y[i] = y[i]
                    + dt / T::of(6.0)
                        * (k1[i] + T::of(2.0) * k2[i] + T::of(2.0) * k3[i] + k4[i]);
            }
            tau = tau + dt;
        }
        Ok(y)
    };
    let hx = flow(x)?;
    let g0x = g0.evaluate(x);
    let h_g0x = flow(&g0x)?;
    let g1 = g0.add(r1);
    let g1_hx = g1.evaluate(&hx);
    let mut defect = T::zero();
    for i in 0..d {
        let v = h_g0x[i] - g1_hx[i];
        defect = defect + v * v;
    }
    Ok((hx, defect.sqrt().as_f64()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::FamilySpec;
    use crate::spectrum::Interval;

    fn point_spectrum(points: &[f64]) -> SpectrumResult<f64> {
        SpectrumResult::from_intervals(
            points.iter().map(|&x| Interval::point(x)).collect(),
            Vec::new(),
        )
        .unwrap()
    }

    #[test]
    fn eliminate_center_linear_coupling_exactly() {
        // F(x_c, v) = (x_c + c v, 0.5 v): h = 2c v, transformed (x_c, 0.5v).
        let c = 0.7;
        let window = 48;
        let split = SpaceSplit::elementary(1, 1, 0);
        let linear = FamilySpec::Autonomous {
            matrix: vec![vec![0.5, 0.0], vec![0.0, 1.0]],
        }
        .build(window, 0)
        .unwrap();
        let mut f = JetPoly::zero(split.clone(), split.clone(), 4);
        f.add_to(&[1], &[0], 1, c);
        let sys = crate::cocycle::NonlinearSystem::new(
            linear,
            split,
            TimeJetSeq::constant(window, f),
            c,
            1.0,
        )
        .unwrap();
        let s = point_spectrum(&[0.5, 1.0]);
        let (new_sys, tf) = eliminate_center_order(&sys, &s, 1, 3, 1e-11).unwrap();
        // Transformed system is exactly linear.
        for n in new_sys.band().0..=new_sys.band().1 {
            assert!(
                new_sys.nonlinearity.get(n).unwrap().coeff_norm() < 1e-11,
                "residual nonlinearity at n={n}"
            );
        }
        let h = tf.maps.get(0).unwrap().get(&[1], &[0]).unwrap();
        assert!((h[1] - 2.0 * c).abs() < 1e-11);
    }

    #[test]
    fn eliminate_zero_forcing_is_identity() {
        let window = 32;
        let split = SpaceSplit::elementary(1, 1, 0);
        let linear = FamilySpec::Autonomous {
            matrix: vec![vec![0.5, 0.0], vec![0.0, 1.0]],
        }
        .build(window, 0)
        .unwrap();
        let f = JetPoly::zero(split.clone(), split.clone(), 4);
        let sys = crate::cocycle::NonlinearSystem::new(
            linear,
            split.clone(),
            TimeJetSeq::constant(window, f),
            0.0,
            1.0,
        )
        .unwrap();
        let s = point_spectrum(&[0.5, 1.0]);
        let (new_sys, tf) = eliminate_center_order(&sys, &s, 1, 3, 1e-12).unwrap();
        let id = JetPoly::identity(split, 4);
        for n in tf.band.0..=tf.band.1 {
            assert!(tf.maps.get(n).unwrap().sub(&id).coeff_norm() < 1e-14);
        }
        for n in new_sys.band().0..=new_sys.band().1 {
            assert!(new_sys.nonlinearity.get(n).unwrap().is_zero());
        }
    }

    #[test]
    fn eliminate_hyperbolic_single_term() {
        // (x_c, 0.5 x_s + x_u^2, 2 x_u): one coefficient solve at p = 2.
        let window = 64;
        let split = SpaceSplit::elementary(1, 1, 1);
        let linear = FamilySpec::Autonomous {
            matrix: vec![
                vec![0.5, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 2.0],
            ],
        }
        .build(window, 0)
        .unwrap();
        let mut f = JetPoly::zero(split.clone(), split.clone(), 4);
        f.add_to(&[0, 2], &[0], 0, 1.0);
        let sys = crate::cocycle::NonlinearSystem::new(
            linear,
            split,
            TimeJetSeq::constant(window, f),
            1.0,
            1.0,
        )
        .unwrap();
        let s = point_spectrum(&[0.5, 1.0, 2.0]);
        let (new_sys, _tf) = eliminate_hyperbolic_order(&sys, &s, 2, 3, 1e-10).unwrap();
        for n in new_sys.band().0..=new_sys.band().1 {
            let left = new_sys
                .nonlinearity
                .get(n)
                .unwrap()
                .v_homogeneous(2)
                .project_target(AxisGroup::Hyperbolic)
                .unwrap()
                .coeff_norm();
            assert!(left < 1e-10, "order-2 left {left:.3e} at n={n}");
        }
    }

    #[test]
    fn taylor_split_examples() {
        let split = SpaceSplit::elementary(1, 1, 1);
        // R = x_s x_u: stays in R1 for N >= 2.
        let mut r = JetPoly::<f64>::zero(split.clone(), SpaceSplit::scalar(), 4);
        r.add_to(&[1, 1], &[0], 0, 1.0);
        let (r1, r2) = taylor_split(&r, 2);
        assert_eq!(r1.n_terms(), 1);
        assert!(r2.is_zero());
        // R = x_u^3 with floor(N/2) = 2 goes to R2.
        let mut r = JetPoly::<f64>::zero(split.clone(), SpaceSplit::scalar(), 4);
        r.add_to(&[0, 3], &[0], 0, 1.0);
        let (r1, r2) = taylor_split(&r, 4);
        assert!(r1.is_zero());
        assert_eq!(r2.n_terms(), 1);
        // R = x_s^2 x_u + x_u^3, N = 4.
        let mut r = JetPoly::<f64>::zero(split.clone(), SpaceSplit::scalar(), 4);
        r.add_to(&[2, 1], &[0], 0, 1.0);
        r.add_to(&[0, 3], &[0], 0, 1.0);
        let (r1, r2) = taylor_split(&r, 4);
        assert_eq!(r1.get(&[2, 1], &[0]).unwrap()[0], 1.0);
        assert!(r1.get(&[0, 3], &[0]).is_none());
        assert_eq!(r2.get(&[0, 3], &[0]).unwrap()[0], 1.0);
        // Exact reassembly.
        assert!(r1.add(&r2).sub(&r).coeff_norm() < 1e-15);
    }

    #[test]
    fn homotopy_scalar_example() {
        // G0(x) = 0.5 x, R1 = x^2: h(x, 0) = -4 x^2 exactly.
        let split = SpaceSplit::elementary(1, 0, 0);
        let mut g0 = JetPoly::<f64>::zero(split.clone(), split.clone(), 3);
        g0.add_to(&[1], &[], 0, 0.5);
        let mut r1 = JetPoly::<f64>::zero(split.clone(), split.clone(), 3);
        r1.add_to(&[2], &[], 0, 1.0);
        let eval = homotopy_series(&g0, &r1, &[0.01], 0.0, 1e-14).unwrap();
        let coeff = eval.h[0] / (0.01f64 * 0.01);
        assert!((coeff + 4.0).abs() < 1e-6, "leading coefficient {coeff}");
        assert!(eval.residual < 1e-12);

        // Residual stays small through the homotopy on |x| <= 0.05.
        for &x in &[0.05, -0.05, 0.02] {
            for &tau in &[0.0, 0.5, 1.0] {
                let e = homotopy_series(&g0, &r1, &[x], tau, 1e-12).unwrap();
                assert!(e.residual < 1e-6, "residual {} at x={x} tau={tau}", e.residual);
            }
        }
    }

    #[test]
    fn homotopy_zero_perturbation() {
        let split = SpaceSplit::elementary(1, 0, 0);
        let mut g0 = JetPoly::<f64>::zero(split.clone(), split.clone(), 3);
        g0.add_to(&[1], &[], 0, 0.5);
        let r1 = JetPoly::<f64>::zero(split.clone(), split.clone(), 3);
        let eval = homotopy_series(&g0, &r1, &[0.03], 0.7, 1e-13).unwrap();
        assert!(eval.h[0].abs() < 1e-13);
        let (hx, defect) = homotopy_flow_conjugacy(&g0, &r1, &[0.03], 1e-13).unwrap();
        assert!((hx[0] - 0.03).abs() < 1e-12);
        assert!(defect < 1e-12);
    }

    #[test]
    fn homotopy_flow_conjugacy_scalar() {
        let split = SpaceSplit::elementary(1, 0, 0);
        let mut g0 = JetPoly::<f64>::zero(split.clone(), split.clone(), 3);
        g0.add_to(&[1], &[], 0, 0.5);
        let mut r1 = JetPoly::<f64>::zero(split.clone(), split.clone(), 3);
        r1.add_to(&[2], &[], 0, 1.0);
        let (_hx, defect) = homotopy_flow_conjugacy(&g0, &r1, &[0.02], 1e-12).unwrap();
        assert!(defect < 1e-5, "flow defect {defect}");
    }

    #[test]
    fn divergent_series_detected() {
        // Expanding map with a perturbation that is not flat along the
        // forward orbit's growth: terms must eventually grow.
        let split = SpaceSplit::elementary(1, 0, 0);
        let mut g0 = JetPoly::<f64>::zero(split.clone(), split.clone(), 3);
        g0.add_to(&[1], &[], 0, 2.0);
        let mut r1 = JetPoly::<f64>::zero(split.clone(), split.clone(), 3);
        r1.add_to(&[2], &[], 0, 1.0);
        let res = homotopy_series(&g0, &r1, &[0.4], 1.0, 1e-14);
        assert!(matches!(res, Err(Error::SeriesDiverged { .. })));
    }
}
