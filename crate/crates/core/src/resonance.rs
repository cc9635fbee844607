//! Non-resonance and spectral-gap checking over spectral intervals:
//! graded multi-index enumeration, interval power products in log space,
//! and the two interval-intersection conditions with recorded witnesses
//! and branches.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectrum::{inflate_spectrum, Interval, SpectrumResult};
use serde::Serialize;

/// Guard on the total number of enumerated multi-indices.
pub const ENUMERATION_BUDGET: u128 = 10_000_000;
/// Default inflation applied inside `check_non_resonance`.
pub const DEFAULT_VARSIGMA: f64 = 1e-6;
/// Log-space slack deciding exact endpoint touches under roundoff.
pub const TOUCH_LOG_TOL: f64 = 1e-12;

/// A multi-index over the hyperbolic spectral intervals.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }
}

/// Iterate every q in N_0^r with lo <= |q| <= hi exactly once, in graded
/// order (degree ascending, then lexicographic with the leading entry
/// largest first).
pub fn enumerate_multi_indices(r: usize, lo: u32, hi: u32) -> MultiIndexIter {
    assert!(lo <= hi, "need lo <= hi");
    MultiIndexIter {
        r,
        hi,
        degree: lo,
        current: None,
    }
}

/// Number of multi-indices the enumeration will yield.
pub fn count_multi_indices(r: usize, lo: u32, hi: u32) -> u128 {
    let mut total: u128 = 0;
    for p in lo..=hi {
        total += compositions(p as u128, r as u128);
    }
    total
}

// C(p + r - 1, r - 1): weak compositions of p into r parts.
fn compositions(p: u128, r: u128) -> u128 {
    if r == 0 {
        return u128::from(p == 0);
    }
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for i in 0..(r - 1) {
        num *= p + r - 1 - i;
        den *= i + 1;
    }
    num / den
}

pub struct MultiIndexIter {
    r: usize,
    hi: u32,
    degree: u32,
    current: Option<Vec<u32>>,
}

impl Iterator for MultiIndexIter {
    type Item = MultiIndex;

    fn next(&mut self) -> Option<MultiIndex> {
        loop {
            if self.degree > self.hi {
                return None;
            }
            if self.r == 0 {
                // Only the empty index of degree 0 exists.
                if self.degree == 0 && self.current.is_none() {
                    self.current = Some(vec![]);
                    return Some(MultiIndex(vec![]));
                }
                return None;
            }
            match &mut self.current {
                None => {
                    // First composition of this degree: everything leading.
                    let mut q = vec![0; self.r];
                    q[0] = self.degree;
                    self.current = Some(q.clone());
                    return Some(MultiIndex(q));
                }
                Some(q) => {
                    // Successor in graded lex: shift one unit right from
                    // the last positive entry before the tail, pulling the
                    // tail mass along.
                    let r = self.r;
                    let tail = q[r - 1];
                    match (0..r - 1).rev().find(|&i| q[i] > 0) {
                        None => {
                            // All mass sits in the tail: degree exhausted.
                            self.degree += 1;
                            self.current = None;
                            continue;
                        }
                        Some(i) => {
                            q[i] -= 1;
                            q[i + 1] = tail + 1;
                            for e in q.iter_mut().skip(i + 2) {
                                *e = 0;
                            }
                            return Some(MultiIndex(q.clone()));
                        }
                    }
                }
            }
        }
    }
}

/// Product of interval powers computed in log space:
/// [prod a_i^{q_i} * nu_-^{cp}, prod b_i^{q_i} * nu_+^{cp}].
pub fn interval_power_product<T: Scalar>(
    spectrum: &SpectrumResult<T>,
    q: &MultiIndex,
    center_power: u32,
) -> Interval<T> {
    let center = spectrum.center_or_unit();
    let mut log_lo = T::of(center_power as f64) * center.lo.ln();
    let mut log_hi = T::of(center_power as f64) * center.hi.ln();
    for (iv, &e) in spectrum.hyperbolic.iter().zip(&q.0) {
        if e > 0 {
            let ef = T::of(e as f64);
            log_lo = log_lo + ef * iv.lo.ln();
            log_hi = log_hi + ef * iv.hi.ln();
        }
    }
    Interval {
        lo: log_lo.exp(),
        hi: log_hi.exp(),
    }
}

/// Which side of the target a passing product lies on. Downstream series
/// solvers branch on this.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// prod a_i^{q_i} nu_-^N > target hi.
    Above,
    /// prod b_i^{q_i} nu_+^N < target lo.
    Below,
}

/// The condition family an entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConditionId {
    Nr1,
    Nr2,
}

/// A recorded violation with its witness.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub condition: ConditionId,
    pub index: MultiIndex,
    /// Target interval position: None = center, Some(j) = hyperbolic j.
    pub target: Option<usize>,
    pub product: [f64; 2],
    pub target_interval: [f64; 2],
    /// Log-scale overlap depth.
    pub overlap: f64,
}

/// Branch record for a passing index.
#[derive(Debug, Clone, Serialize)]
pub struct BranchRecord {
    pub condition: ConditionId,
    pub index: MultiIndex,
    pub target: Option<usize>,
    pub branch: Branch,
}

/// Outcome of the non-resonance check at order N.
#[derive(Debug, Clone, Serialize)]
pub struct NonResonanceReport {
    pub order: u32,
    pub varsigma: f64,
    pub nr1_pass: bool,
    pub nr2_pass: bool,
    pub violations: Vec<Violation>,
    pub branches: Vec<BranchRecord>,
}

impl NonResonanceReport {
    pub fn pass(&self) -> bool {
        self.nr1_pass && self.nr2_pass
    }

    /// Branch of a passing (condition, index, target), if recorded.
    pub fn branch_of(
        &self,
        condition: ConditionId,
        index: &MultiIndex,
        target: Option<usize>,
    ) -> Option<Branch> {
        self.branches
            .iter()
            .find(|b| b.condition == condition && &b.index == index && b.target == target)
            .map(|b| b.branch)
    }
}

fn check_target<T: Scalar>(
    condition: ConditionId,
    q: &MultiIndex,
    target: Option<usize>,
    product: Interval<T>,
    target_iv: Interval<T>,
    violations: &mut Vec<Violation>,
    branches: &mut Vec<BranchRecord>,
) -> bool {
    if product.intersects_log_tol(&target_iv, T::of(TOUCH_LOG_TOL)) {
        let overlap = (product.hi.min(target_iv.hi) / product.lo.max(target_iv.lo))
            .ln()
            .as_f64()
            .max(0.0);
        violations.push(Violation {
            condition,
            index: q.clone(),
            target,
            product: [product.lo.as_f64(), product.hi.as_f64()],
            target_interval: [target_iv.lo.as_f64(), target_iv.hi.as_f64()],
            overlap,
        });
        false
    } else {
        let branch = if product.lo > target_iv.hi {
            Branch::Above
        } else {
            Branch::Below
        };
        branches.push(BranchRecord {
            condition,
            index: q.clone(),
            target,
            branch,
        });
        true
    }
}

/// Check both non-resonance conditions at order N after inflating the
/// spectrum by `varsigma`:
///
///   ([a,b]^q * [nu-,nu+]^N) disjoint from [nu-,nu+]  for 1 <= |q| <= N,
///   ([a,b]^t * [nu-,nu+]^N) disjoint from [a_j,b_j]  for 2 <= |t| <= N.
///
/// Exact endpoint touch counts as a violation. Every passing index gets
/// its branch (product above or below the target) recorded. When the
/// spectrum has no center interval the first family is vacuous and the
/// second reduces to plain interval products.
pub fn check_non_resonance<T: Scalar>(
    spectrum: &SpectrumResult<T>,
    order: u32,
    varsigma: T,
) -> Result<NonResonanceReport> {
    if order < 2 {
        return Err(Error::BadParams("need order N >= 2".into()));
    }
    let inflated = inflate_spectrum(spectrum, varsigma)?;
    let r = inflated.r();
    let count = count_multi_indices(r, 1, order);
    if count > ENUMERATION_BUDGET {
        return Err(Error::EnumerationBudget {
            count,
            budget: ENUMERATION_BUDGET,
        });
    }

    let mut violations = Vec::new();
    let mut branches = Vec::new();
    let mut nr1_pass = true;
    let mut nr2_pass = true;
    let has_center = inflated.center.is_some();
    let center = inflated.center_or_unit();

    for q in enumerate_multi_indices(r, 1, order) {
        let product = interval_power_product(&inflated, &q, order);
        if has_center {
            let ok = check_target(
                ConditionId::Nr1,
                &q,
                None,
                product,
                center,
                &mut violations,
                &mut branches,
            );
            nr1_pass &= ok;
        }
        if q.order() >= 2 {
            for (j, target_iv) in inflated.hyperbolic.iter().enumerate() {
                let ok = check_target(
                    ConditionId::Nr2,
                    &q,
                    Some(j),
                    product,
                    *target_iv,
                    &mut violations,
                    &mut branches,
                );
                nr2_pass &= ok;
            }
        }
    }

    Ok(NonResonanceReport {
        order,
        varsigma: varsigma.as_f64(),
        nr1_pass,
        nr2_pass,
        violations,
        branches,
    })
}

/// Spectral-gap report: b_l < nu_-^N and nu_+^N < a_{l+1}, with log
/// margins; a side without hyperbolic intervals is vacuous and flagged.
#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    pub order: u32,
    pub left_vacuous: bool,
    pub right_vacuous: bool,
    pub left_pass: bool,
    pub right_pass: bool,
    /// log(nu_-^N / b_l); positive on pass.
    pub left_log_margin: f64,
    /// log(a_{l+1} / nu_+^N); positive on pass.
    pub right_log_margin: f64,
    /// Suspension gaps nu_+^N < mu2^{-1} and nu_-^N > mu1 when rates given.
    pub suspension: Option<SuspensionGap>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuspensionGap {
    pub pass: bool,
    pub upper_log_margin: f64,
    pub lower_log_margin: f64,
}

impl GapReport {
    pub fn pass(&self) -> bool {
        self.left_pass && self.right_pass && self.suspension.as_ref().map_or(true, |s| s.pass)
    }
}

/// Check the spectral gap condition at order N, optionally together with
/// the suspension rates (mu1, mu2).
pub fn check_gap<T: Scalar>(
    spectrum: &SpectrumResult<T>,
    order: u32,
    suspension_rates: Option<(T, T)>,
) -> Result<GapReport> {
    let center = spectrum.center_or_unit();
    let n = order as i32;
    let nu_lo_n = center.lo.powi(n);
    let nu_hi_n = center.hi.powi(n);

    let (left_vacuous, left_pass, left_log_margin) = match spectrum.below_center_top() {
        Some(b_l) => {
            let margin = (nu_lo_n / b_l).ln().as_f64();
            (false, b_l < nu_lo_n, margin)
        }
        None => (true, true, f64::INFINITY),
    };
    let (right_vacuous, right_pass, right_log_margin) = match spectrum.above_center_bottom() {
        Some(a_next) => {
            let margin = (a_next / nu_hi_n).ln().as_f64();
            (false, nu_hi_n < a_next, margin)
        }
        None => (true, true, f64::INFINITY),
    };
    let suspension = suspension_rates.map(|(mu1, mu2)| {
        let upper = (T::one() / (mu2 * nu_hi_n)).ln().as_f64();
        let lower = (nu_lo_n / mu1).ln().as_f64();
        SuspensionGap {
            pass: upper > 0.0 && lower > 0.0,
            upper_log_margin: upper,
            lower_log_margin: lower,
        }
    });
    Ok(GapReport {
        order,
        left_vacuous,
        right_vacuous,
        left_pass,
        right_pass,
        left_log_margin,
        right_log_margin,
        suspension,
    })
}
