//! Multivariate polynomial jets over split coordinates (x_s, x_c, x_u):
//! sparse monomial storage, evaluation, truncated composition, projection.
//!
//! A jet maps the split source space into a split target space. Monomials
//! are keyed by a pair of multi-indices: `alpha` over the hyperbolic
//! variables v = (x_s, x_u) and `beta` over the center variables x_c. The
//! ambient ordering of a point is always `[x_s..., x_c..., x_u...]`.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

/// Block structure of a split space: stable blocks, one center block,
/// unstable blocks. Hyperbolic blocks are numbered stable-first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceSplit {
    pub s_blocks: Vec<usize>,
    pub dc: usize,
    pub u_blocks: Vec<usize>,
}

impl SpaceSplit {
    pub fn new(s_blocks: Vec<usize>, dc: usize, u_blocks: Vec<usize>) -> Self {
        SpaceSplit { s_blocks, dc, u_blocks }
    }

    /// Split with one variable per block.
    pub fn elementary(ds: usize, dc: usize, du: usize) -> Self {
        SpaceSplit {
            s_blocks: vec![1; ds],
            dc,
            u_blocks: vec![1; du],
        }
    }

    /// One-dimensional target used for scalar-valued jets.
    pub fn scalar() -> Self {
        SpaceSplit { s_blocks: vec![], dc: 1, u_blocks: vec![] }
    }

    pub fn ds(&self) -> usize {
        self.s_blocks.iter().sum()
    }

    pub fn du(&self) -> usize {
        self.u_blocks.iter().sum()
    }

    pub fn dsu(&self) -> usize {
        self.ds() + self.du()
    }

    pub fn dim(&self) -> usize {
        self.ds() + self.dc + self.du()
    }

    pub fn n_hyperbolic_blocks(&self) -> usize {
        self.s_blocks.len() + self.u_blocks.len()
    }

    /// Offset and size of hyperbolic block `i` (stable blocks first) in the
    /// v-ordering (x_s vars then x_u vars).
    pub fn hyperbolic_block_in_v(&self, i: usize) -> Option<(usize, usize)> {
        let mut off = 0;
        for (k, &sz) in self.s_blocks.iter().chain(self.u_blocks.iter()).enumerate() {
            if k == i {
                return Some((off, sz));
            }
            off += sz;
        }
        None
    }

    /// Offset and size of hyperbolic block `i` in the full ordering.
    pub fn hyperbolic_block_in_full(&self, i: usize) -> Option<(usize, usize)> {
        let (voff, sz) = self.hyperbolic_block_in_v(i)?;
        let ds = self.ds();
        if voff < ds {
            Some((voff, sz))
        } else {
            Some((voff + self.dc, sz))
        }
    }

    /// Map a v-variable index to the full-ordering index.
    pub fn v_to_full(&self, v: usize) -> usize {
        let ds = self.ds();
        if v < ds {
            v
        } else {
            v + self.dc
        }
    }

    /// Map a center-variable index to the full-ordering index.
    pub fn c_to_full(&self, c: usize) -> usize {
        self.ds() + c
    }

    /// Block-level degree vector of a v-multi-index: entry i is the total
    /// exponent over the variables of hyperbolic block i.
    pub fn block_degrees(&self, alpha: &[u32]) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.n_hyperbolic_blocks());
        let mut off = 0;
        for &sz in self.s_blocks.iter().chain(self.u_blocks.iter()) {
            out.push(alpha[off..off + sz].iter().sum());
            off += sz;
        }
        out
    }
}

/// Axis group selector for target projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisGroup {
    Stable,
    Center,
    Unstable,
    Hyperbolic,
    Block(usize),
}

impl AxisGroup {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "s" => Ok(AxisGroup::Stable),
            "c" => Ok(AxisGroup::Center),
            "u" => Ok(AxisGroup::Unstable),
            "su" => Ok(AxisGroup::Hyperbolic),
            other => {
                if let Some(idx) = other.strip_prefix("block-") {
                    if let Ok(i) = idx.parse::<usize>() {
                        return Ok(AxisGroup::Block(i));
                    }
                }
                Err(Error::UnknownGroup(other.to_string()))
            }
        }
    }
}

/// Monomial key: exponents over v = (x_s, x_u) and over x_c.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JetKey {
    pub alpha: Box<[u32]>,
    pub beta: Box<[u32]>,
}

impl JetKey {
    pub fn new(alpha: &[u32], beta: &[u32]) -> Self {
        JetKey {
            alpha: alpha.into(),
            beta: beta.into(),
        }
    }

    pub fn constant(n_v: usize, n_c: usize) -> Self {
        JetKey {
            alpha: vec![0; n_v].into(),
            beta: vec![0; n_c].into(),
        }
    }

    pub fn v_degree(&self) -> u32 {
        self.alpha.iter().sum()
    }

    pub fn c_degree(&self) -> u32 {
        self.beta.iter().sum()
    }

    pub fn degree(&self) -> u32 {
        self.v_degree() + self.c_degree()
    }

    fn sum(&self, other: &JetKey) -> JetKey {
        JetKey {
            alpha: self
                .alpha
                .iter()
                .zip(other.alpha.iter())
                .map(|(a, b)| a + b)
                .collect(),
            beta: self
                .beta
                .iter()
                .zip(other.beta.iter())
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

// Graded order: total degree first, then lexicographic on (alpha, beta).
impl Ord for JetKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.alpha.cmp(&self.alpha))
            .then_with(|| other.beta.cmp(&self.beta))
    }
}

impl PartialOrd for JetKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for JetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v^{:?} c^{:?}", self.alpha, self.beta)
    }
}

/// Sparse polynomial jet with vector coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct JetPoly<T> {
    src: SpaceSplit,
    tgt: SpaceSplit,
    max_order: u32,
    coeffs: BTreeMap<JetKey, Box<[T]>>,
}

impl<T: Scalar> JetPoly<T> {
    pub fn zero(src: SpaceSplit, tgt: SpaceSplit, max_order: u32) -> Self {
        JetPoly {
            src,
            tgt,
            max_order,
            coeffs: BTreeMap::new(),
        }
    }

    /// The identity map of a split space as a jet.
    pub fn identity(split: SpaceSplit, max_order: u32) -> Self {
        let dim = split.dim();
        let mut jet = Self::zero(split.clone(), split, max_order);
        for full in 0..dim {
            let mut coeff = vec![T::zero(); dim];
            coeff[full] = T::one();
            let key = jet.unit_key_full(full);
            jet.coeffs.insert(key, coeff.into());
        }
        jet
    }

    /// Jet of a constant linear map given as a matrix (tgt.dim x src.dim).
    pub fn linear(src: SpaceSplit, tgt: SpaceSplit, mat: &Mat<T>, max_order: u32) -> Self {
        assert_eq!(mat.rows(), tgt.dim());
        assert_eq!(mat.cols(), src.dim());
        let mut jet = Self::zero(src, tgt, max_order);
        for col in 0..mat.cols() {
            let coeff: Vec<T> = (0..mat.rows()).map(|r| mat[(r, col)]).collect();
            if coeff.iter().all(|c| *c == T::zero()) {
                continue;
            }
            let key = jet.unit_key_full(col);
            jet.coeffs.insert(key, coeff.into());
        }
        jet
    }

    fn unit_key_full(&self, full: usize) -> JetKey {
        let ds = self.src.ds();
        let dc = self.src.dc;
        let dsu = self.src.dsu();
        let mut alpha = vec![0u32; dsu];
        let mut beta = vec![0u32; dc];
        if full < ds {
            alpha[full] = 1;
        } else if full < ds + dc {
            beta[full - ds] = 1;
        } else {
            alpha[full - dc] = 1;
        }
        JetKey {
            alpha: alpha.into(),
            beta: beta.into(),
        }
    }

    pub fn src(&self) -> &SpaceSplit {
        &self.src
    }

    pub fn tgt(&self) -> &SpaceSplit {
        &self.tgt
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn n_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&JetKey, &[T])> {
        self.coeffs.iter().map(|(k, v)| (k, v.as_ref()))
    }

    pub fn get(&self, alpha: &[u32], beta: &[u32]) -> Option<&[T]> {
        self.coeffs
            .get(&JetKey::new(alpha, beta))
            .map(|c| c.as_ref())
    }

    /// Add `value` to component `comp` of the coefficient at (alpha, beta).
    pub fn add_to(&mut self, alpha: &[u32], beta: &[u32], comp: usize, value: T) {
        assert_eq!(alpha.len(), self.src.dsu(), "alpha length");
        assert_eq!(beta.len(), self.src.dc, "beta length");
        let key = JetKey::new(alpha, beta);
        assert!(key.degree() <= self.max_order, "term beyond max_order");
        let dim = self.tgt.dim();
        let entry = self
            .coeffs
            .entry(key.clone())
            .or_insert_with(|| vec![T::zero(); dim].into());
        entry[comp] = entry[comp] + value;
        if entry.iter().all(|c| *c == T::zero()) {
            self.coeffs.remove(&key);
        }
    }

    pub fn set_term(&mut self, alpha: &[u32], beta: &[u32], coeff: Vec<T>) {
        assert_eq!(coeff.len(), self.tgt.dim());
        let key = JetKey::new(alpha, beta);
        assert!(key.degree() <= self.max_order, "term beyond max_order");
        if coeff.iter().all(|c| *c == T::zero()) {
            self.coeffs.remove(&key);
        } else {
            self.coeffs.insert(key, coeff.into());
        }
    }

    fn add_key(&mut self, key: JetKey, coeff: &[T]) {
        if key.degree() > self.max_order {
            return;
        }
        let dim = self.tgt.dim();
        let entry = self
            .coeffs
            .entry(key.clone())
            .or_insert_with(|| vec![T::zero(); dim].into());
        for (e, c) in entry.iter_mut().zip(coeff) {
            *e = *e + *c;
        }
        if entry.iter().all(|c| *c == T::zero()) {
            self.coeffs.remove(&key);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.src, other.src);
        assert_eq!(self.tgt, other.tgt);
        let mut out = self.clone();
        out.max_order = self.max_order.min(other.max_order);
        out.truncate(out.max_order);
        for (k, c) in &other.coeffs {
            out.add_key(k.clone(), c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = self.clone();
        if s == T::zero() {
            out.coeffs.clear();
            return out;
        }
        for c in out.coeffs.values_mut() {
            for e in c.iter_mut() {
                *e = *e * s;
            }
        }
        out
    }

    /// Apply a constant matrix to the target of every coefficient.
    pub fn apply_matrix(&self, mat: &Mat<T>, new_tgt: SpaceSplit) -> Self {
        assert_eq!(mat.cols(), self.tgt.dim());
        assert_eq!(mat.rows(), new_tgt.dim());
        let mut out = JetPoly::zero(self.src.clone(), new_tgt, self.max_order);
        for (k, c) in &self.coeffs {
            let v = mat.matvec(c);
            out.add_key(k.clone(), &v);
        }
        out
    }

    pub fn truncate(&mut self, order: u32) {
        self.max_order = self.max_order.min(order);
        let max = self.max_order;
        self.coeffs.retain(|k, _| k.degree() <= max);
    }

    pub fn truncated(&self, order: u32) -> Self {
        let mut out = self.clone();
        out.truncate(order);
        out
    }

    /// Set the truncation cap exactly, dropping terms above it; unlike
    /// `truncated` this may also raise the cap.
    pub fn resized(&self, order: u32) -> Self {
        let mut out = self.clone();
        out.max_order = order;
        out.coeffs.retain(|k, _| k.degree() <= order);
        out
    }

    /// Keep only terms selected by the predicate.
    pub fn filter(&self, mut pred: impl FnMut(&JetKey) -> bool) -> Self {
        let mut out = self.clone();
        out.coeffs.retain(|k, _| pred(k));
        out
    }

    /// Homogeneous part of degree `p` in the v variables (all x_c orders).
    pub fn v_homogeneous(&self, p: u32) -> Self {
        self.filter(|k| k.v_degree() == p)
    }

    /// Drop coefficients whose max-abs entry is below `tol`; returns the
    /// largest dropped magnitude.
    pub fn clamp_small(&mut self, tol: T) -> T {
        let mut dropped = T::zero();
        self.coeffs.retain(|_, c| {
            let m = c.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()));
            if m < tol {
                dropped = dropped.max(m);
                false
            } else {
                true
            }
        });
        dropped
    }

    /// Max-abs over all coefficient entries.
    pub fn coeff_norm(&self) -> T {
        self.coeffs.values().fold(T::zero(), |acc, c| {
            c.iter().fold(acc, |a, &x| a.max(x.abs()))
        })
    }

    /// Constant coefficient, if any.
    pub fn constant_part(&self) -> Vec<T> {
        let key = JetKey::constant(self.src.dsu(), self.src.dc);
        match self.coeffs.get(&key) {
            Some(c) => c.to_vec(),
            None => vec![T::zero(); self.tgt.dim()],
        }
    }

    /// Linear part as a matrix (tgt.dim x src.dim) in the full ordering.
    pub fn linear_part(&self) -> Mat<T> {
        let mut mat = Mat::zeros(self.tgt.dim(), self.src.dim());
        for (k, c) in &self.coeffs {
            if k.degree() != 1 {
                continue;
            }
            let col = if k.v_degree() == 1 {
                let v = k.alpha.iter().position(|&e| e == 1).unwrap();
                self.src.v_to_full(v)
            } else {
                let cvar = k.beta.iter().position(|&e| e == 1).unwrap();
                self.src.c_to_full(cvar)
            };
            for (row, &val) in c.iter().enumerate() {
                mat[(row, col)] = val;
            }
        }
        mat
    }

    /// Evaluate at a point given in the full ordering `[x_s, x_c, x_u]`.
    pub fn evaluate(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.src.dim(), "evaluation point dimension");
        let ds = self.src.ds();
        let dc = self.src.dc;
        let mut out = vec![T::zero(); self.tgt.dim()];
        for (k, c) in &self.coeffs {
            let mut mono = T::one();
            for (v, &e) in k.alpha.iter().enumerate() {
                if e > 0 {
                    let xi = if v < ds { x[v] } else { x[v + dc] };
                    mono = mono * xi.powi(e as i32);
                }
            }
            for (cv, &e) in k.beta.iter().enumerate() {
                if e > 0 {
                    mono = mono * x[ds + cv].powi(e as i32);
                }
            }
            if mono == T::zero() {
                continue;
            }
            for (o, &cc) in out.iter_mut().zip(c.iter()) {
                *o = *o + cc * mono;
            }
        }
        out
    }

    /// Split into scalar-valued component jets.
    pub fn components(&self) -> Vec<JetPoly<T>> {
        let dim = self.tgt.dim();
        let mut out: Vec<JetPoly<T>> = (0..dim)
            .map(|_| JetPoly::zero(self.src.clone(), SpaceSplit::scalar(), self.max_order))
            .collect();
        for (k, c) in &self.coeffs {
            for (i, &val) in c.iter().enumerate() {
                if val != T::zero() {
                    out[i].coeffs.insert(k.clone(), vec![val].into());
                }
            }
        }
        out
    }

    /// Reassemble a vector jet from scalar components.
    pub fn from_components(tgt: SpaceSplit, comps: &[JetPoly<T>]) -> Self {
        assert_eq!(comps.len(), tgt.dim());
        let src = comps[0].src.clone();
        let max_order = comps.iter().map(|c| c.max_order).min().unwrap();
        let mut out = JetPoly::zero(src, tgt, max_order);
        for (i, comp) in comps.iter().enumerate() {
            for (k, c) in &comp.coeffs {
                let mut vec = vec![T::zero(); out.tgt.dim()];
                vec[i] = c[0];
                out.add_key(k.clone(), &vec);
            }
        }
        out
    }

    /// Zero every target component outside the selected group.
    pub fn project_target(&self, group: AxisGroup) -> Result<Self> {
        let ds = self.tgt.ds();
        let dc = self.tgt.dc;
        let du = self.tgt.du();
        let keep: Vec<bool> = match group {
            AxisGroup::Stable => (0..ds + dc + du).map(|i| i < ds).collect(),
            AxisGroup::Center => (0..ds + dc + du).map(|i| i >= ds && i < ds + dc).collect(),
            AxisGroup::Unstable => (0..ds + dc + du).map(|i| i >= ds + dc).collect(),
            AxisGroup::Hyperbolic => (0..ds + dc + du).map(|i| i < ds || i >= ds + dc).collect(),
            AxisGroup::Block(b) => {
                let (off, sz) = self
                    .tgt
                    .hyperbolic_block_in_full(b)
                    .ok_or_else(|| Error::UnknownGroup(format!("block-{b}")))?;
                (0..ds + dc + du).map(|i| i >= off && i < off + sz).collect()
            }
        };
        let mut out = JetPoly::zero(self.src.clone(), self.tgt.clone(), self.max_order);
        for (k, c) in &self.coeffs {
            let masked: Vec<T> = c
                .iter()
                .zip(&keep)
                .map(|(&v, &kp)| if kp { v } else { T::zero() })
                .collect();
            out.add_key(k.clone(), &masked);
        }
        Ok(out)
    }

    /// Partial derivative with respect to the full-ordering variable `var`.
    pub fn partial_derivative(&self, var: usize) -> Self {
        let ds = self.src.ds();
        let dc = self.src.dc;
        let mut out = JetPoly::zero(self.src.clone(), self.tgt.clone(), self.max_order);
        for (k, c) in &self.coeffs {
            let (in_alpha, idx) = if var < ds {
                (true, var)
            } else if var < ds + dc {
                (false, var - ds)
            } else {
                (true, var - dc)
            };
            let e = if in_alpha { k.alpha[idx] } else { k.beta[idx] };
            if e == 0 {
                continue;
            }
            let mut key = k.clone();
            if in_alpha {
                key.alpha[idx] -= 1;
            } else {
                key.beta[idx] -= 1;
            }
            let factor = T::of(e as f64);
            let scaled: Vec<T> = c.iter().map(|&x| x * factor).collect();
            out.add_key(key, &scaled);
        }
        out
    }

    /// Polynomial product of two scalar-valued jets over the same source.
    pub fn mul_scalar(&self, other: &Self, max_order: u32) -> Result<Self> {
        if self.tgt.dim() != 1 || other.tgt.dim() != 1 {
            return Err(Error::ShapeMismatch("mul_scalar needs scalar targets".into()));
        }
        if self.src != other.src {
            return Err(Error::ShapeMismatch("mul_scalar source splits differ".into()));
        }
        let mut out = JetPoly::zero(self.src.clone(), SpaceSplit::scalar(), max_order);
        for (ka, ca) in &self.coeffs {
            let da = ka.degree();
            for (kb, cb) in &other.coeffs {
                if da + kb.degree() > max_order {
                    continue;
                }
                out.add_key(ka.sum(kb), &[ca[0] * cb[0]]);
            }
        }
        Ok(out)
    }

    /// Truncated composition `self(inner_0, ..., inner_{n-1})`. The inner
    /// jets are scalar-valued, one per source variable of `self` in the
    /// full ordering, and must share a common source split.
    pub fn compose(&self, inners: &[&JetPoly<T>], max_order: u32) -> Result<Self> {
        let nvars = self.src.dim();
        if inners.len() != nvars {
            return Err(Error::ArityMismatch {
                expected: nvars,
                got: inners.len(),
            });
        }
        for inner in inners {
            if inner.tgt.dim() != 1 {
                return Err(Error::ShapeMismatch(
                    "inner jets must be scalar-valued".into(),
                ));
            }
            if inner.src != inners[0].src {
                return Err(Error::ShapeMismatch(
                    "inner jets must share a source split".into(),
                ));
            }
        }
        let inner_src = inners[0].src.clone();
        let mut out = JetPoly::zero(inner_src.clone(), self.tgt.clone(), max_order);
        let mut cache = PowCache::new(inners, max_order, &inner_src);
        let ds = self.src.ds();
        let dc = self.src.dc;
        for (k, coeff) in &self.coeffs {
            // Product over variables of inner^exponent, truncated.
            let mut poly = ScalarPoly::one(&inner_src);
            let mut vanished = false;
            for (v, &e) in k.alpha.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let full = if v < ds { v } else { v + dc };
                poly = poly.mul(cache.power(full, e), max_order);
                if poly.terms.is_empty() {
                    vanished = true;
                    break;
                }
            }
            if !vanished {
                for (cv, &e) in k.beta.iter().enumerate() {
                    if e == 0 {
                        continue;
                    }
                    poly = poly.mul(cache.power(ds + cv, e), max_order);
                    if poly.terms.is_empty() {
                        vanished = true;
                        break;
                    }
                }
            }
            if vanished {
                continue;
            }
            for (key, s) in &poly.terms {
                let scaled: Vec<T> = coeff.iter().map(|&c| c * *s).collect();
                out.add_key(key.clone(), &scaled);
            }
        }
        Ok(out)
    }

    /// Compose with a vector-valued jet (its components feed the variables).
    pub fn compose_map(&self, inner: &JetPoly<T>, max_order: u32) -> Result<Self> {
        if inner.tgt.dim() != self.src.dim() {
            return Err(Error::ArityMismatch {
                expected: self.src.dim(),
                got: inner.tgt.dim(),
            });
        }
        let comps = inner.components();
        let refs: Vec<&JetPoly<T>> = comps.iter().collect();
        self.compose(&refs, max_order)
    }

    /// Inverse of a map jet (src == tgt, invertible linear part) up to
    /// `max_order`: returns G with `self ∘ G = Id + O(order max_order+1)`.
    pub fn invert(&self, max_order: u32) -> Result<Self> {
        if self.src.dim() != self.tgt.dim() {
            return Err(Error::ShapeMismatch("inverse needs a square map".into()));
        }
        let cst = self.constant_part();
        if cst.iter().any(|&c| c.abs() > T::epsilon() * T::of(64.0)) {
            return Err(Error::ShapeMismatch(
                "inverse requires zero constant term".into(),
            ));
        }
        let lin = self.linear_part();
        let lin_inv = lin.inverse_guarded(T::of(1e12), 0)?;
        let id = JetPoly::identity(self.src.clone(), max_order);
        let lin_inv_jet = JetPoly::linear(self.src.clone(), self.src.clone(), &lin_inv, max_order);
        // self = L + N with N of order >= 2; iterate G <- L^{-1} ∘ (Id - N∘G),
        // which gains one correct order per pass.
        let lin_jet = JetPoly::linear(self.src.clone(), self.src.clone(), &lin, max_order);
        let nonlin = self.truncated(max_order).sub(&lin_jet);
        let mut g = lin_inv_jet.clone();
        for _ in 0..max_order {
            let ng = nonlin.compose_map(&g, max_order)?;
            g = lin_inv_jet.compose_map(&id.sub(&ng), max_order)?;
        }
        Ok(g)
    }

    /// Serialization-friendly record form.
    pub fn to_records(&self) -> JetRecords {
        JetRecords {
            src: self.src.clone(),
            tgt: self.tgt.clone(),
            max_order: self.max_order,
            terms: self
                .coeffs
                .iter()
                .map(|(k, c)| JetTerm {
                    alpha: k.alpha.to_vec(),
                    beta: k.beta.to_vec(),
                    coeff: c.iter().map(|x| x.as_f64()).collect(),
                })
                .collect(),
        }
    }

    pub fn from_records(rec: &JetRecords) -> Result<Self> {
        let mut jet = JetPoly::zero(rec.src.clone(), rec.tgt.clone(), rec.max_order);
        for t in &rec.terms {
            if t.alpha.len() != rec.src.dsu() || t.beta.len() != rec.src.dc {
                return Err(Error::ShapeMismatch("term index lengths".into()));
            }
            if t.coeff.len() != rec.tgt.dim() {
                return Err(Error::ShapeMismatch("coefficient length".into()));
            }
            let key = JetKey::new(&t.alpha, &t.beta);
            if key.degree() > rec.max_order {
                return Err(Error::ShapeMismatch("term beyond max_order".into()));
            }
            let coeff: Vec<T> = t.coeff.iter().map(|&x| T::of(x)).collect();
            jet.add_key(key, &coeff);
        }
        Ok(jet)
    }
}

/// JSON shape for jets: a list of {alpha, beta, coeff[]} records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JetRecords {
    pub src: SpaceSplit,
    pub tgt: SpaceSplit,
    pub max_order: u32,
    pub terms: Vec<JetTerm>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JetTerm {
    pub alpha: Vec<u32>,
    pub beta: Vec<u32>,
    pub coeff: Vec<f64>,
}

/// Internal sparse scalar polynomial used during composition.
struct ScalarPoly<T> {
    terms: BTreeMap<JetKey, T>,
}

impl<T: Scalar> ScalarPoly<T> {
    fn one(src: &SpaceSplit) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(JetKey::constant(src.dsu(), src.dc), T::one());
        ScalarPoly { terms }
    }

    fn from_jet(jet: &JetPoly<T>) -> Self {
        let mut terms = BTreeMap::new();
        for (k, c) in &jet.coeffs {
            if c[0] != T::zero() {
                terms.insert(k.clone(), c[0]);
            }
        }
        ScalarPoly { terms }
    }

    fn mul(&self, other: &ScalarPoly<T>, max_order: u32) -> ScalarPoly<T> {
        let mut terms: BTreeMap<JetKey, T> = BTreeMap::new();
        for (ka, &va) in &self.terms {
            let da = ka.degree();
            for (kb, &vb) in &other.terms {
                if da + kb.degree() > max_order {
                    continue;
                }
                let key = ka.sum(kb);
                let entry = terms.entry(key).or_insert_with(T::zero);
                *entry = *entry + va * vb;
            }
        }
        terms.retain(|_, v| *v != T::zero());
        ScalarPoly { terms }
    }
}

/// Memoized powers of the inner jets during composition.
struct PowCache<'a, T> {
    inners: &'a [&'a JetPoly<T>],
    max_order: u32,
    // powers[var][e-1] = inner_var^e
    powers: Vec<Vec<ScalarPoly<T>>>,
}

impl<'a, T: Scalar> PowCache<'a, T> {
    fn new(inners: &'a [&'a JetPoly<T>], max_order: u32, _src: &SpaceSplit) -> Self {
        PowCache {
            inners,
            max_order,
            powers: (0..inners.len()).map(|_| Vec::new()).collect(),
        }
    }

    fn power(&mut self, var: usize, e: u32) -> &ScalarPoly<T> {
        if self.powers[var].is_empty() {
            self.powers[var].push(ScalarPoly::from_jet(self.inners[var]));
        }
        while (self.powers[var].len() as u32) < e {
            let last = self.powers[var].last().unwrap();
            let next = last.mul(&self.powers[var][0], self.max_order);
            self.powers[var].push(next);
        }
        &self.powers[var][(e - 1) as usize]
    }
}

/// A sequence of jets of identical shape on the window [-W, W].
#[derive(Debug, Clone)]
pub struct TimeJetSeq<T> {
    half: i64,
    jets: Vec<JetPoly<T>>,
}

impl<T: Scalar> TimeJetSeq<T> {
    pub fn from_fn(half: i64, mut f: impl FnMut(i64) -> JetPoly<T>) -> Self {
        let jets: Vec<JetPoly<T>> = (-half..=half).map(&mut f).collect();
        for j in &jets {
            assert_eq!(j.src(), jets[0].src(), "mismatched source splits");
            assert_eq!(j.tgt(), jets[0].tgt(), "mismatched target splits");
            assert_eq!(j.max_order(), jets[0].max_order(), "mismatched orders");
        }
        TimeJetSeq { half, jets }
    }

    pub fn constant(half: i64, jet: JetPoly<T>) -> Self {
        TimeJetSeq {
            half,
            jets: vec![jet; (2 * half + 1) as usize],
        }
    }

    /// Build on the full window [-half, half], calling `f` on the band and
    /// filling the rest with `filler`.
    pub fn from_band(
        half: i64,
        band: (i64, i64),
        mut f: impl FnMut(i64) -> JetPoly<T>,
        filler: JetPoly<T>,
    ) -> Self {
        Self::from_fn(half, |n| {
            if n >= band.0 && n <= band.1 {
                f(n)
            } else {
                filler.clone()
            }
        })
    }

    pub fn window(&self) -> i64 {
        self.half
    }

    pub fn get(&self, n: i64) -> Result<&JetPoly<T>> {
        if n.abs() > self.half {
            return Err(Error::OutOfWindow {
                index: n,
                window: self.half,
            });
        }
        Ok(&self.jets[(n + self.half) as usize])
    }

    pub fn get_mut(&mut self, n: i64) -> Result<&mut JetPoly<T>> {
        if n.abs() > self.half {
            return Err(Error::OutOfWindow {
                index: n,
                window: self.half,
            });
        }
        Ok(&mut self.jets[(n + self.half) as usize])
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &JetPoly<T>)> {
        self.jets
            .iter()
            .enumerate()
            .map(move |(i, j)| (i as i64 - self.half, j))
    }

    pub fn map(&self, mut f: impl FnMut(i64, &JetPoly<T>) -> JetPoly<T>) -> Self {
        TimeJetSeq {
            half: self.half,
            jets: self
                .jets
                .iter()
                .enumerate()
                .map(|(i, j)| f(i as i64 - self.half, j))
                .collect(),
        }
    }

    /// Max coefficient norm over a band of slices.
    pub fn coeff_norm_on(&self, band: (i64, i64)) -> T {
        let mut out = T::zero();
        for n in band.0..=band.1 {
            if let Ok(j) = self.get(n) {
                out = out.max(j.coeff_norm());
            }
        }
        out
    }

    /// True when all slices within the band agree coefficient-wise to tol.
    pub fn is_time_constant_on(&self, band: (i64, i64), tol: T) -> bool {
        let first = match self.get(band.0) {
            Ok(j) => j,
            Err(_) => return false,
        };
        for n in band.0 + 1..=band.1 {
            if let Ok(j) = self.get(n) {
                if j.sub(first).coeff_norm() > tol {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split_111() -> SpaceSplit {
        SpaceSplit::elementary(1, 1, 1)
    }

    #[test]
    fn evaluate_basic_monomials() {
        // Source (x_s, x_c, x_u); scalar target.
        let mut jet = JetPoly::<f64>::zero(split_111(), SpaceSplit::scalar(), 3);
        // zero jet evaluates to 0
        assert_eq!(jet.evaluate(&[0.3, -0.7, 2.0]), vec![0.0]);
        // 2 * x_c^2 at x_c = 3 -> 18
        jet.add_to(&[0, 0], &[2], 0, 2.0);
        assert_eq!(jet.evaluate(&[0.0, 3.0, 0.0]), vec![18.0]);
        // x_s * x_u at (2, 5) -> 10 on top
        let mut jet2 = JetPoly::<f64>::zero(split_111(), SpaceSplit::scalar(), 3);
        jet2.add_to(&[1, 1], &[0], 0, 1.0);
        assert_eq!(jet2.evaluate(&[2.0, 0.0, 5.0]), vec![10.0]);
    }

    #[test]
    fn compose_with_identity_is_identity() {
        let split = split_111();
        let mut f = JetPoly::<f64>::zero(split.clone(), split.clone(), 3);
        f.add_to(&[1, 0], &[1], 0, 0.5); // x_s * x_c into first component
        f.add_to(&[0, 2], &[0], 2, -1.0); // x_u^2 into third component
        let id = JetPoly::identity(split, 3);
        let g = f.compose_map(&id, 3).unwrap();
        assert!(g.sub(&f).coeff_norm() < 1e-15);
    }

    #[test]
    fn compose_scalar_example() {
        // outer(u) = u^2, inner(x) = x + x^2, truncated at 3: x^2 + 2x^3.
        let sc = SpaceSplit::scalar();
        let mut outer = JetPoly::<f64>::zero(sc.clone(), sc.clone(), 3);
        outer.add_to(&[], &[2], 0, 1.0);
        let mut inner = JetPoly::<f64>::zero(sc.clone(), sc.clone(), 3);
        inner.add_to(&[], &[1], 0, 1.0);
        inner.add_to(&[], &[2], 0, 1.0);
        let comp = outer.compose(&[&inner], 3).unwrap();
        assert_eq!(comp.get(&[], &[2]).unwrap()[0], 1.0);
        assert_eq!(comp.get(&[], &[3]).unwrap()[0], 2.0);
        assert!(comp.get(&[], &[1]).is_none());
    }

    #[test]
    fn projections_complementary() {
        let split = split_111();
        let mut f = JetPoly::<f64>::zero(split.clone(), split.clone(), 2);
        f.add_to(&[1, 0], &[0], 0, 1.0);
        f.add_to(&[0, 0], &[1], 1, 2.0);
        f.add_to(&[0, 1], &[0], 2, 3.0);
        let pc = f.project_target(AxisGroup::Center).unwrap();
        let ps = pc.project_target(AxisGroup::Stable).unwrap();
        assert!(ps.is_zero()); // pi_c then pi_s = 0
        let psu = f.project_target(AxisGroup::Hyperbolic).unwrap();
        let sum = psu.add(&pc);
        assert!(sum.sub(&f).coeff_norm() < 1e-15); // pi_su + pi_c = id
    }

    #[test]
    fn block_projection_extracts_rows() {
        let split = SpaceSplit::new(vec![2], 1, vec![1]);
        let mut f = JetPoly::<f64>::zero(split.clone(), split.clone(), 2);
        f.add_to(&[1, 0, 0], &[0], 0, 1.0);
        f.add_to(&[1, 0, 0], &[0], 1, 2.0);
        f.add_to(&[1, 0, 0], &[0], 3, 4.0);
        let b0 = f.project_target(AxisGroup::Block(0)).unwrap();
        let c = b0.get(&[1, 0, 0], &[0]).unwrap();
        assert_eq!(c, &[1.0, 2.0, 0.0, 0.0]);
        let b1 = f.project_target(AxisGroup::Block(1)).unwrap();
        let c = b1.get(&[1, 0, 0], &[0]).unwrap();
        assert_eq!(c, &[0.0, 0.0, 0.0, 4.0]);
    }

    #[test]
    fn near_identity_inverse_roundtrip() {
        // H = Id + h with h of order 2; H^{-1} computed to order 3 must
        // compose back to Id + O(4).
        let split = split_111();
        let mut h = JetPoly::<f64>::zero(split.clone(), split.clone(), 4);
        h.add_to(&[1, 1], &[0], 1, 0.7); // x_s x_u into center
        h.add_to(&[0, 0], &[2], 0, -0.3); // x_c^2 into stable
        let id = JetPoly::identity(split.clone(), 4);
        let map = id.add(&h);
        let inv = map.invert(3).unwrap();
        let comp = map.compose_map(&inv, 3).unwrap();
        let defect = comp.sub(&JetPoly::identity(split, 3));
        assert!(defect.coeff_norm() < 1e-12, "defect {}", defect.coeff_norm());
    }

    #[test]
    fn derivative_of_monomial() {
        let split = split_111();
        let mut f = JetPoly::<f64>::zero(split.clone(), SpaceSplit::scalar(), 4);
        f.add_to(&[2, 0], &[1], 0, 3.0); // 3 x_s^2 x_c
        let dxs = f.partial_derivative(0); // d/dx_s -> 6 x_s x_c
        assert_eq!(dxs.get(&[1, 0], &[1]).unwrap()[0], 6.0);
        let dxc = f.partial_derivative(1); // d/dx_c -> 3 x_s^2
        assert_eq!(dxc.get(&[2, 0], &[0]).unwrap()[0], 3.0);
    }

    #[test]
    fn records_roundtrip() {
        let split = split_111();
        let mut f = JetPoly::<f64>::zero(split.clone(), split.clone(), 3);
        f.add_to(&[1, 0], &[1], 0, 0.25);
        f.add_to(&[0, 1], &[0], 2, -2.0);
        let rec = f.to_records();
        let g = JetPoly::<f64>::from_records(&rec).unwrap();
        assert!(g.sub(&f).coeff_norm() < 1e-15);
    }

    #[test]
    fn f32_composition_smoke() {
        let sc = SpaceSplit::scalar();
        let mut outer = JetPoly::<f32>::zero(sc.clone(), sc.clone(), 2);
        outer.add_to(&[], &[2], 0, 1.0);
        let mut inner = JetPoly::<f32>::zero(sc.clone(), sc, 2);
        inner.add_to(&[], &[1], 0, 2.0);
        let comp = outer.compose(&[&inner], 2).unwrap();
        assert!((comp.get(&[], &[2]).unwrap()[0] - 4.0).abs() < 1e-5);
    }
}
