//! Tangent-space machinery and Fisher-information conditioning diagnostics.
//!
//! The estimator's recovery guarantees are stated through quantities attached
//! to the product space E = S^p × S^p × R^{p×q} × S^q: minimum gain (χ) and
//! irrepresentability (φ) of the Fisher information restricted to a model
//! subspace H, tangent-space distortion (ρ), and the separable quantities
//! η1/η2/η3, μ, ξ, and incoherence. Most of these are optimizations of
//! non-Euclidean induced norms with no closed form; this module computes
//! exact values in Frobenius geometry where a dense operator matrix is
//! tractable and labeled sampled estimates elsewhere.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a reported value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Certificate {
    /// Computed in closed form (possibly in a surrogate geometry, see mode).
    Exact,
    /// A provable one-sided bound.
    Bound,
    /// Best value found by randomized search; one-sided estimate only.
    Sampled,
}

/// A single named diagnostic with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticValue {
    pub quantity: String,
    pub value: f64,
    pub mode: String,
    pub certificate: Certificate,
}

impl DiagnosticValue {
    fn new(quantity: &str, value: f64, mode: &str, certificate: Certificate) -> Self {
        DiagnosticValue {
            quantity: quantity.to_string(),
            value,
            mode: mode.to_string(),
            certificate,
        }
    }
}

const ORTHO_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// subspace types
// ---------------------------------------------------------------------------

/// Symmetric matrices supported on a fixed symmetric index set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupportSpace {
    p: usize,
    indices: BTreeSet<(usize, usize)>,
}

impl SupportSpace {
    pub fn new(p: usize, indices: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (i, j) in indices {
            if i >= p || j >= p {
                return Err(Error::invalid("support index out of range"));
            }
            set.insert((i, j));
            set.insert((j, i));
        }
        Ok(SupportSpace { p, indices: set })
    }

    /// Support of a given symmetric matrix.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::invalid("support space requires a square matrix"));
        }
        let p = m.nrows();
        let indices = (0..p)
            .flat_map(|i| (0..p).map(move |j| (i, j)))
            .filter(|&(i, j)| m[(i, j)] != 0.0);
        SupportSpace::new(p, indices)
    }

    pub fn full(p: usize) -> Self {
        SupportSpace {
            p,
            indices: (0..p).flat_map(|i| (0..p).map(move |j| (i, j))).collect(),
        }
    }

    pub fn ambient(&self) -> usize {
        self.p
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.indices.contains(&(i, j))
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Max entries per row (diagonal included) — the degree of the support.
    pub fn max_degree(&self) -> usize {
        let mut counts = vec![0usize; self.p];
        for &(i, _) in &self.indices {
            counts[i] += 1;
        }
        counts.into_iter().max().unwrap_or(0)
    }

    pub fn project(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.p, self.p, |i, j| {
            if self.contains(i, j) {
                m[(i, j)]
            } else {
                0.0
            }
        })
    }

    /// Orthonormal basis: diagonal units and normalized symmetric pair units.
    pub fn basis(&self) -> Vec<DMatrix<f64>> {
        let mut out = Vec::new();
        for &(i, j) in &self.indices {
            if i > j {
                continue;
            }
            let mut e = DMatrix::zeros(self.p, self.p);
            if i == j {
                e[(i, i)] = 1.0;
            } else {
                let v = std::f64::consts::FRAC_1_SQRT_2;
                e[(i, j)] = v;
                e[(j, i)] = v;
            }
            out.push(e);
        }
        out
    }
}

/// Tangent space to the variety of fixed-rank matrices at a point with
/// column space span(U) and row space span(V).
#[derive(Debug, Clone)]
pub struct LowRankTangent {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    symmetric: bool,
}

impl LowRankTangent {
    pub fn new(u: DMatrix<f64>, v: DMatrix<f64>, symmetric: bool) -> Result<Self> {
        if symmetric {
            if u.nrows() != v.nrows() || (&u - &v).norm() > ORTHO_TOL * (1.0 + u.norm()) {
                return Err(Error::invalid("symmetric tangent requires V = U"));
            }
        }
        for m in [&u, &v] {
            if m.ncols() > 0 {
                let gram = m.transpose() * m;
                let dev = (&gram - DMatrix::identity(m.ncols(), m.ncols())).norm();
                if dev > ORTHO_TOL * (m.ncols() as f64).sqrt().max(1.0) * 10.0 {
                    return Err(Error::invalid(format!(
                        "basis columns must be orthonormal (deviation {dev:.3e})"
                    )));
                }
            }
        }
        Ok(LowRankTangent { u, v, symmetric })
    }

    /// Tangent at a given matrix, bases from its thin SVD.
    pub fn from_matrix(m: &DMatrix<f64>, symmetric: bool) -> Result<Self> {
        let rank = crate::model::numerical_rank(m);
        if rank == 0 {
            return LowRankTangent::new(
                DMatrix::zeros(m.nrows(), 0),
                DMatrix::zeros(m.ncols(), 0),
                symmetric,
            );
        }
        let svd = m.clone().svd(true, true);
        let u = svd.u.as_ref().ok_or_else(|| Error::numerical("SVD failed"))?;
        let vt = svd.v_t.as_ref().ok_or_else(|| Error::numerical("SVD failed"))?;
        // singular values come out sorted descending in nalgebra
        let u_r: DMatrix<f64> = u.columns(0, rank).into();
        let v_r: DMatrix<f64> = vt.rows(0, rank).transpose();
        if symmetric {
            // for a symmetric point the row and column spaces coincide; use
            // the column-space basis for both sides
            LowRankTangent::new(u_r.clone(), u_r, true)
        } else {
            LowRankTangent::new(u_r, v_r, false)
        }
    }

    pub fn empty(p1: usize, p2: usize, symmetric: bool) -> Self {
        LowRankTangent {
            u: DMatrix::zeros(p1, 0),
            v: DMatrix::zeros(p2, 0),
            symmetric,
        }
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.u.nrows(), self.v.nrows())
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// P_T(N) = P_U N + N P_V − P_U N P_V.
    pub fn project(&self, n: &DMatrix<f64>) -> DMatrix<f64> {
        if self.rank() == 0 {
            return DMatrix::zeros(n.nrows(), n.ncols());
        }
        let pu = &self.u * self.u.transpose();
        let pv = &self.v * self.v.transpose();
        &pu * n + n * &pv - pu * n * pv
    }

    /// Incoherence of the tangent's own spaces: worst alignment of the
    /// column/row space with a coordinate axis.
    pub fn incoherence(&self) -> f64 {
        if self.rank() == 0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.u.nrows() {
            worst = worst.max(self.u.row(i).norm());
        }
        for i in 0..self.v.nrows() {
            worst = worst.max(self.v.row(i).norm());
        }
        worst
    }

    /// Orthonormal basis of the tangent inside the ambient space (symmetric
    /// matrices when the symmetric flag is set, otherwise all p1×p2).
    pub fn basis(&self) -> Vec<DMatrix<f64>> {
        if self.rank() == 0 {
            return Vec::new();
        }
        let candidates: Vec<DMatrix<f64>> = if self.symmetric {
            SupportSpace::full(self.u.nrows())
                .basis()
                .into_iter()
                .map(|e| self.project(&e))
                .collect()
        } else {
            let (p1, p2) = self.shape();
            (0..p1)
                .flat_map(|i| (0..p2).map(move |j| (i, j)))
                .map(|(i, j)| {
                    let mut e = DMatrix::zeros(p1, p2);
                    e[(i, j)] = 1.0;
                    self.project(&e)
                })
                .collect()
        };
        orthonormalize(candidates)
    }
}

/// Orthonormal-ize a spanning candidate list by modified Gram–Schmidt with
/// re-orthogonalization, dropping near-dependent members.
fn orthonormalize(candidates: Vec<DMatrix<f64>>) -> Vec<DMatrix<f64>> {
    let mut basis: Vec<DMatrix<f64>> = Vec::new();
    for mut c in candidates {
        for _ in 0..2 {
            for b in &basis {
                let d = c.dot(b);
                c -= b * d;
            }
        }
        let n = c.norm();
        if n > 1e-10 {
            basis.push(c / n);
        }
    }
    basis
}

/// p×q matrices supported on a fixed set of columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSupport {
    p: usize,
    q: usize,
    columns: BTreeSet<usize>,
}

impl ColumnSupport {
    pub fn new(p: usize, q: usize, columns: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = columns.into_iter().collect();
        if set.iter().any(|&c| c >= q) {
            return Err(Error::invalid("column index out of range"));
        }
        Ok(ColumnSupport { p, q, columns: set })
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let cols = (0..m.ncols()).filter(|&j| m.column(j).iter().any(|&v| v != 0.0));
        ColumnSupport::new(m.nrows(), m.ncols(), cols)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub fn columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.columns.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn project(&self, n: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.p, self.q, |i, j| {
            if self.columns.contains(&j) {
                n[(i, j)]
            } else {
                0.0
            }
        })
    }

    pub fn basis(&self) -> Vec<DMatrix<f64>> {
        let mut out = Vec::new();
        for &j in &self.columns {
            for i in 0..self.p {
                let mut e = DMatrix::zeros(self.p, self.q);
                e[(i, j)] = 1.0;
                out.push(e);
            }
        }
        out
    }
}

/// The cross-block component of a model subspace: a low-rank tangent for the
/// nuclear-norm variants or a column support for the screening variants.
#[derive(Debug, Clone)]
pub enum CrossSpace {
    LowRank(LowRankTangent),
    Columns(ColumnSupport),
}

impl CrossSpace {
    pub fn project(&self, n: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            CrossSpace::LowRank(t) => t.project(n),
            CrossSpace::Columns(c) => c.project(n),
        }
    }

    pub fn basis(&self) -> Vec<DMatrix<f64>> {
        match self {
            CrossSpace::LowRank(t) => t.basis(),
            CrossSpace::Columns(c) => c.basis(),
        }
    }

    fn shape(&self) -> (usize, usize) {
        match self {
            CrossSpace::LowRank(t) => t.shape(),
            CrossSpace::Columns(c) => c.shape(),
        }
    }
}

/// Model subspace H = Ω × T_Y × (T_YX or F) × S^q inside the product space.
#[derive(Debug, Clone)]
pub struct SubspaceProduct {
    pub omega: SupportSpace,
    pub t_y: LowRankTangent,
    pub cross: CrossSpace,
    pub q: usize,
}

impl SubspaceProduct {
    pub fn new(
        omega: SupportSpace,
        t_y: LowRankTangent,
        cross: CrossSpace,
        q: usize,
    ) -> Result<Self> {
        let p = omega.ambient();
        if !t_y.is_symmetric() || t_y.shape() != (p, p) {
            return Err(Error::invalid(
                "Y-block tangent must be symmetric with matching dimension",
            ));
        }
        if cross.shape() != (p, q) {
            return Err(Error::invalid("cross component shape must be p×q"));
        }
        Ok(SubspaceProduct {
            omega,
            t_y,
            cross,
            q,
        })
    }

    pub fn p(&self) -> usize {
        self.omega.ambient()
    }

    pub fn project(&self, e: &ProductElement) -> ProductElement {
        ProductElement {
            s: self.omega.project(&e.s),
            l: self.t_y.project(&e.l),
            k: self.cross.project(&e.k),
            o: e.o.clone(),
        }
    }

    /// Orthonormal basis as product elements, each supported on one component.
    pub fn basis(&self) -> Vec<ProductElement> {
        let p = self.p();
        let q = self.q;
        let mut out = Vec::new();
        for b in self.omega.basis() {
            out.push(ProductElement::from_component(0, b, p, q));
        }
        for b in self.t_y.basis() {
            out.push(ProductElement::from_component(1, b, p, q));
        }
        for b in self.cross.basis() {
            out.push(ProductElement::from_component(2, b, p, q));
        }
        for b in SupportSpace::full(q).basis() {
            out.push(ProductElement::from_component(3, b, p, q));
        }
        out
    }

    /// Orthonormal basis of the orthogonal complement of H in the product
    /// space (the S^q component has no complement).
    pub fn complement_basis(&self) -> Vec<ProductElement> {
        let p = self.p();
        let q = self.q;
        let mut cands = Vec::new();
        for b in SupportSpace::full(p).basis() {
            let r = &b - self.omega.project(&b);
            cands.push(ProductElement::from_component(0, r, p, q));
        }
        for b in SupportSpace::full(p).basis() {
            let r = &b - self.t_y.project(&b);
            cands.push(ProductElement::from_component(1, r, p, q));
        }
        for i in 0..p {
            for j in 0..q {
                let mut e = DMatrix::zeros(p, q);
                e[(i, j)] = 1.0;
                let r = &e - self.cross.project(&e);
                cands.push(ProductElement::from_component(2, r, p, q));
            }
        }
        orthonormalize_elements(cands)
    }
}

// ---------------------------------------------------------------------------
// product-space elements and the Fisher operator
// ---------------------------------------------------------------------------

/// An element (S, L, K, O) of S^p × S^p × R^{p×q} × S^q.
#[derive(Debug, Clone)]
pub struct ProductElement {
    pub s: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub o: DMatrix<f64>,
}

impl ProductElement {
    pub fn zeros(p: usize, q: usize) -> Self {
        ProductElement {
            s: DMatrix::zeros(p, p),
            l: DMatrix::zeros(p, p),
            k: DMatrix::zeros(p, q),
            o: DMatrix::zeros(q, q),
        }
    }

    fn from_component(idx: usize, m: DMatrix<f64>, p: usize, q: usize) -> Self {
        let mut e = ProductElement::zeros(p, q);
        match idx {
            0 => e.s = m,
            1 => e.l = m,
            2 => e.k = m,
            _ => e.o = m,
        }
        e
    }

    pub fn dot(&self, other: &ProductElement) -> f64 {
        self.s.dot(&other.s) + self.l.dot(&other.l) + self.k.dot(&other.k) + self.o.dot(&other.o)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, c: f64) -> ProductElement {
        ProductElement {
            s: &self.s * c,
            l: &self.l * c,
            k: &self.k * c,
            o: &self.o * c,
        }
    }

    pub fn add_scaled(&mut self, other: &ProductElement, c: f64) {
        self.s += &other.s * c;
        self.l += &other.l * c;
        self.k += &other.k * c;
        self.o += &other.o * c;
    }

    /// Weighted dual-norm geometry: max{‖S‖∞/δ, ‖L‖₂, ‖K‖₂/γ, ‖O‖₂}.
    pub fn phi(&self, delta: f64, gamma: f64) -> f64 {
        let s_inf = self.s.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let l_spec = spectral_norm(&self.l);
        let k_spec = spectral_norm(&self.k);
        let o_spec = spectral_norm(&self.o);
        (s_inf / delta).max(l_spec).max(k_spec / gamma).max(o_spec)
    }

    /// Variant with the max column ℓ2 norm on the cross block.
    pub fn phi_tilde(&self, delta: f64, gamma: f64) -> f64 {
        let s_inf = self.s.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let l_spec = spectral_norm(&self.l);
        let k_col = (0..self.k.ncols())
            .map(|j| self.k.column(j).norm())
            .fold(0.0f64, f64::max);
        let o_spec = spectral_norm(&self.o);
        (s_inf / delta).max(l_spec).max(k_col / gamma).max(o_spec)
    }
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

fn orthonormalize_elements(cands: Vec<ProductElement>) -> Vec<ProductElement> {
    let mut basis: Vec<ProductElement> = Vec::new();
    for mut c in cands {
        for _ in 0..2 {
            for b in &basis {
                let d = c.dot(b);
                c.add_scaled(b, -d);
            }
        }
        let n = c.norm();
        if n > 1e-10 {
            basis.push(c.scale(1.0 / n));
        }
    }
    basis
}

/// Action of the Fisher information as a Kronecker map: M ↦ Σ*·M·Σ*.
pub fn fisher_apply(sigma_star: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    sigma_star * m * sigma_star
}

/// The composite map 𝒜† I* 𝒜 on product elements: assemble the element into
/// S^{p+q}, apply the Fisher map, split back.
pub fn fisher_product(sigma_star: &DMatrix<f64>, e: &ProductElement) -> ProductElement {
    let p = e.s.nrows();
    let q = e.o.nrows();
    let mut z = DMatrix::zeros(p + q, p + q);
    z.view_mut((0, 0), (p, p)).copy_from(&(&e.s - &e.l));
    z.view_mut((0, p), (p, q)).copy_from(&e.k);
    z.view_mut((p, 0), (q, p)).copy_from(&e.k.transpose());
    z.view_mut((p, p), (q, q)).copy_from(&e.o);
    let w = fisher_apply(sigma_star, &z);
    let w_y: DMatrix<f64> = w.view((0, 0), (p, p)).into();
    let w_yx: DMatrix<f64> = w.view((0, p), (p, q)).into();
    let w_x: DMatrix<f64> = w.view((p, p), (q, q)).into();
    ProductElement {
        s: w_y.clone(),
        l: w_y,
        k: w_yx,
        o: w_x,
    }
}

/// Φ norm of structured blocks (the dual-norm geometry of the regularizer).
pub fn phi_norm(params: &crate::model::StructuredParams, delta: f64, gamma: f64) -> Result<f64> {
    if delta <= 0.0 || gamma <= 0.0 {
        return Err(Error::invalid("delta and gamma must be positive"));
    }
    Ok(ProductElement {
        s: params.s_y.clone(),
        l: params.l_y.clone(),
        k: params.theta_yx.clone(),
        o: params.theta_x.clone(),
    }
    .phi(delta, gamma))
}

/// Φ̃ variant: max column ℓ2 norm in place of the cross-block spectral norm.
pub fn phi_tilde(params: &crate::model::StructuredParams, delta: f64, gamma: f64) -> Result<f64> {
    if delta <= 0.0 || gamma <= 0.0 {
        return Err(Error::invalid("delta and gamma must be positive"));
    }
    Ok(ProductElement {
        s: params.s_y.clone(),
        l: params.l_y.clone(),
        k: params.theta_yx.clone(),
        o: params.theta_x.clone(),
    }
    .phi_tilde(delta, gamma))
}

// ---------------------------------------------------------------------------
// randomized optimization helpers
// ---------------------------------------------------------------------------

/// Random-restart hill climbing over a coefficient vector. `eval` maps raw
/// coefficients to an objective (returning None for degenerate candidates);
/// returns the best value found in the requested direction.
fn hill_climb<F>(
    dim: usize,
    maximize: bool,
    restarts: usize,
    iters: usize,
    rng: &mut ChaCha8Rng,
    mut eval: F,
) -> Option<f64>
where
    F: FnMut(&DVector<f64>) -> Option<f64>,
{
    let better = |a: f64, b: f64| if maximize { a > b } else { a < b };
    let mut best_overall: Option<f64> = None;
    for _ in 0..restarts {
        let mut c = DVector::from_fn(dim, |_, _| StandardNormal.sample(rng));
        let mut current = match eval(&c) {
            Some(v) => v,
            None => continue,
        };
        let mut step = 0.5;
        let mut fails = 0;
        for _ in 0..iters {
            let cand =
                &c + DVector::from_fn(dim, |_, _| {
                    let g: f64 = StandardNormal.sample(rng);
                    g * step
                });
            if let Some(v) = eval(&cand) {
                if better(v, current) {
                    c = cand;
                    current = v;
                    fails = 0;
                    continue;
                }
            }
            fails += 1;
            if fails >= 5 {
                step *= 0.6;
                fails = 0;
                if step < 1e-6 {
                    break;
                }
            }
        }
        best_overall = match best_overall {
            Some(b) if !better(current, b) => Some(b),
            _ => Some(current),
        };
    }
    best_overall
}

fn combine(basis: &[ProductElement], c: &DVector<f64>) -> ProductElement {
    let p = basis[0].s.nrows();
    let q = basis[0].o.nrows();
    let mut out = ProductElement::zeros(p, q);
    for (b, &w) in basis.iter().zip(c.iter()) {
        out.add_scaled(b, w);
    }
    out
}

fn combine_mats(basis: &[DMatrix<f64>], c: &DVector<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(basis[0].nrows(), basis[0].ncols());
    for (b, &w) in basis.iter().zip(c.iter()) {
        out += b * w;
    }
    out
}

// ---------------------------------------------------------------------------
// χ and φ
// ---------------------------------------------------------------------------

/// Evaluation mode for the Fisher conditioning quantities.
#[derive(Debug, Clone, Copy)]
pub enum GainMode {
    /// Dense operator matrix on an orthonormal basis of H; extreme singular
    /// value in Frobenius geometry (a surrogate for the Φ geometry).
    ExactFrobenius,
    /// Randomized search over the unit Φ sphere of H.
    PhiSampled { samples: usize, seed: u64 },
}

/// Matrix of P_H 𝒜† I* 𝒜 P_H on the given orthonormal basis of H.
fn restricted_operator_matrix(
    basis: &[ProductElement],
    sigma_star: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n = basis.len();
    DMatrix::from_fn(n, n, |i, j| basis[i].dot(&fisher_product(sigma_star, &basis[j])))
}

/// Minimum gain χ(H, Φ_{δ,γ}) of the Fisher information restricted to H.
pub fn chi_min_gain(
    h: &SubspaceProduct,
    sigma_star: &DMatrix<f64>,
    delta: f64,
    gamma: f64,
    mode: GainMode,
) -> Result<DiagnosticValue> {
    if delta <= 0.0 || gamma <= 0.0 {
        return Err(Error::invalid("delta and gamma must be positive"));
    }
    let basis = h.basis();
    if basis.is_empty() {
        return Err(Error::invalid("subspace H is trivial"));
    }
    match mode {
        GainMode::ExactFrobenius => {
            let a = restricted_operator_matrix(&basis, sigma_star);
            let value = a.svd(false, false).singular_values.min();
            Ok(DiagnosticValue::new(
                "chi_min_gain",
                value,
                "exact-frobenius",
                Certificate::Exact,
            ))
        }
        GainMode::PhiSampled { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let value = hill_climb(basis.len(), false, samples.max(1), 200, &mut rng, |c| {
                let z = combine(&basis, c);
                let scale = z.phi(delta, gamma);
                if scale < 1e-12 {
                    return None;
                }
                let z = z.scale(1.0 / scale);
                let img = h.project(&fisher_product(sigma_star, &z));
                Some(img.phi(delta, gamma))
            })
            .ok_or_else(|| Error::numerical("sampling produced no valid candidates"))?;
            Ok(DiagnosticValue::new(
                "chi_min_gain",
                value,
                "phi-sampled",
                Certificate::Sampled,
            ))
        }
    }
}

/// Irrepresentability φ(H, Φ_{δ,γ}): coupling between H and its complement
/// through the Fisher metric, normalized by the restricted inverse.
pub fn varphi_irrepresentability(
    h: &SubspaceProduct,
    sigma_star: &DMatrix<f64>,
    delta: f64,
    gamma: f64,
    mode: GainMode,
) -> Result<DiagnosticValue> {
    if delta <= 0.0 || gamma <= 0.0 {
        return Err(Error::invalid("delta and gamma must be positive"));
    }
    let basis = h.basis();
    if basis.is_empty() {
        return Err(Error::invalid("subspace H is trivial"));
    }
    let a = restricted_operator_matrix(&basis, sigma_star);
    let svd = a.clone().svd(true, true);
    let min_sv = svd.singular_values.min();
    if min_sv <= 1e-10 {
        return Err(Error::DegenerateModel(
            "Fisher information is singular restricted to H".into(),
        ));
    }
    let a_inv = svd
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::numerical(format!("restricted inverse failed: {e}")))?;

    match mode {
        GainMode::ExactFrobenius => {
            let comp = h.complement_basis();
            if comp.is_empty() {
                return Ok(DiagnosticValue::new(
                    "varphi_irrepresentability",
                    0.0,
                    "exact-frobenius",
                    Certificate::Exact,
                ));
            }
            // C_ij = ⟨c_i, W b_j⟩; composed with A⁻¹ gives the full map matrix
            let c = DMatrix::from_fn(comp.len(), basis.len(), |i, j| {
                comp[i].dot(&fisher_product(sigma_star, &basis[j]))
            });
            let composed = &c * &a_inv;
            let value = if composed.is_empty() {
                0.0
            } else {
                composed.svd(false, false).singular_values.max()
            };
            Ok(DiagnosticValue::new(
                "varphi_irrepresentability",
                value,
                "exact-frobenius",
                Certificate::Exact,
            ))
        }
        GainMode::PhiSampled { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let value = hill_climb(basis.len(), true, samples.max(1), 200, &mut rng, |cf| {
                let z = combine(&basis, cf);
                let scale = z.phi(delta, gamma);
                if scale < 1e-12 {
                    return None;
                }
                let coords = DVector::from_fn(basis.len(), |i, _| basis[i].dot(&z) / scale);
                let x = &a_inv * coords;
                let w = combine(&basis, &x);
                let img = fisher_product(sigma_star, &w);
                let mut resid = img.clone();
                let proj = h.project(&img);
                resid.add_scaled(&proj, -1.0);
                Some(resid.phi(delta, gamma))
            })
            .ok_or_else(|| Error::numerical("sampling produced no valid candidates"))?;
            Ok(DiagnosticValue::new(
                "varphi_irrepresentability",
                value,
                "phi-sampled",
                Certificate::Sampled,
            ))
        }
    }
}

// ---------------------------------------------------------------------------
// tangent-space distortion ρ
// ---------------------------------------------------------------------------

fn polar_factor(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.norm() < 1e-14 {
        return None;
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref()?;
    let vt = svd.v_t.as_ref()?;
    Some(u * vt)
}

/// Distortion ρ(T1, T2) = max over ‖N‖₂ ≤ 1 of ‖(P_T1 − P_T2)(N)‖₂, by
/// conditional-gradient ascent with random restarts. The difference map is
/// self-adjoint, so the maximizing direction for a fixed singular pair (u, v)
/// is the polar factor of (P_T1 − P_T2)(uv' + vu')/2.
pub fn rho_distortion(
    t1: &LowRankTangent,
    t2: &LowRankTangent,
    restarts: usize,
    seed: u64,
) -> Result<DiagnosticValue> {
    if t1.shape() != t2.shape() {
        return Err(Error::invalid("tangents must share an ambient shape"));
    }
    let symmetric = t1.is_symmetric() && t2.is_symmetric();
    let (p1, p2) = t1.shape();
    let diff = |n: &DMatrix<f64>| t1.project(n) - t2.project(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for _ in 0..restarts.max(1) {
        let g = DMatrix::from_fn(p1, p2, |_, _| StandardNormal.sample(&mut rng));
        let g = if symmetric {
            (&g + g.transpose()) * 0.5
        } else {
            g
        };
        let mut n = match polar_factor(&g) {
            Some(m) => m,
            None => continue,
        };
        let mut value = spectral_norm(&diff(&n));
        for _ in 0..60 {
            let d = diff(&n);
            if d.norm() < 1e-15 {
                break;
            }
            let svd = d.clone().svd(true, true);
            let (u, vt) = match (svd.u.as_ref(), svd.v_t.as_ref()) {
                (Some(u), Some(vt)) => (u, vt),
                _ => break,
            };
            let top_u: DMatrix<f64> = u.columns(0, 1).into();
            let top_v: DMatrix<f64> = vt.rows(0, 1).transpose();
            let outer = &top_u * top_v.transpose();
            let outer = if symmetric {
                (&outer + outer.transpose()) * 0.5
            } else {
                outer
            };
            let grad = diff(&outer);
            let next = match polar_factor(&grad) {
                Some(m) => m,
                None => break,
            };
            let next_value = spectral_norm(&diff(&next));
            if next_value <= value + 1e-13 {
                break;
            }
            n = next;
            value = next_value;
        }
        best = best.max(value);
    }
    Ok(DiagnosticValue::new(
        "rho_distortion",
        best,
        "restarted-ascent",
        Certificate::Sampled,
    ))
}

// ---------------------------------------------------------------------------
// μ, ξ, incoherence
// ---------------------------------------------------------------------------

/// μ(Ω) = max{‖N‖₂ : N ∈ Ω, ‖N‖∞ = 1}: (upper bound deg, lower estimate).
/// The maximum over the ℓ∞ ball is attained at a ±1 sign vertex, so the
/// estimate enumerates sign patterns exhaustively when the support has at
/// most 16 free entries and samples them otherwise.
pub fn mu_omega(space: &SupportSpace, seed: u64) -> (DiagnosticValue, DiagnosticValue) {
    let upper = DiagnosticValue::new(
        "mu_upper",
        space.max_degree() as f64,
        "degree-bound",
        Certificate::Bound,
    );
    let p = space.ambient();
    let free: Vec<(usize, usize)> = space
        .basis()
        .iter()
        .map(|b| {
            // each basis element is a diagonal unit or a symmetric pair unit
            let mut idx = (0, 0);
            'outer: for i in 0..p {
                for j in 0..p {
                    if b[(i, j)] != 0.0 {
                        idx = (i, j);
                        break 'outer;
                    }
                }
            }
            idx
        })
        .collect();
    if free.is_empty() {
        return (
            upper,
            DiagnosticValue::new("mu_lower", 0.0, "exhaustive", Certificate::Exact),
        );
    }
    let eval_signs = |signs: &[f64]| {
        let mut m = DMatrix::zeros(p, p);
        for (&(i, j), &s) in free.iter().zip(signs.iter()) {
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
        spectral_norm(&m)
    };
    if free.len() <= 16 {
        let mut best = 0.0f64;
        for mask in 0u32..(1 << free.len()) {
            let signs: Vec<f64> = (0..free.len())
                .map(|b| if mask >> b & 1 == 1 { 1.0 } else { -1.0 })
                .collect();
            best = best.max(eval_signs(&signs));
        }
        (
            upper,
            DiagnosticValue::new("mu_lower", best, "exhaustive", Certificate::Exact),
        )
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut signs: Vec<f64> = (0..free.len())
            .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let mut best = eval_signs(&signs);
        for _ in 0..2000 {
            let flip = rng.gen_range(0..free.len());
            signs[flip] = -signs[flip];
            let v = eval_signs(&signs);
            if v > best {
                best = v;
            } else {
                signs[flip] = -signs[flip];
            }
        }
        (
            upper,
            DiagnosticValue::new("mu_lower", best, "sign-sampled", Certificate::Sampled),
        )
    }
}

/// Bracket and estimate for ξ(T) = max{‖N‖∞ : N ∈ T, ‖N‖₂ = 1}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct XiReport {
    pub lower: f64,
    pub upper: f64,
    pub estimate: DiagnosticValue,
}

pub fn xi_tangent(t: &LowRankTangent, restarts: usize, seed: u64) -> XiReport {
    let inc = t.incoherence();
    if t.rank() == 0 {
        return XiReport {
            lower: 0.0,
            upper: 0.0,
            estimate: DiagnosticValue::new("xi_estimate", 0.0, "trivial", Certificate::Exact),
        };
    }
    let basis = t.basis();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let value = hill_climb(basis.len(), true, restarts.max(1), 200, &mut rng, |c| {
        let n = combine_mats(&basis, c);
        let spec = spectral_norm(&n);
        if spec < 1e-12 {
            return None;
        }
        Some(n.iter().fold(0.0f64, |a, &v| a.max(v.abs())) / spec)
    })
    .unwrap_or(inc);
    XiReport {
        lower: inc,
        upper: 2.0 * inc,
        estimate: DiagnosticValue::new(
            "xi_estimate",
            value.clamp(inc, 2.0 * inc),
            "restarted-ascent",
            Certificate::Sampled,
        ),
    }
}

/// Incoherence of the row/column spaces of a matrix: worst projection of a
/// standard basis vector onto either space.
pub fn incoherence(n: &DMatrix<f64>) -> Result<f64> {
    if n.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("incoherence of the zero matrix is undefined"));
    }
    let t = LowRankTangent::from_matrix(n, false)?;
    Ok(t.incoherence())
}

// ---------------------------------------------------------------------------
// η quantities
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EtaReport {
    pub eta1: DiagnosticValue,
    pub eta2: DiagnosticValue,
    pub eta3: DiagnosticValue,
}

/// Embed a symmetric p-matrix into the Y block of S^{p+q}.
fn embed_y(m: &DMatrix<f64>, q: usize) -> DMatrix<f64> {
    let p = m.nrows();
    let mut z = DMatrix::zeros(p + q, p + q);
    z.view_mut((0, 0), (p, p)).copy_from(m);
    z
}

/// Basis of the image 𝒜(H[i]) inside S^{p+q} for component `idx`.
fn image_basis(h: &SubspaceProduct, idx: usize) -> Vec<DMatrix<f64>> {
    let p = h.p();
    let q = h.q;
    let embed = |b: &DMatrix<f64>, which: usize| -> DMatrix<f64> {
        let mut z = DMatrix::zeros(p + q, p + q);
        match which {
            0 | 1 => z.view_mut((0, 0), (p, p)).copy_from(b),
            2 => {
                z.view_mut((0, p), (p, q)).copy_from(b);
                z.view_mut((p, 0), (q, p)).copy_from(&b.transpose());
            }
            _ => z.view_mut((p, p), (q, q)).copy_from(b),
        }
        z
    };
    let component: Vec<DMatrix<f64>> = match idx {
        0 => h.omega.basis(),
        1 => h.t_y.basis(),
        2 => h.cross.basis(),
        _ => SupportSpace::full(q).basis(),
    };
    orthonormalize(component.iter().map(|b| embed(b, idx)).collect())
}

fn project_onto(basis: &[DMatrix<f64>], m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for b in basis {
        out += b * b.dot(m);
    }
    out
}

/// Generate a perturbed tangent within distortion ρ ≤ ω by orthonormalizing
/// a noisy basis, shrinking the noise until the budget holds.
fn perturb_tangent(
    t: &LowRankTangent,
    omega: f64,
    rng: &mut ChaCha8Rng,
) -> Result<LowRankTangent> {
    if t.rank() == 0 {
        return Ok(t.clone());
    }
    let (p1, p2) = t.shape();
    let r = t.rank();
    let mut eps = omega;
    for _ in 0..30 {
        let gu = DMatrix::from_fn(p1, r, |_, _| StandardNormal.sample(rng));
        let u = crate::model::orthonormal_basis(&(&t.u + gu * eps))?;
        let cand = if t.is_symmetric() {
            LowRankTangent::new(u.clone(), u, true)?
        } else {
            let gv = DMatrix::from_fn(p2, r, |_, _| StandardNormal.sample(rng));
            let v = crate::model::orthonormal_basis(&(&t.v + gv * eps))?;
            LowRankTangent::new(u, v, false)?
        };
        let rho = rho_distortion(t, &cand, 3, rng.gen())?;
        if rho.value <= omega {
            return Ok(cand);
        }
        eps *= 0.5;
    }
    Ok(t.clone())
}

fn subspaces_to_probe(
    h_star: &SubspaceProduct,
    omega_y: f64,
    omega_yx: f64,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<SubspaceProduct>> {
    let mut out = vec![h_star.clone()];
    for _ in 0..samples {
        let t_y = perturb_tangent(&h_star.t_y, omega_y, rng)?;
        let cross = match &h_star.cross {
            CrossSpace::LowRank(t) => CrossSpace::LowRank(perturb_tangent(t, omega_yx, rng)?),
            CrossSpace::Columns(c) => CrossSpace::Columns(c.clone()),
        };
        out.push(SubspaceProduct::new(
            h_star.omega.clone(),
            t_y,
            cross,
            h_star.q,
        )?);
    }
    Ok(out)
}

/// The separable Fisher quantities: per-component minimum gain (η1), coupling
/// between component images and their complements (η2), and the cross-norm
/// leakage of the Y-block map (η3). Evaluated at the nominal tangent spaces
/// and at sampled distortions within the (ω_Y, ω_YX) budgets.
pub fn eta_quantities(
    h_star: &SubspaceProduct,
    sigma_star: &DMatrix<f64>,
    omega_y: f64,
    omega_yx: f64,
    samples: usize,
    seed: u64,
) -> Result<EtaReport> {
    let p = h_star.p();
    let q = h_star.q;
    if sigma_star.nrows() != p + q {
        return Err(Error::invalid("covariance dimension must equal p+q"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes = subspaces_to_probe(h_star, omega_y, omega_yx, samples, &mut rng)?;
    let dim = p + q;
    let _ = dim;

    let mut eta1 = f64::INFINITY;
    let mut eta2 = 0.0f64;
    for h in &probes {
        for idx in 0..4 {
            let comp_basis: Vec<DMatrix<f64>> = match idx {
                0 => h.omega.basis(),
                1 => h.t_y.basis(),
                2 => h.cross.basis(),
                _ => SupportSpace::full(q).basis(),
            };
            if comp_basis.is_empty() {
                continue;
            }
            // component norm used by Φ_{1,1}: ℓ∞ for the sparse slot,
            // spectral elsewhere
            let comp_norm = |m: &DMatrix<f64>| -> f64 {
                if idx == 0 {
                    m.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
                } else {
                    spectral_norm(m)
                }
            };
            let project_comp = |m: &DMatrix<f64>| -> DMatrix<f64> {
                match idx {
                    0 => h.omega.project(m),
                    1 => h.t_y.project(m),
                    2 => h.cross.project(m),
                    _ => m.clone(),
                }
            };
            // η1 component: min gain of P_{H[i]} W P_{H[i]} in Φ_{1,1}
            let v1 = hill_climb(comp_basis.len(), false, 8, 150, &mut rng, |c| {
                let m = combine_mats(&comp_basis, c);
                let scale = comp_norm(&m);
                if scale < 1e-12 {
                    return None;
                }
                let e = ProductElement::from_component(idx, &m / scale, p, q);
                let img = fisher_product(sigma_star, &e);
                let img_comp = match idx {
                    0 => project_comp(&img.s),
                    1 => project_comp(&img.l),
                    2 => project_comp(&img.k),
                    _ => img.o.clone(),
                };
                Some(comp_norm(&img_comp))
            });
            if let Some(v) = v1 {
                eta1 = eta1.min(v);
            }
            // η2 component: spectral-to-spectral coupling between 𝒜(H[i])
            // and its Frobenius complement through I*
            let img_basis = image_basis(h, idx);
            if img_basis.is_empty() {
                continue;
            }
            let v2 = hill_climb(img_basis.len(), true, 8, 150, &mut rng, |c| {
                let m = combine_mats(&img_basis, c);
                let spec = spectral_norm(&m);
                if spec < 1e-12 {
                    return None;
                }
                let m = m / spec;
                let fm = fisher_apply(sigma_star, &m);
                let leak = &fm - project_onto(&img_basis, &fm);
                Some(spectral_norm(&leak))
            });
            if let Some(v) = v2 {
                eta2 = eta2.max(v);
            }
        }
    }

    // η3: Y-block map G(M) = [Σ* embed(M) Σ*]_Y; part one measures the
    // ℓ∞ → ℓ∞ gain over distorted latent tangents, part two the spectral
    // gain over the sparse support.
    let g_map = |m: &DMatrix<f64>| -> DMatrix<f64> {
        let z = embed_y(m, q);
        let w = fisher_apply(sigma_star, &z);
        w.view((0, 0), (p, p)).into()
    };
    let mut eta3 = 0.0f64;
    for h in &probes {
        let t_basis = h.t_y.basis();
        if !t_basis.is_empty() {
            let v = hill_climb(t_basis.len(), true, 8, 150, &mut rng, |c| {
                let m = combine_mats(&t_basis, c);
                let scale = m.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
                if scale < 1e-12 {
                    return None;
                }
                let img = g_map(&(&m / scale));
                Some(img.iter().fold(0.0f64, |a, &v| a.max(v.abs())))
            });
            if let Some(v) = v {
                eta3 = eta3.max(v);
            }
        }
    }
    let omega_basis = h_star.omega.basis();
    if !omega_basis.is_empty() {
        let v = hill_climb(omega_basis.len(), true, 8, 150, &mut rng, |c| {
            let m = combine_mats(&omega_basis, c);
            let spec = spectral_norm(&m);
            if spec < 1e-12 {
                return None;
            }
            Some(spectral_norm(&g_map(&(&m / spec))))
        });
        if let Some(v) = v {
            eta3 = eta3.max(v);
        }
    }

    let mode = format!("sampled-over-U({samples} distortions)");
    Ok(EtaReport {
        eta1: DiagnosticValue::new(
            "eta1",
            if eta1.is_finite() { eta1 } else { 0.0 },
            &mode,
            Certificate::Sampled,
        ),
        eta2: DiagnosticValue::new("eta2", eta2, &mode, Certificate::Sampled),
        eta3: DiagnosticValue::new("eta3", eta3, &mode, Certificate::Sampled),
    })
}

// ---------------------------------------------------------------------------
// the polyhedral parameter set and theorem constants
// ---------------------------------------------------------------------------

/// Which of the four sufficient conditions hold; the gain conditions need η1
/// and η3, which the caller supplies separately via [`PolyhedralSetV::check_gains`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionChecks {
    /// η1 ≥ 2α (None until η1 is supplied).
    pub gain: Option<bool>,
    /// η2 below the four-way minimum threshold.
    pub coupling: bool,
    /// η3 ≤ √(α/β) (None until η3 is supplied).
    pub leakage: Option<bool>,
    /// Degree/incoherence transversality bound.
    pub transversality: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolyhedralSetV {
    pub alpha: f64,
    pub beta: f64,
    pub eta2: f64,
    pub deg: f64,
    pub delta_interval: (f64, f64),
    pub nonempty: bool,
    pub conditions: ConditionChecks,
}

impl PolyhedralSetV {
    /// Admissible γ interval for a given δ.
    pub fn gamma_interval(&self, delta: f64) -> (f64, f64) {
        let lo = 1.0f64.max(self.eta2 * self.deg * delta * 2.0 * self.beta / self.alpha);
        let hi = if self.eta2 > 0.0 {
            delta.min(1.0) / self.eta2 * (self.alpha / self.beta)
        } else {
            f64::INFINITY
        };
        (lo, hi)
    }

    /// Midpoint of the set, when nonempty: central δ with a feasible γ.
    pub fn midpoint(&self) -> Option<(f64, f64)> {
        if !self.nonempty {
            return None;
        }
        let (d_lo, d_hi) = self.delta_interval;
        let steps = 100;
        let mut feasible = Vec::new();
        for i in 0..=steps {
            let d = d_lo + (d_hi - d_lo) * i as f64 / steps as f64;
            let (g_lo, g_hi) = self.gamma_interval(d);
            if g_lo <= g_hi {
                feasible.push(d);
            }
        }
        let d = feasible.get(feasible.len() / 2).copied()?;
        let (g_lo, g_hi) = self.gamma_interval(d);
        let g = if g_hi.is_finite() {
            0.5 * (g_lo + g_hi)
        } else {
            g_lo
        };
        Some((d, g))
    }

    /// Fill in the η1/η3 conditions once those quantities are available.
    pub fn check_gains(&mut self, eta1: f64, eta3: f64) {
        self.conditions.gain = Some(eta1 >= 2.0 * self.alpha);
        self.conditions.leakage = Some(eta3 <= (self.alpha / self.beta).sqrt());
    }
}

/// The sufficient (δ, γ) region for the Fisher assumptions, from the
/// separable quantities: δ bounded between an incoherence-driven floor and a
/// degree-driven ceiling, with a matching γ interval per δ.
pub fn polyhedral_set_v(
    alpha: f64,
    nu: f64,
    omega_y: f64,
    omega_yx: f64,
    inc_val: f64,
    deg_val: f64,
    eta2: f64,
) -> Result<PolyhedralSetV> {
    if alpha <= 0.0 {
        return Err(Error::invalid("alpha must be positive"));
    }
    if !(0.0..1.0 / 3.0).contains(&nu) || nu == 0.0 {
        return Err(Error::invalid("nu must lie in (0, 1/3)"));
    }
    for w in [omega_y, omega_yx] {
        if !(0.0..1.0).contains(&w) || w == 0.0 {
            return Err(Error::invalid("omega parameters must lie in (0, 1)"));
        }
    }
    let beta = (3.0 - nu) / nu;
    let delta_lo = (2.0 * inc_val + omega_y) / (4.0 * (1.0 - omega_y)) * (beta / alpha).sqrt();
    let delta_hi = if deg_val > 0.0 {
        2.0 / deg_val * (alpha / beta).sqrt()
    } else {
        f64::INFINITY
    };

    let coupling_bound = (alpha * (1.0 - 3.0 / (1.0 + beta)))
        .min((alpha / beta).sqrt() * (2.0 * inc_val + omega_y) / (4.0 * (1.0 - omega_y)))
        .min(if deg_val > 0.0 {
            alpha / (beta * (2.0 * deg_val).sqrt())
        } else {
            f64::INFINITY
        })
        .min(0.5 * (alpha / beta).powf(1.5));
    let coupling = eta2 <= coupling_bound;
    let transversality =
        (2.0 * inc_val + omega_y) / (1.0 - omega_y) * deg_val <= 8.0 * alpha / beta;

    let mut set = PolyhedralSetV {
        alpha,
        beta,
        eta2,
        deg: deg_val,
        delta_interval: (delta_lo, delta_hi),
        nonempty: false,
        conditions: ConditionChecks {
            gain: None,
            coupling,
            leakage: None,
            transversality,
        },
    };
    if delta_lo <= delta_hi {
        let steps = 200;
        for i in 0..=steps {
            let d = delta_lo + (delta_hi - delta_lo) * i as f64 / steps as f64;
            let (g_lo, g_hi) = set.gamma_interval(d);
            if g_lo <= g_hi {
                set.nonempty = true;
                break;
            }
        }
    }
    Ok(set)
}

/// Which recovery theorem's constants to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TheoremKind {
    /// Low-rank cross block (nuclear-norm estimator).
    LowRankCross,
    /// Column-sparse cross block (group-norm estimator); uses max{deg, κ}.
    ColumnSparseCross,
}

/// Every constant in the structural-recovery guarantee, evaluated verbatim.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremConstants {
    pub kind: TheoremKind,
    pub m: f64,
    pub m_bar: f64,
    pub beta: f64,
    pub psi: f64,
    pub c1: f64,
    pub c2: f64,
    /// C_{σY} for the low-rank theorem, C_σ for the column-sparse one.
    pub c_sigma_y: f64,
    /// Only the low-rank theorem has a separate cross-block constant.
    pub c_sigma_yx: Option<f64>,
    pub c_samp: f64,
    pub lambda_upper: f64,
    pub lambda_lower: f64,
    /// Admissible λ interval; None when n < n_min.
    pub lambda_range: Option<(f64, f64)>,
    pub n_min: f64,
    /// Minimum-magnitude thresholds of the signal conditions, evaluated at
    /// λ = lambda_lower (the most favorable admissible choice).
    pub tau_min: f64,
    pub sigma_y_min: f64,
    pub sigma_yx_min: Option<f64>,
    pub zeta_min: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn theorem_constants(
    kind: TheoremKind,
    alpha: f64,
    nu: f64,
    psi: f64,
    delta: f64,
    gamma: f64,
    deg: usize,
    kappa: Option<usize>,
    omega_y: f64,
    omega_yx: f64,
    p_plus_q: usize,
    n: usize,
) -> Result<TheoremConstants> {
    if alpha <= 0.0 || psi <= 0.0 || delta <= 0.0 || gamma <= 0.0 {
        return Err(Error::invalid("alpha, psi, delta, gamma must be positive"));
    }
    if !(0.0..1.0 / 3.0).contains(&nu) || nu == 0.0 {
        return Err(Error::invalid("nu must lie in (0, 1/3)"));
    }
    let m = (1.0 / delta).max(1.0).max(1.0 / gamma);
    let m_bar = delta.max(1.0).max(gamma);
    let beta = (3.0 - nu) / nu;
    let c1 = 24.0 / alpha + 1.0 / (psi * psi);
    let c2 = match kind {
        TheoremKind::LowRankCross => 4.0 / alpha * (1.0 / (3.0 * beta) + 1.0),
        TheoremKind::ColumnSparseCross => 8.0 / alpha * (1.0 / (3.0 * beta) + 1.0),
    };
    let c1sq_psi2 = c1 * c1 * psi * psi;
    let c_sigma_y = match kind {
        TheoremKind::LowRankCross => {
            c1sq_psi2 * (12.0 * beta + 1.0).max(2.0 / (c2 * psi * psi) + 1.0)
        }
        TheoremKind::ColumnSparseCross => {
            c1sq_psi2 * (12.0 * beta + 1.0).max(1.0 / (c2 * psi * psi) + 1.0)
        }
    };
    let c_sigma_yx = match kind {
        TheoremKind::LowRankCross => {
            Some(c1sq_psi2 * (18.0 * beta).max(2.0 / (c2 * psi * psi) + 6.0 * beta))
        }
        TheoremKind::ColumnSparseCross => None,
    };
    let c_samp = (1.0 / (48.0 * psi * beta))
        .max(48.0 * beta * psi.powi(3) * c1 * c1)
        .max(8.0 * psi * c2)
        .max(128.0 * psi.powi(3) * c2 / alpha);
    let effective_deg = match kind {
        TheoremKind::LowRankCross => deg as f64,
        TheoremKind::ColumnSparseCross => {
            let kappa = kappa
                .ok_or_else(|| Error::invalid("column-sparse constants require kappa"))?;
            (deg as f64).max(kappa as f64)
        }
    };
    let lambda_upper = 1.0 / (m * m_bar * m_bar * effective_deg * c_samp);
    let lambda_lower =
        (4608.0 * psi * psi * beta * beta * m * m * p_plus_q as f64 / n as f64).sqrt();
    let n_min = 4608.0 * psi * psi * beta * beta * m * m * p_plus_q as f64
        / (lambda_upper * lambda_upper);
    let lambda_range = if lambda_lower <= lambda_upper {
        Some((lambda_lower, lambda_upper))
    } else {
        None
    };
    let lam = lambda_lower;
    let (tau_min, sigma_y_min, sigma_yx_min, zeta_min) = match kind {
        TheoremKind::LowRankCross => (
            2.0 * c1 * delta * lam,
            m / omega_y * c_sigma_y * lam,
            Some(m * m / omega_yx * c_sigma_yx.unwrap() * gamma * gamma * lam),
            None,
        ),
        TheoremKind::ColumnSparseCross => (
            2.0 * delta * c1 * lam,
            m * c_sigma_y * lam,
            None,
            Some(2.0 * gamma * c1 * lam),
        ),
    };
    Ok(TheoremConstants {
        kind,
        m,
        m_bar,
        beta,
        psi,
        c1,
        c2,
        c_sigma_y,
        c_sigma_yx,
        c_samp,
        lambda_upper,
        lambda_lower,
        lambda_range,
        n_min,
        tau_min,
        sigma_y_min,
        sigma_yx_min,
        zeta_min,
    })
}
