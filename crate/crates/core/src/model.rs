//! Block algebra on joint precision matrices, the precision/covariance duality
//! of the best-linear-predictor map, conditional Gaussian evaluation, model
//! complexity accounting and subspace comparison.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative asymmetry above which a matrix is rejected instead of symmetrized.
const SYMMETRY_TOL: f64 = 1e-8;

/// Symmetrize `m` as (M + M')/2, rejecting inputs whose asymmetry exceeds the
/// relative tolerance. Roundoff-level asymmetry is silently repaired.
pub fn symmetrize(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid(format!(
            "expected square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let asym = (m - m.transpose()).norm();
    let scale = m.norm().max(1.0);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::invalid(format!(
            "matrix is not symmetric (relative asymmetry {:.3e})",
            asym / scale
        )));
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Numerical rank with the shared singular value threshold:
/// σ below `max(nrows, ncols) · eps · σ_max · 10` count as zero.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    rank_with_threshold(m, None)
}

pub fn rank_with_threshold(m: &DMatrix<f64>, threshold: Option<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let svals = m.clone().singular_values();
    let smax = svals.max();
    if smax == 0.0 {
        return 0;
    }
    let tol = threshold
        .unwrap_or_else(|| m.nrows().max(m.ncols()) as f64 * f64::EPSILON * smax * 10.0);
    svals.iter().filter(|&&s| s > tol).count()
}

/// Symmetric positive-definite joint precision matrix over responses and
/// covariates, with named block views.
#[derive(Debug, Clone)]
pub struct JointPrecision {
    p: usize,
    q: usize,
    theta: DMatrix<f64>,
}

impl JointPrecision {
    /// Build from a full (p+q)x(p+q) matrix; symmetrizes on construction.
    pub fn new(theta: DMatrix<f64>, p: usize, q: usize) -> Result<Self> {
        if theta.nrows() != p + q || theta.ncols() != p + q {
            return Err(Error::invalid(format!(
                "expected {}x{} matrix, got {}x{}",
                p + q,
                p + q,
                theta.nrows(),
                theta.ncols()
            )));
        }
        let theta = symmetrize(&theta)?;
        Ok(JointPrecision { p, q, theta })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.p + self.q
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.theta
    }

    pub fn theta_y(&self) -> DMatrix<f64> {
        self.theta.view((0, 0), (self.p, self.p)).into()
    }

    pub fn theta_yx(&self) -> DMatrix<f64> {
        self.theta.view((0, self.p), (self.p, self.q)).into()
    }

    pub fn theta_x(&self) -> DMatrix<f64> {
        self.theta.view((self.p, self.p), (self.q, self.q)).into()
    }

    /// Smallest eigenvalue; a valid model requires it to be positive.
    pub fn min_eigenvalue(&self) -> f64 {
        self.theta
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }

    pub fn is_positive_definite(&self) -> bool {
        self.min_eigenvalue() > 0.0
    }

    /// Joint covariance Σ = Θ⁻¹.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        self.theta
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::numerical("precision matrix is not positive definite"))
    }
}

/// The quadruple (S_Y, L_Y, Θ_YX, Θ_X) underlying the structured model;
/// the assembled joint matrix has Y-block S_Y − L_Y.
#[derive(Debug, Clone)]
pub struct StructuredParams {
    pub s_y: DMatrix<f64>,
    pub l_y: DMatrix<f64>,
    pub theta_yx: DMatrix<f64>,
    pub theta_x: DMatrix<f64>,
}

impl StructuredParams {
    pub fn new(
        s_y: DMatrix<f64>,
        l_y: DMatrix<f64>,
        theta_yx: DMatrix<f64>,
        theta_x: DMatrix<f64>,
    ) -> Result<Self> {
        let p = s_y.nrows();
        let q = theta_x.nrows();
        if s_y.ncols() != p || l_y.nrows() != p || l_y.ncols() != p {
            return Err(Error::invalid("S_Y and L_Y must be square of matching size"));
        }
        if theta_yx.nrows() != p || theta_yx.ncols() != q || theta_x.ncols() != q {
            return Err(Error::invalid("cross/covariate block dimensions inconsistent"));
        }
        Ok(StructuredParams {
            s_y: symmetrize(&s_y)?,
            l_y: symmetrize(&l_y)?,
            theta_yx,
            theta_x: symmetrize(&theta_x)?,
        })
    }

    pub fn zeros(p: usize, q: usize) -> Self {
        StructuredParams {
            s_y: DMatrix::zeros(p, p),
            l_y: DMatrix::zeros(p, p),
            theta_yx: DMatrix::zeros(p, q),
            theta_x: DMatrix::zeros(q, q),
        }
    }

    pub fn p(&self) -> usize {
        self.s_y.nrows()
    }

    pub fn q(&self) -> usize {
        self.theta_x.nrows()
    }
}

/// Estimator variant selecting the structural penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Factor model on the conditional: diagonal minus low-rank Y block.
    SdrFm,
    /// Sparse graphical model on the conditional Y block.
    SdrGm,
    /// Sparse-plus-low-rank (latent variable) conditional Y block.
    SdrLvgm,
    /// Column-sparse cross block with latent-variable conditional model.
    CsLvgm,
    /// Column-sparse cross block with sparse conditional model.
    CsGm,
}

impl Variant {
    pub fn uses_latent(&self) -> bool {
        matches!(self, Variant::SdrFm | Variant::SdrLvgm | Variant::CsLvgm)
    }

    pub fn uses_column_sparsity(&self) -> bool {
        matches!(self, Variant::CsLvgm | Variant::CsGm)
    }

    pub fn uses_delta(&self) -> bool {
        matches!(self, Variant::SdrLvgm | Variant::CsLvgm)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::SdrFm => "sdr-fm",
            Variant::SdrGm => "sdr-gm",
            Variant::SdrLvgm => "sdr-lvgm",
            Variant::CsLvgm => "cs-lvgm",
            Variant::CsGm => "cs-gm",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "sdr-fm" => Ok(Variant::SdrFm),
            "sdr-gm" => Ok(Variant::SdrGm),
            "sdr-lvgm" => Ok(Variant::SdrLvgm),
            "cs-lvgm" => Ok(Variant::CsLvgm),
            "cs-gm" => Ok(Variant::CsGm),
            other => Err(Error::invalid(format!("unknown variant '{other}'"))),
        }
    }
}

/// Regularization configuration: variant plus (λ_n, γ, δ).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegConfig {
    pub variant: Variant,
    pub lambda_n: f64,
    pub gamma: f64,
    pub delta: f64,
    pub penalize_diagonal: bool,
}

impl RegConfig {
    pub fn new(variant: Variant, lambda_n: f64, gamma: f64, delta: f64) -> Result<Self> {
        if lambda_n < 0.0 {
            return Err(Error::invalid("lambda_n must be nonnegative"));
        }
        if lambda_n > 0.0 && gamma <= 0.0 {
            return Err(Error::invalid("gamma must be positive"));
        }
        if lambda_n > 0.0 && variant.uses_delta() && delta <= 0.0 {
            return Err(Error::invalid("delta must be positive for this variant"));
        }
        Ok(RegConfig {
            variant,
            lambda_n,
            gamma,
            delta,
            penalize_diagonal: true,
        })
    }

    pub fn with_diagonal_penalty(mut self, penalize: bool) -> Self {
        self.penalize_diagonal = penalize;
        self
    }
}

/// Parameter count of a fitted model, split by component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexitySummary {
    pub node_params: usize,
    pub edge_params: usize,
    pub latent_rank_params: usize,
    pub cross_rank_params: usize,
    pub total: usize,
}

/// Assemble the joint symmetric matrix [[S−L, K],[K', O]].
pub fn assemble(params: &StructuredParams) -> DMatrix<f64> {
    let p = params.p();
    let q = params.q();
    let mut out = DMatrix::zeros(p + q, p + q);
    let y = &params.s_y - &params.l_y;
    out.view_mut((0, 0), (p, p)).copy_from(&y);
    out.view_mut((0, p), (p, q)).copy_from(&params.theta_yx);
    out.view_mut((p, 0), (q, p))
        .copy_from(&params.theta_yx.transpose());
    out.view_mut((p, p), (q, q)).copy_from(&params.theta_x);
    out
}

/// Split a symmetric (p+q)-matrix into the quadruple (Z_Y, Z_Y, Z_YX, Z_X).
pub fn split_adjoint(z: &DMatrix<f64>, p: usize, q: usize) -> Result<StructuredParams> {
    if z.nrows() != p + q || z.ncols() != p + q {
        return Err(Error::invalid(format!(
            "expected {}x{} matrix, got {}x{}",
            p + q,
            p + q,
            z.nrows(),
            z.ncols()
        )));
    }
    let z_y: DMatrix<f64> = z.view((0, 0), (p, p)).into();
    Ok(StructuredParams {
        s_y: z_y.clone(),
        l_y: z_y,
        theta_yx: z.view((0, p), (p, q)).into(),
        theta_x: z.view((p, p), (q, q)).into(),
    })
}

/// Best-linear-predictor map B = −Θ_Y⁻¹ Θ_YX; equals Σ_YX Σ_X⁻¹ for any
/// positive-definite joint precision. Its row space is the dimension
/// reduction of the covariates.
pub fn sdr_map(theta: &JointPrecision) -> Result<DMatrix<f64>> {
    let theta_y = theta.theta_y();
    let chol = theta_y.clone().cholesky().ok_or_else(|| {
        let svals = theta_y.singular_values();
        let cond = svals.max() / svals.min().max(f64::MIN_POSITIVE);
        Error::numerical(format!(
            "theta_Y is singular or indefinite (condition number ~{cond:.3e})"
        ))
    })?;
    Ok(-chol.solve(&theta.theta_yx()))
}

/// Log-density of N(−Θ_Y⁻¹ Θ_YX x, Θ_Y⁻¹) at y.
pub fn conditional_loglik(
    theta_y: &DMatrix<f64>,
    theta_yx: &DMatrix<f64>,
    y: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<f64> {
    let p = theta_y.nrows();
    if y.len() != p || theta_yx.nrows() != p || theta_yx.ncols() != x.len() {
        return Err(Error::invalid("dimension mismatch in conditional density"));
    }
    let chol = theta_y
        .clone()
        .cholesky()
        .ok_or_else(|| Error::invalid("theta_Y must be positive definite"))?;
    // log det Θ_Y from the Cholesky factor diagonal
    let logdet: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let mu = -chol.solve(&(theta_yx * x));
    let r = y - mu;
    let quad = (theta_y * &r).dot(&r);
    Ok(0.5 * logdet - 0.5 * p as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * quad)
}

/// Parameter count: p node terms, one per edge, rank-h symmetric low-rank
/// factor and rank-k p x q factor.
pub fn count_parameters(
    p: usize,
    q: usize,
    edges: usize,
    latent_rank: usize,
    cross_rank: usize,
) -> Result<ComplexitySummary> {
    if latent_rank > p || cross_rank > p.min(q) {
        return Err(Error::invalid("rank exceeds matrix dimensions"));
    }
    let latent = latent_rank * p - latent_rank * latent_rank.saturating_sub(1) / 2;
    let cross = cross_rank * (p + q) - cross_rank * cross_rank;
    Ok(ComplexitySummary {
        node_params: p,
        edge_params: edges,
        latent_rank_params: latent,
        cross_rank_params: cross,
        total: p + edges + latent + cross,
    })
}

/// Orthonormal basis of the column space of `m` via thin SVD.
pub fn orthonormal_basis(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let r = numerical_rank(m);
    if r == 0 {
        return Err(Error::invalid("zero or rank-deficient basis matrix"));
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.ok_or_else(|| Error::numerical("SVD failed"))?;
    Ok(u.columns(0, r).into())
}

/// Principal angles (degrees, ascending) between the column spaces of two
/// full-column-rank bases.
pub fn principal_angles(u1: &DMatrix<f64>, u2: &DMatrix<f64>) -> Result<Vec<f64>> {
    if u1.nrows() != u2.nrows() {
        return Err(Error::invalid("bases live in different ambient spaces"));
    }
    if numerical_rank(u1) < u1.ncols() || numerical_rank(u2) < u2.ncols() {
        return Err(Error::invalid("rank-deficient basis"));
    }
    let q1 = orthonormal_basis(u1)?;
    let q2 = orthonormal_basis(u2)?;
    let prod = q1.transpose() * &q2;
    let svals = prod.singular_values();
    let mut angles: Vec<f64> = svals
        .iter()
        .map(|s| s.clamp(-1.0, 1.0).acos().to_degrees())
        .collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    angles.truncate(q1.ncols().min(q2.ncols()));
    Ok(angles)
}

/// Mean-centered second moment matrix, divided by n (the ML normalization).
pub fn sample_covariance(data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let d = data.ncols();
    let mean = data.row_mean();
    let mut centered = data.clone();
    for i in 0..n {
        centered.row_mut(i).zip_apply(&mean, |v, m| *v -= m);
    }
    let cov = centered.transpose() * &centered / n as f64;
    // numerically symmetric already, but keep the invariant exact
    Ok(DMatrix::from_fn(d, d, |i, j| {
        0.5 * (cov[(i, j)] + cov[(j, i)])
    }))
}

/// Conditional covariance decomposition of a factor model: with precision
/// D − L (D diagonal PD, L PSD of rank h), returns (D⁻¹, F) such that
/// (D − L)⁻¹ = D⁻¹ + F F' with rank(F F') = h, via the Woodbury identity.
pub fn fm_factor_report(d: &DMatrix<f64>, l: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p = d.nrows();
    if l.nrows() != p || l.ncols() != p || d.ncols() != p {
        return Err(Error::invalid("dimension mismatch"));
    }
    for i in 0..p {
        for j in 0..p {
            if i != j && d[(i, j)] != 0.0 {
                return Err(Error::invalid("D must be diagonal"));
            }
        }
    }
    let prec = d - l;
    if prec.clone().cholesky().is_none() {
        return Err(Error::invalid("D - L must be positive definite"));
    }
    let d_inv = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 / d[(i, i)] } else { 0.0 });

    // factor L = B B' from its eigendecomposition
    let eig = symmetrize(l)?.symmetric_eigen();
    let tol = p as f64 * f64::EPSILON * eig.eigenvalues.amax().max(1.0) * 10.0;
    let idx: Vec<usize> = (0..p).filter(|&i| eig.eigenvalues[i] > tol).collect();
    let h = idx.len();
    if h == 0 {
        return Ok((d_inv, DMatrix::zeros(p, 0)));
    }
    let mut b = DMatrix::zeros(p, h);
    for (c, &i) in idx.iter().enumerate() {
        b.set_column(c, &(eig.eigenvectors.column(i) * eig.eigenvalues[i].sqrt()));
    }
    // Woodbury: (D - BB')⁻¹ = D⁻¹ + D⁻¹B (I - B'D⁻¹B)⁻¹ B'D⁻¹
    let m = DMatrix::identity(h, h) - b.transpose() * &d_inv * &b;
    let m_eig = m.symmetric_eigen();
    if m_eig.eigenvalues.iter().any(|&e| e <= 0.0) {
        return Err(Error::invalid("D - L must be positive definite"));
    }
    let mut m_inv_sqrt = DMatrix::zeros(h, h);
    for i in 0..h {
        m_inv_sqrt += m_eig.eigenvectors.column(i) * m_eig.eigenvectors.column(i).transpose()
            / m_eig.eigenvalues[i].sqrt();
    }
    let f = &d_inv * &b * m_inv_sqrt;
    Ok((d_inv, f))
}
