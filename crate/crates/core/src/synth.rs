//! Ground-truth population construction and Gaussian sampling.
//!
//! Populations are built to land in the regime the recovery theory favors:
//! low-degree sparse conditional graphs, incoherent low-rank latent pieces,
//! and comfortable margins on the minimum nonzero magnitudes.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{assemble, JointPrecision, StructuredParams};

/// Recipe for a synthetic population.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub p: usize,
    pub q: usize,
    /// Rank of the cross block Θ*_YX.
    pub k: usize,
    /// Latent count: rank of L*_Y.
    pub h: usize,
    /// Per-row/column cap on off-diagonal nonzeros of S*_Y.
    pub max_degree: usize,
    /// Magnitude range for off-diagonal sparse entries.
    pub sparse_range: (f64, f64),
    /// Scale of the low-rank piece L*_Y = c·QQ'.
    pub lowrank_scale: f64,
    /// Singular-value range for the cross block.
    pub cross_range: (f64, f64),
    /// Increment added to diag(S*_Y) per positive-definiteness retry.
    pub diagonal_boost: f64,
    /// Restrict the cross block to this many nonzero columns (κ); `None`
    /// spreads it over all q columns.
    pub column_support: Option<usize>,
    pub seed: u64,
}

impl PopulationSpec {
    /// Reference-scale default used throughout the experiment suite.
    pub fn new(p: usize, q: usize, k: usize, h: usize, max_degree: usize, seed: u64) -> Self {
        PopulationSpec {
            p,
            q,
            k,
            h,
            max_degree,
            sparse_range: (0.2, 0.5),
            lowrank_scale: 0.6,
            cross_range: (0.4, 0.8),
            diagonal_boost: 0.1,
            column_support: None,
            seed,
        }
    }

    /// The p=20, q=4, k=2, h=2, deg ≤ 3 population the regularization scale
    /// was calibrated against: near-uniform partial-correlation magnitudes
    /// and a slightly stronger latent block than [`PopulationSpec::new`]
    /// picks, which keeps every structural margin away from the noise floor.
    pub fn benchmark(seed: u64) -> Self {
        let mut spec = PopulationSpec::new(20, 4, 2, 2, 3, seed);
        spec.sparse_range = (0.45, 0.55);
        spec.lowrank_scale = 1.2;
        spec.cross_range = (0.6, 1.0);
        spec
    }

    fn validate(&self) -> Result<()> {
        if self.p == 0 || self.q == 0 {
            return Err(Error::invalid("p and q must be positive"));
        }
        if self.k > self.p.min(self.q) {
            return Err(Error::invalid("cross-block rank k must satisfy k <= min(p, q)"));
        }
        if self.h >= self.p && self.h != 0 {
            return Err(Error::invalid("latent count h must satisfy h < p"));
        }
        if self.max_degree >= self.p && self.max_degree != 0 {
            return Err(Error::invalid("max_degree must satisfy max_degree < p"));
        }
        if let Some(kappa) = self.column_support {
            if kappa > self.q || kappa < self.k {
                return Err(Error::invalid(
                    "column support size must lie in [k, q]",
                ));
            }
        }
        if self.sparse_range.0 <= 0.0 || self.sparse_range.1 < self.sparse_range.0 {
            return Err(Error::invalid("sparse magnitude range must be positive and ordered"));
        }
        if self.cross_range.0 <= 0.0 || self.cross_range.1 < self.cross_range.0 {
            return Err(Error::invalid("cross singular-value range must be positive and ordered"));
        }
        if self.diagonal_boost <= 0.0 {
            return Err(Error::invalid("diagonal boost must be positive"));
        }
        Ok(())
    }
}

/// Population metadata: the magnitude/degree/incoherence quantities the
/// recovery conditions are stated in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationMetadata {
    /// Minimum nonzero off-diagonal magnitude of S*_Y (0 if none).
    pub tau_y: f64,
    /// Smallest nonzero eigenvalue of L*_Y (0 if h = 0).
    pub sigma_y: f64,
    /// Smallest nonzero singular value of Θ*_YX (0 if k = 0).
    pub sigma_yx: f64,
    /// Minimum ℓ2 norm over nonzero columns of Θ*_YX (0 if none).
    pub zeta_yx: f64,
    /// Max nonzeros per row/column of S*_Y (diagonal included).
    pub deg: usize,
    /// Incoherence of the row space of L*_Y (0 if h = 0).
    pub inc: f64,
    /// Number of nonzero columns of Θ*_YX.
    pub kappa: usize,
}

#[derive(Debug, Clone)]
pub struct PopulationModel {
    pub spec: PopulationSpec,
    pub theta_star: JointPrecision,
    pub params_star: StructuredParams,
    pub metadata: PopulationMetadata,
}

fn orthonormal_gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    let g = DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng));
    crate::model::orthonormal_basis(&g)
}

/// Orthonormal basis with near-uniform row norms: random-sign columns with a
/// small Gaussian jitter, then orthonormalized. Keeps the incoherence of the
/// spanned subspace close to the √(cols/rows) floor, which the recovery
/// conditions need from the latent block.
fn orthonormal_spread(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    let g = DMatrix::from_fn(rows, cols, |_, _| {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let jitter: f64 = StandardNormal.sample(rng);
        sign + 0.05 * jitter
    });
    crate::model::orthonormal_basis(&g)
}

/// Random symmetric sparse matrix with a hard per-row/column degree cap on
/// off-diagonal nonzeros. Entries are uniform in ±[range]; diagonal starts at
/// 1 and is boosted later for positive definiteness.
fn degree_capped_sparse(
    p: usize,
    max_degree: usize,
    range: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(p, p);
    for i in 0..p {
        s[(i, i)] = 1.0;
    }
    if max_degree == 0 || p < 2 {
        return s;
    }
    let mut degree = vec![0usize; p];
    let mut pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
        .collect();
    // Fisher–Yates shuffle keyed by the population seed stream
    for idx in (1..pairs.len()).rev() {
        let swap = rng.gen_range(0..=idx);
        pairs.swap(idx, swap);
    }
    // aim to spend roughly half the degree budget so populations are not
    // saturated at the cap
    let target_edges = (p * max_degree) / 2;
    let mut placed = 0usize;
    for (i, j) in pairs {
        if placed >= target_edges {
            break;
        }
        if degree[i] >= max_degree || degree[j] >= max_degree {
            continue;
        }
        let magnitude = rng.gen_range(range.0..=range.1);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        s[(i, j)] = sign * magnitude;
        s[(j, i)] = sign * magnitude;
        degree[i] += 1;
        degree[j] += 1;
        placed += 1;
    }
    s
}

/// Build the ground-truth model for a spec.
pub fn make_population(spec: &PopulationSpec) -> Result<PopulationModel> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p = spec.p;
    let q = spec.q;

    let mut s_y = degree_capped_sparse(p, spec.max_degree, spec.sparse_range, &mut rng);

    let l_y = if spec.h > 0 {
        let qmat = orthonormal_spread(p, spec.h, &mut rng)?;
        &qmat * qmat.transpose() * spec.lowrank_scale
    } else {
        DMatrix::zeros(p, p)
    };

    let theta_yx = if spec.k > 0 {
        let kappa = spec.column_support.unwrap_or(q);
        let u = orthonormal_gaussian(p, spec.k, &mut rng)?;
        let v_small = orthonormal_gaussian(kappa, spec.k, &mut rng)?;
        let singulars = DVector::from_fn(spec.k, |_, _| {
            rng.gen_range(spec.cross_range.0..=spec.cross_range.1)
        });
        let core = &u * DMatrix::from_diagonal(&singulars) * v_small.transpose();
        if kappa == q {
            core
        } else {
            // embed into the first κ columns; the support set itself is what
            // the screening variants must recover, its position is immaterial
            let mut wide = DMatrix::zeros(p, q);
            wide.view_mut((0, 0), (p, kappa)).copy_from(&core);
            wide
        }
    } else {
        DMatrix::zeros(p, q)
    };

    // diagonally dominant covariate block
    let mut theta_x = DMatrix::zeros(q, q);
    for i in 0..q {
        theta_x[(i, i)] = 1.0 + rng.gen_range(0.0..0.5);
    }
    for i in 0..q {
        for j in (i + 1)..q {
            let v = rng.gen_range(-0.1..0.1);
            theta_x[(i, j)] = v;
            theta_x[(j, i)] = v;
        }
    }

    // boost diag(S*_Y) until the joint precision clears the floor
    let mut boosted = s_y.clone();
    let mut model = None;
    for attempt in 0..100 {
        let params = StructuredParams::new(
            boosted.clone(),
            l_y.clone(),
            theta_yx.clone(),
            theta_x.clone(),
        )?;
        let theta = assemble(&params);
        let min_eig = theta.clone().symmetric_eigen().eigenvalues.min();
        if min_eig >= 0.7 {
            model = Some((params, theta));
            break;
        }
        let _ = attempt;
        for i in 0..p {
            boosted[(i, i)] += spec.diagonal_boost;
        }
    }
    let (params, theta) = model.ok_or_else(|| {
        Error::ConstructionFailure(
            "diagonal boost budget exhausted before positive definiteness".into(),
        )
    })?;
    s_y = boosted;

    let metadata = compute_metadata(&s_y, &params.l_y, &params.theta_yx)?;
    Ok(PopulationModel {
        spec: spec.clone(),
        theta_star: JointPrecision::new(theta, p, q)?,
        params_star: params,
        metadata,
    })
}

fn compute_metadata(
    s_y: &DMatrix<f64>,
    l_y: &DMatrix<f64>,
    theta_yx: &DMatrix<f64>,
) -> Result<PopulationMetadata> {
    let p = s_y.nrows();
    let q = theta_yx.ncols();

    let mut tau_y = f64::INFINITY;
    let mut any_offdiag = false;
    let mut deg = 0usize;
    for i in 0..p {
        let mut row_count = 0usize;
        for j in 0..p {
            if s_y[(i, j)] != 0.0 {
                row_count += 1;
                if i != j {
                    any_offdiag = true;
                    tau_y = tau_y.min(s_y[(i, j)].abs());
                }
            }
        }
        deg = deg.max(row_count);
    }
    if !any_offdiag {
        // degenerate graph: fall back to the minimum diagonal magnitude
        tau_y = (0..p).map(|i| s_y[(i, i)].abs()).fold(f64::INFINITY, f64::min);
        if !tau_y.is_finite() {
            tau_y = 0.0;
        }
    }

    let eig = l_y.clone().symmetric_eigen();
    let max_eig = eig.eigenvalues.max();
    let eig_tol = (p as f64) * f64::EPSILON * max_eig.abs().max(1.0) * 10.0;
    let sigma_y = eig
        .eigenvalues
        .iter()
        .filter(|&&e| e > eig_tol)
        .fold(f64::INFINITY, |a, &b| a.min(b));
    let sigma_y = if sigma_y.is_finite() { sigma_y } else { 0.0 };

    let (sigma_yx, zeta_yx, kappa) = if theta_yx.iter().all(|&v| v == 0.0) {
        (0.0, 0.0, 0)
    } else {
        let svals = theta_yx.clone().singular_values();
        let smax = svals.max();
        let tol = (p.max(q) as f64) * f64::EPSILON * smax * 10.0;
        let smin = svals
            .iter()
            .filter(|&&s| s > tol)
            .fold(f64::INFINITY, |a, &b| a.min(b));
        let mut zeta = f64::INFINITY;
        let mut kappa = 0usize;
        for j in 0..q {
            let norm = theta_yx.column(j).norm();
            if norm > 0.0 {
                kappa += 1;
                zeta = zeta.min(norm);
            }
        }
        (smin, zeta, kappa)
    };

    let inc = if sigma_y > 0.0 {
        crate::diagnostics::incoherence(l_y)?
    } else {
        0.0
    };

    Ok(PopulationMetadata {
        tau_y,
        sigma_y,
        sigma_yx,
        zeta_yx,
        deg,
        inc,
        kappa,
    })
}

/// Recompute the metadata record from the stored matrices.
pub fn describe(pop: &PopulationModel) -> Result<PopulationMetadata> {
    compute_metadata(
        &pop.params_star.s_y,
        &pop.params_star.l_y,
        &pop.params_star.theta_yx,
    )
}

/// Draw `n` i.i.d. rows from N(0, Σ*) with Σ* = Θ*⁻¹.
pub fn sample(pop: &PopulationModel, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let sigma = pop.theta_star.covariance()?;
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    let chol = sigma
        .cholesky()
        .ok_or_else(|| Error::numerical("population covariance is not positive definite"))?;
    let l = chol.l();
    let dim = pop.spec.p + pop.spec.q;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = DMatrix::zeros(n, dim);
    let mut z = DVector::zeros(dim);
    for row in 0..n {
        for i in 0..dim {
            z[i] = StandardNormal.sample(&mut rng);
        }
        let x = &l * &z;
        for i in 0..dim {
            data[(row, i)] = x[i];
        }
    }
    Ok(data)
}
