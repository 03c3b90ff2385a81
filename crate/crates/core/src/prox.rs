//! Proximal operators and spectral updates used as the atomic steps of the
//! splitting solver. All operators produce exact zeros so that support, rank
//! and column support can be read directly from their outputs.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Bookkeeping for a single prox application.
#[derive(Debug, Clone)]
pub struct ProxReport {
    pub threshold: f64,
    pub zeros_produced: usize,
    pub optimality_residual: f64,
}

/// Entrywise soft threshold sign(m)·max(|m|−t, 0). The diagonal is exempt
/// when `penalize_diagonal` is false.
pub fn soft_threshold(m: &DMatrix<f64>, t: f64, penalize_diagonal: bool) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        let v = m[(i, j)];
        if i == j && !penalize_diagonal {
            v
        } else if v > t {
            v - t
        } else if v < -t {
            v + t
        } else {
            0.0
        }
    })
}

/// Singular value thresholding: U·max(D−t,0)·V'. Singular values at or below
/// `t` become exactly zero.
pub fn svt(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.ok_or_else(|| Error::numerical("SVD failed"))?;
    let vt = svd.v_t.ok_or_else(|| Error::numerical("SVD failed"))?;
    let r = svd.singular_values.len();
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for i in 0..r {
        let s = svd.singular_values[i] - t;
        if s > 0.0 {
            out += u.column(i) * vt.row(i) * s;
        }
    }
    Ok(out)
}

/// Rank of the SVT output at threshold `t` (count of surviving singular values).
pub fn svt_rank(m: &DMatrix<f64>, t: f64) -> usize {
    m.clone()
        .singular_values()
        .iter()
        .filter(|&&s| s - t > 0.0)
        .count()
}

/// Prox of t·trace(·) on the PSD cone: eigenvalues shifted down by `t` and
/// clipped at zero. With t = 0 this is the PSD projection.
pub fn psd_trace_prox(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let p = m.nrows();
    let mut out = DMatrix::zeros(p, p);
    for i in 0..p {
        let e = eig.eigenvalues[i] - t;
        if e > 0.0 {
            out += eig.eigenvectors.column(i) * eig.eigenvectors.column(i).transpose() * e;
        }
    }
    Ok(out)
}

/// Rank surviving the PSD trace prox at threshold `t`.
pub fn psd_trace_rank(m: &DMatrix<f64>, t: f64) -> usize {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .filter(|&&e| e - t > 0.0)
        .count()
}

/// Column-wise group shrinkage: each column scaled by max(1 − t/‖c‖₂, 0);
/// columns with norm at or below `t` become exactly zero.
pub fn group_column_prox(m: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let mut out = m.clone();
    for j in 0..m.ncols() {
        let norm = m.column(j).norm();
        if norm <= t {
            out.column_mut(j).fill(0.0);
        } else {
            let scale = 1.0 - t / norm;
            out.column_mut(j).scale_mut(scale);
        }
    }
    out
}

/// Closed-form minimizer of −logdet Θ + ⟨Σ_n, Θ⟩ + (ρ/2)‖Θ − B‖²_F over
/// symmetric Θ: eigendecompose G = B − Σ_n/ρ and map each eigenvalue λ to
/// (λ + √(λ² + 4/ρ))/2. The result is always positive definite.
pub fn logdet_update(b: &DMatrix<f64>, sigma_n: &DMatrix<f64>, rho: f64) -> Result<DMatrix<f64>> {
    if rho <= 0.0 {
        return Err(Error::invalid("rho must be positive"));
    }
    let g = (b - sigma_n / rho + (b - sigma_n / rho).transpose()) * 0.5;
    let eig = g.symmetric_eigen();
    let d = b.nrows();
    let mut out = DMatrix::zeros(d, d);
    for i in 0..d {
        let lam = eig.eigenvalues[i];
        let theta = 0.5 * (lam + (lam * lam + 4.0 / rho).sqrt());
        out += eig.eigenvectors.column(i) * eig.eigenvectors.column(i).transpose() * theta;
    }
    Ok(out)
}

/// Zero all off-diagonal entries.
pub fn diagonal_projection(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| if i == j { m[(i, j)] } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_matrix(r: usize, c: usize, rng: &mut StdRng) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.gen_range(-2.0..2.0))
    }

    fn random_symmetric(d: usize, rng: &mut StdRng) -> DMatrix<f64> {
        let m = random_matrix(d, d, rng);
        (&m + m.transpose()) * 0.5
    }

    #[test]
    fn soft_threshold_closed_form() {
        let m = DMatrix::from_element(1, 1, 3.0);
        assert_eq!(soft_threshold(&m, 1.0, true)[(0, 0)], 2.0);
        let m = DMatrix::from_element(1, 1, -0.5);
        assert_eq!(soft_threshold(&m, 1.0, true)[(0, 0)], 0.0);
    }

    #[test]
    fn soft_threshold_diagonal_exemption() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![5.0, 5.0]));
        assert_eq!(soft_threshold(&m, 1.0, false), m);
        assert_eq!(
            soft_threshold(&m, 1.0, true),
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 4.0]))
        );
    }

    #[test]
    fn svt_diagonal_case() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0]));
        let out = svt(&m, 2.0).unwrap();
        assert_abs_diff_eq!(out[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[(1, 1)], 0.0, epsilon = 1e-12);
        assert_eq!(svt_rank(&m, 2.0), 1);
    }

    #[test]
    fn svt_rank_one_symmetric() {
        let m = DMatrix::from_element(2, 2, 1.0);
        let out = svt(&m, 1.0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(out[(i, j)], 0.5, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn svt_matches_full_svd_oracle() {
        let mut rng = StdRng::seed_from_u64(17);
        let m = random_matrix(4, 3, &mut rng);
        let out = svt(&m, 0.7).unwrap();
        // independent oracle: reconstruct from a separate SVD call
        let svd = m.clone().svd(true, true);
        let u = svd.u.unwrap();
        let vt = svd.v_t.unwrap();
        let mut oracle = DMatrix::zeros(4, 3);
        for i in 0..svd.singular_values.len() {
            let s = (svd.singular_values[i] - 0.7).max(0.0);
            oracle += u.column(i) * vt.row(i) * s;
        }
        assert!((out - oracle).norm() < 1e-10);
    }

    #[test]
    fn psd_trace_prox_eigenvalue_shrinkage() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, -1.0]));
        let out = psd_trace_prox(&m, 0.5).unwrap();
        assert_abs_diff_eq!(out[(0, 0)], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out[(1, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn psd_trace_prox_nsd_maps_to_zero() {
        let mut rng = StdRng::seed_from_u64(23);
        let g = random_matrix(3, 3, &mut rng);
        let nsd = -(&g * g.transpose());
        assert!(psd_trace_prox(&nsd, 0.1).unwrap().norm() < 1e-14);
    }

    // prox optimality: out = argmin t·tr(X) + (1/2)‖X−M‖² over PSD X means
    // M − out − t·I lies in the normal cone at out.
    #[test]
    fn psd_trace_prox_subgradient_inclusion() {
        let mut rng = StdRng::seed_from_u64(29);
        let m = random_symmetric(5, &mut rng);
        let t = 0.4;
        let out = psd_trace_prox(&m, t).unwrap();
        let w = &m - &out - DMatrix::identity(5, 5) * t;
        // W must be NSD on the kernel of out and orthogonal to out
        let eig = w.clone().symmetric_eigen();
        let wmax = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        let complementarity = (out.transpose() * &w).trace().abs();
        assert!(wmax <= 1e-8, "max eigenvalue of witness {wmax}");
        assert!(complementarity <= 1e-8);
    }

    #[test]
    fn group_column_prox_closed_forms() {
        let c = DMatrix::from_column_slice(2, 1, &[3.0, 4.0]);
        assert!(group_column_prox(&c, 5.0).norm() == 0.0);
        let half = group_column_prox(&c, 2.5);
        assert_abs_diff_eq!(half[(0, 0)], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(half[(1, 0)], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn group_column_prox_per_column_independence() {
        let mut rng = StdRng::seed_from_u64(31);
        let m = random_matrix(4, 5, &mut rng);
        let t = 1.2;
        let out = group_column_prox(&m, t);
        for j in 0..5 {
            let col = DMatrix::from_column_slice(4, 1, m.column(j).as_slice());
            let scalar = group_column_prox(&col, t);
            let out_col = DMatrix::from_column_slice(4, 1, out.column(j).as_slice());
            assert!((out_col - scalar).norm() < 1e-14);
        }
    }

    #[test]
    fn logdet_update_scalar_quadratic_root() {
        let out = logdet_update(
            &DMatrix::zeros(1, 1),
            &DMatrix::from_element(1, 1, 1.0),
            1.0,
        )
        .unwrap();
        assert_abs_diff_eq!(out[(0, 0)], (5.0_f64.sqrt() - 1.0) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn logdet_update_penalty_dominates() {
        let out = logdet_update(&DMatrix::identity(3, 3), &DMatrix::zeros(3, 3), 1e8).unwrap();
        assert!((out - DMatrix::identity(3, 3)).norm() < 1e-3);
    }

    #[test]
    fn logdet_update_first_order_condition() {
        let mut rng = StdRng::seed_from_u64(37);
        let b = random_symmetric(4, &mut rng);
        let g = random_matrix(4, 4, &mut rng);
        let sigma = &g * g.transpose() / 4.0;
        let rho = 2.0;
        let theta = logdet_update(&b, &sigma, rho).unwrap();
        let resid = -theta.clone().try_inverse().unwrap() + &sigma + (&theta - &b) * rho;
        assert!(resid.norm() <= 1e-8, "residual {}", resid.norm());
        assert!(theta.symmetric_eigen().eigenvalues.min() > 0.0);
    }

    #[test]
    fn diagonal_projection_cases() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        let d = diagonal_projection(&m);
        assert_eq!(d, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 3.0])));
        assert_eq!(diagonal_projection(&d), d);
    }

    #[test]
    fn zero_threshold_is_identity() {
        let mut rng = StdRng::seed_from_u64(41);
        let m = random_matrix(4, 3, &mut rng);
        assert!((soft_threshold(&m, 0.0, true) - &m).norm() < 1e-14);
        assert!((svt(&m, 0.0).unwrap() - &m).norm() < 1e-10);
        assert!((group_column_prox(&m, 0.0) - &m).norm() < 1e-14);
        // psd_trace_prox at t = 0 becomes the PSD projection
        let s = random_symmetric(4, &mut rng);
        let proj = psd_trace_prox(&s, 0.0).unwrap();
        assert!(proj.symmetric_eigen().eigenvalues.min() >= -1e-12);
    }

    #[test]
    fn spectral_proxes_commute_with_orthogonal_conjugation() {
        let mut rng = StdRng::seed_from_u64(43);
        let s = random_symmetric(4, &mut rng);
        let qr = random_matrix(4, 4, &mut rng).qr();
        let q = qr.q();
        let t = 0.6;
        let lhs = psd_trace_prox(&(&q * &s * q.transpose()), t).unwrap();
        let rhs = &q * psd_trace_prox(&s, t).unwrap() * q.transpose();
        assert!((lhs - rhs).norm() < 1e-9);
        let lhs = svt(&(&q * &s * q.transpose()), t).unwrap();
        let rhs = &q * svt(&s, t).unwrap() * q.transpose();
        assert!((lhs - rhs).norm() < 1e-9);
    }

    fn firm_nonexpansive(fa: &DMatrix<f64>, fb: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>) {
        let diff_out = fa - fb;
        let diff_in = a - b;
        let lhs = diff_out.norm_squared();
        let rhs = (diff_out.transpose() * diff_in).trace();
        assert!(lhs <= rhs + 1e-9, "firm nonexpansiveness violated: {lhs} > {rhs}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn proxes_are_firmly_nonexpansive(seed in 0u64..10_000) {
            let mut rng = StdRng::seed_from_u64(seed);
            let a = random_matrix(3, 3, &mut rng);
            let b = random_matrix(3, 3, &mut rng);
            let t = rng.gen_range(0.0..1.5);
            firm_nonexpansive(&soft_threshold(&a, t, true), &soft_threshold(&b, t, true), &a, &b);
            firm_nonexpansive(&svt(&a, t).unwrap(), &svt(&b, t).unwrap(), &a, &b);
            firm_nonexpansive(&group_column_prox(&a, t), &group_column_prox(&b, t), &a, &b);
            let sa = (&a + a.transpose()) * 0.5;
            let sb = (&b + b.transpose()) * 0.5;
            firm_nonexpansive(
                &psd_trace_prox(&sa, t).unwrap(),
                &psd_trace_prox(&sb, t).unwrap(),
                &sa,
                &sb,
            );
        }
    }
}
