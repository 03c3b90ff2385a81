//! Subcommand implementations.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use sdrgm::diagnostics::{
    chi_min_gain, eta_quantities, mu_omega, polyhedral_set_v, theorem_constants,
    varphi_irrepresentability, xi_tangent, ColumnSupport, CrossSpace, DiagnosticValue, EtaReport,
    GainMode, LowRankTangent, PolyhedralSetV, SubspaceProduct, SupportSpace, TheoremConstants,
    TheoremKind, XiReport,
};
use sdrgm::harness::{run_experiment, RegRule};
use sdrgm::model::{
    conditional_loglik, orthonormal_basis, principal_angles, sample_covariance, sdr_map,
    RegConfig, Variant,
};
use sdrgm::solver::{fit, SolverOptions};
use sdrgm::synth::{describe, make_population, sample, PopulationSpec};

use crate::io::{
    atomic_write, csv_field, write_csv, ModelFile, PopulationFile, Standardization,
    FORMAT_VERSION,
};
use crate::{CliError, DiagnoseArgs, EvaluateArgs, FitArgs, ReportArgs, SimulateArgs, VerifyArgs};

/// Resolve a column list given as `a,b,c` or `@file` (one name per line).
fn resolve_names(arg: &str) -> Result<Vec<String>, CliError> {
    let names: Vec<String> = if let Some(path) = arg.strip_prefix('@') {
        fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read {path}: {e}")))?
            .lines()
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty())
            .collect()
    } else {
        arg.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
    };
    if names.is_empty() {
        return Err(CliError::input("column list is empty"));
    }
    let mut seen = BTreeSet::new();
    for n in &names {
        if !seen.insert(n.clone()) {
            return Err(CliError::input(format!("duplicate column '{n}'")));
        }
    }
    Ok(names)
}

/// Column indices of `names` within `headers`; every name must exist.
fn locate(names: &[String], headers: &[String]) -> Result<Vec<usize>, CliError> {
    names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| CliError::input(format!("column '{n}' not found in data")))
        })
        .collect()
}

fn select_columns(data: &DMatrix<f64>, indices: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(data.nrows(), indices.len(), |r, c| data[(r, indices[c])])
}

fn solver_options(tol: f64, max_iters: usize) -> SolverOptions {
    SolverOptions {
        max_iters,
        tol_primal: tol,
        tol_dual: tol,
        ..SolverOptions::default()
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let variant = Variant::parse(&args.model)?;
    let responses = resolve_names(&args.responses)?;
    let covariates = resolve_names(&args.covariates)?;
    if responses.iter().any(|r| covariates.contains(r)) {
        return Err(CliError::input("responses and covariates must be disjoint"));
    }
    let (headers, raw) = crate::io::read_csv(&args.data)?;
    let idx: Vec<usize> = locate(&responses, &headers)?
        .into_iter()
        .chain(locate(&covariates, &headers)?)
        .collect();
    let mut data = select_columns(&raw, &idx);
    let p = responses.len();
    let q = covariates.len();

    let standardization = if args.standardize {
        let n = data.nrows() as f64;
        let mut means = Vec::with_capacity(p + q);
        let mut sds = Vec::with_capacity(p + q);
        for c in 0..p + q {
            let mean = data.column(c).sum() / n;
            let var = data.column(c).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd <= 0.0 {
                return Err(CliError::input(format!(
                    "column '{}' is constant; cannot standardize",
                    headers[idx[c]]
                )));
            }
            for r in 0..data.nrows() {
                data[(r, c)] = (data[(r, c)] - mean) / sd;
            }
            means.push(mean);
            sds.push(sd);
        }
        Some(Standardization { means, sds })
    } else {
        None
    };

    let sigma = sample_covariance(&data)?;
    // the solver works against Σ_n + 1e-3 I; reject covariances that stay
    // indefinite even with that ridge
    let dim = p + q;
    let ridged = &sigma + DMatrix::identity(dim, dim) * 1e-3;
    if ridged.cholesky().is_none() {
        return Err(CliError::infeasible("sample covariance is not PSD after ridge"));
    }

    let config = RegConfig::new(variant, args.lambda, args.gamma, args.delta)?
        .with_diagonal_penalty(!args.no_diag_penalty);
    let options = solver_options(args.tol, args.max_iters);
    let result = fit(&config, &sigma, p, q, &options)?;

    let column_names: Vec<String> = responses.iter().chain(covariates.iter()).cloned().collect();
    let model = ModelFile::from_fit(
        &result,
        &config,
        column_names,
        standardization,
        args.tol,
        args.max_iters,
    )?;
    model.save(&args.out)?;

    let complexity = model.complexity()?;
    println!("variant: {}", variant.name());
    println!("edges: {}", model.edge_count());
    println!("rank_l: {}", result.structure.rank_l);
    println!("rank_yx: {}", result.structure.rank_yx);
    if let Some(cols) = &result.structure.column_support {
        let selected: Vec<&str> = cols.iter().map(|&j| covariates[j].as_str()).collect();
        println!("selected covariates: [{}]", selected.join(", "));
    }
    println!("parameters: {}", complexity.total);
    println!("objective: {:.12}", result.objective);
    println!(
        "converged: {} ({} iterations)",
        result.converged, result.iterations
    );
    if !result.converged {
        return Err(CliError::nonconvergence(format!(
            "solver hit the iteration cap ({})",
            args.max_iters
        )));
    }
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut spec = if args.benchmark {
        let mut s = PopulationSpec::benchmark(args.seed);
        s.p = args.p;
        s.q = args.q;
        s.k = args.rank_k;
        s.h = args.latent_h;
        s.max_degree = args.degree;
        s
    } else {
        PopulationSpec::new(args.p, args.q, args.rank_k, args.latent_h, args.degree, args.seed)
    };
    spec.column_support = args.kappa;
    let pop = make_population(&spec)?;
    let file = PopulationFile {
        format_version: FORMAT_VERSION,
        spec: spec.clone(),
        metadata: pop.metadata.clone(),
    };
    file.save(&args.out_pop)?;

    let data = sample(&pop, args.n, args.seed)?;
    let headers: Vec<String> = (0..args.p)
        .map(|i| format!("y{}", i + 1))
        .chain((0..args.q).map(|j| format!("x{}", j + 1)))
        .collect();
    write_csv(&args.out_data, &headers, &data)?;

    let m = &pop.metadata;
    println!("tau_y: {:.6}", m.tau_y);
    println!("sigma_y: {:.6}", m.sigma_y);
    println!("sigma_yx: {:.6}", m.sigma_yx);
    println!("zeta_yx: {:.6}", m.zeta_yx);
    println!("deg: {}", m.deg);
    println!("inc: {:.6}", m.inc);
    println!("kappa: {}", m.kappa);
    println!("lambda_min: {:.6}", pop.theta_star.min_eigenvalue());
    Ok(())
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    let file = PopulationFile::load(&args.pop)?;
    let pop = make_population(&file.spec)?;
    let recomputed = describe(&pop)?;
    if recomputed != file.metadata {
        return Err(CliError::input(
            "population metadata does not match its spec; file may be corrupt",
        ));
    }
    let grid: Vec<usize> = args
        .n_grid
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::input(format!("bad n-grid entry '{s}'")))
        })
        .collect::<Result<_, _>>()?;
    let variant = Variant::parse(&args.variant)?;
    let rule = RegRule::new(variant, args.lambda_scale, args.gamma, args.delta)?;
    let options = solver_options(1e-7, 10_000);
    let summary = run_experiment(&pop, &grid, args.trials, &rule, &options, args.jobs)?;

    atomic_write(&args.out, &summary.to_csv())?;
    if let Some(json_path) = &args.out_json {
        let text = serde_json::to_string_pretty(&summary)
            .map_err(|e| CliError::input(format!("serialization failed: {e}")))?;
        atomic_write(json_path, &format!("{text}\n"))?;
    }

    println!("n        success  support  median_phi");
    for (i, &n) in summary.n_grid.iter().enumerate() {
        println!(
            "{n:<8} {:<8.3} {:<8.3} {:.4}",
            summary.success_rate[i], summary.support_rate[i], summary.median_phi_error[i]
        );
    }
    println!("slope: {:.4}", summary.error_slope);
    Ok(())
}

#[derive(Serialize)]
struct DiagnosticsFile {
    format_version: u32,
    inc: f64,
    deg: usize,
    mu: (DiagnosticValue, DiagnosticValue),
    xi: XiReport,
    eta: EtaReport,
    chi: DiagnosticValue,
    varphi: DiagnosticValue,
    set_v: PolyhedralSetV,
    constants: TheoremConstants,
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<(), CliError> {
    let file = PopulationFile::load(&args.pop)?;
    let pop = make_population(&file.spec)?;
    let p = file.spec.p;
    let q = file.spec.q;
    let sigma = pop.theta_star.covariance()?;

    let omega = SupportSpace::from_matrix(&pop.params_star.s_y)?;
    let t_y = if file.spec.h == 0 {
        LowRankTangent::empty(p, p, true)
    } else {
        LowRankTangent::from_matrix(&pop.params_star.l_y, true)?
    };
    let cross = if file.spec.column_support.is_some() {
        CrossSpace::Columns(ColumnSupport::from_matrix(&pop.params_star.theta_yx)?)
    } else {
        CrossSpace::LowRank(LowRankTangent::from_matrix(&pop.params_star.theta_yx, false)?)
    };
    let h_star = SubspaceProduct::new(omega.clone(), t_y.clone(), cross, q)?;

    let mu = mu_omega(&omega, args.seed);
    let xi = xi_tangent(&t_y, 8, args.seed);
    let eta = eta_quantities(&h_star, &sigma, args.omega_y, args.omega_yx, args.samples, args.seed)?;
    let mode = GainMode::PhiSampled { samples: args.samples, seed: args.seed };
    let chi = chi_min_gain(&h_star, &sigma, args.delta, args.gamma, mode)?;
    let mode = GainMode::PhiSampled { samples: args.samples, seed: args.seed };
    let varphi = varphi_irrepresentability(&h_star, &sigma, args.delta, args.gamma, mode)?;

    let mut set_v = polyhedral_set_v(
        args.alpha,
        args.nu,
        args.omega_y,
        args.omega_yx,
        pop.metadata.inc,
        pop.metadata.deg as f64,
        eta.eta2.value,
    )?;
    set_v.check_gains(eta.eta1.value, eta.eta3.value);

    let (kind, kappa) = match file.spec.column_support {
        Some(k) => (TheoremKind::ColumnSparseCross, Some(k)),
        None => (TheoremKind::LowRankCross, None),
    };
    let psi = sigma.clone().singular_values().max();
    let constants = theorem_constants(
        kind,
        args.alpha,
        args.nu,
        psi,
        args.delta,
        args.gamma,
        pop.metadata.deg,
        kappa,
        args.omega_y,
        args.omega_yx,
        p + q,
        args.n,
    )?;

    let doc = DiagnosticsFile {
        format_version: FORMAT_VERSION,
        inc: pop.metadata.inc,
        deg: pop.metadata.deg,
        mu,
        xi,
        eta,
        chi,
        varphi,
        set_v,
        constants,
    };
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| CliError::input(format!("serialization failed: {e}")))?;
    atomic_write(&args.out, &format!("{text}\n"))?;
    println!(
        "inc: {:.6}  deg: {}  eta2: {:.6}  chi: {:.6}  varphi: {:.6}  V nonempty: {}",
        doc.inc, doc.deg, doc.eta.eta2.value, doc.chi.value, doc.varphi.value, doc.set_v.nonempty
    );
    Ok(())
}

/// Dataset columns in model order, standardized with the stored statistics.
fn model_view(model: &ModelFile, path: &Path) -> Result<DMatrix<f64>, CliError> {
    let (headers, raw) = crate::io::read_csv(path)?;
    let idx = locate(&model.column_names, &headers)?;
    let mut data = select_columns(&raw, &idx);
    if let Some(std) = &model.standardization {
        for c in 0..data.ncols() {
            for r in 0..data.nrows() {
                data[(r, c)] = (data[(r, c)] - std.means[c]) / std.sds[c];
            }
        }
    }
    Ok(data)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let model = ModelFile::load(&args.model)?;
    let data = model_view(&model, &args.data)?;
    let theta = model.theta()?;
    let theta_y = theta.theta_y();
    let theta_yx = theta.theta_yx();
    let p = model.p;
    let q = model.q;
    let mut total = 0.0;
    for r in 0..data.nrows() {
        let y = DVector::from_fn(p, |i, _| data[(r, i)]);
        let x = DVector::from_fn(q, |j, _| data[(r, p + j)]);
        total += conditional_loglik(&theta_y, &theta_yx, &y, &x)?;
    }
    println!("avg_conditional_loglik: {:.12}", total / data.nrows() as f64);
    Ok(())
}

pub fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let model = ModelFile::load(&args.model)?;
    let complexity = model.complexity()?;
    println!("variant: {}", model.variant);
    println!("p: {}  q: {}", model.p, model.q);
    println!("rank_l: {}  rank_yx: {}", model.rank_l, model.rank_yx);
    println!("edges: {}", model.edge_count());
    println!("parameters: {}", complexity.total);
    println!("objective: {:.12}", model.objective);

    let mut edges: Vec<(usize, usize, f64)> = model
        .s_y
        .iter()
        .filter(|&&(i, j, _)| i < j)
        .copied()
        .collect();
    edges.sort_by(|a, b| b.2.abs().total_cmp(&a.2.abs()));
    for (i, j, v) in &edges {
        println!(
            "edge {} -- {}: {v:.6}",
            csv_field(&model.column_names[*i]),
            csv_field(&model.column_names[*j])
        );
    }

    if let Some(other_path) = &args.compare {
        let other = ModelFile::load(other_path)?;
        if other.p != model.p || other.q != model.q {
            return Err(CliError::input("models have different dimensions"));
        }
        let map_a = sdr_map(&model.theta()?)?;
        let map_b = sdr_map(&other.theta()?)?;
        let basis_a = orthonormal_basis(&map_a)?;
        let basis_b = orthonormal_basis(&map_b)?;
        let angles = principal_angles(&basis_a, &basis_b)?;
        let formatted: Vec<String> = angles.iter().map(|a| format!("{a:.6}")).collect();
        println!("principal_angles: [{}]", formatted.join(", "));

        let set_a: BTreeSet<(usize, usize)> =
            model.support.iter().filter(|&&(i, j)| i < j).copied().collect();
        let set_b: BTreeSet<(usize, usize)> =
            other.support.iter().filter(|&&(i, j)| i < j).copied().collect();
        let common = set_a.intersection(&set_b).count();
        let union = set_a.union(&set_b).count();
        println!("edge_overlap: {common}/{union}");
    }
    Ok(())
}
