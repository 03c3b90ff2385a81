//! File formats: RFC-4180-style CSV, the JSON model document, population
//! documents, and atomic (temp-then-rename) writes.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use sdrgm::model::{count_parameters, ComplexitySummary, JointPrecision, RegConfig, Variant};
use sdrgm::solver::FitResult;
use sdrgm::synth::{PopulationMetadata, PopulationSpec};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

/// Write `contents` to `path` via a temporary file in the same directory, so
/// readers never observe a partial document.
pub fn atomic_write(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let tmp: PathBuf = {
        let mut name = path
            .file_name()
            .ok_or_else(|| CliError::input(format!("not a file path: {}", path.display())))?
            .to_os_string();
        name.push(".tmp");
        match dir {
            Some(d) => d.join(name),
            None => PathBuf::from(name),
        }
    };
    fs::write(&tmp, contents)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path)
        .map_err(|e| CliError::input(format!("cannot rename to {}: {e}", path.display())))?;
    Ok(())
}

fn needs_quoting(field: &str) -> bool {
    field.contains(',') || field.contains('"') || field.contains('\n') || field.contains('\r')
}

pub fn csv_field(field: &str) -> String {
    if needs_quoting(field) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Parse one CSV record, honoring quoted fields with embedded commas and
/// doubled quotes.
fn parse_record(line: &str, row: usize) -> Result<Vec<String>, CliError> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut chars = line.chars().peekable();
    let mut quoted = false;
    while let Some(ch) = chars.next() {
        if quoted {
            if ch == '"' {
                if chars.peek() == Some(&'"') {
                    chars.next();
                    cur.push('"');
                } else {
                    quoted = false;
                }
            } else {
                cur.push(ch);
            }
        } else {
            match ch {
                '"' if cur.is_empty() => quoted = true,
                ',' => fields.push(std::mem::take(&mut cur)),
                _ => cur.push(ch),
            }
        }
    }
    if quoted {
        return Err(CliError::input(format!("row {row}: unterminated quote")));
    }
    fields.push(cur);
    Ok(fields)
}

/// Read a headered numeric CSV into (column names, row-major data matrix).
pub fn read_csv(path: &Path) -> Result<(Vec<String>, DMatrix<f64>), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.is_empty());
    let (_, header_line) = lines
        .next()
        .ok_or_else(|| CliError::input(format!("{}: empty file", path.display())))?;
    let headers = parse_record(header_line, 1)?;
    if headers.is_empty() {
        return Err(CliError::input(format!("{}: empty header", path.display())));
    }
    {
        let mut seen = std::collections::BTreeSet::new();
        for h in &headers {
            if !seen.insert(h.as_str()) {
                return Err(CliError::input(format!("duplicate column name '{h}'")));
            }
        }
    }
    let ncols = headers.len();
    let mut values: Vec<f64> = Vec::new();
    let mut nrows = 0usize;
    for (idx, line) in lines {
        let fields = parse_record(line, idx + 1)?;
        if fields.len() != ncols {
            return Err(CliError::input(format!(
                "row {}: expected {ncols} columns, found {}",
                idx + 1,
                fields.len()
            )));
        }
        for (col, field) in fields.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::input(format!(
                    "row {}, column '{}': not a number: '{field}'",
                    idx + 1,
                    headers[col]
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::input(format!(
                    "row {}, column '{}': non-finite value",
                    idx + 1,
                    headers[col]
                )));
            }
            values.push(v);
        }
        nrows += 1;
    }
    if nrows == 0 {
        return Err(CliError::input(format!("{}: no data rows", path.display())));
    }
    Ok((headers, DMatrix::from_row_slice(nrows, ncols, &values)))
}

pub fn write_csv(path: &Path, headers: &[String], data: &DMatrix<f64>) -> Result<(), CliError> {
    let mut out = String::new();
    out.push_str(
        &headers
            .iter()
            .map(|h| csv_field(h))
            .collect::<Vec<_>>()
            .join(","),
    );
    out.push('\n');
    for r in 0..data.nrows() {
        let row: Vec<String> = (0..data.ncols()).map(|c| format!("{}", data[(r, c)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    atomic_write(path, &out)
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::input(format!("{what}: ragged rows")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(nrows, ncols, &flat))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverMetadata {
    pub iterations: usize,
    pub converged: bool,
    pub tol: f64,
    pub max_iters: usize,
}

/// Per-column training statistics recorded when --standardize is used.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

/// The on-disk fitted-model document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub variant: String,
    pub p: usize,
    pub q: usize,
    /// Response names first, then covariate names.
    pub column_names: Vec<String>,
    pub lambda_n: f64,
    pub gamma: f64,
    pub delta: f64,
    pub penalize_diagonal: bool,
    pub standardization: Option<Standardization>,
    /// Dense (p+q)×(p+q) row-major.
    pub theta_hat: Vec<Vec<f64>>,
    /// Upper-triangle triplets (i ≤ j) of Ŝ_Y.
    pub s_y: Vec<(usize, usize, f64)>,
    /// F with L̂_Y = F Fᵀ, p×rank_l (empty when rank 0).
    pub l_y_factors: Vec<Vec<f64>>,
    pub theta_yx: Vec<Vec<f64>>,
    pub rank_l: usize,
    pub rank_yx: usize,
    /// Upper-triangle support pairs of Ŝ_Y.
    pub support: Vec<(usize, usize)>,
    pub column_support: Option<Vec<usize>>,
    pub objective: f64,
    pub solver: SolverMetadata,
}

/// Symmetric PSD low-rank factorization L = F Fᵀ with F p×rank.
fn psd_factors(l: &DMatrix<f64>, rank: usize) -> Vec<Vec<f64>> {
    if rank == 0 {
        return Vec::new();
    }
    let eig = l.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let p = l.nrows();
    let mut f = DMatrix::zeros(p, rank);
    for (col, &idx) in order.iter().take(rank).enumerate() {
        let scale = eig.eigenvalues[idx].max(0.0).sqrt();
        for i in 0..p {
            f[(i, col)] = scale * eig.eigenvectors[(i, idx)];
        }
    }
    matrix_to_rows(&f)
}

impl ModelFile {
    pub fn from_fit(
        fit: &FitResult,
        config: &RegConfig,
        column_names: Vec<String>,
        standardization: Option<Standardization>,
        options_tol: f64,
        options_max_iters: usize,
    ) -> Result<Self, CliError> {
        let p = fit.params_hat.p();
        let q = fit.params_hat.q();
        if column_names.len() != p + q {
            return Err(CliError::input("column name list must have p+q entries"));
        }
        let mut s_y = Vec::new();
        let mut support = Vec::new();
        for &(i, j) in &fit.structure.support {
            if i <= j {
                support.push((i, j));
                s_y.push((i, j, fit.params_hat.s_y[(i, j)]));
            }
        }
        Ok(ModelFile {
            format_version: FORMAT_VERSION,
            variant: config.variant.name().to_string(),
            p,
            q,
            column_names,
            lambda_n: config.lambda_n,
            gamma: config.gamma,
            delta: config.delta,
            penalize_diagonal: config.penalize_diagonal,
            standardization,
            theta_hat: matrix_to_rows(fit.theta_hat.matrix()),
            s_y,
            l_y_factors: psd_factors(&fit.params_hat.l_y, fit.structure.rank_l),
            theta_yx: matrix_to_rows(&fit.params_hat.theta_yx),
            rank_l: fit.structure.rank_l,
            rank_yx: fit.structure.rank_yx,
            support,
            column_support: fit.structure.column_support.clone(),
            objective: fit.objective,
            solver: SolverMetadata {
                iterations: fit.iterations,
                converged: fit.converged,
                tol: options_tol,
                max_iters: options_max_iters,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::input(format!("serialization failed: {e}")))?;
        atomic_write(path, &format!("{text}\n"))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        let model: ModelFile = serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.format_version != FORMAT_VERSION {
            return Err(CliError::input(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        Variant::parse(&self.variant).map_err(CliError::from)?;
        if self.column_names.len() != self.p + self.q {
            return Err(CliError::input("column_names length must equal p+q"));
        }
        let theta = self.theta()?;
        if !theta.is_positive_definite() {
            return Err(CliError::infeasible("stored theta_hat is not positive definite"));
        }
        let declared: std::collections::BTreeSet<_> = self.support.iter().copied().collect();
        let triplets: std::collections::BTreeSet<_> =
            self.s_y.iter().map(|&(i, j, _)| (i, j)).collect();
        if declared != triplets {
            return Err(CliError::input("triplet support differs from declared support"));
        }
        Ok(())
    }

    pub fn theta(&self) -> Result<JointPrecision, CliError> {
        let m = rows_to_matrix(&self.theta_hat, "theta_hat")?;
        let dim = self.p + self.q;
        if m.nrows() != dim || m.ncols() != dim {
            return Err(CliError::input("theta_hat has wrong dimensions"));
        }
        JointPrecision::new(m, self.p, self.q).map_err(CliError::from)
    }

    /// Number of declared off-diagonal edges.
    pub fn edge_count(&self) -> usize {
        self.support.iter().filter(|&&(i, j)| i < j).count()
    }

    pub fn complexity(&self) -> Result<ComplexitySummary, CliError> {
        count_parameters(self.p, self.q, self.edge_count(), self.rank_l, self.rank_yx)
            .map_err(CliError::from)
    }
}

/// The on-disk population document: the generating spec plus the derived
/// structural metadata. The model itself is rebuilt deterministically from
/// the spec on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopulationFile {
    pub format_version: u32,
    pub spec: PopulationSpec,
    pub metadata: PopulationMetadata,
}

impl PopulationFile {
    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::input(format!("serialization failed: {e}")))?;
        atomic_write(path, &format!("{text}\n"))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        let file: PopulationFile = serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        if file.format_version != FORMAT_VERSION {
            return Err(CliError::input(format!(
                "unsupported format_version {}",
                file.format_version
            )));
        }
        Ok(file)
    }
}
