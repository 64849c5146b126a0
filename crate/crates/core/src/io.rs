//! File formats: matrix and sample CSVs, edge lists, certificates.
//!
//! Floats in matrix files are written with 17 significant digits so that
//! re-reading a file reproduces the in-memory values bit for bit.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::binary::{remap_zero_one, BinaryEstimate};
use crate::error::{CovselError, Result};
use crate::linalg;
use crate::model::{
    duality_gap, eigenvalue_bounds, kkt_residual, screening_diagonal_columns, DataKind, Estimate, Problem,
    SampleMatrix, SecondMoment, SolverKind,
};

pub const PRECISION_FILE: &str = "precision.csv";
pub const COVARIANCE_FILE: &str = "covariance.csv";
pub const EDGES_FILE: &str = "edges.csv";
pub const CERTIFICATE_FILE: &str = "certificate.json";
pub const MOMENT_FILE: &str = "second_moment.csv";
pub const THETA_LINEAR_FILE: &str = "theta_linear.csv";
pub const RUN_META_FILE: &str = "run_meta.json";

/// Relative tolerance used when re-verifying a certificate from files.
pub const CERTIFY_TOL: f64 = 1e-9;

/// 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// A numeric table as read from disk; `None` marks a blank cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Option<Vec<String>>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn ncols(&self) -> usize {
        self.names
            .as_ref()
            .map(Vec::len)
            .or_else(|| self.rows.first().map(Vec::len))
            .unwrap_or(0)
    }
}

/// Reads a rectangular CSV. The first row is a header when any of its cells
/// is non-empty and not a number. Lines and columns in errors are 1-based.
pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut names = None;
    let mut rows = Vec::new();
    let mut width = None;
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(CovselError::Parse {
                    line,
                    column: record.len().min(w) + 1,
                    message: format!("expected {w} fields, found {}", record.len()),
                })
            }
            _ => {}
        }
        let is_header = k == 0 && record.iter().any(|c| !c.is_empty() && c.parse::<f64>().is_err());
        if is_header {
            names = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                if cell.is_empty() {
                    return Ok(None);
                }
                cell.parse::<f64>().map(Some).map_err(|_| CovselError::Parse {
                    line,
                    column: c + 1,
                    message: format!("not a number: {cell:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table { names, rows })
}

fn line_of(table: &Table, row: usize) -> usize {
    row + 1 + usize::from(table.names.is_some())
}

/// A fully populated matrix; blank cells are parse errors.
pub fn read_matrix(path: &Path) -> Result<(DMatrix<f64>, Option<Vec<String>>)> {
    let table = read_table(path)?;
    let (n, p) = (table.rows.len(), table.ncols());
    let mut m = DMatrix::zeros(n, p);
    for (i, row) in table.rows.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            m[(i, j)] = cell.ok_or_else(|| CovselError::Parse {
                line: line_of(&table, i),
                column: j + 1,
                message: "missing value".into(),
            })?;
        }
    }
    Ok((m, table.names))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>, names: Option<&[String]>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    if let Some(names) = names {
        writeln!(w, "{}", names.join(","))?;
    }
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|&v| format_f64(v)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Samples read from disk, with a note of any repairs applied.
#[derive(Debug, Clone)]
pub struct SamplesInput {
    pub samples: SampleMatrix,
    pub imputed_cells: usize,
    pub remapped: bool,
}

/// Reads samples (rows) by variables (columns). Blank cells are accepted
/// only for binary data with an imputation value. Binary data coded 0/1 is
/// remapped to ±1.
pub fn parse_samples_csv(path: &Path, kind: DataKind, imputation: Option<f64>) -> Result<SamplesInput> {
    let table = read_table(path)?;
    let (n, p) = (table.rows.len(), table.ncols());
    let mut data = DMatrix::zeros(n, p);
    let mut missing = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            match (cell, kind, imputation) {
                (Some(v), _, _) => data[(i, j)] = *v,
                (None, DataKind::Binary, Some(_)) => missing.push((i, j)),
                (None, _, _) => {
                    return Err(CovselError::Parse {
                        line: line_of(&table, i),
                        column: j + 1,
                        message: "missing value and no imputation configured".into(),
                    })
                }
            }
        }
    }
    let mut remapped = false;
    if kind == DataKind::Binary {
        // Decide the coding from the observed cells only.
        let mut observed = data.clone();
        for &(i, j) in &missing {
            observed[(i, j)] = 1.0;
        }
        if remap_zero_one(&mut observed) {
            remapped = true;
            data = observed;
        }
        if let Some(fill) = imputation {
            for &(i, j) in &missing {
                data[(i, j)] = fill;
            }
        }
        if !missing.is_empty() {
            log::info!("imputed {} missing cells", missing.len());
        }
    }
    let mut samples = SampleMatrix::new(data, kind)?;
    if let Some(names) = table.names {
        samples = samples.with_names(names)?;
    }
    Ok(SamplesInput {
        samples,
        imputed_cells: missing.len(),
        remapped,
    })
}

/// A precomputed second moment; `n` is needed only for penalty formulas.
pub fn parse_moment_csv(path: &Path, n: usize) -> Result<(SecondMoment, Option<Vec<String>>)> {
    let (s, names) = read_matrix(path)?;
    if s.nrows() != s.ncols() {
        return Err(CovselError::Dimension(format!(
            "second moment must be square, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    Ok((SecondMoment::from_matrix(s, n)?, names))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRow {
    pub i: usize,
    pub j: usize,
    pub name_i: String,
    pub name_j: String,
    pub value: String,
}

fn name(names: Option<&[String]>, k: usize) -> String {
    names.map_or_else(|| format!("X{}", k + 1), |n| n[k].clone())
}

/// Off-diagonal support of `x` above the zero threshold, one row per
/// unordered pair. `values` supplies what is written for each pair.
pub fn edge_rows(x: &DMatrix<f64>, values: &DMatrix<f64>, names: Option<&[String]>) -> Vec<EdgeRow> {
    let thr = linalg::zero_threshold(x);
    let p = x.nrows();
    let mut rows = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            if x[(i, j)].abs() > thr {
                rows.push(EdgeRow {
                    i,
                    j,
                    name_i: name(names, i),
                    name_j: name(names, j),
                    value: format_f64(values[(i, j)]),
                });
            }
        }
    }
    rows
}

pub fn write_edges(path: &Path, rows: &[EdgeRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(["i", "j", "name_i", "name_j", "value"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub lambda: f64,
    pub epsilon: f64,
    pub gap: f64,
    pub kkt_residual: f64,
    pub solver: SolverKind,
    pub iterations: usize,
    pub converged: bool,
    pub eigenvalue_bounds: (f64, f64),
    pub screened_columns: Vec<usize>,
    pub data_kind: DataKind,
    /// Fixed dual diagonal, present for binary problems.
    pub dual_diagonal: Option<Vec<f64>>,
}

impl Certificate {
    pub fn compute(est: &Estimate, prob: &Problem, data_kind: DataKind, converged: bool) -> Result<Self> {
        Ok(Self {
            lambda: prob.lambda(),
            epsilon: prob.epsilon(),
            gap: duality_gap(&est.w, prob)?,
            kkt_residual: kkt_residual(&est.x, prob)?,
            solver: est.solver,
            iterations: est.iterations,
            converged,
            eigenvalue_bounds: eigenvalue_bounds(prob)?,
            screened_columns: screening_diagonal_columns(prob),
            data_kind,
            dual_diagonal: prob.diag_override().map(|d| d.iter().copied().collect()),
        })
    }

    /// Rebuilds the problem the certificate was issued for.
    pub fn problem(&self, moment: SecondMoment) -> Result<Problem> {
        let prob = Problem::new(moment, self.lambda, self.epsilon)?;
        match &self.dual_diagonal {
            Some(d) => prob.with_diag_override(DVector::from_vec(d.clone())),
            None => Ok(prob),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}

pub fn write_records<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(CovselError::from)).collect()
}

/// What to write for one solved problem.
pub struct EmitRequest<'a> {
    pub estimate: &'a Estimate,
    pub problem: &'a Problem,
    pub names: Option<&'a [String]>,
    pub binary: Option<&'a BinaryEstimate>,
    pub converged: bool,
}

/// Writes the matrices, edge list, second moment and certificate into
/// `dir`, creating it if needed. Returns the certificate.
pub fn emit_estimate(dir: &Path, req: &EmitRequest) -> Result<Certificate> {
    fs::create_dir_all(dir)?;
    let est = req.estimate;
    let kind = if req.binary.is_some() {
        DataKind::Binary
    } else {
        DataKind::Gaussian
    };
    write_matrix(&dir.join(PRECISION_FILE), &est.x, req.names)?;
    write_matrix(&dir.join(COVARIANCE_FILE), &est.w, req.names)?;
    write_matrix(&dir.join(MOMENT_FILE), req.problem.s(), req.names)?;
    let edges = match req.binary {
        Some(b) => {
            write_matrix(
                &dir.join(THETA_LINEAR_FILE),
                &DMatrix::from_column_slice(b.mu_bar.len(), 1, b.mu_bar.as_slice()),
                None,
            )?;
            edge_rows(&est.x, &b.params.theta_pair, req.names)
        }
        None => edge_rows(&est.x, &est.x, req.names),
    };
    write_edges(&dir.join(EDGES_FILE), &edges)?;
    let cert = Certificate::compute(est, req.problem, kind, req.converged)?;
    write_json(&dir.join(CERTIFICATE_FILE), &cert)?;
    Ok(cert)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub gap_reported: f64,
    pub gap_recomputed: f64,
    pub kkt_reported: f64,
    pub kkt_recomputed: f64,
    pub within_epsilon: bool,
    pub matches: bool,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= CERTIFY_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Recomputes the gap and KKT residual from the files in `dir`.
pub fn certify_dir(dir: &Path) -> Result<CertifyReport> {
    let cert: Certificate = read_json(&dir.join(CERTIFICATE_FILE))?;
    let (s, _) = read_matrix(&dir.join(MOMENT_FILE))?;
    let (x, _) = read_matrix(&dir.join(PRECISION_FILE))?;
    let (w, _) = read_matrix(&dir.join(COVARIANCE_FILE))?;
    certify(&cert, s, &x, &w)
}

pub fn certify(cert: &Certificate, s: DMatrix<f64>, x: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<CertifyReport> {
    let prob = cert.problem(SecondMoment::from_matrix(s, 0)?)?;
    let gap = duality_gap(w, &prob)?;
    let kkt = kkt_residual(x, &prob)?;
    Ok(CertifyReport {
        gap_reported: cert.gap,
        gap_recomputed: gap,
        kkt_reported: cert.kkt_residual,
        kkt_recomputed: kkt,
        within_epsilon: gap <= cert.epsilon,
        matches: close(gap, cert.gap) && close(kkt, cert.kkt_residual),
    })
}
