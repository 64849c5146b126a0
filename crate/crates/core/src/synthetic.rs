//! Synthetic experiments: sparse ground truths, sampling, structure
//! recovery, path following, noise masking, classifier comparison and
//! timing.
//!
//! Every experiment is a pure function of its parameters and a root seed.
//! Randomness comes from ChaCha8 generators seeded with the root seed and
//! split into independent streams with [`stream_rng`].

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    classification_report, combine_neighborhoods, neighborhood_coefficients, pattern_of, ClassificationReport,
    EdgeRule, SparsityPattern,
};
use crate::bcd::{solve_bcd, BcdOptions, BcdSolver, QpOptions};
use crate::error::{CovselError, Result};
use crate::linalg;
use crate::model::{DataKind, Estimate, Problem, SampleMatrix, SecondMoment};
use crate::penalty::gaussian_lambda;

pub const DIAGONAL_RANGE: (f64, f64) = (0.5, 1.5);
pub const OFF_DIAGONAL_RANGE: (f64, f64) = (-1.0, 1.0);
/// Smallest eigenvalue tolerated before the identity shift kicks in.
pub const MIN_EIGENVALUE: f64 = 1e-6;
pub const SHIFT_MARGIN: f64 = 0.1;
/// Solver caps for the masking sweep. Some masked moments have condition
/// numbers near 1e4, where the default caps stop short of the gap target.
pub const MASKING_QP_MAX_ITER: usize = 100_000;
pub const MASKING_MAX_SWEEPS: usize = 2_000;
pub const MAX_NOISE_REDRAWS: usize = 100;

/// Stream purposes within one trial.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    Truth = 0,
    Samples = 1,
    Noise = 2,
}

/// Generator for `(seed, trial, purpose)`.
pub fn stream_rng(seed: u64, trial: u64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial * 8 + purpose as u64);
    rng
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub precision: DMatrix<f64>,
    pub covariance: DMatrix<f64>,
    pub pattern: SparsityPattern,
    pub density: f64,
    pub seed: u64,
}

/// Number of off-diagonal pairs a density asks for.
pub fn edge_count(p: usize, delta: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(CovselError::Parameter(format!(
            "density must lie in [0, 1], got {delta}"
        )));
    }
    let pairs = p * p.saturating_sub(1) / 2;
    let k = (delta * pairs as f64).ceil() as usize;
    if k > pairs {
        return Err(CovselError::Parameter(format!(
            "{k} edges requested but only {pairs} pairs exist"
        )));
    }
    Ok(k)
}

pub fn generate_ground_truth_with(p: usize, delta: f64, rng: &mut impl Rng, seed: u64) -> Result<GroundTruth> {
    if p < 2 {
        return Err(CovselError::Parameter("ground truth needs p >= 2".into()));
    }
    let k = edge_count(p, delta)?;
    let diag = Uniform::new(DIAGONAL_RANGE.0, DIAGONAL_RANGE.1).expect("valid range");
    let off = Uniform::new(OFF_DIAGONAL_RANGE.0, OFF_DIAGONAL_RANGE.1).expect("valid range");
    let mut precision = DMatrix::zeros(p, p);
    for i in 0..p {
        precision[(i, i)] = rng.sample(diag);
    }
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
    let mut pattern = SparsityPattern::empty(p);
    for idx in index::sample(rng, pairs.len(), k) {
        let (i, j) = pairs[idx];
        // Redraw exact zeros so the recorded support is the true support.
        let mut v = 0.0;
        while v == 0.0 {
            v = rng.sample(off);
        }
        precision[(i, j)] = v;
        precision[(j, i)] = v;
        pattern.edges.insert((i, j));
    }
    let lmin = linalg::sym_eigenvalues(&precision)[0];
    if lmin <= MIN_EIGENVALUE {
        let shift = MIN_EIGENVALUE - lmin + SHIFT_MARGIN;
        for i in 0..p {
            precision[(i, i)] += shift;
        }
    }
    let covariance = linalg::inverse_spd(&precision, "ground truth precision")
        .map_err(|e| CovselError::Generation(e.to_string()))?;
    Ok(GroundTruth {
        precision,
        covariance,
        pattern,
        density: delta,
        seed,
    })
}

pub fn generate_ground_truth(p: usize, delta: f64, seed: u64) -> Result<GroundTruth> {
    generate_ground_truth_with(p, delta, &mut stream_rng(seed, 0, Stream::Truth), seed)
}

pub fn sample_gaussian_with(truth: &GroundTruth, n: usize, rng: &mut impl Rng) -> Result<SampleMatrix> {
    let p = truth.covariance.nrows();
    let l = linalg::cholesky(&truth.covariance, "covariance")?.l();
    let z = DMatrix::from_fn(p, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    SampleMatrix::new((l * z).transpose(), DataKind::Gaussian)
}

pub fn sample_gaussian(truth: &GroundTruth, n: usize, seed: u64) -> Result<SampleMatrix> {
    sample_gaussian_with(truth, n, &mut stream_rng(seed, 0, Stream::Samples))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "SML")]
    Sml,
    LassoOR,
    LassoAND,
    Threshold,
}

/// One classified estimate. `wall_time` is kept out of the serialized
/// record so result tables stay reproducible; timings are written
/// separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub n: usize,
    pub p: usize,
    pub delta: f64,
    pub lambda: f64,
    pub method: Method,
    pub power: f64,
    pub ppv: f64,
    pub density: f64,
    pub error_pct: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Duality gap for SML; zero for the other methods.
    pub gap: f64,
    #[serde(skip)]
    pub wall_time: f64,
}

impl TrialRecord {
    #[allow(clippy::too_many_arguments)]
    fn new(
        trial_id: u64,
        n: usize,
        p: usize,
        delta: f64,
        lambda: f64,
        method: Method,
        report: ClassificationReport,
        gap: f64,
        wall_time: f64,
    ) -> Self {
        Self {
            trial_id,
            n,
            p,
            delta,
            lambda,
            method,
            power: report.power,
            ppv: report.ppv,
            density: report.density,
            error_pct: report.error_pct,
            true_positives: report.true_positives,
            false_positives: report.false_positives,
            false_negatives: report.false_negatives,
            gap,
            wall_time,
        }
    }

    pub fn report(&self) -> ClassificationReport {
        ClassificationReport {
            power: self.power,
            ppv: self.ppv,
            density: self.density,
            error_pct: self.error_pct,
            true_positives: self.true_positives,
            false_positives: self.false_positives,
            false_negatives: self.false_negatives,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub trial_id: u64,
    pub n: usize,
    pub method: Method,
    pub wall_time: f64,
}

impl From<&TrialRecord> for TimingRecord {
    fn from(r: &TrialRecord) -> Self {
        Self {
            trial_id: r.trial_id,
            n: r.n,
            method: r.method,
            wall_time: r.wall_time,
        }
    }
}

/// Pattern of a solver estimate under the relative zero threshold.
pub fn estimate_pattern(est: &Estimate) -> SparsityPattern {
    pattern_of(&est.x, linalg::zero_threshold(&est.x))
}

fn solve_sml(moment: SecondMoment, lambda: f64, epsilon: f64, opts: &BcdOptions) -> Result<(Estimate, f64)> {
    let prob = Problem::new(moment, lambda, epsilon)?;
    let start = Instant::now();
    let est = solve_bcd(&prob, opts)?;
    Ok((est, start.elapsed().as_secs_f64()))
}

/// Matrices behind one recovery run, for plotting.
#[derive(Debug, Clone)]
pub struct RecoveryMatrices {
    pub n: usize,
    pub truth_precision: DMatrix<f64>,
    pub inverse_moment: Option<DMatrix<f64>>,
    pub estimate: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub records: Vec<TrialRecord>,
    pub matrices: Vec<RecoveryMatrices>,
}

/// One ground truth, one sample set per `n` (stream `trial = n`), one SML
/// solve each.
pub fn run_recovery_experiment(
    p: usize,
    delta: f64,
    n_list: &[usize],
    lambda: f64,
    epsilon: f64,
    seed: u64,
) -> Result<RecoveryResult> {
    let truth = generate_ground_truth(p, delta, seed)?;
    let mut records = Vec::new();
    let mut matrices = Vec::new();
    for &n in n_list {
        let samples = sample_gaussian_with(&truth, n, &mut stream_rng(seed, n as u64, Stream::Samples))?;
        let moment = SecondMoment::from_samples(&samples)?;
        let inverse_moment = linalg::inverse_spd(moment.s(), "S").ok();
        let (est, time) = solve_sml(moment, lambda, epsilon, &BcdOptions::default())?;
        let report = classification_report(&estimate_pattern(&est), &truth.pattern)?;
        records.push(TrialRecord::new(
            0,
            n,
            p,
            delta,
            lambda,
            Method::Sml,
            report,
            est.gap,
            time,
        ));
        matrices.push(RecoveryMatrices {
            n,
            truth_precision: truth.precision.clone(),
            inverse_moment,
            estimate: est.x,
        });
    }
    Ok(RecoveryResult { records, matrices })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    pub lambda: f64,
    pub i: usize,
    pub j: usize,
    pub value: f64,
    pub true_nonzero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub gap: f64,
    pub sweeps: usize,
    pub edges: usize,
    pub matches_truth: bool,
}

#[derive(Debug, Clone)]
pub struct PathResult {
    pub points: Vec<PathPoint>,
    pub entries: Vec<PathEntry>,
    pub estimates: Vec<Estimate>,
    /// Grid ranges `[λ_a, λ_b]` over which the pattern equals the truth.
    pub exact_intervals: Vec<(f64, f64)>,
    /// `max_{k>j} |S_kj|`; beyond it the estimate must be diagonal.
    pub terminal_lambda: f64,
    /// Whether every grid point at or above `terminal_lambda` is diagonal.
    pub terminal_diagonal: bool,
}

/// Solves along an increasing grid, warm-starting each point from the
/// previous dual solution.
pub fn solve_path(
    moment: &SecondMoment,
    lambda_grid: &[f64],
    epsilon: f64,
    opts: &BcdOptions,
) -> Result<Vec<Estimate>> {
    if lambda_grid.is_empty() {
        return Err(CovselError::Parameter("lambda grid is empty".into()));
    }
    if lambda_grid[0] <= 0.0 || lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CovselError::Parameter(
            "lambda grid must be positive and strictly increasing".into(),
        ));
    }
    let mut out: Vec<Estimate> = Vec::with_capacity(lambda_grid.len());
    let mut coef = None;
    for &lambda in lambda_grid {
        let prob = Problem::new(moment.clone(), lambda, epsilon)?;
        let mut solver = match out.last() {
            Some(prev) => BcdSolver::warm_start(&prob, *opts, &prev.w, coef.take())?,
            None => BcdSolver::new(&prob, *opts)?,
        };
        let est = solver.run()?;
        coef = Some(solver.coefficients().to_vec());
        out.push(est);
    }
    Ok(out)
}

pub fn max_off_diagonal(s: &DMatrix<f64>) -> f64 {
    let p = s.nrows();
    (0..p)
        .flat_map(|j| (0..j).map(move |i| (i, j)))
        .map(|(i, j)| s[(i, j)].abs())
        .fold(0.0, f64::max)
}

pub fn run_path_following(
    p: usize,
    delta: f64,
    n: usize,
    lambda_grid: &[f64],
    epsilon: f64,
    seed: u64,
) -> Result<PathResult> {
    let truth = generate_ground_truth(p, delta, seed)?;
    let samples = sample_gaussian(&truth, n, seed)?;
    let moment = SecondMoment::from_samples(&samples)?;
    let estimates = solve_path(&moment, lambda_grid, epsilon, &BcdOptions::default())?;
    let terminal_lambda = max_off_diagonal(moment.s());

    let mut points = Vec::new();
    let mut entries = Vec::new();
    for (est, &lambda) in estimates.iter().zip(lambda_grid) {
        let pattern = estimate_pattern(est);
        points.push(PathPoint {
            lambda,
            gap: est.gap,
            sweeps: est.iterations,
            edges: pattern.len(),
            matches_truth: pattern == truth.pattern,
        });
        for j in 0..p {
            for i in 0..j {
                entries.push(PathEntry {
                    lambda,
                    i,
                    j,
                    value: est.x[(i, j)],
                    true_nonzero: truth.pattern.contains(i, j),
                });
            }
        }
    }
    let mut exact_intervals = Vec::new();
    let mut open: Option<f64> = None;
    for (k, pt) in points.iter().enumerate() {
        match (pt.matches_truth, open) {
            (true, None) => open = Some(pt.lambda),
            (false, Some(start)) => {
                exact_intervals.push((start, points[k - 1].lambda));
                open = None;
            }
            _ => {}
        }
    }
    if let (Some(start), Some(last)) = (open, points.last()) {
        exact_intervals.push((start, last.lambda));
    }
    let terminal_diagonal = points
        .iter()
        .filter(|pt| pt.lambda >= terminal_lambda)
        .all(|pt| pt.edges == 0);
    Ok(PathResult {
        points,
        entries,
        estimates,
        exact_intervals,
        terminal_lambda,
        terminal_diagonal,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskingRow {
    pub lambda: f64,
    /// `log(λ/σ)`.
    pub log_ratio: f64,
    pub mean_error_pct: f64,
    pub std_error_pct: f64,
}

/// `(Σ⁻¹ + V)⁻¹` with `V` symmetric, entries uniform on `(−σ, σ)`,
/// redrawn until the perturbed precision is positive definite.
pub fn masked_moment(truth: &GroundTruth, sigma: f64, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    let p = truth.precision.nrows();
    let noise = Uniform::new(-sigma, sigma).map_err(|e| CovselError::Parameter(e.to_string()))?;
    for _ in 0..MAX_NOISE_REDRAWS {
        let mut v = DMatrix::zeros(p, p);
        for j in 0..p {
            for i in 0..=j {
                let x = rng.sample(noise);
                v[(i, j)] = x;
                v[(j, i)] = x;
            }
        }
        let perturbed = &truth.precision + v;
        if let Ok(s) = linalg::inverse_spd(&perturbed, "perturbed precision") {
            return Ok(s);
        }
    }
    Err(CovselError::Generation(format!(
        "noisy precision was not positive definite after {MAX_NOISE_REDRAWS} draws"
    )))
}

/// Per-trial error percentages, one row per trial, columns over the grid.
pub fn noise_masking_errors(
    p: usize,
    delta: f64,
    sigma: f64,
    lambda_grid: &[f64],
    trials: usize,
    epsilon: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if !(sigma > 0.0) {
        return Err(CovselError::Parameter(format!(
            "noise level must be positive, got {sigma}"
        )));
    }
    let opts = BcdOptions {
        max_sweeps: MASKING_MAX_SWEEPS,
        qp_max_iter: MASKING_QP_MAX_ITER,
        ..BcdOptions::default()
    };
    (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let truth = generate_ground_truth_with(p, delta, &mut stream_rng(seed, trial, Stream::Truth), seed)?;
            let s = masked_moment(&truth, sigma, &mut stream_rng(seed, trial, Stream::Noise))?;
            let moment = SecondMoment::from_matrix(s, p)?;
            lambda_grid
                .iter()
                .map(|&lambda| {
                    let (est, _) = solve_sml(moment.clone(), lambda, epsilon, &opts)?;
                    Ok(classification_report(&estimate_pattern(&est), &truth.pattern)?.error_pct)
                })
                .collect()
        })
        .collect()
}

pub fn run_noise_masking(
    p: usize,
    delta: f64,
    sigma: f64,
    lambda_grid: &[f64],
    trials: usize,
    epsilon: f64,
    seed: u64,
) -> Result<Vec<MaskingRow>> {
    let errors = noise_masking_errors(p, delta, sigma, lambda_grid, trials, epsilon, seed)?;
    Ok(lambda_grid
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let vals: Vec<f64> = errors.iter().map(|row| row[k]).collect();
            let (mean, std) = mean_std(&vals);
            MaskingRow {
                lambda,
                log_ratio: (lambda / sigma).ln(),
                mean_error_pct: mean,
                std_error_pct: std,
            }
        })
        .collect())
}

/// Mean and population standard deviation.
pub fn mean_std(vals: &[f64]) -> (f64, f64) {
    if vals.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonConfig {
    pub p: usize,
    pub delta: f64,
    pub trials: usize,
    pub alpha: f64,
    pub epsilon: f64,
    /// Lasso penalty; `None` reuses the SML `λ(α)` of the same trial.
    pub lasso_lambda: Option<f64>,
    pub seed: u64,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            p: 30,
            delta: 0.05,
            trials: 30,
            alpha: 0.05,
            epsilon: 1e-6,
            lasso_lambda: None,
            seed: 0,
        }
    }
}

/// SML, Lasso-OR and Lasso-AND on the same samples. Trials run in
/// parallel; the records come back sorted by `(n, trial_id, method)`.
pub fn run_classifier_comparison(cfg: &ComparisonConfig, n_grid: &[usize]) -> Result<Vec<TrialRecord>> {
    let jobs: Vec<(usize, usize, u64)> = n_grid
        .iter()
        .enumerate()
        .flat_map(|(ni, &n)| (0..cfg.trials as u64).map(move |t| (ni, n, t)))
        .collect();
    let nested: Vec<Vec<TrialRecord>> = jobs
        .par_iter()
        .map(|&(ni, n, trial)| comparison_trial(cfg, n, (ni * cfg.trials) as u64 + trial, trial))
        .collect::<Result<_>>()?;
    let mut records: Vec<TrialRecord> = nested.into_iter().flatten().collect();
    records.sort_by_key(|a| (a.n, a.trial_id, a.method));
    Ok(records)
}

/// Everything one comparison trial produced, before classification.
#[derive(Debug, Clone)]
pub struct TrialPatterns {
    pub truth: SparsityPattern,
    pub sml: SparsityPattern,
    pub lasso_or: SparsityPattern,
    pub lasso_and: SparsityPattern,
    pub sml_lambda: f64,
    pub lasso_lambda: f64,
    pub sml_gap: f64,
    pub sml_time: f64,
    pub lasso_time: f64,
}

/// Runs one trial of the comparison. `stream` selects the random streams;
/// [`run_classifier_comparison`] uses `n_index * trials + trial`.
pub fn comparison_patterns(cfg: &ComparisonConfig, n: usize, stream: u64) -> Result<TrialPatterns> {
    let truth = generate_ground_truth_with(
        cfg.p,
        cfg.delta,
        &mut stream_rng(cfg.seed, stream, Stream::Truth),
        cfg.seed,
    )?;
    let samples = sample_gaussian_with(&truth, n, &mut stream_rng(cfg.seed, stream, Stream::Samples))?;
    let moment = SecondMoment::from_samples(&samples)?;
    let sml_lambda = gaussian_lambda(&moment, cfg.alpha, false)?.lambda;
    let (est, sml_time) = solve_sml(moment.clone(), sml_lambda, cfg.epsilon, &BcdOptions::default())?;
    let lasso_lambda = cfg.lasso_lambda.unwrap_or(sml_lambda);
    let start = Instant::now();
    let coefs = neighborhood_coefficients(moment.s(), lasso_lambda, &QpOptions::default())?;
    let lasso_time = start.elapsed().as_secs_f64();
    Ok(TrialPatterns {
        sml: estimate_pattern(&est),
        lasso_or: combine_neighborhoods(&coefs, EdgeRule::Or),
        lasso_and: combine_neighborhoods(&coefs, EdgeRule::And),
        truth: truth.pattern,
        sml_lambda,
        lasso_lambda,
        sml_gap: est.gap,
        sml_time,
        lasso_time,
    })
}

fn comparison_trial(cfg: &ComparisonConfig, n: usize, stream: u64, trial_id: u64) -> Result<Vec<TrialRecord>> {
    let t = comparison_patterns(cfg, n, stream)?;
    let record = |pattern: &SparsityPattern, method, lambda, gap, time| -> Result<TrialRecord> {
        let report = classification_report(pattern, &t.truth)?;
        Ok(TrialRecord::new(
            trial_id, n, cfg.p, cfg.delta, lambda, method, report, gap, time,
        ))
    };
    Ok(vec![
        record(&t.sml, Method::Sml, t.sml_lambda, t.sml_gap, t.sml_time)?,
        record(&t.lasso_or, Method::LassoOR, t.lasso_lambda, 0.0, t.lasso_time)?,
        record(&t.lasso_and, Method::LassoAND, t.lasso_lambda, 0.0, t.lasso_time)?,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub method: Method,
    pub trials: usize,
    pub mean_power: f64,
    pub mean_ppv: f64,
    pub mean_density: f64,
    pub mean_error_pct: f64,
}

/// Means per `(n, method)`, sorted.
pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(usize, Method)> = records.iter().map(|r| (r.n, r.method)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(n, method)| {
            let group: Vec<&TrialRecord> = records.iter().filter(|r| r.n == n && r.method == method).collect();
            let mean = |f: fn(&TrialRecord) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / group.len() as f64;
            SummaryRow {
                n,
                method,
                trials: group.len(),
                mean_power: mean(|r| r.power),
                mean_ppv: mean(|r| r.ppv),
                mean_density: mean(|r| r.density),
                mean_error_pct: mean(|r| r.error_pct),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub p: usize,
    pub n: usize,
    pub instances: usize,
    pub mean_wall_time: f64,
    pub max_gap: f64,
    /// Instances that hit the time limit.
    pub censored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of log time against log p.
    pub log_log_slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingConfig {
    pub delta: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub instances: usize,
    pub time_limit: f64,
    pub seed: u64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            delta: 0.05,
            lambda: 0.1,
            epsilon: 0.1,
            instances: 3,
            time_limit: 3600.0,
            seed: 0,
        }
    }
}

/// BCD wall time with `n = ⌈p/3⌉`. Instances run one at a time so the
/// timings are not distorted by each other.
pub fn run_scaling_bench(p_list: &[usize], cfg: &ScalingConfig) -> Result<ScalingResult> {
    if p_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CovselError::Parameter(
            "problem sizes must be strictly increasing".into(),
        ));
    }
    let mut rows = Vec::new();
    for &p in p_list {
        let n = p.div_ceil(3).max(2);
        let mut times = Vec::new();
        let mut max_gap: f64 = 0.0;
        let mut censored = 0;
        for inst in 0..cfg.instances as u64 {
            let stream = (p as u64) << 16 | inst;
            let truth =
                generate_ground_truth_with(p, cfg.delta, &mut stream_rng(cfg.seed, stream, Stream::Truth), cfg.seed)?;
            let samples = sample_gaussian_with(&truth, n, &mut stream_rng(cfg.seed, stream, Stream::Samples))?;
            let moment = SecondMoment::from_samples(&samples)?;
            let prob = Problem::new(moment, cfg.lambda, cfg.epsilon)?;
            let start = Instant::now();
            let mut solver = BcdSolver::new(&prob, BcdOptions::default())?;
            let mut gap = solver.gap()?;
            while gap > cfg.epsilon {
                if start.elapsed().as_secs_f64() > cfg.time_limit {
                    censored += 1;
                    break;
                }
                solver.sweep()?;
                gap = solver.gap()?;
            }
            times.push(start.elapsed().as_secs_f64());
            max_gap = max_gap.max(gap);
        }
        rows.push(ScalingRow {
            p,
            n,
            instances: cfg.instances,
            mean_wall_time: times.iter().sum::<f64>() / times.len().max(1) as f64,
            max_gap,
            censored,
        });
    }
    let log_log_slope = fit_slope(
        &rows.iter().map(|r| (r.p as f64).ln()).collect::<Vec<_>>(),
        &rows
            .iter()
            .map(|r| r.mean_wall_time.max(1e-12).ln())
            .collect::<Vec<_>>(),
    );
    Ok(ScalingResult { rows, log_log_slope })
}

fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let (mx, my) = (
        x.iter().sum::<f64>() / x.len() as f64,
        y.iter().sum::<f64>() / y.len() as f64,
    );
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortedMagnitudeRow {
    pub rank: usize,
    pub inverse_moment: f64,
    pub estimate: f64,
}

/// Sorted absolute off-diagonal entries of `S⁻¹` and of the SML estimate,
/// largest first.
pub fn sorted_magnitudes(
    p: usize,
    delta: f64,
    n: usize,
    lambda: f64,
    epsilon: f64,
    seed: u64,
) -> Result<Vec<SortedMagnitudeRow>> {
    let truth = generate_ground_truth(p, delta, seed)?;
    let moment = SecondMoment::from_samples(&sample_gaussian(&truth, n, seed)?)?;
    let inv = linalg::inverse_spd(moment.s(), "S").map_err(|_| CovselError::Singular("S is not invertible".into()))?;
    let (est, _) = solve_sml(moment, lambda, epsilon, &BcdOptions::default())?;
    let sorted = |m: &DMatrix<f64>| {
        let mut v: Vec<f64> = (0..p)
            .flat_map(|j| (0..j).map(move |i| (i, j)))
            .map(|(i, j)| m[(i, j)].abs())
            .collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    let (a, b) = (sorted(&inv), sorted(&est.x));
    Ok(a.into_iter()
        .zip(b)
        .enumerate()
        .map(|(rank, (inverse_moment, estimate))| SortedMagnitudeRow {
            rank,
            inverse_moment,
            estimate,
        })
        .collect())
}

/// Design constants written next to every experiment's results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConstants {
    pub rng: String,
    pub diagonal_range: (f64, f64),
    pub off_diagonal_range: (f64, f64),
    pub min_eigenvalue: f64,
    pub shift_margin: f64,
    pub noise: String,
    pub lasso_lambda: String,
}

impl Default for GeneratorConstants {
    fn default() -> Self {
        Self {
            rng: "ChaCha8, seed_from_u64(seed), stream = 8*trial + purpose".into(),
            diagonal_range: DIAGONAL_RANGE,
            off_diagonal_range: OFF_DIAGONAL_RANGE,
            min_eigenvalue: MIN_EIGENVALUE,
            shift_margin: SHIFT_MARGIN,
            noise: "symmetric, entries uniform(-sigma, sigma)".into(),
            lasso_lambda: "same as the SML lambda(alpha) unless given".into(),
        }
    }
}

/// Column means of a sample matrix; used by tests and diagnostics.
pub fn column_means(samples: &SampleMatrix) -> DVector<f64> {
    let d = samples.data();
    DVector::from_iterator(d.ncols(), (0..d.ncols()).map(|j| d.column(j).mean()))
}
