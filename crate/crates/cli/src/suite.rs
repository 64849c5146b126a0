//! `covsel bench`: the synthetic experiments with fixed, documented sizes.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use covsel_core::io;
use covsel_core::synthetic::{self, ComparisonConfig, GeneratorConstants, ScalingConfig, TimingRecord};
use covsel_core::{CovselError, Result};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Recovery,
    Sorted,
    Path,
    Masking,
    Comparison,
    Scaling,
    All,
}

#[derive(Args)]
pub struct BenchArgs {
    #[arg(value_enum)]
    pub name: Experiment,
    /// Smaller grids, for smoke runs and CI.
    #[arg(long, conflicts_with = "large")]
    pub fast: bool,
    /// Large problem sizes; runs for hours.
    #[arg(long)]
    pub large: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Overrides the trial count of the repeated experiments.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, env = "COVSEL_OUT", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Fast,
    Default,
    Large,
}

#[derive(Serialize)]
struct Meta<P: Serialize> {
    experiment: Experiment,
    mode: Mode,
    seed: u64,
    version: &'static str,
    params: P,
    constants: GeneratorConstants,
}

fn write_meta<P: Serialize>(dir: &Path, experiment: Experiment, args: &BenchArgs, params: P) -> Result<()> {
    let meta = Meta {
        experiment,
        mode: mode(args),
        seed: args.seed,
        version: env!("CARGO_PKG_VERSION"),
        params,
        constants: GeneratorConstants::default(),
    };
    io::write_json(&dir.join("meta.json"), &meta)
}

fn mode(args: &BenchArgs) -> Mode {
    match (args.fast, args.large) {
        (true, _) => Mode::Fast,
        (_, true) => Mode::Large,
        _ => Mode::Default,
    }
}

fn subdir(args: &BenchArgs, name: &str) -> Result<PathBuf> {
    let dir = args.out.join(name);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

pub fn run(args: &BenchArgs) -> Result<()> {
    let all = [
        Experiment::Recovery,
        Experiment::Sorted,
        Experiment::Path,
        Experiment::Masking,
        Experiment::Comparison,
        Experiment::Scaling,
    ];
    let selected: Vec<Experiment> = if args.name == Experiment::All {
        all.to_vec()
    } else {
        vec![args.name]
    };
    for exp in selected {
        match exp {
            Experiment::Recovery => recovery(args)?,
            Experiment::Sorted => sorted(args)?,
            Experiment::Path => path(args)?,
            Experiment::Masking => masking(args)?,
            Experiment::Comparison => comparison(args)?,
            Experiment::Scaling => scaling(args)?,
            Experiment::All => unreachable!(),
        }
        println!("{exp:?}: done");
    }
    Ok(())
}

#[derive(Serialize)]
struct RecoveryParams {
    p: usize,
    delta: f64,
    n_list: Vec<usize>,
    lambda: f64,
    epsilon: f64,
}

fn recovery(args: &BenchArgs) -> Result<()> {
    let params = RecoveryParams {
        p: 30,
        delta: 0.1,
        n_list: vec![60, 30, 20],
        lambda: 0.1,
        epsilon: 1e-6,
    };
    let dir = subdir(args, "recovery")?;
    let r = synthetic::run_recovery_experiment(
        params.p,
        params.delta,
        &params.n_list,
        params.lambda,
        params.epsilon,
        args.seed,
    )?;
    io::write_records(&dir.join("records.csv"), &r.records)?;
    io::write_records(
        &dir.join("timings.csv"),
        &r.records.iter().map(TimingRecord::from).collect::<Vec<_>>(),
    )?;
    if let Some(first) = r.matrices.first() {
        io::write_matrix(&dir.join("truth_precision.csv"), &first.truth_precision, None)?;
    }
    for m in &r.matrices {
        io::write_matrix(&dir.join(format!("estimate_n{}.csv", m.n)), &m.estimate, None)?;
        if let Some(inv) = &m.inverse_moment {
            io::write_matrix(&dir.join(format!("inverse_moment_n{}.csv", m.n)), inv, None)?;
        }
    }
    write_meta(&dir, Experiment::Recovery, args, params)
}

#[derive(Serialize)]
struct SortedParams {
    p: usize,
    delta: f64,
    n: usize,
    lambda: f64,
    epsilon: f64,
}

fn sorted(args: &BenchArgs) -> Result<()> {
    let params = match mode(args) {
        Mode::Fast => SortedParams {
            p: 50,
            delta: 0.1,
            n: 100,
            lambda: 0.1,
            epsilon: 1e-6,
        },
        _ => SortedParams {
            p: 100,
            delta: 0.1,
            n: 200,
            lambda: 0.1,
            epsilon: 1e-6,
        },
    };
    let dir = subdir(args, "sorted")?;
    let rows = synthetic::sorted_magnitudes(
        params.p,
        params.delta,
        params.n,
        params.lambda,
        params.epsilon,
        args.seed,
    )?;
    io::write_records(&dir.join("sorted_magnitudes.csv"), &rows)?;
    write_meta(&dir, Experiment::Sorted, args, params)
}

#[derive(Serialize)]
struct PathParams {
    p: usize,
    delta: f64,
    n: usize,
    runs: usize,
    lambda_grid: Vec<f64>,
    epsilon: f64,
}

#[derive(Serialize)]
struct PathSummary {
    run: usize,
    seed: u64,
    terminal_lambda: f64,
    terminal_diagonal: bool,
    exact_intervals: Vec<(f64, f64)>,
}

/// `count` points spaced evenly in log between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

fn path(args: &BenchArgs) -> Result<()> {
    let params = PathParams {
        p: 5,
        delta: 0.3,
        n: 100,
        runs: 2,
        lambda_grid: log_grid(1e-3, 10.0, if args.fast { 41 } else { 121 }),
        epsilon: 1e-8,
    };
    let dir = subdir(args, "path")?;
    let mut summaries = Vec::new();
    for run in 0..params.runs {
        let seed = args.seed + run as u64;
        let r = synthetic::run_path_following(
            params.p,
            params.delta,
            params.n,
            &params.lambda_grid,
            params.epsilon,
            seed,
        )?;
        io::write_records(&dir.join(format!("points_{run}.csv")), &r.points)?;
        io::write_records(&dir.join(format!("entries_{run}.csv")), &r.entries)?;
        summaries.push(PathSummary {
            run,
            seed,
            terminal_lambda: r.terminal_lambda,
            terminal_diagonal: r.terminal_diagonal,
            exact_intervals: r.exact_intervals,
        });
    }
    io::write_json(&dir.join("summary.json"), &summaries)?;
    write_meta(&dir, Experiment::Path, args, params)
}

#[derive(Serialize)]
struct MaskingParams {
    p: usize,
    delta: f64,
    sigma: f64,
    trials: usize,
    lambda_grid: Vec<f64>,
    epsilon: f64,
}

pub fn masking_grid(sigma: f64, fast: bool) -> Vec<f64> {
    let step = if fast { 2 } else { 1 };
    (-8..=4)
        .step_by(step)
        .map(|k| sigma * 10f64.powf(k as f64 / 4.0))
        .collect()
}

fn masking(args: &BenchArgs) -> Result<()> {
    let sigma = 0.1;
    let params = MaskingParams {
        p: 50,
        delta: 0.1,
        sigma,
        trials: args.trials.unwrap_or(10),
        lambda_grid: masking_grid(sigma, args.fast),
        epsilon: 1e-6,
    };
    let dir = subdir(args, "masking")?;
    let rows = synthetic::run_noise_masking(
        params.p,
        params.delta,
        params.sigma,
        &params.lambda_grid,
        params.trials,
        params.epsilon,
        args.seed,
    )?;
    io::write_records(&dir.join("masking.csv"), &rows)?;
    write_meta(&dir, Experiment::Masking, args, params)
}

#[derive(Serialize)]
struct ComparisonParams {
    p: usize,
    delta: f64,
    trials: usize,
    alpha: f64,
    epsilon: f64,
    n_grid: Vec<usize>,
    lasso_lambda: &'static str,
}

pub fn comparison_config(args: &BenchArgs) -> (ComparisonConfig, Vec<usize>) {
    let (p, n_grid) = match mode(args) {
        Mode::Fast => (30, vec![30, 100, 310]),
        Mode::Default => (30, vec![10, 20, 40, 80, 160, 310]),
        Mode::Large => (100, vec![30, 100, 300, 1000]),
    };
    let cfg = ComparisonConfig {
        p,
        delta: 0.05,
        trials: args.trials.unwrap_or(30),
        alpha: 0.05,
        epsilon: 1e-6,
        lasso_lambda: None,
        seed: args.seed,
    };
    (cfg, n_grid)
}

fn comparison(args: &BenchArgs) -> Result<()> {
    let (cfg, n_grid) = comparison_config(args);
    let dir = subdir(args, "comparison")?;
    let records = synthetic::run_classifier_comparison(&cfg, &n_grid)?;
    io::write_records(&dir.join("trials.csv"), &records)?;
    io::write_json(&dir.join("trials.json"), &records)?;
    io::write_records(&dir.join("summary.csv"), &synthetic::summarize(&records))?;
    io::write_records(
        &dir.join("timings.csv"),
        &records.iter().map(TimingRecord::from).collect::<Vec<_>>(),
    )?;
    let params = ComparisonParams {
        p: cfg.p,
        delta: cfg.delta,
        trials: cfg.trials,
        alpha: cfg.alpha,
        epsilon: cfg.epsilon,
        n_grid,
        lasso_lambda: "SML lambda(alpha) of the same trial",
    };
    write_meta(&dir, Experiment::Comparison, args, params)
}

#[derive(Serialize)]
struct ScalingParams {
    p_list: Vec<usize>,
    delta: f64,
    lambda: f64,
    epsilon: f64,
    instances: usize,
    time_limit: f64,
}

fn scaling(args: &BenchArgs) -> Result<()> {
    let p_list = match mode(args) {
        Mode::Fast => vec![20, 40, 80],
        Mode::Default => vec![50, 100, 200],
        Mode::Large => vec![400, 500, 600, 700, 800, 900, 1000],
    };
    let cfg = ScalingConfig {
        seed: args.seed,
        instances: args.trials.unwrap_or(3),
        ..Default::default()
    };
    if cfg.instances == 0 {
        return Err(CovselError::Parameter("need at least one instance".into()));
    }
    let dir = subdir(args, "scaling")?;
    let result = synthetic::run_scaling_bench(&p_list, &cfg)?;
    // Wall times vary between runs, so this directory is not reproducible.
    io::write_records(&dir.join("timings.csv"), &result.rows)?;
    io::write_json(&dir.join("fit.json"), &result)?;
    let params = ScalingParams {
        p_list,
        delta: cfg.delta,
        lambda: cfg.lambda,
        epsilon: cfg.epsilon,
        instances: cfg.instances,
        time_limit: cfg.time_limit,
    };
    write_meta(&dir, Experiment::Scaling, args, params)
}
