use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use covsel_core::binary::{binary_problem, BinaryEstimate};
use covsel_core::io::{self, EmitRequest, SamplesInput};
use covsel_core::synthetic::{self, GeneratorConstants};
use covsel_core::{
    binary_lambda, gaussian_lambda, BcdOptions, CovselError, DataKind, NesterovOptions, PenaltyChoice, Problem,
    SecondMoment, Solver, SolverKind,
};
use serde::Serialize;

mod suite;

#[derive(Parser)]
#[command(name = "covsel", version, about = "Sparse inverse covariance estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and write the estimate and its certificate.
    Estimate(EstimateArgs),
    /// Print the penalty λ(α) and its inputs.
    Penalty(PenaltyArgs),
    /// Solve along a grid of penalties with warm starts.
    Path(PathArgs),
    /// Generate a sparse ground truth and Gaussian samples.
    Synth(SynthArgs),
    /// Run one of the synthetic experiments.
    Bench(suite::BenchArgs),
    /// Recompute the gap and KKT residual of an emitted estimate.
    Certify(CertifyArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum InputKind {
    Samples,
    Moment,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Bcd,
    Nesterov,
}

/// `--lambda 0.1` or `--lambda auto:0.05[:relaxed]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
enum LambdaSpec {
    Value(f64),
    Auto { alpha: f64, relaxed: bool },
}

impl FromStr for LambdaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let positive = |v: &str| match v.parse::<f64>() {
            Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
            _ => Err(format!("expected a positive number, got {v:?}")),
        };
        match s.split(':').collect::<Vec<_>>().as_slice() {
            [v] => positive(v).map(LambdaSpec::Value),
            ["auto", a] => Ok(LambdaSpec::Auto {
                alpha: positive(a)?,
                relaxed: false,
            }),
            ["auto", a, "relaxed"] => Ok(LambdaSpec::Auto {
                alpha: positive(a)?,
                relaxed: true,
            }),
            _ => Err(format!("expected a number or auto:<alpha>[:relaxed], got {s:?}")),
        }
    }
}

#[derive(Args)]
struct InputArgs {
    /// CSV file: samples in rows, or a second-moment matrix.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "samples")]
    kind: InputKind,
    /// Sample count behind a second-moment input.
    #[arg(long)]
    n: Option<usize>,
    /// Treat the data as ±1 (0/1 is remapped).
    #[arg(long)]
    binary: bool,
    /// Value substituted for blank cells in binary data.
    #[arg(long, allow_hyphen_values = true)]
    impute: Option<f64>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Penalty: a positive number, `auto:α`, or `auto:α:relaxed`.
    #[arg(long)]
    lambda: LambdaSpec,
    /// Duality gap target.
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, value_enum, default_value = "bcd")]
    solver: SolverArg,
    /// Sweep cap for BCD, step cap for Nesterov.
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, env = "COVSEL_OUT", default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct PenaltyArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Use α instead of α/2p² as the tail probability.
    #[arg(long)]
    relaxed: bool,
}

#[derive(Args)]
struct PathArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated increasing penalties.
    #[arg(long, value_delimiter = ',', required = true)]
    lambdas: Vec<f64>,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, env = "COVSEL_OUT", default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    p: usize,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "COVSEL_OUT", default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct CertifyArgs {
    /// Directory written by `estimate`.
    #[arg(long)]
    dir: PathBuf,
}

/// Everything that determined a run, written next to its outputs.
#[derive(Serialize)]
struct RunMeta<'a> {
    command: &'a str,
    version: &'a str,
    input: &'a Path,
    input_kind: InputKind,
    data_kind: DataKind,
    n: usize,
    p: usize,
    lambda_spec: LambdaSpec,
    lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    penalty: Option<&'a PenaltyChoice>,
    epsilon: f64,
    solver: SolverKind,
    imputed_cells: usize,
    remapped: bool,
    converged: bool,
    names: Option<&'a [String]>,
}

/// Loaded input, either raw samples or a moment matrix.
struct Loaded {
    samples: Option<SamplesInput>,
    moment: SecondMoment,
    names: Option<Vec<String>>,
    data_kind: DataKind,
}

fn load(args: &InputArgs) -> Result<Loaded, CovselError> {
    let data_kind = if args.binary {
        DataKind::Binary
    } else {
        DataKind::Gaussian
    };
    match args.kind {
        InputKind::Samples => {
            let input = io::parse_samples_csv(&args.input, data_kind, args.impute)?;
            let moment = SecondMoment::from_samples(&input.samples)?;
            let names = input.samples.names().map(<[String]>::to_vec);
            Ok(Loaded {
                samples: Some(input),
                moment,
                names,
                data_kind,
            })
        }
        InputKind::Moment => {
            if args.binary {
                return Err(CovselError::Parameter("binary estimation needs sample input".into()));
            }
            let (moment, names) = io::parse_moment_csv(&args.input, args.n.unwrap_or(0))?;
            Ok(Loaded {
                samples: None,
                moment,
                names,
                data_kind,
            })
        }
    }
}

fn penalty_choice(loaded: &Loaded, alpha: f64, relaxed: bool) -> Result<PenaltyChoice, CovselError> {
    match loaded.data_kind {
        DataKind::Gaussian => gaussian_lambda(&loaded.moment, alpha, relaxed),
        DataKind::Binary => binary_lambda(&loaded.moment, alpha, relaxed),
    }
}

fn solver_for(arg: SolverArg, max_iter: Option<usize>) -> Solver {
    match arg {
        SolverArg::Bcd => {
            let mut opts = BcdOptions::default();
            if let Some(m) = max_iter {
                opts.max_sweeps = m;
            }
            Solver::Bcd(opts)
        }
        SolverArg::Nesterov => Solver::Nesterov(NesterovOptions {
            max_steps: max_iter,
            ..Default::default()
        }),
    }
}

enum Failure {
    Core(CovselError),
    /// The solver stopped early; partial outputs were written.
    NotConverged,
    Mismatch,
}

impl From<CovselError> for Failure {
    fn from(e: CovselError) -> Self {
        Failure::Core(e)
    }
}

fn estimate(args: &EstimateArgs) -> Result<(), Failure> {
    let loaded = load(&args.input)?;
    let (lambda, choice) = match args.lambda {
        LambdaSpec::Value(v) => (v, None),
        LambdaSpec::Auto { alpha, relaxed } => {
            let c = penalty_choice(&loaded, alpha, relaxed)?;
            (c.lambda, Some(c))
        }
    };
    let prob = match &loaded.samples {
        Some(input) if loaded.data_kind == DataKind::Binary => binary_problem(&input.samples, lambda, args.epsilon)?,
        _ => Problem::new(loaded.moment.clone(), lambda, args.epsilon)?,
    };
    let solver = solver_for(args.solver, args.max_iter);
    let (est, converged) = match solver.solve(&prob) {
        Ok(est) => (est, true),
        Err(CovselError::Convergence { estimate, .. }) => (*estimate, false),
        Err(e) => return Err(e.into()),
    };
    let binary = match loaded.data_kind {
        DataKind::Binary => Some(BinaryEstimate::from_estimate(
            est.clone(),
            prob.moment().mu_bar().clone(),
        )?),
        DataKind::Gaussian => None,
    };
    let req = EmitRequest {
        estimate: &est,
        problem: &prob,
        names: loaded.names.as_deref(),
        binary: binary.as_ref(),
        converged,
    };
    let cert = io::emit_estimate(&args.out, &req)?;
    let meta = RunMeta {
        command: "estimate",
        version: env!("CARGO_PKG_VERSION"),
        input: &args.input.input,
        input_kind: args.input.kind,
        data_kind: loaded.data_kind,
        n: loaded.moment.n(),
        p: loaded.moment.p(),
        lambda_spec: args.lambda,
        lambda,
        penalty: choice.as_ref(),
        epsilon: args.epsilon,
        solver: est.solver,
        imputed_cells: loaded.samples.as_ref().map_or(0, |s| s.imputed_cells),
        remapped: loaded.samples.as_ref().is_some_and(|s| s.remapped),
        converged,
        names: loaded.names.as_deref(),
    };
    io::write_json(&args.out.join(io::RUN_META_FILE), &meta)?;
    println!(
        "lambda {lambda:.6e} gap {:.3e} kkt {:.3e} iterations {} edges {}",
        cert.gap,
        cert.kkt_residual,
        cert.iterations,
        io::edge_rows(&est.x, &est.x, None).len()
    );
    if converged {
        Ok(())
    } else {
        log::error!("solver stopped before reaching the gap target; outputs are flagged as not converged");
        Err(Failure::NotConverged)
    }
}

#[derive(Serialize)]
struct PenaltyReport<'a> {
    n: usize,
    p: usize,
    max_sigma_product: f64,
    min_sigma_product: f64,
    #[serde(flatten)]
    choice: &'a PenaltyChoice,
}

fn penalty(args: &PenaltyArgs) -> Result<(), Failure> {
    let loaded = load(&args.input)?;
    let choice = penalty_choice(&loaded, args.alpha, args.relaxed)?;
    let sigma = loaded.moment.sigma_hat();
    let mut products = Vec::new();
    for i in 0..sigma.len() {
        for j in 0..i {
            products.push(sigma[i] * sigma[j]);
        }
    }
    let report = PenaltyReport {
        n: loaded.moment.n(),
        p: loaded.moment.p(),
        max_sigma_product: products.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min_sigma_product: products.iter().copied().fold(f64::INFINITY, f64::min),
        choice: &choice,
    };
    println!("{}", serde_json::to_string_pretty(&report).map_err(CovselError::from)?);
    Ok(())
}

fn path(args: &PathArgs) -> Result<(), Failure> {
    let loaded = load(&args.input)?;
    if loaded.data_kind == DataKind::Binary {
        return Err(CovselError::Parameter("path supports Gaussian input only".into()).into());
    }
    let estimates = synthetic::solve_path(&loaded.moment, &args.lambdas, args.epsilon, &BcdOptions::default())?;
    std::fs::create_dir_all(&args.out).map_err(CovselError::from)?;
    let mut points = Vec::new();
    let mut entries = Vec::new();
    for (est, &lambda) in estimates.iter().zip(&args.lambdas) {
        points.push(PathRow {
            lambda,
            gap: est.gap,
            sweeps: est.iterations,
            edges: synthetic::estimate_pattern(est).len(),
        });
        let p = est.x.nrows();
        for j in 0..p {
            for i in 0..j {
                entries.push(PathValue {
                    lambda,
                    i,
                    j,
                    value: est.x[(i, j)],
                });
            }
        }
    }
    io::write_records(&args.out.join("path.csv"), &points)?;
    io::write_records(&args.out.join("path_entries.csv"), &entries)?;
    for pt in &points {
        println!(
            "lambda {:.6e} gap {:.3e} sweeps {} edges {}",
            pt.lambda, pt.gap, pt.sweeps, pt.edges
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct PathRow {
    lambda: f64,
    gap: f64,
    sweeps: usize,
    edges: usize,
}

#[derive(Serialize)]
struct PathValue {
    lambda: f64,
    i: usize,
    j: usize,
    value: f64,
}

#[derive(Serialize)]
struct SynthMeta {
    p: usize,
    delta: f64,
    n: usize,
    seed: u64,
    edges: usize,
    constants: GeneratorConstants,
}

fn synth(args: &SynthArgs) -> Result<(), Failure> {
    let truth = synthetic::generate_ground_truth(args.p, args.delta, args.seed)?;
    let samples = synthetic::sample_gaussian(&truth, args.n, args.seed)?;
    std::fs::create_dir_all(&args.out).map_err(CovselError::from)?;
    let names: Vec<String> = (1..=args.p).map(|k| format!("X{k}")).collect();
    io::write_matrix(&args.out.join("truth_precision.csv"), &truth.precision, Some(&names))?;
    io::write_matrix(&args.out.join("truth_covariance.csv"), &truth.covariance, Some(&names))?;
    io::write_matrix(&args.out.join("samples.csv"), samples.data(), Some(&names))?;
    io::write_edges(
        &args.out.join("truth_edges.csv"),
        &io::edge_rows(&truth.precision, &truth.precision, Some(&names)),
    )?;
    let meta = SynthMeta {
        p: args.p,
        delta: args.delta,
        n: args.n,
        seed: args.seed,
        edges: truth.pattern.len(),
        constants: GeneratorConstants::default(),
    };
    io::write_json(&args.out.join(io::RUN_META_FILE), &meta)?;
    println!(
        "wrote p={} n={} edges={} to {}",
        args.p,
        args.n,
        truth.pattern.len(),
        args.out.display()
    );
    Ok(())
}

fn certify(args: &CertifyArgs) -> Result<(), Failure> {
    let report = io::certify_dir(&args.dir)?;
    println!("{}", serde_json::to_string_pretty(&report).map_err(CovselError::from)?);
    if report.matches {
        Ok(())
    } else {
        Err(Failure::Mismatch)
    }
}

fn exit_code(e: &CovselError) -> u8 {
    match e {
        CovselError::Convergence { .. } | CovselError::InnerConvergence { .. } => 3,
        CovselError::Parse { .. }
        | CovselError::Parameter(_)
        | CovselError::Dimension(_)
        | CovselError::Data(_)
        | CovselError::InsufficientSamples { .. }
        | CovselError::DegenerateVariance { .. }
        | CovselError::Size(_)
        | CovselError::Io(_)
        | CovselError::Csv(_)
        | CovselError::Json(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Penalty(a) => penalty(a),
        Command::Path(a) => path(a),
        Command::Synth(a) => synth(a),
        Command::Bench(a) => suite::run(a).map_err(Failure::from),
        Command::Certify(a) => certify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::NotConverged) => ExitCode::from(3),
        Err(Failure::Mismatch) => {
            eprintln!("certificate does not match the files");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_spec_parsing() {
        assert_eq!("0.25".parse::<LambdaSpec>().unwrap(), LambdaSpec::Value(0.25));
        assert_eq!(
            "auto:0.05".parse::<LambdaSpec>().unwrap(),
            LambdaSpec::Auto {
                alpha: 0.05,
                relaxed: false
            }
        );
        assert_eq!(
            "auto:0.1:relaxed".parse::<LambdaSpec>().unwrap(),
            LambdaSpec::Auto {
                alpha: 0.1,
                relaxed: true
            }
        );
        for bad in ["", "-1", "auto", "auto:x", "auto:0.05:loose", "0"] {
            assert!(bad.parse::<LambdaSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
