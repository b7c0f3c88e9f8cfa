use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use recmatch_cli::{
    emit_report, emit_sweep, run_benchmark, run_out_of_sample, run_sensitivity, ExperimentConfig,
    ExperimentError, MethodSpec, SweepAxis,
};
use recmatch_core::bounds::{
    correlated_gap_bound, dap_gap_certificate, observed_surrogate_gap, homogeneous_gap_bound, heterogeneous_gap_bound,
    uniform_baseline_value, BoundInputs,
};
use recmatch_core::evaluation::{
    jensen_upper_bound, enumerate_outcomes_value, exact_expected_utility, monte_carlo_value,
    sample_scenarios, surrogate_value, Correlation,
};
use recmatch_core::instance::{
    generate, generate_case_like, GenConfig, Instance, ProbModel, Recommendation, UtilityModel,
};
use recmatch_core::solvers::{
    brute_force_opt, solve_dap, solve_homogeneous_exact, solve_npp, solve_saa, solve_surrogate,
    SolverConfig, SolverStrategy,
};

#[derive(Parser)]
#[command(
    name = "recmatch",
    version,
    about = "Recommend-to-match under random supply rejections: generators, policies, evaluation, gap bounds, and benchmark runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file.
    Generate(GenerateArgs),
    /// Solve an instance with one policy; prints a solve report as JSON.
    Solve(SolveArgs),
    /// Evaluate a recommendation on an instance; prints an evaluation as JSON.
    Evaluate(EvaluateArgs),
    /// Run the benchmark grid from a config file (rows.csv, timing.csv, summary.json).
    Bench(RunArgs),
    /// Run a one-axis sensitivity sweep from a config file (sweep.csv).
    Sweep(SweepArgs),
    /// Out-of-sample robustness comparison from a config file.
    Oos(RunArgs),
    /// Evaluate an approximation-gap bound or the uniform baseline closed form.
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    num_demands: usize,
    #[arg(long)]
    num_supplies: usize,
    #[arg(long)]
    theta: usize,
    /// synthetic | case_like | uniform:LO,HI | adversarial:A,B
    #[arg(long, default_value = "synthetic")]
    utility: String,
    /// homog:P | uniform:LO,HI | case_like
    #[arg(long, default_value = "homog:0.8")]
    prob: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path for the instance JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Dap,
    Npp,
    HomogExact,
    Surrogate,
    Saa,
    BruteForce,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Greedy,
    LocalSearch,
    ExactTiny,
}

impl From<StrategyArg> for SolverStrategy {
    fn from(value: StrategyArg) -> Self {
        match value {
            StrategyArg::Greedy => SolverStrategy::Greedy,
            StrategyArg::LocalSearch => SolverStrategy::LocalSearch,
            StrategyArg::ExactTiny => SolverStrategy::ExactTiny,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "local-search")]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 0.01)]
    tau: f64,
    /// SAA scenario count.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    ls_max_iters: u64,
    #[arg(long, default_value_t = 3)]
    multistart: u64,
    /// Attach a Frank-Wolfe relaxation bound to heuristic surrogate solves.
    #[arg(long)]
    fw_bound: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalMethodArg {
    Exact,
    Enumeration,
    Mc,
    Surrogate,
    UpperBound,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Recommendation JSON: {"lists": [[...], ...]}.
    #[arg(long)]
    rec: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    method: EvalMethodArg,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    tau: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's per-solve time limit (seconds).
    #[arg(long)]
    time_limit: Option<f64>,
    /// Override the config's methods (comma-separated).
    #[arg(long)]
    methods: Option<String>,
    /// Override the config's surrogate temperature.
    #[arg(long)]
    tau: Option<f64>,
    /// Override the config's SAA scenario count.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Theta,
    P,
    Gamma,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Comma-separated axis points, e.g. "1,2,3,4,5" or "0.3,0.5,0.7".
    #[arg(long)]
    values: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundKindArg {
    Homogeneous,
    Heterogeneous,
    Correlated,
    Baseline,
    DapGap,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, value_enum)]
    kind: BoundKindArg,
    #[arg(long, default_value_t = 4)]
    theta: usize,
    #[arg(long, default_value_t = 0.01)]
    tau: f64,
    #[arg(long, default_value_t = 1)]
    num_demands: usize,
    /// Per-demand utility lower bound (uniform across demands).
    #[arg(long)]
    a: Option<f64>,
    /// Per-demand utility upper bound (uniform across demands).
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    p_lo: Option<f64>,
    #[arg(long)]
    p_hi: Option<f64>,
    /// Homogeneous acceptance probability (baseline kind).
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Evaluate the homogeneous bound formula even when gamma != theta.
    #[arg(long)]
    off_hypothesis: bool,
    /// Instance file (dap-gap kind).
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn config(err: impl std::fmt::Display) -> Self {
        CliError::Config(err.to_string())
    }

    fn runtime(err: impl std::fmt::Display) -> Self {
        CliError::Runtime(err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{err}");
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            eprint!("{err}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Oos(args) => cmd_oos(args),
        Command::Bounds(args) => cmd_bounds(args),
    }
}

fn parse_utility(spec: &str) -> Result<UtilityModel, CliError> {
    let bad = || CliError::Config(format!("unrecognized utility model \"{spec}\""));
    if spec == "synthetic" {
        return Ok(UtilityModel::Synthetic3Part);
    }
    if spec == "case_like" {
        return Ok(UtilityModel::CaseLike);
    }
    if let Some(range) = spec.strip_prefix("uniform:") {
        let (lo, hi) = range.split_once(',').ok_or_else(bad)?;
        return Ok(UtilityModel::UniformRange {
            lo: vec![lo.trim().parse().map_err(|_| bad())?],
            hi: vec![hi.trim().parse().map_err(|_| bad())?],
        });
    }
    if let Some(range) = spec.strip_prefix("adversarial:") {
        let (a, b) = range.split_once(',').ok_or_else(bad)?;
        return Ok(UtilityModel::Adversarial {
            a: a.trim().parse().map_err(|_| bad())?,
            b: b.trim().parse().map_err(|_| bad())?,
        });
    }
    Err(bad())
}

fn parse_prob(spec: &str) -> Result<ProbModel, CliError> {
    let bad = || CliError::Config(format!("unrecognized probability model \"{spec}\""));
    if spec == "case_like" {
        return Ok(ProbModel::CaseLike);
    }
    if let Some(p) = spec.strip_prefix("homog:") {
        return Ok(ProbModel::Homogeneous {
            p: p.trim().parse().map_err(|_| bad())?,
        });
    }
    if let Some(range) = spec.strip_prefix("uniform:") {
        let (lo, hi) = range.split_once(',').ok_or_else(bad)?;
        return Ok(ProbModel::UniformRange {
            lo: lo.trim().parse().map_err(|_| bad())?,
            hi: hi.trim().parse().map_err(|_| bad())?,
        });
    }
    Err(bad())
}

fn cmd_generate(args: GenerateArgs) -> Result<(), CliError> {
    let cfg = GenConfig {
        num_demands: args.num_demands,
        num_supplies: args.num_supplies,
        theta: args.theta,
        utility_model: parse_utility(&args.utility)?,
        prob_model: parse_prob(&args.prob)?,
        seed: args.seed,
    };
    let instance = if matches!(cfg.utility_model, UtilityModel::CaseLike) {
        generate_case_like(&cfg)
    } else {
        generate(&cfg)
    }
    .map_err(CliError::config)?;
    instance.save(&args.out).map_err(CliError::runtime)?;
    println!("{}", args.out.display());
    Ok(())
}

fn load_instance(path: &PathBuf) -> Result<Instance, CliError> {
    Instance::load(path).map_err(CliError::config)
}

fn emit_json<T: serde::Serialize>(value: &T, out: Option<&PathBuf>) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value).map_err(CliError::runtime)?;
    match out {
        Some(path) => fs::write(path, json).map_err(CliError::runtime)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<(), CliError> {
    let instance = load_instance(&args.instance)?;
    let cfg = SolverConfig {
        tau: args.tau,
        strategy: args.strategy.into(),
        ls_max_iters: args.ls_max_iters,
        multistart_count: args.multistart,
        saa_samples: args.samples,
        seed: args.seed,
        time_limit_seconds: args.time_limit,
        compute_fw_bound: args.fw_bound,
    };
    let report = match args.method {
        MethodArg::Dap => Ok(solve_dap(&instance)),
        MethodArg::Npp => solve_npp(&instance),
        MethodArg::HomogExact => solve_homogeneous_exact(&instance),
        MethodArg::Surrogate => solve_surrogate(&instance, &cfg),
        MethodArg::Saa => sample_scenarios(&instance, cfg.saa_samples, args.seed, Correlation::Independent)
            .map_err(recmatch_core::solvers::SolveError::from)
            .and_then(|scenarios| solve_saa(&instance, &scenarios, &cfg)),
        MethodArg::BruteForce => brute_force_opt(&instance),
    }
    .map_err(CliError::runtime)?;
    emit_json(&report, args.out.as_ref())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let instance = load_instance(&args.instance)?;
    let raw = fs::read_to_string(&args.rec).map_err(CliError::config)?;
    let rec: Recommendation = serde_json::from_str(&raw).map_err(CliError::config)?;
    match args.method {
        EvalMethodArg::Exact => {
            let eval = exact_expected_utility(&instance, &rec).map_err(CliError::runtime)?;
            emit_json(&eval, args.out.as_ref())
        }
        EvalMethodArg::Enumeration => {
            let eval = enumerate_outcomes_value(&instance, &rec).map_err(CliError::runtime)?;
            emit_json(&eval, args.out.as_ref())
        }
        EvalMethodArg::Mc => {
            let eval = monte_carlo_value(&instance, &rec, args.samples, args.seed)
                .map_err(CliError::runtime)?;
            emit_json(&eval, args.out.as_ref())
        }
        EvalMethodArg::Surrogate => {
            let value = surrogate_value(&instance, &rec, args.tau).map_err(CliError::runtime)?;
            emit_json(&serde_json::json!({"surrogate_value": value, "tau": args.tau}), args.out.as_ref())
        }
        EvalMethodArg::UpperBound => {
            let value = jensen_upper_bound(&instance, &rec, args.tau).map_err(CliError::runtime)?;
            emit_json(&serde_json::json!({"jensen_upper_bound": value, "tau": args.tau}), args.out.as_ref())
        }
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let raw = fs::read_to_string(&args.config).map_err(CliError::config)?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&raw).map_err(CliError::config)?;
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(limit) = args.time_limit {
        cfg.time_limit_seconds = limit;
    }
    if let Some(tau) = args.tau {
        cfg.tau = tau;
    }
    if let Some(samples) = args.samples {
        cfg.saa_samples = Some(samples);
    }
    if let Some(methods) = &args.methods {
        cfg.methods = methods
            .split(',')
            .map(|m| {
                MethodSpec::parse(m.trim())
                    .ok_or_else(|| CliError::Config(format!("unknown method \"{m}\"")))
            })
            .collect::<Result<_, _>>()?;
    }
    cfg.validate().map_err(CliError::config)?;
    Ok(cfg)
}

fn experiment_error(err: ExperimentError) -> CliError {
    match err {
        ExperimentError::Solve(_) | ExperimentError::Eval(_) => CliError::runtime(err),
        other => CliError::config(other),
    }
}

fn cmd_bench(args: RunArgs) -> Result<(), CliError> {
    let cfg = load_config(&args)?;
    let output = run_benchmark(&cfg).map_err(experiment_error)?;
    let files = emit_report(&output.rows, &output.summary, &cfg.output_dir)
        .map_err(CliError::runtime)?;
    println!("{}", files.rows_csv.display());
    println!("{}", files.timing_csv.display());
    println!("{}", files.summary_json.display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.run)?;
    let values = &args.values;
    let axis = match args.axis {
        AxisArg::Theta => SweepAxis::Theta(parse_list(values)?),
        AxisArg::P => SweepAxis::P(parse_list(values)?),
        AxisArg::Gamma => SweepAxis::Gamma(parse_list(values)?),
    };
    let rows = run_sensitivity(&cfg, &axis).map_err(experiment_error)?;
    let path = emit_sweep(&rows, &cfg.output_dir).map_err(CliError::runtime)?;
    println!("{}", path.display());
    Ok(())
}

fn parse_list<T: std::str::FromStr>(values: &str) -> Result<Vec<T>, CliError> {
    values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<T>()
                .map_err(|_| CliError::Config(format!("bad axis value \"{v}\"")))
        })
        .collect()
}

fn cmd_oos(args: RunArgs) -> Result<(), CliError> {
    let cfg = load_config(&args)?;
    let output = run_out_of_sample(&cfg).map_err(experiment_error)?;
    let files = emit_report(&output.rows, &output.summary, &cfg.output_dir)
        .map_err(CliError::runtime)?;
    println!("{}", files.rows_csv.display());
    println!("{}", files.timing_csv.display());
    println!("{}", files.summary_json.display());
    Ok(())
}

fn cmd_bounds(args: BoundsArgs) -> Result<(), CliError> {
    match args.kind {
        BoundKindArg::Baseline => {
            let p = args.p.ok_or(CliError::Config("baseline needs --p".into()))?;
            let a = args.a.ok_or(CliError::Config("baseline needs --a".into()))?;
            let b = args.b.ok_or(CliError::Config("baseline needs --b".into()))?;
            let value = uniform_baseline_value(args.theta, p, a, b).map_err(CliError::config)?;
            emit_json(
                &serde_json::json!({"uniform_baseline_value": value}),
                args.out.as_ref(),
            )
        }
        BoundKindArg::DapGap => {
            let path = args
                .instance
                .ok_or(CliError::Config("dap-gap needs --instance".into()))?;
            let instance = load_instance(&path)?;
            let gap = dap_gap_certificate(&instance).map_err(CliError::runtime)?;
            emit_json(&serde_json::json!({"dap_gap": gap}), args.out.as_ref())
        }
        kind => {
            // Parameters come either from an instance file (which also yields
            // the observed gap of the certified surrogate maximizer on
            // enumerable instances) or from the flags directly.
            let (inputs, observed) = match &args.instance {
                Some(path) => {
                    let instance = load_instance(path)?;
                    let inputs = BoundInputs::from_instance(&instance, args.tau);
                    let observed = observed_surrogate_gap(&instance, args.tau).ok();
                    (inputs, observed)
                }
                None => {
                    let a = args.a.ok_or(CliError::Config("bounds need --a".into()))?;
                    let p_lo =
                        args.p_lo.ok_or(CliError::Config("bounds need --p-lo".into()))?;
                    let p_hi = args.p_hi.unwrap_or(p_lo);
                    let gamma = args.gamma.unwrap_or(args.theta as f64);
                    let inputs = BoundInputs::uniform(
                        args.theta,
                        args.tau,
                        args.num_demands,
                        a,
                        args.b,
                        p_lo,
                        p_hi,
                        gamma,
                    );
                    (inputs, None)
                }
            };
            let report = match kind {
                BoundKindArg::Homogeneous => homogeneous_gap_bound(&inputs, args.off_hypothesis),
                BoundKindArg::Heterogeneous => heterogeneous_gap_bound(&inputs),
                BoundKindArg::Correlated => correlated_gap_bound(&inputs),
                _ => unreachable!(),
            }
            .map_err(CliError::config)?;
            match observed {
                Some(gap) => emit_json(
                    &serde_json::json!({"bound": report, "observed_gap": gap}),
                    args.out.as_ref(),
                ),
                None => emit_json(&report, args.out.as_ref()),
            }
        }
    }
}
