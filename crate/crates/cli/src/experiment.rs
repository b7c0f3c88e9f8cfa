//! Benchmark, sensitivity-sweep, and out-of-sample experiment runners.
//!
//! Everything is deterministic given the config seed: each (instance,
//! replication) pair gets its own derived RNG stream, so grid cells and
//! replications could run in any order without changing a single byte of the
//! canonical output.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use recmatch_core::derive_seed;
use recmatch_core::evaluation::{
    monte_carlo_value, perturb_probabilities, sample_scenarios, Correlation, EvalError,
    PerturbKind, PerturbSpec,
};
use recmatch_core::instance::{generate, GenConfig, GenError, Instance, ProbModel, UtilityModel};
use recmatch_core::solvers::{
    brute_force_opt, solve_dap, solve_homogeneous_exact, solve_npp, solve_saa, solve_surrogate,
    SolveError, SolveReport, SolverConfig, SolverStrategy,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("experiment grid is empty")]
    EmptyGrid,
    #[error("no methods configured")]
    NoMethods,
    #[error("duplicate instance id \"{0}\" in grid; set distinct labels")]
    DuplicateInstanceId(String),
    #[error("replications must be at least 1")]
    NoReplications,
    #[error("tau must be positive, got {0}")]
    BadTau(f64),
    #[error("out-of-sample comparison needs at least two methods")]
    TooFewMethods,
    #[error("out-of-sample comparison needs at least one perturbation kind")]
    NoPerturbations,
    #[error("sweep has no axis points")]
    EmptySweep,
    #[error("gamma {gamma} with {num_demands} demands is not an integral supply count")]
    BadGammaPoint { gamma: f64, num_demands: usize },
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// One cell of the instance grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub num_demands: usize,
    pub num_supplies: usize,
    pub theta: usize,
    #[serde(default = "default_utility_model")]
    pub utility_model: UtilityModel,
    #[serde(default = "default_prob_model")]
    pub prob_model: ProbModel,
    /// Row label; defaults to `D{demands}-S{supplies}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

fn default_utility_model() -> UtilityModel {
    UtilityModel::Synthetic3Part
}

fn default_prob_model() -> ProbModel {
    ProbModel::Homogeneous { p: 0.8 }
}

impl GridCell {
    pub fn instance_id(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| format!("D{}-S{}", self.num_demands, self.num_supplies))
    }

    fn generate(&self, master_seed: u64, replication: u32) -> Result<Instance, GenError> {
        let seed = derive_seed(
            master_seed,
            &format!("{}/instance", self.instance_id()),
            u64::from(replication),
        );
        generate(&GenConfig {
            num_demands: self.num_demands,
            num_supplies: self.num_supplies,
            theta: self.theta,
            utility_model: self.utility_model.clone(),
            prob_model: self.prob_model.clone(),
            seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    Dap,
    Npp,
    HomogExact,
    Surrogate,
    Saa,
    BruteForce,
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::Dap => "dap",
            MethodSpec::Npp => "npp",
            MethodSpec::HomogExact => "homog_exact",
            MethodSpec::Surrogate => "surrogate",
            MethodSpec::Saa => "saa",
            MethodSpec::BruteForce => "brute_force",
        }
    }

    pub fn parse(name: &str) -> Option<MethodSpec> {
        match name {
            "dap" => Some(MethodSpec::Dap),
            "npp" => Some(MethodSpec::Npp),
            "homog_exact" => Some(MethodSpec::HomogExact),
            "surrogate" => Some(MethodSpec::Surrogate),
            "saa" => Some(MethodSpec::Saa),
            "brute_force" => Some(MethodSpec::BruteForce),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instance_grid: Vec<GridCell>,
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_replications")]
    pub replications: u32,
    /// Monte Carlo samples for out-of-sample evaluation; defaults to 1e5 on
    /// tiny instances (≤ 100 cells) and 1e4 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_eval_samples: Option<usize>,
    #[serde(default)]
    pub perturbations: Vec<PerturbKind>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_time_limit")]
    pub time_limit_seconds: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// SAA scenario count; defaults to 1000 when the instance has at most 10
    /// demands and 100 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saa_samples: Option<usize>,
    #[serde(default = "default_ls_max_iters")]
    pub ls_max_iters: u64,
    #[serde(default = "default_multistart")]
    pub multistart_count: u64,
    #[serde(default = "default_strategy")]
    pub strategy: SolverStrategy,
}

fn default_replications() -> u32 {
    10
}
fn default_tau() -> f64 {
    0.01
}
fn default_time_limit() -> f64 {
    120.0
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_ls_max_iters() -> u64 {
    10_000
}
fn default_multistart() -> u64 {
    8
}
fn default_strategy() -> SolverStrategy {
    SolverStrategy::LocalSearch
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.instance_grid.is_empty() {
            return Err(ExperimentError::EmptyGrid);
        }
        if self.methods.is_empty() {
            return Err(ExperimentError::NoMethods);
        }
        if self.replications == 0 {
            return Err(ExperimentError::NoReplications);
        }
        if self.tau <= 0.0 || self.tau.is_nan() {
            return Err(ExperimentError::BadTau(self.tau));
        }
        let mut seen = Vec::new();
        for cell in &self.instance_grid {
            let id = cell.instance_id();
            if seen.contains(&id) {
                return Err(ExperimentError::DuplicateInstanceId(id));
            }
            seen.push(id);
        }
        Ok(())
    }

    fn saa_samples_for(&self, instance: &Instance) -> usize {
        self.saa_samples
            .unwrap_or(if instance.num_demands <= 10 { 1000 } else { 100 })
    }

    fn mc_samples_for(&self, instance: &Instance) -> usize {
        self.mc_eval_samples.unwrap_or_else(|| {
            if instance.num_demands * instance.num_supplies <= 100 {
                100_000
            } else {
                10_000
            }
        })
    }

    fn solver_config(&self, scope: &str, replication: u32, saa_samples: usize) -> SolverConfig {
        SolverConfig {
            tau: self.tau,
            strategy: self.strategy,
            ls_max_iters: self.ls_max_iters,
            multistart_count: self.multistart_count,
            saa_samples,
            seed: derive_seed(self.seed, scope, u64::from(replication)),
            time_limit_seconds: Some(self.time_limit_seconds),
            compute_fw_bound: false,
        }
    }
}

/// One line of the benchmark tables. Skipped methods keep empty metric
/// columns and never enter the aggregates; `eval_samples` is zero when the
/// value is the closed form and the Monte Carlo sample count otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance_id: String,
    pub replication: u32,
    pub method: String,
    pub scenario_tag: String,
    pub status: String,
    pub solver_objective: Option<f64>,
    pub exact_value: Option<f64>,
    pub gap_to_best_pct: Option<f64>,
    pub eval_samples: usize,
    pub wall_time_s: f64,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Per (instance, scenario, method) aggregate over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub instance_id: String,
    pub scenario_tag: String,
    pub method: String,
    pub replications: usize,
    pub gap_a_pct: f64,
    pub gap_w_pct: f64,
    pub cpu_mean_s: f64,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

fn skip_reason(err: &SolveError) -> Option<&'static str> {
    match err {
        SolveError::MissingDistances => Some("skipped:no_distances"),
        SolveError::HeterogeneousProbabilities { .. } => Some("skipped:heterogeneous"),
        SolveError::EnumerationTooLarge { .. } => Some("skipped:too_large"),
        _ => None,
    }
}

struct MethodRun {
    row: ResultRow,
    report: Option<SolveReport>,
}

fn execute(
    method: MethodSpec,
    instance: &Instance,
    cfg: &ExperimentConfig,
    instance_id: &str,
    replication: u32,
) -> Result<MethodRun, ExperimentError> {
    let scope = format!("{instance_id}/{}", method.name());
    let saa_samples = cfg.saa_samples_for(instance);
    let solver_cfg = cfg.solver_config(&scope, replication, saa_samples);
    let started = std::time::Instant::now();
    let solved: Result<SolveReport, SolveError> = match method {
        MethodSpec::Dap => Ok(solve_dap(instance)),
        MethodSpec::Npp => solve_npp(instance),
        MethodSpec::HomogExact => solve_homogeneous_exact(instance),
        MethodSpec::Surrogate => solve_surrogate(instance, &solver_cfg),
        MethodSpec::Saa => {
            let scenario_seed = derive_seed(cfg.seed, &format!("{scope}/scenarios"), u64::from(replication));
            sample_scenarios(instance, saa_samples, scenario_seed, Correlation::Independent)
                .map_err(SolveError::from)
                .and_then(|scenarios| solve_saa(instance, &scenarios, &solver_cfg))
        }
        MethodSpec::BruteForce => brute_force_opt(instance),
    };
    match solved {
        Ok(report) => Ok(MethodRun {
            row: ResultRow {
                instance_id: instance_id.to_string(),
                replication,
                method: method.name().to_string(),
                scenario_tag: "nominal".to_string(),
                status: "ok".to_string(),
                solver_objective: Some(report.solver_objective),
                exact_value: Some(report.exact_value),
                gap_to_best_pct: None,
                eval_samples: 0,
                wall_time_s: report.wall_time,
            },
            report: Some(report),
        }),
        Err(err) => match skip_reason(&err) {
            Some(reason) => Ok(MethodRun {
                row: ResultRow {
                    instance_id: instance_id.to_string(),
                    replication,
                    method: method.name().to_string(),
                    scenario_tag: "nominal".to_string(),
                    status: reason.to_string(),
                    solver_objective: None,
                    exact_value: None,
                    gap_to_best_pct: None,
                    eval_samples: 0,
                    wall_time_s: started.elapsed().as_secs_f64(),
                },
                report: None,
            }),
            None => Err(err.into()),
        },
    }
}

/// Fills `gap_to_best_pct` per (instance, replication, scenario) group: the
/// relative shortfall, in percent, to the best exact value found across the
/// non-skipped methods of that group. The best method's gap is exactly zero.
pub fn compute_gaps(rows: &mut [ResultRow]) {
    let mut groups: Vec<(String, u32, String)> = rows
        .iter()
        .map(|r| (r.instance_id.clone(), r.replication, r.scenario_tag.clone()))
        .collect();
    groups.sort();
    groups.dedup();
    for (id, repl, tag) in groups {
        let best = rows
            .iter()
            .filter(|r| {
                r.instance_id == id && r.replication == repl && r.scenario_tag == tag && r.is_ok()
            })
            .filter_map(|r| r.exact_value)
            .fold(f64::NEG_INFINITY, f64::max);
        for row in rows.iter_mut() {
            if row.instance_id == id && row.replication == repl && row.scenario_tag == tag {
                if let (true, Some(value)) = (row.is_ok(), row.exact_value) {
                    row.gap_to_best_pct = Some(if best > 0.0 {
                        (100.0 * (best - value) / best).max(0.0)
                    } else {
                        0.0
                    });
                }
            }
        }
    }
}

fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.instance_id
            .cmp(&b.instance_id)
            .then(a.replication.cmp(&b.replication))
            .then(a.scenario_tag.cmp(&b.scenario_tag))
            .then(a.method.cmp(&b.method))
    });
}

/// Runs every configured method on every grid cell and replication, computes
/// exact values (closed form; all generators produce independent acceptance)
/// and gaps to the per-replication best.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<BenchmarkOutput, ExperimentError> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for cell in &cfg.instance_grid {
        let id = cell.instance_id();
        for replication in 0..cfg.replications {
            let instance = cell.generate(cfg.seed, replication)?;
            for &method in &cfg.methods {
                rows.push(execute(method, &instance, cfg, &id, replication)?.row);
            }
        }
    }
    compute_gaps(&mut rows);
    sort_rows(&mut rows);
    let summary = crate::report::compute_summary(&rows);
    Ok(BenchmarkOutput { rows, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "axis", content = "values")]
pub enum SweepAxis {
    /// Vary the recommendation cap on the base cell.
    Theta(Vec<usize>),
    /// Vary a homogeneous acceptance probability.
    P(Vec<f64>),
    /// Vary the supply-to-demand ratio (supply count = gamma * demands).
    Gamma(Vec<f64>),
}

impl SweepAxis {
    fn name(&self) -> &'static str {
        match self {
            SweepAxis::Theta(_) => "theta",
            SweepAxis::P(_) => "p",
            SweepAxis::Gamma(_) => "gamma",
        }
    }

    fn len(&self) -> usize {
        match self {
            SweepAxis::Theta(v) => v.len(),
            SweepAxis::P(v) => v.len(),
            SweepAxis::Gamma(v) => v.len(),
        }
    }
}

/// Plot-ready aggregate for one (axis point, method): mean exact objective
/// and CPU with 95% confidence half-widths over replications, plus the CPU
/// ratio of the second configured method to the first (repeated on every row
/// of the point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub axis_value: f64,
    pub method: String,
    pub replications: usize,
    pub mean_objective: f64,
    pub ci95_objective: f64,
    pub mean_cpu_s: f64,
    pub ci95_cpu_s: f64,
    pub cpu_ratio_pct: Option<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn ci95(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0);
    1.96 * (var / xs.len() as f64).sqrt()
}

/// Sweeps one axis on the first grid cell. Instance and solver seeds are
/// derived per replication but not per axis point, so a probability sweep
/// reuses identical utility draws across its points.
pub fn run_sensitivity(
    cfg: &ExperimentConfig,
    sweep: &SweepAxis,
) -> Result<Vec<SweepRow>, ExperimentError> {
    cfg.validate()?;
    if sweep.len() == 0 {
        return Err(ExperimentError::EmptySweep);
    }
    let base = &cfg.instance_grid[0];
    let base_id = base.instance_id();
    let mut rows = Vec::new();
    let points: Vec<f64> = match sweep {
        SweepAxis::Theta(v) => v.iter().map(|&t| t as f64).collect(),
        SweepAxis::P(v) => v.clone(),
        SweepAxis::Gamma(v) => v.clone(),
    };
    for &point in &points {
        let mut cell = base.clone();
        match sweep {
            SweepAxis::Theta(_) => cell.theta = point as usize,
            SweepAxis::P(_) => cell.prob_model = ProbModel::Homogeneous { p: point },
            SweepAxis::Gamma(_) => {
                let product = point * base.num_demands as f64;
                let ns = product.round();
                if (product - ns).abs() > 1e-9 || ns < 1.0 {
                    return Err(ExperimentError::BadGammaPoint {
                        gamma: point,
                        num_demands: base.num_demands,
                    });
                }
                cell.num_supplies = ns as usize;
            }
        }
        cell.label = Some(base_id.clone());
        let mut objectives: Vec<Vec<f64>> = vec![Vec::new(); cfg.methods.len()];
        let mut cpus: Vec<Vec<f64>> = vec![Vec::new(); cfg.methods.len()];
        for replication in 0..cfg.replications {
            let instance = cell.generate(cfg.seed, replication)?;
            for (m, &method) in cfg.methods.iter().enumerate() {
                let run = execute(method, &instance, cfg, &base_id, replication)?;
                if let Some(report) = run.report {
                    objectives[m].push(report.exact_value);
                    cpus[m].push(report.wall_time);
                }
            }
        }
        let cpu_ratio_pct = if cfg.methods.len() >= 2 {
            let denom = mean(&cpus[0]);
            (denom > 0.0).then(|| 100.0 * mean(&cpus[1]) / denom)
        } else {
            None
        };
        for (m, &method) in cfg.methods.iter().enumerate() {
            rows.push(SweepRow {
                axis: sweep.name().to_string(),
                axis_value: point,
                method: method.name().to_string(),
                replications: objectives[m].len(),
                mean_objective: mean(&objectives[m]),
                ci95_objective: ci95(&objectives[m]),
                mean_cpu_s: mean(&cpus[m]),
                ci95_cpu_s: ci95(&cpus[m]),
                cpu_ratio_pct,
            });
        }
    }
    Ok(rows)
}

/// Solves on nominal probabilities, then evaluates every solution under each
/// perturbation kind by Monte Carlo on the perturbed instance. Gap-to-best is
/// computed within each scenario tag.
pub fn run_out_of_sample(cfg: &ExperimentConfig) -> Result<BenchmarkOutput, ExperimentError> {
    cfg.validate()?;
    if cfg.methods.len() < 2 {
        return Err(ExperimentError::TooFewMethods);
    }
    if cfg.perturbations.is_empty() {
        return Err(ExperimentError::NoPerturbations);
    }
    let mut rows = Vec::new();
    for cell in &cfg.instance_grid {
        let id = cell.instance_id();
        for replication in 0..cfg.replications {
            let instance = cell.generate(cfg.seed, replication)?;
            let mc_samples = cfg.mc_samples_for(&instance);
            let mut solved: Vec<(MethodSpec, SolveReport)> = Vec::new();
            for &method in &cfg.methods {
                let run = execute(method, &instance, cfg, &id, replication)?;
                if let Some(report) = run.report {
                    solved.push((method, report));
                }
                rows.push(run.row);
            }
            for &kind in &cfg.perturbations {
                let tag = kind.tag();
                let perturb_seed =
                    derive_seed(cfg.seed, &format!("{id}/perturb/{tag}"), u64::from(replication));
                let perturbed =
                    perturb_probabilities(&instance, &PerturbSpec { kind, seed: perturb_seed });
                for (method, report) in &solved {
                    let eval_seed = derive_seed(
                        cfg.seed,
                        &format!("{id}/mc/{tag}/{}", method.name()),
                        u64::from(replication),
                    );
                    let started = std::time::Instant::now();
                    let eval = monte_carlo_value(&perturbed, &report.rec, mc_samples, eval_seed)?;
                    rows.push(ResultRow {
                        instance_id: id.clone(),
                        replication,
                        method: method.name().to_string(),
                        scenario_tag: tag.to_string(),
                        status: "ok".to_string(),
                        solver_objective: None,
                        exact_value: Some(eval.total),
                        gap_to_best_pct: None,
                        eval_samples: mc_samples,
                        wall_time_s: started.elapsed().as_secs_f64(),
                    });
                }
            }
        }
    }
    compute_gaps(&mut rows);
    sort_rows(&mut rows);
    let summary = crate::report::compute_summary(&rows);
    Ok(BenchmarkOutput { rows, summary })
}
