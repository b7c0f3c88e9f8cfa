//! The matching policies. All solvers return a [`SolveReport`] carrying the
//! recommendation, the objective the solver itself maximized, and the exact
//! expected utility of that recommendation filled in post hoc, so policies
//! with different proxies stay comparable.

mod mincost;
mod search;

pub use search::{frank_wolfe_upper_bound, ENUMERATION_BUDGET};

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{
    check_shapes, exact_total_for_lists, EvalError, ScenarioSet,
};
use crate::instance::{Instance, Recommendation};

use mincost::max_weight_b_matching;
use search::{
    enumeration_size, exact_tiny_best, greedy_fill, multistart_local_search, DemandObjective,
    SaaObjective, SearchState, SurrogateObjective,
};

/// Probabilities within this absolute tolerance count as homogeneous.
pub const HOMOGENEITY_TOL: f64 = 1e-12;

const FW_BOUND_ITERATIONS: usize = 50;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("instance has no distance matrix; the nearby-priority policy needs one")]
    MissingDistances,
    #[error("acceptance probabilities are heterogeneous (min {min}, max {max}); this solver requires homogeneous p")]
    HeterogeneousProbabilities { min: f64, max: f64 },
    #[error("enumeration would visit about {candidates:.3e} recommendation families; budget is {budget}")]
    EnumerationTooLarge { candidates: f64, budget: u64 },
    #[error("tau must be positive, got {0}")]
    BadTau(f64),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStrategy {
    /// Lazy greedy insertions only.
    Greedy,
    /// Greedy start plus first-improvement moves
    /// (insert / transfer / swap / delete), with perturbed restarts.
    LocalSearch,
    /// Exhaustive enumeration; certified optimum, tiny instances only.
    ExactTiny,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tau: f64,
    pub strategy: SolverStrategy,
    pub ls_max_iters: u64,
    pub multistart_count: u64,
    pub saa_samples: usize,
    pub seed: u64,
    /// Soft wall-clock cap for the search loops, in seconds.
    pub time_limit_seconds: Option<f64>,
    /// When set, heuristic surrogate solves also carry a Frank-Wolfe
    /// relaxation bound in `upper_bound`.
    pub compute_fw_bound: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tau: 0.01,
            strategy: SolverStrategy::LocalSearch,
            ls_max_iters: 10_000,
            multistart_count: 8,
            saa_samples: 1000,
            seed: 0,
            time_limit_seconds: None,
            compute_fw_bound: false,
        }
    }
}

impl SolverConfig {
    fn deadline(&self, start: Instant) -> Option<Instant> {
        self.time_limit_seconds
            .map(|s| start + Duration::from_secs_f64(s.max(0.0)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Dap,
    Npp,
    HomogeneousExact,
    SurrogateGreedy,
    SurrogateLocalSearch,
    SurrogateExactTiny,
    SaaGreedy,
    SaaLocalSearch,
    SaaExactTiny,
    BruteForce,
}

impl SolveMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SolveMethod::Dap => "dap",
            SolveMethod::Npp => "npp",
            SolveMethod::HomogeneousExact => "homog_exact",
            SolveMethod::SurrogateGreedy => "surrogate_greedy",
            SolveMethod::SurrogateLocalSearch => "surrogate_local_search",
            SolveMethod::SurrogateExactTiny => "surrogate_exact_tiny",
            SolveMethod::SaaGreedy => "saa_greedy",
            SolveMethod::SaaLocalSearch => "saa_local_search",
            SolveMethod::SaaExactTiny => "saa_exact_tiny",
            SolveMethod::BruteForce => "brute_force",
        }
    }
}

impl std::fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A policy's output. `solver_objective` is whatever the policy maximized
/// (weighted linear value, surrogate value, in-sample average, ...);
/// `exact_value` is the exact expected utility of `rec` and is the number the
/// benchmark tables compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub rec: Recommendation,
    pub solver_objective: f64,
    pub exact_value: f64,
    pub wall_time: f64,
    pub method: SolveMethod,
    pub iterations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_bound: Option<f64>,
}

fn finish(
    instance: &Instance,
    lists: Vec<Vec<usize>>,
    solver_objective: f64,
    method: SolveMethod,
    iterations: u64,
    upper_bound: Option<f64>,
    start: Instant,
) -> SolveReport {
    let exact_value = exact_total_for_lists(instance, &lists);
    let rec = Recommendation::from_lists(lists);
    debug_assert!(crate::instance::validate_recommendation(instance, &rec).is_ok());
    SolveReport {
        rec,
        solver_objective,
        exact_value,
        wall_time: start.elapsed().as_secs_f64(),
        method,
        iterations,
        upper_bound,
    }
}

fn pairs_to_lists(num_demands: usize, pairs: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut lists = vec![Vec::new(); num_demands];
    for &(l, r) in pairs {
        lists[l].push(r);
    }
    lists
}

/// Direct assignment policy: maximizes `sum p_ij u_ij x_ij` exactly via
/// b-matching (demand capacity theta, supply capacity one).
pub fn solve_dap(instance: &Instance) -> SolveReport {
    let start = Instant::now();
    let caps = vec![instance.theta; instance.num_demands];
    let result = max_weight_b_matching(
        instance.num_demands,
        instance.num_supplies,
        &caps,
        |i, j| instance.prob(i, j) * instance.utility(i, j),
    );
    let lists = pairs_to_lists(instance.num_demands, &result.pairs);
    finish(
        instance,
        lists,
        result.total_weight,
        SolveMethod::Dap,
        result.augmentations,
        Some(result.total_weight),
        start,
    )
}

/// Nearby-priority policy: maximizes `sum (M - d_ij) x_ij` with
/// `M = max distance + 1`, so weights are strictly positive and every
/// possible recommendation slot is used on dense instances.
pub fn solve_npp(instance: &Instance) -> Result<SolveReport, SolveError> {
    let start = Instant::now();
    let distances = instance.distances.as_ref().ok_or(SolveError::MissingDistances)?;
    let big = distances.iter().flatten().copied().fold(0.0_f64, f64::max) + 1.0;
    let caps = vec![instance.theta; instance.num_demands];
    let result = max_weight_b_matching(
        instance.num_demands,
        instance.num_supplies,
        &caps,
        |i, j| big - distances[i][j],
    );
    let lists = pairs_to_lists(instance.num_demands, &result.pairs);
    Ok(finish(
        instance,
        lists,
        result.total_weight,
        SolveMethod::Npp,
        result.augmentations,
        Some(result.total_weight),
        start,
    ))
}

/// Exact solver for homogeneous acceptance probabilities via the ranked-slot
/// reduction: demand i becomes theta slots with weights `p (1-p)^{r-1}`, the
/// slot-supply assignment is solved as a b-matching, and by the rearrangement
/// inequality the optimal slot assignment sorts each demand's set descending,
/// so its value is the exact expected utility. `solver_objective` equals
/// `exact_value`.
pub fn solve_homogeneous_exact(instance: &Instance) -> Result<SolveReport, SolveError> {
    let start = Instant::now();
    if !instance.is_homogeneous(HOMOGENEITY_TOL) {
        return Err(SolveError::HeterogeneousProbabilities {
            min: instance.min_prob(),
            max: instance.max_prob(),
        });
    }
    let p = instance.accept_prob[0][0];
    let theta = instance.theta;
    let mut slot_weight = Vec::with_capacity(theta);
    let mut w = p;
    for _ in 0..theta {
        slot_weight.push(w);
        w *= 1.0 - p;
    }
    let n_slots = instance.num_demands * theta;
    let caps = vec![1usize; n_slots];
    let result = max_weight_b_matching(n_slots, instance.num_supplies, &caps, |slot, j| {
        slot_weight[slot % theta] * instance.utility(slot / theta, j)
    });
    let mut lists = vec![Vec::new(); instance.num_demands];
    for &(slot, j) in &result.pairs {
        lists[slot / theta].push(j);
    }
    for list in &mut lists {
        list.sort_unstable();
    }
    let exact = exact_total_for_lists(instance, &lists);
    Ok(finish(
        instance,
        lists,
        exact,
        SolveMethod::HomogeneousExact,
        result.augmentations,
        Some(exact),
        start,
    ))
}

fn ensure_enumerable(instance: &Instance) -> Result<(), SolveError> {
    let candidates = enumeration_size(instance.num_demands, instance.num_supplies);
    if candidates > ENUMERATION_BUDGET as f64 {
        return Err(SolveError::EnumerationTooLarge {
            candidates,
            budget: ENUMERATION_BUDGET,
        });
    }
    Ok(())
}

/// Certified maximizer of the exact expected utility by exhaustive
/// enumeration of feasible recommendations; the oracle the other policies are
/// measured against on tiny instances.
pub fn brute_force_opt(instance: &Instance) -> Result<SolveReport, SolveError> {
    let start = Instant::now();
    ensure_enumerable(instance)?;
    let mut best_lists = vec![Vec::new(); instance.num_demands];
    let mut best_value = f64::NEG_INFINITY;
    let candidates = search::enumerate_feasible(
        instance.num_demands,
        instance.num_supplies,
        instance.theta,
        &mut |lists| {
            let value = exact_total_for_lists(instance, lists);
            if value > best_value {
                best_value = value;
                best_lists = lists.to_vec();
            }
        },
    );
    Ok(finish(
        instance,
        best_lists,
        best_value,
        SolveMethod::BruteForce,
        candidates,
        Some(best_value),
        start,
    ))
}

/// (lists, solver objective, iterations, certified upper bound).
type StrategyOutcome = (Vec<Vec<usize>>, f64, u64, Option<f64>);

fn run_strategy<O: DemandObjective>(
    obj: &O,
    instance: &Instance,
    cfg: &SolverConfig,
    start: Instant,
) -> Result<StrategyOutcome, SolveError> {
    match cfg.strategy {
        SolverStrategy::Greedy => {
            let mut state = SearchState::empty(obj, instance.num_demands, instance.num_supplies);
            let iterations = greedy_fill(obj, &mut state, instance.theta);
            Ok((state.lists, state.total, iterations, None))
        }
        SolverStrategy::LocalSearch => {
            let (state, iterations) = multistart_local_search(
                obj,
                instance.num_demands,
                instance.num_supplies,
                instance.theta,
                cfg.ls_max_iters,
                cfg.multistart_count.max(1),
                cfg.seed,
                cfg.deadline(start),
            );
            Ok((state.lists, state.total, iterations, None))
        }
        SolverStrategy::ExactTiny => {
            ensure_enumerable(instance)?;
            let (lists, value, candidates) = exact_tiny_best(
                obj,
                instance.num_demands,
                instance.num_supplies,
                instance.theta,
            );
            Ok((lists, value, candidates, Some(value)))
        }
    }
}

/// Maximizes the log-sum-exp surrogate objective over the discrete feasible
/// set with the configured strategy.
pub fn solve_surrogate(instance: &Instance, cfg: &SolverConfig) -> Result<SolveReport, SolveError> {
    let start = Instant::now();
    if cfg.tau <= 0.0 || cfg.tau.is_nan() {
        return Err(SolveError::BadTau(cfg.tau));
    }
    let obj = SurrogateObjective::new(instance, cfg.tau);
    let (lists, objective, iterations, mut upper_bound) = run_strategy(&obj, instance, cfg, start)?;
    let method = match cfg.strategy {
        SolverStrategy::Greedy => SolveMethod::SurrogateGreedy,
        SolverStrategy::LocalSearch => SolveMethod::SurrogateLocalSearch,
        SolverStrategy::ExactTiny => SolveMethod::SurrogateExactTiny,
    };
    if upper_bound.is_none() && cfg.compute_fw_bound {
        upper_bound = Some(frank_wolfe_upper_bound(instance, cfg.tau, FW_BOUND_ITERATIONS)?);
    }
    Ok(finish(instance, lists, objective, method, iterations, upper_bound, start))
}

/// Maximizes the sample-average utility over a fixed scenario set with the
/// configured strategy; `solver_objective` is the in-sample average while
/// `exact_value` is computed on the true probabilities.
pub fn solve_saa(
    instance: &Instance,
    scenarios: &ScenarioSet,
    cfg: &SolverConfig,
) -> Result<SolveReport, SolveError> {
    let start = Instant::now();
    check_shapes(instance, scenarios)?;
    let obj = SaaObjective { instance, scenarios };
    let (lists, objective, iterations, upper_bound) = run_strategy(&obj, instance, cfg, start)?;
    let method = match cfg.strategy {
        SolverStrategy::Greedy => SolveMethod::SaaGreedy,
        SolverStrategy::LocalSearch => SolveMethod::SaaLocalSearch,
        SolverStrategy::ExactTiny => SolveMethod::SaaExactTiny,
    };
    Ok(finish(instance, lists, objective, method, iterations, upper_bound, start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{sample_scenarios, surrogate_value, Correlation};
    use crate::instance::{generate_adversarial_dap, Instance};

    fn adversarial() -> Instance {
        generate_adversarial_dap(2, 2, 1.0, 1.0, 1.1, 0.9, 0).unwrap()
    }

    #[test]
    fn dap_chases_the_high_utility_demand() {
        let report = solve_dap(&adversarial());
        assert_eq!(report.rec.lists[0], vec![0, 1]);
        assert!(report.rec.lists[1].is_empty());
        assert!((report.solver_objective - 1.98).abs() < 1e-12);
        // Exact value of stacking both supplies on one demand.
        let expect = 1.1 * (0.9 + 0.9 * 0.1);
        assert!((report.exact_value - expect).abs() < 1e-12);
    }

    #[test]
    fn dap_single_pair() {
        let inst = Instance::new(1, vec![vec![2.0]], vec![vec![0.5]], None, "t", None).unwrap();
        let report = solve_dap(&inst);
        assert_eq!(report.rec.lists[0], vec![0]);
        assert!((report.solver_objective - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dap_with_zero_probabilities_returns_valid_empty_objective() {
        let inst = Instance::new(
            2,
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            None,
            "t",
            None,
        )
        .unwrap();
        let report = solve_dap(&inst);
        assert_eq!(report.solver_objective, 0.0);
        assert!(crate::instance::validate_recommendation(&inst, &report.rec).is_ok());
    }

    #[test]
    fn npp_prefers_the_nearer_supply() {
        let inst = Instance::new(
            1,
            vec![vec![1.0, 1.0]],
            vec![vec![0.5, 0.5]],
            Some(vec![vec![0.1, 0.9]]),
            "t",
            None,
        )
        .unwrap();
        let report = solve_npp(&inst).unwrap();
        assert_eq!(report.rec.lists[0], vec![0]);
    }

    #[test]
    fn npp_uniform_distances_fill_every_slot() {
        let inst = Instance::new(
            2,
            vec![vec![1.0; 5]; 2],
            vec![vec![0.5; 5]; 2],
            Some(vec![vec![0.3; 5]; 2]),
            "t",
            None,
        )
        .unwrap();
        let report = solve_npp(&inst).unwrap();
        // min(theta * demands, supplies) slots get used.
        assert_eq!(report.rec.num_recommended(), 4);
    }

    #[test]
    fn npp_requires_distances() {
        let inst = Instance::new(1, vec![vec![1.0]], vec![vec![0.5]], None, "t", None).unwrap();
        assert!(matches!(solve_npp(&inst), Err(SolveError::MissingDistances)));
    }

    #[test]
    fn homogeneous_exact_splits_the_adversarial_instance() {
        let report = solve_homogeneous_exact(&adversarial()).unwrap();
        assert!((report.exact_value - 1.89).abs() < 1e-12);
        assert_eq!(report.solver_objective, report.exact_value);
        assert_eq!(report.rec.lists[0].len(), 1);
        assert_eq!(report.rec.lists[1].len(), 1);
    }

    #[test]
    fn homogeneous_exact_rejects_heterogeneous_probabilities() {
        let inst = Instance::new(
            1,
            vec![vec![1.0, 1.0]],
            vec![vec![0.5, 0.6]],
            None,
            "t",
            None,
        )
        .unwrap();
        assert!(matches!(
            solve_homogeneous_exact(&inst),
            Err(SolveError::HeterogeneousProbabilities { .. })
        ));
    }

    #[test]
    fn theta_one_reduces_to_dap() {
        use crate::instance::{generate, GenConfig, ProbModel, UtilityModel};
        let cfg = GenConfig {
            num_demands: 3,
            num_supplies: 5,
            theta: 1,
            utility_model: UtilityModel::Synthetic3Part,
            prob_model: ProbModel::Homogeneous { p: 0.6 },
            seed: 21,
        };
        let inst = generate(&cfg).unwrap();
        let exact = solve_homogeneous_exact(&inst).unwrap();
        let dap = solve_dap(&inst);
        assert!((exact.exact_value - dap.exact_value).abs() < 1e-9);
    }

    #[test]
    fn brute_force_recommends_both_supplies() {
        let inst = Instance::new(
            2,
            vec![vec![10.0, 5.0]],
            vec![vec![0.5, 0.5]],
            None,
            "t",
            None,
        )
        .unwrap();
        let report = brute_force_opt(&inst).unwrap();
        assert_eq!(report.rec.lists[0], vec![0, 1]);
        assert!((report.exact_value - 6.25).abs() < 1e-12);
    }

    #[test]
    fn brute_force_uses_monotonicity_with_loose_cap() {
        let inst = Instance::new(
            4,
            vec![vec![1.0, 2.0, 3.0]],
            vec![vec![0.4, 0.4, 0.4]],
            None,
            "t",
            None,
        )
        .unwrap();
        let report = brute_force_opt(&inst).unwrap();
        assert_eq!(report.rec.lists[0], vec![0, 1, 2]);
    }

    #[test]
    fn brute_force_matches_adversarial_optimum() {
        let report = brute_force_opt(&adversarial()).unwrap();
        assert!((report.exact_value - 1.89).abs() < 1e-12);
    }

    #[test]
    fn brute_force_refuses_oversized_instances() {
        let inst = Instance::new(
            2,
            vec![vec![1.0; 30]; 5],
            vec![vec![0.5; 30]; 5],
            None,
            "t",
            None,
        )
        .unwrap();
        assert!(matches!(
            brute_force_opt(&inst),
            Err(SolveError::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn surrogate_exact_tiny_matches_enumerated_surrogate_maximum() {
        let inst = Instance::new(
            2,
            vec![vec![0.9, 0.5, 0.6], vec![0.8, 0.7, 0.4]],
            vec![vec![0.8, 0.9, 0.7], vec![0.75, 0.85, 0.95]],
            None,
            "t",
            None,
        )
        .unwrap();
        let cfg = SolverConfig {
            strategy: SolverStrategy::ExactTiny,
            tau: 0.05,
            ..SolverConfig::default()
        };
        let report = solve_surrogate(&inst, &cfg).unwrap();
        // Independent recomputation through the public evaluation path.
        let direct = surrogate_value(&inst, &report.rec, 0.05).unwrap();
        assert!((report.solver_objective - direct).abs() < 1e-9);

        let mut best = f64::NEG_INFINITY;
        search::enumerate_feasible(2, 3, 2, &mut |lists| {
            let rec = Recommendation::from_lists(lists.to_vec());
            best = best.max(surrogate_value(&inst, &rec, 0.05).unwrap());
        });
        assert!((report.solver_objective - best).abs() < 1e-9);
    }

    #[test]
    fn surrogate_rejects_nonpositive_tau() {
        let inst = Instance::new(1, vec![vec![1.0]], vec![vec![0.5]], None, "t", None).unwrap();
        let cfg = SolverConfig { tau: -1.0, ..SolverConfig::default() };
        assert!(matches!(solve_surrogate(&inst, &cfg), Err(SolveError::BadTau(_))));
    }

    #[test]
    fn saa_on_all_ones_scenario_matches_deterministic_matching() {
        // With every supply accepting, only each demand's best recommendation
        // counts, so at theta = 1 the problem is exactly the max-utility
        // assignment that DAP solves when p = 1.
        let inst = Instance::new(
            1,
            vec![vec![0.9, 0.4, 0.3], vec![0.8, 0.7, 0.2]],
            vec![vec![1.0; 3]; 2],
            None,
            "t",
            None,
        )
        .unwrap();
        let scenarios = sample_scenarios(&inst, 1, 0, Correlation::Independent).unwrap();
        assert!(scenarios.realizations[0].iter().flatten().all(|&b| b));
        let cfg = SolverConfig {
            strategy: SolverStrategy::ExactTiny,
            ..SolverConfig::default()
        };
        let saa = solve_saa(&inst, &scenarios, &cfg).unwrap();
        let dap = solve_dap(&inst);
        assert!((saa.solver_objective - dap.solver_objective).abs() < 1e-9);
        assert!((saa.solver_objective - 1.6).abs() < 1e-12);
    }

    #[test]
    fn saa_identical_scenarios_score_that_scenario() {
        let inst = Instance::new(
            1,
            vec![vec![5.0, 2.0]],
            vec![vec![0.5, 0.5]],
            None,
            "t",
            None,
        )
        .unwrap();
        let one = vec![vec![false, true]];
        let scenarios = ScenarioSet {
            realizations: vec![one.clone(), one.clone(), one],
            sample_count: 3,
            seed: 0,
            correlation: Correlation::Independent,
        };
        let cfg = SolverConfig {
            strategy: SolverStrategy::ExactTiny,
            ..SolverConfig::default()
        };
        let report = solve_saa(&inst, &scenarios, &cfg).unwrap();
        assert!((report.solver_objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reports_always_validate() {
        use crate::instance::{generate, GenConfig, ProbModel, UtilityModel};
        let cfg = GenConfig {
            num_demands: 3,
            num_supplies: 6,
            theta: 2,
            utility_model: UtilityModel::Synthetic3Part,
            prob_model: ProbModel::UniformRange { lo: 0.7, hi: 0.9 },
            seed: 33,
        };
        let inst = generate(&cfg).unwrap();
        let solver_cfg = SolverConfig::default();
        let scenarios = sample_scenarios(&inst, 64, 5, Correlation::Independent).unwrap();
        for report in [
            solve_dap(&inst),
            solve_surrogate(&inst, &solver_cfg).unwrap(),
            solve_saa(&inst, &scenarios, &solver_cfg).unwrap(),
            brute_force_opt(&inst).unwrap(),
        ] {
            assert!(crate::instance::validate_recommendation(&inst, &report.rec).is_ok());
            let recomputed = crate::evaluation::exact_expected_utility(&inst, &report.rec)
                .unwrap()
                .total;
            assert!((recomputed - report.exact_value).abs() < 1e-9);
            if let Some(ub) = report.upper_bound {
                assert!(ub >= report.solver_objective - 1e-9);
            }
        }
    }
}
