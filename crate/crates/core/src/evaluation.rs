//! Evaluation of a fixed recommendation: exact closed form under independent
//! acceptance, exhaustive outcome enumeration (the oracle), Monte Carlo and
//! scenario-set sample averages, the log-sum-exp surrogate objective, and the
//! out-of-sample probability perturbations.
//!
//! All operations are pure given their inputs and seeds; scenario generation
//! is the only RNG consumer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{validate_recommendation, Instance, Recommendation, RecommendationViolation};

/// Largest per-demand list accepted by [`enumerate_outcomes_value`]
/// (2^k outcomes per demand).
pub const MAX_ENUMERATION_LIST: usize = 20;

/// Stand-in weight for a demand with an empty recommendation list in the
/// surrogate objective: the demand contributes `tau * ln(EMPTY_DEMAND_EPSILON)`.
/// Small enough that filling a demand always beats leaving it empty, large
/// enough to stay far from f64 underflow. Use
/// [`surrogate_value_with_epsilon`] to override.
pub const EMPTY_DEMAND_EPSILON: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    InvalidRecommendation(#[from] RecommendationViolation),
    #[error("demand {demand} has {len} recommendations; outcome enumeration caps at {max}")]
    ListTooLong { demand: usize, len: usize, max: usize },
    #[error("tau must be positive, got {0}")]
    BadTau(f64),
    #[error("sample_count must be at least 1")]
    NoSamples,
    #[error("correlation weight must lie in [0,1], got {0}")]
    BadCorrelation(f64),
    #[error("scenario set shape {got_demands}x{got_supplies} does not match instance {demands}x{supplies}")]
    ShapeMismatch {
        demands: usize,
        supplies: usize,
        got_demands: usize,
        got_supplies: usize,
    },
}

/// Dependence structure of the sampled acceptance indicators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Correlation {
    /// Every cell an independent Bernoulli draw.
    Independent,
    /// Per sample and supplier, one shared latent uniform is mixed into each
    /// of that supplier's cells with weight `rho`, correlating a supplier's
    /// responses across demands while keeping every marginal Bernoulli(p) and
    /// suppliers mutually independent.
    SupplierCommonFactor { rho: f64 },
}

/// Sampled Bernoulli acceptance realizations; reproducible from the seed, so
/// kept in memory only.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    /// `realizations[s][i][j]` is true when supply j accepts demand i in sample s.
    pub realizations: Vec<Vec<Vec<bool>>>,
    pub sample_count: usize,
    pub seed: u64,
    pub correlation: Correlation,
}

/// Result of evaluating a recommendation. `total` always equals the sum of
/// `per_demand`; `stderr` is populated by Monte Carlo only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub total: f64,
    pub per_demand: Vec<f64>,
    pub stderr: Option<f64>,
    pub method: EvaluationMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationMethod {
    Exact,
    Enumeration,
    MonteCarlo,
    ScenarioSet,
}

/// Out-of-sample probability perturbation families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PerturbKind {
    /// Redraw in [max(0, p-0.05), p]: probabilities only get worse.
    OutL,
    /// Redraw in [p, min(p+0.05, 1)]: probabilities only get better.
    OutH,
    /// Small symmetric noise, +/-0.025 clipped to [0,1].
    OutNs,
    /// Large symmetric noise, +/-0.1 clipped to [0,1].
    OutNl,
    /// Custom widths; `Custom { down: 0, up: 0 }` reproduces the nominal
    /// probabilities exactly.
    Custom { down: f64, up: f64 },
}

impl PerturbKind {
    /// Interval the perturbed probability is drawn from, clipped to [0,1].
    pub fn interval(&self, p: f64) -> (f64, f64) {
        let (down, up) = match self {
            PerturbKind::OutL => (0.05, 0.0),
            PerturbKind::OutH => (0.0, 0.05),
            PerturbKind::OutNs => (0.025, 0.025),
            PerturbKind::OutNl => (0.1, 0.1),
            PerturbKind::Custom { down, up } => (*down, *up),
        };
        ((p - down).max(0.0), (p + up).min(1.0))
    }

    pub fn tag(&self) -> &'static str {
        match self {
            PerturbKind::OutL => "out_l",
            PerturbKind::OutH => "out_h",
            PerturbKind::OutNs => "out_ns",
            PerturbKind::OutNl => "out_nl",
            PerturbKind::Custom { .. } => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub kind: PerturbKind,
    pub seed: u64,
}

/// Closed-form value of one demand's recommended set: sort by utility
/// descending (ties by ascending supply index) and add
/// `u_r * p_r * prod_{k<r} (1 - p_k)` — the chance the r-th ranked supply is
/// the best one to accept. Assumes independent acceptance within the list.
pub(crate) fn exact_demand_value(instance: &Instance, demand: usize, list: &[usize]) -> f64 {
    let mut ranked: Vec<(f64, usize)> = list
        .iter()
        .map(|&j| (instance.utility(demand, j), j))
        .collect();
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut none_better = 1.0;
    let mut value = 0.0;
    for &(u, j) in &ranked {
        let p = instance.prob(demand, j);
        value += u * p * none_better;
        none_better *= 1.0 - p;
    }
    value
}

/// Total exact value of raw per-demand lists, skipping feasibility checks;
/// the hot path for enumeration-based solvers.
pub(crate) fn exact_total_for_lists(instance: &Instance, lists: &[Vec<usize>]) -> f64 {
    lists
        .iter()
        .enumerate()
        .map(|(i, list)| exact_demand_value(instance, i, list))
        .sum()
}

/// Per-demand terms of the exact objective for a validated recommendation.
pub fn exact_demand_values(instance: &Instance, rec: &Recommendation) -> Result<Vec<f64>, EvalError> {
    validate_recommendation(instance, rec)?;
    Ok(rec
        .lists
        .iter()
        .enumerate()
        .map(|(i, list)| exact_demand_value(instance, i, list))
        .collect())
}

/// Exact expected total utility of a recommendation under independent
/// acceptance; the objective the policies are ultimately judged on.
pub fn exact_expected_utility(instance: &Instance, rec: &Recommendation) -> Result<Evaluation, EvalError> {
    let per_demand = exact_demand_values(instance, rec)?;
    Ok(Evaluation {
        total: per_demand.iter().sum(),
        per_demand,
        stderr: None,
        method: EvaluationMethod::Exact,
    })
}

/// Brute-force oracle for the exact objective: per demand, sums the
/// max-accepted utility over all 2^k acceptance outcomes weighted by their
/// joint Bernoulli probability. Independent of the closed-form path.
pub fn enumerate_outcomes_value(instance: &Instance, rec: &Recommendation) -> Result<Evaluation, EvalError> {
    validate_recommendation(instance, rec)?;
    let mut per_demand = Vec::with_capacity(instance.num_demands);
    for (i, list) in rec.lists.iter().enumerate() {
        let k = list.len();
        if k > MAX_ENUMERATION_LIST {
            return Err(EvalError::ListTooLong {
                demand: i,
                len: k,
                max: MAX_ENUMERATION_LIST,
            });
        }
        let mut value = 0.0;
        for mask in 0u32..(1u32 << k) {
            let mut prob = 1.0;
            let mut best = 0.0_f64;
            for (bit, &j) in list.iter().enumerate() {
                let p = instance.prob(i, j);
                if mask >> bit & 1 == 1 {
                    prob *= p;
                    best = best.max(instance.utility(i, j));
                } else {
                    prob *= 1.0 - p;
                }
            }
            value += prob * best;
        }
        per_demand.push(value);
    }
    Ok(Evaluation {
        total: per_demand.iter().sum(),
        per_demand,
        stderr: None,
        method: EvaluationMethod::Enumeration,
    })
}

struct ScenarioSampler {
    rng: ChaCha8Rng,
    correlation: Correlation,
    common: Vec<f64>,
}

impl ScenarioSampler {
    fn new(seed: u64, correlation: Correlation) -> Result<Self, EvalError> {
        if let Correlation::SupplierCommonFactor { rho } = correlation {
            if !(0.0..=1.0).contains(&rho) {
                return Err(EvalError::BadCorrelation(rho));
            }
        }
        Ok(ScenarioSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            correlation,
            common: Vec::new(),
        })
    }

    /// Draws one acceptance matrix. Cells are visited demand-major; with a
    /// common factor, the per-supplier latents are drawn first. `rho = 0`
    /// takes the independent path so it matches independent sampling draw for
    /// draw.
    fn next_sample(&mut self, instance: &Instance) -> Vec<Vec<bool>> {
        let rho = match self.correlation {
            Correlation::Independent => 0.0,
            Correlation::SupplierCommonFactor { rho } => rho,
        };
        if rho > 0.0 {
            self.common.clear();
            self.common
                .extend((0..instance.num_supplies).map(|_| self.rng.gen::<f64>()));
        }
        (0..instance.num_demands)
            .map(|i| {
                (0..instance.num_supplies)
                    .map(|j| {
                        let latent = if rho > 0.0 && self.rng.gen::<f64>() < rho {
                            self.common[j]
                        } else {
                            self.rng.gen::<f64>()
                        };
                        latent < instance.prob(i, j)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Samples acceptance realizations from the instance's probabilities.
pub fn sample_scenarios(
    instance: &Instance,
    sample_count: usize,
    seed: u64,
    correlation: Correlation,
) -> Result<ScenarioSet, EvalError> {
    if sample_count == 0 {
        return Err(EvalError::NoSamples);
    }
    let mut sampler = ScenarioSampler::new(seed, correlation)?;
    let realizations = (0..sample_count)
        .map(|_| sampler.next_sample(instance))
        .collect();
    Ok(ScenarioSet {
        realizations,
        sample_count,
        seed,
        correlation,
    })
}

pub(crate) fn check_shapes(instance: &Instance, scenarios: &ScenarioSet) -> Result<(), EvalError> {
    for sample in &scenarios.realizations {
        let rows = sample.len();
        let cols = sample.first().map_or(0, Vec::len);
        if rows != instance.num_demands
            || sample.iter().any(|row| row.len() != instance.num_supplies)
        {
            return Err(EvalError::ShapeMismatch {
                demands: instance.num_demands,
                supplies: instance.num_supplies,
                got_demands: rows,
                got_supplies: cols,
            });
        }
    }
    Ok(())
}

/// Best accepted utility for one demand in one sample; the second stage
/// decouples per demand because recommendations are supply-exclusive.
pub(crate) fn demand_sample_value(
    instance: &Instance,
    sample: &[Vec<bool>],
    demand: usize,
    list: &[usize],
) -> f64 {
    list.iter()
        .filter(|&&j| sample[demand][j])
        .map(|&j| instance.utility(demand, j))
        .fold(0.0, f64::max)
}

/// Sample-average utility of a recommendation over a fixed scenario set.
pub fn scenario_value(
    instance: &Instance,
    rec: &Recommendation,
    scenarios: &ScenarioSet,
) -> Result<Evaluation, EvalError> {
    validate_recommendation(instance, rec)?;
    check_shapes(instance, scenarios)?;
    let n = scenarios.realizations.len() as f64;
    let mut per_demand = vec![0.0; instance.num_demands];
    for sample in &scenarios.realizations {
        for (i, list) in rec.lists.iter().enumerate() {
            per_demand[i] += demand_sample_value(instance, sample, i, list);
        }
    }
    for v in &mut per_demand {
        *v /= n;
    }
    Ok(Evaluation {
        total: per_demand.iter().sum(),
        per_demand,
        stderr: None,
        method: EvaluationMethod::ScenarioSet,
    })
}

/// Monte Carlo estimate of the exact objective over freshly sampled
/// independent scenarios; `stderr` is the sample standard deviation of the
/// per-sample totals divided by sqrt(sample_count).
pub fn monte_carlo_value(
    instance: &Instance,
    rec: &Recommendation,
    sample_count: usize,
    seed: u64,
) -> Result<Evaluation, EvalError> {
    validate_recommendation(instance, rec)?;
    if sample_count == 0 {
        return Err(EvalError::NoSamples);
    }
    let mut sampler = ScenarioSampler::new(seed, Correlation::Independent)?;
    let mut per_demand = vec![0.0; instance.num_demands];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..sample_count {
        let sample = sampler.next_sample(instance);
        let mut total = 0.0;
        for (i, list) in rec.lists.iter().enumerate() {
            let v = demand_sample_value(instance, &sample, i, list);
            per_demand[i] += v;
            total += v;
        }
        sum += total;
        sum_sq += total * total;
    }
    let n = sample_count as f64;
    for v in &mut per_demand {
        *v /= n;
    }
    let stderr = if sample_count >= 2 {
        let var = ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(Evaluation {
        total: per_demand.iter().sum(),
        per_demand,
        stderr: Some(stderr),
        method: EvaluationMethod::MonteCarlo,
    })
}

/// Stable `ln(sum_j exp(t_j) + epsilon)`: the largest finite exponent is
/// factored out so magnitudes up to `t = 1e4` neither overflow nor lose the
/// leading term.
pub(crate) fn log_sum_exp_eps(terms: &[f64], epsilon: f64) -> f64 {
    let ln_eps = epsilon.ln();
    let m = terms.iter().copied().fold(ln_eps, f64::max);
    let sum: f64 = terms.iter().map(|&t| (t - m).exp()).sum::<f64>() + (ln_eps - m).exp();
    m + sum.ln()
}

/// Per-demand surrogate terms `tau * ln(sum_{j in list} exp(u/tau) * p + eps)`.
pub fn surrogate_demand_values(
    instance: &Instance,
    rec: &Recommendation,
    tau: f64,
    epsilon: f64,
) -> Result<Vec<f64>, EvalError> {
    if tau <= 0.0 || tau.is_nan() {
        return Err(EvalError::BadTau(tau));
    }
    validate_recommendation(instance, rec)?;
    let mut values = Vec::with_capacity(instance.num_demands);
    let mut terms: Vec<f64> = Vec::new();
    for (i, list) in rec.lists.iter().enumerate() {
        terms.clear();
        terms.extend(
            list.iter()
                .map(|&j| instance.utility(i, j) / tau + instance.prob(i, j).ln()),
        );
        values.push(tau * log_sum_exp_eps(&terms, epsilon));
    }
    Ok(values)
}

/// The log-sum-exp surrogate objective
/// `tau * sum_i ln(sum_j exp(u_ij/tau) p_ij x_ij + eps)` with the default
/// empty-demand epsilon.
pub fn surrogate_value(instance: &Instance, rec: &Recommendation, tau: f64) -> Result<f64, EvalError> {
    surrogate_value_with_epsilon(instance, rec, tau, EMPTY_DEMAND_EPSILON)
}

pub fn surrogate_value_with_epsilon(
    instance: &Instance,
    rec: &Recommendation,
    tau: f64,
    epsilon: f64,
) -> Result<f64, EvalError> {
    Ok(surrogate_demand_values(instance, rec, tau, epsilon)?.iter().sum())
}

/// Jensen upper bound on the exact objective:
/// `tau * sum_i ln(sum_j ((exp(u/tau) - 1) p + 1) x_ij)`. Demands with empty
/// lists contribute zero, matching their exact value.
pub fn jensen_upper_bound(instance: &Instance, rec: &Recommendation, tau: f64) -> Result<f64, EvalError> {
    if tau <= 0.0 || tau.is_nan() {
        return Err(EvalError::BadTau(tau));
    }
    validate_recommendation(instance, rec)?;
    let mut total = 0.0;
    for (i, list) in rec.lists.iter().enumerate() {
        if list.is_empty() {
            continue;
        }
        // sum_j term_j = sum_j p e^{u/tau} + sum_j (1 - p); factor the largest
        // weighted exponent (floored at 0 so the reject mass stays exact).
        let shift = list
            .iter()
            .map(|&j| instance.utility(i, j) / tau + instance.prob(i, j).ln())
            .fold(0.0_f64, f64::max);
        let mut accept_mass = 0.0;
        let mut reject_mass = 0.0;
        for &j in list {
            let t = instance.utility(i, j) / tau + instance.prob(i, j).ln();
            accept_mass += (t - shift).exp();
            reject_mass += 1.0 - instance.prob(i, j);
        }
        total += tau * (shift + (accept_mass + reject_mass * (-shift).exp()).ln());
    }
    Ok(total)
}

/// Copy of the instance with every acceptance probability redrawn uniformly
/// from the perturbation interval (cells visited demand-major); utilities and
/// distances untouched.
pub fn perturb_probabilities(instance: &Instance, spec: &PerturbSpec) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = instance.clone();
    for row in &mut out.accept_prob {
        for p in row.iter_mut() {
            let (lo, hi) = spec.kind.interval(*p);
            *p = lo + (hi - lo) * rng.gen::<f64>();
        }
    }
    out
}
