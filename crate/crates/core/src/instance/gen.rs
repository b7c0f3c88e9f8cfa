//! Instance generators for every family used in the experiments.
//!
//! All generators draw from a single ChaCha8 stream seeded from the config
//! seed, with a fixed draw order (documented per generator, demand-major for
//! per-cell draws), so equal configs produce bit-identical instances on every
//! platform. Uniform draws are `lo + (hi - lo) * next_f64()`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Instance, InstanceError};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("num_demands must be positive")]
    NoDemands,
    #[error("num_supplies must be positive")]
    NoSupplies,
    #[error("theta must be at least 1")]
    ZeroTheta,
    #[error("utility range [{lo},{hi}] must satisfy 0 <= lo <= hi and be finite")]
    BadUtilityRange { lo: f64, hi: f64 },
    #[error("per-demand range vectors must have length 1 or num_demands ({expected}), got {got}")]
    BadRangeLength { expected: usize, got: usize },
    #[error("probability range [{lo},{hi}] must satisfy 0 <= lo <= hi <= 1")]
    BadProbRange { lo: f64, hi: f64 },
    #[error("adversarial construction needs 0 < a <= b, got a={a}, b={b}")]
    BadAdversarialUtilities { a: f64, b: f64 },
    #[error("acceptance probability must lie in (0,1], got {p}")]
    BadHomogeneousProb { p: f64 },
    #[error("gamma * num_demands = {product} is not an integral supply count")]
    FractionalSupplies { product: f64 },
    #[error("adversarial construction designates ceil(num_supplies/theta) = {high} demands but only {demands} exist")]
    TooFewDemands { high: usize, demands: usize },
    #[error("case_like utilities and probabilities must be generated together (got {got})")]
    MismatchedCaseLike { got: &'static str },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// How utilities are filled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum UtilityModel {
    /// `u = 0.4 + 0.2*demand + 0.2*supply + 0.2*pair`, components uniform on
    /// [0,1]; every utility lands in [0.4, 1.0].
    Synthetic3Part,
    /// Each demand's row uniform on `[lo_i, hi_i)`. `lo`/`hi` have length 1
    /// (broadcast to all demands) or `num_demands`.
    UniformRange { lo: Vec<f64>, hi: Vec<f64> },
    /// Freight-style calibration with driver/shipper scores, revenue,
    /// distance, and familiarity; fills the distance matrix too.
    CaseLike,
    /// Worst-case family for the direct assignment policy: the designated
    /// `ceil(num_supplies/theta)` demands value every supply at `b`, all
    /// other pairs at `a`.
    Adversarial { a: f64, b: f64 },
}

impl UtilityModel {
    fn tag(&self) -> &'static str {
        match self {
            UtilityModel::Synthetic3Part => "synthetic3",
            UtilityModel::UniformRange { .. } => "uniform",
            UtilityModel::CaseLike => "caselike",
            UtilityModel::Adversarial { .. } => "adversarial",
        }
    }
}

/// How acceptance probabilities are filled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProbModel {
    Homogeneous { p: f64 },
    UniformRange { lo: f64, hi: f64 },
    /// Per-driver historical rate from the empirical quantile model, adjusted
    /// by relative distance and familiarity.
    CaseLike,
}

impl ProbModel {
    fn tag(&self) -> &'static str {
        match self {
            ProbModel::Homogeneous { .. } => "homog",
            ProbModel::UniformRange { .. } => "hetero",
            ProbModel::CaseLike => "caselike",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub num_demands: usize,
    pub num_supplies: usize,
    pub theta: usize,
    pub utility_model: UtilityModel,
    pub prob_model: ProbModel,
    pub seed: u64,
}

impl GenConfig {
    fn validate(&self) -> Result<(), GenError> {
        if self.num_demands == 0 {
            return Err(GenError::NoDemands);
        }
        if self.num_supplies == 0 {
            return Err(GenError::NoSupplies);
        }
        if self.theta == 0 {
            return Err(GenError::ZeroTheta);
        }
        match &self.utility_model {
            UtilityModel::UniformRange { lo, hi } => {
                if lo.len() != hi.len()
                    || !(lo.len() == 1 || lo.len() == self.num_demands)
                {
                    return Err(GenError::BadRangeLength {
                        expected: self.num_demands,
                        got: if lo.len() != hi.len() { hi.len() } else { lo.len() },
                    });
                }
                for (&a, &b) in lo.iter().zip(hi) {
                    if !a.is_finite() || !b.is_finite() || a < 0.0 || a > b {
                        return Err(GenError::BadUtilityRange { lo: a, hi: b });
                    }
                }
            }
            UtilityModel::Adversarial { a, b } => {
                if !(*a > 0.0 && a <= b && b.is_finite()) {
                    return Err(GenError::BadAdversarialUtilities { a: *a, b: *b });
                }
            }
            UtilityModel::Synthetic3Part | UtilityModel::CaseLike => {}
        }
        match &self.prob_model {
            ProbModel::Homogeneous { p } => {
                if !(*p > 0.0 && *p <= 1.0) {
                    return Err(GenError::BadHomogeneousProb { p: *p });
                }
            }
            ProbModel::UniformRange { lo, hi } => {
                if !(0.0 <= *lo && lo <= hi && *hi <= 1.0) {
                    return Err(GenError::BadProbRange { lo: *lo, hi: *hi });
                }
            }
            ProbModel::CaseLike => {}
        }
        let util_case = matches!(self.utility_model, UtilityModel::CaseLike);
        let prob_case = matches!(self.prob_model, ProbModel::CaseLike);
        if util_case != prob_case {
            return Err(GenError::MismatchedCaseLike {
                got: if util_case {
                    self.prob_model.tag()
                } else {
                    self.utility_model.tag()
                },
            });
        }
        Ok(())
    }

    fn label(&self) -> String {
        format!(
            "{}-{}-D{}-S{}-T{}",
            self.utility_model.tag(),
            self.prob_model.tag(),
            self.num_demands,
            self.num_supplies,
            self.theta
        )
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

fn fill_probs(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    match &cfg.prob_model {
        ProbModel::Homogeneous { p } => {
            vec![vec![*p; cfg.num_supplies]; cfg.num_demands]
        }
        ProbModel::UniformRange { lo, hi } => (0..cfg.num_demands)
            .map(|_| (0..cfg.num_supplies).map(|_| uniform(rng, *lo, *hi)).collect())
            .collect(),
        ProbModel::CaseLike => unreachable!("case_like probabilities are built with utilities"),
    }
}

/// Generates an instance from any non-adversarial, non-case utility model.
///
/// Draw order: utility components first (synthetic: per-demand, per-supply,
/// then pair residuals demand-major; uniform: cells demand-major), then
/// probabilities (cells demand-major when heterogeneous).
pub fn generate(cfg: &GenConfig) -> Result<Instance, GenError> {
    cfg.validate()?;
    match &cfg.utility_model {
        UtilityModel::CaseLike => return generate_case_like(cfg),
        UtilityModel::Adversarial { a, b } => {
            let p = match cfg.prob_model {
                ProbModel::Homogeneous { p } => p,
                _ => return Err(GenError::BadHomogeneousProb { p: f64::NAN }),
            };
            let gamma = cfg.num_supplies as f64 / cfg.num_demands as f64;
            return generate_adversarial_dap(cfg.num_demands, cfg.theta, gamma, *a, *b, p, cfg.seed);
        }
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let utilities = match &cfg.utility_model {
        UtilityModel::Synthetic3Part => {
            let demand_part: Vec<f64> = (0..cfg.num_demands).map(|_| rng.gen::<f64>()).collect();
            let supply_part: Vec<f64> = (0..cfg.num_supplies).map(|_| rng.gen::<f64>()).collect();
            (0..cfg.num_demands)
                .map(|i| {
                    (0..cfg.num_supplies)
                        .map(|j| {
                            0.4 + 0.2 * demand_part[i] + 0.2 * supply_part[j] + 0.2 * rng.gen::<f64>()
                        })
                        .collect()
                })
                .collect()
        }
        UtilityModel::UniformRange { lo, hi } => (0..cfg.num_demands)
            .map(|i| {
                let (a, b) = if lo.len() == 1 {
                    (lo[0], hi[0])
                } else {
                    (lo[i], hi[i])
                };
                (0..cfg.num_supplies).map(|_| uniform(&mut rng, a, b)).collect()
            })
            .collect(),
        UtilityModel::CaseLike | UtilityModel::Adversarial { .. } => unreachable!(),
    };
    let probs = fill_probs(cfg, &mut rng);
    Ok(Instance::new(cfg.theta, utilities, probs, None, cfg.label(), Some(cfg.seed))?)
}

/// The three-part synthetic model of the benchmark tables.
pub fn generate_synthetic(cfg: &GenConfig) -> Result<Instance, GenError> {
    match cfg.utility_model {
        UtilityModel::Synthetic3Part => generate(cfg),
        _ => generate(&GenConfig {
            utility_model: UtilityModel::Synthetic3Part,
            ..cfg.clone()
        }),
    }
}

/// Builds the worst-case family for the direct assignment policy: exactly
/// `ceil(gamma*num_demands/theta)` designated demands (the first rows) value
/// every supply at `b`; all other pairs are worth `a`; acceptance is `p`
/// everywhere. Deterministic — the seed is only recorded.
pub fn generate_adversarial_dap(
    num_demands: usize,
    theta: usize,
    gamma: f64,
    a: f64,
    b: f64,
    p: f64,
    seed: u64,
) -> Result<Instance, GenError> {
    if num_demands == 0 {
        return Err(GenError::NoDemands);
    }
    if theta == 0 {
        return Err(GenError::ZeroTheta);
    }
    if !(a > 0.0 && a <= b && b.is_finite()) {
        return Err(GenError::BadAdversarialUtilities { a, b });
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(GenError::BadHomogeneousProb { p });
    }
    let product = gamma * num_demands as f64;
    let num_supplies = product.round() as usize;
    if num_supplies == 0 {
        return Err(GenError::NoSupplies);
    }
    if (product - num_supplies as f64).abs() > 1e-9 {
        return Err(GenError::FractionalSupplies { product });
    }
    let num_high = num_supplies.div_ceil(theta);
    if num_high > num_demands {
        return Err(GenError::TooFewDemands {
            high: num_high,
            demands: num_demands,
        });
    }
    let utilities = (0..num_demands)
        .map(|i| vec![if i < num_high { b } else { a }; num_supplies])
        .collect();
    let probs = vec![vec![p; num_supplies]; num_demands];
    let label = format!("adversarial-D{num_demands}-S{num_supplies}-T{theta}");
    Ok(Instance::new(theta, utilities, probs, None, label, Some(seed))?)
}

// Empirical quantile model for the per-driver historical acceptance rate:
// piecewise-linear through the published percentiles, uniform tails to [0,1].
const RATE_QUANTILE_KNOTS: [(f64, f64); 7] = [
    (0.0, 0.0),
    (0.005, 0.05),
    (0.25, 0.45),
    (0.50, 0.64),
    (0.75, 0.76),
    (0.969, 0.95),
    (1.0, 1.0),
];

/// Maps a uniform draw to a historical acceptance rate.
pub fn historical_rate_quantile(v: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    for pair in RATE_QUANTILE_KNOTS.windows(2) {
        let (q0, r0) = pair[0];
        let (q1, r1) = pair[1];
        if v <= q1 {
            return r0 + (r1 - r0) * (v - q0) / (q1 - q0);
        }
    }
    1.0
}

/// Applies the relative-distance and familiarity adjustment to a driver's
/// historical rate. Rates outside [0.05, 0.95] are used as-is, so the result
/// never needs clipping.
pub fn adjusted_acceptance(rate: f64, rel_distance: f64, rel_familiarity: f64) -> f64 {
    if (0.05..=0.95).contains(&rate) {
        rate + 0.025 * rel_distance + 0.025 * rel_familiarity
    } else {
        rate
    }
}

/// Freight-style instance: utilities from driver/shipper evaluation scores,
/// order revenue, inverted distance, and route familiarity; acceptance from
/// the per-driver historical rate adjusted by relative distance and
/// familiarity. The distance matrix is filled so the nearby-priority policy
/// is runnable.
///
/// Draw order: per-supply historical rates, per-supply driver scores,
/// per-demand shipper scores, per-demand revenues, then per pair
/// (demand-major) distance and familiarity.
pub fn generate_case_like(cfg: &GenConfig) -> Result<Instance, GenError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (nd, ns) = (cfg.num_demands, cfg.num_supplies);
    let rates: Vec<f64> = (0..ns)
        .map(|_| historical_rate_quantile(rng.gen::<f64>()))
        .collect();
    let driver_score: Vec<f64> = (0..ns).map(|_| rng.gen::<f64>()).collect();
    let shipper_score: Vec<f64> = (0..nd).map(|_| rng.gen::<f64>()).collect();
    let revenue: Vec<f64> = (0..nd).map(|_| rng.gen::<f64>()).collect();
    let mut distances = vec![vec![0.0; ns]; nd];
    let mut familiarity = vec![vec![0.0; ns]; nd];
    for i in 0..nd {
        for j in 0..ns {
            distances[i][j] = rng.gen::<f64>();
            familiarity[i][j] = rng.gen::<f64>();
        }
    }
    let max_distance = distances
        .iter()
        .flatten()
        .copied()
        .fold(0.0_f64, f64::max);
    let mut utilities = vec![vec![0.0; ns]; nd];
    let mut probs = vec![vec![0.0; ns]; nd];
    for i in 0..nd {
        for j in 0..ns {
            // Inverted distance, normalized to [0,1] so the weights apply as
            // calibrated; relative attributes rescaled to [-1,1].
            let inv_distance = if max_distance > 0.0 {
                (max_distance - distances[i][j]) / max_distance
            } else {
                0.0
            };
            utilities[i][j] = 0.1 * driver_score[j]
                + 0.1 * shipper_score[i]
                + 0.2 * revenue[i]
                + 0.3 * inv_distance
                + 0.3 * familiarity[i][j];
            let rel_distance = 2.0 * inv_distance - 1.0;
            let rel_familiarity = 2.0 * familiarity[i][j] - 1.0;
            probs[i][j] = adjusted_acceptance(rates[j], rel_distance, rel_familiarity);
        }
    }
    Ok(Instance::new(
        cfg.theta,
        utilities,
        probs,
        Some(distances),
        cfg.label(),
        Some(cfg.seed),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth_cfg(seed: u64) -> GenConfig {
        GenConfig {
            num_demands: 10,
            num_supplies: 20,
            theta: 4,
            utility_model: UtilityModel::Synthetic3Part,
            prob_model: ProbModel::Homogeneous { p: 0.8 },
            seed,
        }
    }

    #[test]
    fn synthetic_utilities_stay_in_band() {
        let inst = generate_synthetic(&synth_cfg(1)).unwrap();
        assert_eq!(inst.num_demands, 10);
        assert_eq!(inst.num_supplies, 20);
        for row in &inst.utilities {
            for &u in row {
                assert!((0.4..=1.0).contains(&u), "utility {u} out of band");
            }
        }
        for row in &inst.accept_prob {
            assert!(row.iter().all(|&p| p == 0.8));
        }
    }

    #[test]
    fn equal_seed_means_equal_instance() {
        let a = generate_synthetic(&synth_cfg(42)).unwrap();
        let b = generate_synthetic(&synth_cfg(42)).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&synth_cfg(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn heterogeneous_probs_stay_in_range() {
        let cfg = GenConfig {
            prob_model: ProbModel::UniformRange { lo: 0.7, hi: 0.9 },
            ..synth_cfg(5)
        };
        let inst = generate(&cfg).unwrap();
        for row in &inst.accept_prob {
            for &p in row {
                assert!((0.7..=0.9).contains(&p));
            }
        }
    }

    #[test]
    fn synthetic_mean_utility_is_calibrated() {
        // 10^5 cells; the three-part model has mean 0.4 + 3 * 0.1 = 0.7.
        let cfg = GenConfig {
            num_demands: 100,
            num_supplies: 1000,
            ..synth_cfg(9)
        };
        let inst = generate(&cfg).unwrap();
        let mean: f64 = inst.utilities.iter().flatten().sum::<f64>() / 1e5;
        assert!((mean - 0.7).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn adversarial_two_by_two() {
        let inst = generate_adversarial_dap(2, 2, 1.0, 1.0, 1.1, 0.9, 0).unwrap();
        assert_eq!(inst.utilities[0], vec![1.1, 1.1]);
        assert_eq!(inst.utilities[1], vec![1.0, 1.0]);
        assert!(inst.accept_prob.iter().flatten().all(|&p| p == 0.9));
    }

    #[test]
    fn adversarial_counts_designated_demands() {
        let inst = generate_adversarial_dap(10, 5, 1.0, 1.0, 2.0, 0.5, 0).unwrap();
        let high_rows = inst
            .utilities
            .iter()
            .filter(|row| row.iter().all(|&u| u == 2.0))
            .count();
        assert_eq!(high_rows, 2);
    }

    #[test]
    fn adversarial_accepts_equal_bounds() {
        let inst = generate_adversarial_dap(3, 2, 2.0, 1.0, 1.0, 0.9, 0).unwrap();
        assert!(inst.utilities.iter().flatten().all(|&u| u == 1.0));
    }

    #[test]
    fn adversarial_rejects_bad_params() {
        assert!(generate_adversarial_dap(2, 2, 1.0, 1.1, 1.0, 0.9, 0).is_err());
        assert!(generate_adversarial_dap(2, 2, 1.0, 1.0, 1.1, 0.0, 0).is_err());
        assert!(generate_adversarial_dap(3, 2, 0.5, 1.0, 1.1, 0.9, 0).is_err());
    }

    #[test]
    fn quantile_model_hits_published_percentiles() {
        assert!((historical_rate_quantile(0.25) - 0.45).abs() < 1e-12);
        assert!((historical_rate_quantile(0.50) - 0.64).abs() < 1e-12);
        assert!((historical_rate_quantile(0.75) - 0.76).abs() < 1e-12);
        assert!((historical_rate_quantile(0.005) - 0.05).abs() < 1e-12);
        assert!((historical_rate_quantile(0.969) - 0.95).abs() < 1e-12);
    }

    #[test]
    fn quantile_model_empirical_quartiles() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut draws: Vec<f64> = (0..100_000)
            .map(|_| historical_rate_quantile(rng.gen::<f64>()))
            .collect();
        draws.sort_by(f64::total_cmp);
        let q = |frac: f64| draws[(frac * draws.len() as f64) as usize];
        assert!((q(0.25) - 0.45).abs() < 0.02);
        assert!((q(0.50) - 0.64).abs() < 0.02);
        assert!((q(0.75) - 0.76).abs() < 0.02);
    }

    #[test]
    fn low_rate_drivers_skip_adjustment() {
        assert_eq!(adjusted_acceptance(0.02, 1.0, 1.0), 0.02);
        assert_eq!(adjusted_acceptance(0.97, -1.0, -1.0), 0.97);
        let adjusted = adjusted_acceptance(0.5, 1.0, -0.5);
        assert!((adjusted - (0.5 + 0.025 - 0.0125)).abs() < 1e-12);
    }

    #[test]
    fn case_like_probabilities_never_need_clipping() {
        let cfg = GenConfig {
            num_demands: 15,
            num_supplies: 40,
            theta: 5,
            utility_model: UtilityModel::CaseLike,
            prob_model: ProbModel::CaseLike,
            seed: 3,
        };
        let inst = generate_case_like(&cfg).unwrap();
        assert!(inst.distances.is_some());
        for row in &inst.accept_prob {
            for &p in row {
                assert!((0.0..=1.0).contains(&p), "p {p} out of range");
            }
        }
        for row in &inst.utilities {
            for &u in row {
                assert!((0.0..=1.0).contains(&u));
            }
        }
    }

    #[test]
    fn case_like_requires_matching_models() {
        let cfg = GenConfig {
            utility_model: UtilityModel::CaseLike,
            ..synth_cfg(0)
        };
        assert!(matches!(generate(&cfg), Err(GenError::MismatchedCaseLike { .. })));
    }

    #[test]
    fn uniform_range_broadcasts_and_respects_per_demand_bounds() {
        let cfg = GenConfig {
            num_demands: 3,
            num_supplies: 4,
            theta: 2,
            utility_model: UtilityModel::UniformRange {
                lo: vec![0.0, 1.0, 2.0],
                hi: vec![0.5, 1.5, 2.5],
            },
            prob_model: ProbModel::Homogeneous { p: 0.5 },
            seed: 8,
        };
        let inst = generate(&cfg).unwrap();
        for (i, row) in inst.utilities.iter().enumerate() {
            for &u in row {
                assert!(u >= i as f64 && u <= i as f64 + 0.5);
            }
        }
    }
}
