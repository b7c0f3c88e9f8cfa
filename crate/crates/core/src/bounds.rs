//! Parametric guarantees on the surrogate policy's approximation gap, the
//! closed-form uniform baseline used inside the homogeneous guarantee, and
//! the realized-gap certificate for the direct assignment policy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;
use crate::solvers::{
    brute_force_opt, solve_dap, solve_homogeneous_exact, SolveError, ENUMERATION_BUDGET,
};

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("num_demands must be positive")]
    NoDemands,
    #[error("theta must be at least 1")]
    ZeroTheta,
    #[error("tau must be positive, got {0}")]
    BadTau(f64),
    #[error("probability bounds must satisfy 0 < p_lo <= p_hi <= 1, got [{lo},{hi}]")]
    BadProbBounds { lo: f64, hi: f64 },
    #[error("gamma must be positive, got {0}")]
    BadGamma(f64),
    #[error("per-demand bound vectors must have length {expected}, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("demand {index} has a_{index} = {a} > b_{index} = {b}")]
    CrossedBounds { index: usize, a: f64, b: f64 },
    #[error("this bound requires homogeneous p (p_lo = p_hi), got [{lo},{hi}]")]
    HeterogeneousP { lo: f64, hi: f64 },
    #[error("this bound requires per-demand upper bounds b")]
    MissingUpperBounds,
    #[error("hypothesis gamma = theta fails (gamma {gamma}, theta {theta}); evaluate off-hypothesis explicitly if exploring")]
    OffHypothesis { gamma: f64, theta: usize },
    #[error("gamma * num_demands = {product} is not an integral supply count")]
    FractionalSupplies { product: f64 },
    #[error("bound denominator is zero; the bound is vacuous for these inputs")]
    Unbounded,
    #[error("no exact reference solution available: {0}")]
    NoExactReference(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Parameters the gap bounds are stated in. `a`/`b` are per-demand utility
/// lower/upper bounds; `p_lo`/`p_hi` bound the acceptance probabilities
/// (equal when homogeneous); `gamma` is the supply-to-demand ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub theta: usize,
    pub tau: f64,
    pub num_demands: usize,
    pub a: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    pub p_lo: f64,
    pub p_hi: f64,
    pub gamma: f64,
}

impl BoundInputs {
    /// Convenience constructor for identical per-demand bounds.
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(
        theta: usize,
        tau: f64,
        num_demands: usize,
        a: f64,
        b: Option<f64>,
        p_lo: f64,
        p_hi: f64,
        gamma: f64,
    ) -> Self {
        BoundInputs {
            theta,
            tau,
            num_demands,
            a: vec![a; num_demands],
            b: b.map(|v| vec![v; num_demands]),
            p_lo,
            p_hi,
            gamma,
        }
    }

    /// Reads the bound parameters off a concrete instance: per-demand utility
    /// ranges, the probability extremes, and the supply-to-demand ratio.
    pub fn from_instance(instance: &Instance, tau: f64) -> Self {
        let a = instance
            .utilities
            .iter()
            .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
            .collect();
        let b = instance
            .utilities
            .iter()
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        BoundInputs {
            theta: instance.theta,
            tau,
            num_demands: instance.num_demands,
            a,
            b: Some(b),
            p_lo: instance.min_prob(),
            p_hi: instance.max_prob(),
            gamma: instance.gamma(),
        }
    }

    fn validate(&self) -> Result<(), BoundsError> {
        if self.num_demands == 0 {
            return Err(BoundsError::NoDemands);
        }
        if self.theta == 0 {
            return Err(BoundsError::ZeroTheta);
        }
        if self.tau <= 0.0 || self.tau.is_nan() {
            return Err(BoundsError::BadTau(self.tau));
        }
        if !(self.p_lo > 0.0 && self.p_lo <= self.p_hi && self.p_hi <= 1.0) {
            return Err(BoundsError::BadProbBounds {
                lo: self.p_lo,
                hi: self.p_hi,
            });
        }
        if self.gamma <= 0.0 || self.gamma.is_nan() {
            return Err(BoundsError::BadGamma(self.gamma));
        }
        if self.a.len() != self.num_demands {
            return Err(BoundsError::WrongLength {
                expected: self.num_demands,
                got: self.a.len(),
            });
        }
        if let Some(b) = &self.b {
            if b.len() != self.num_demands {
                return Err(BoundsError::WrongLength {
                    expected: self.num_demands,
                    got: b.len(),
                });
            }
            for (i, (&ai, &bi)) in self.a.iter().zip(b).enumerate() {
                if ai > bi {
                    return Err(BoundsError::CrossedBounds { index: i, a: ai, b: bi });
                }
            }
        }
        Ok(())
    }

    /// Probability that at least one of theta recommendations accepts, at `p`.
    pub fn q_at(&self, p: f64) -> f64 {
        1.0 - (1.0 - p).powi(self.theta as i32)
    }

    fn num_supplies(&self) -> Result<usize, BoundsError> {
        let product = self.gamma * self.num_demands as f64;
        let n = product.round();
        if (product - n).abs() > 1e-9 || n < 1.0 {
            return Err(BoundsError::FractionalSupplies { product });
        }
        Ok(n as usize)
    }

    /// Demands with the highest utility lower bound that receive the extra
    /// recommendation beyond floor(gamma) each; ties to the lowest index.
    fn top_demands(&self) -> Result<Vec<bool>, BoundsError> {
        let num_supplies = self.num_supplies()?;
        let extra = num_supplies.saturating_sub(self.gamma.floor() as usize * self.num_demands);
        let mut order: Vec<usize> = (0..self.num_demands).collect();
        order.sort_by(|&x, &y| self.a[y].partial_cmp(&self.a[x]).unwrap().then(x.cmp(&y)));
        let mut top = vec![false; self.num_demands];
        for &i in order.iter().take(extra.min(self.num_demands)) {
            top[i] = true;
        }
        Ok(top)
    }
}

/// Labeled breakdown of a bound. For the homogeneous bound the numerator is
/// `tau_term + probability_term` and `baseline_term` is the denominator; for
/// the heterogeneous and correlated bounds the gap is
/// `probability_term + tau_term / baseline_term`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundComponents {
    pub tau_term: f64,
    pub probability_term: f64,
    pub baseline_term: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub gap_bound: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub components: BoundComponents,
}

/// Expected-gap bound for homogeneous acceptance with per-demand uniform
/// utilities and gamma = theta:
/// `[tau n ln(theta) + (1 - p/q) sum(b-a)] /
///  [sum(a) + ((theta/q - 1/p + 1)/(theta+1)) sum(b-a)]`
/// with `q = 1 - (1-p)^theta`. The hypothesis `gamma = theta` is enforced
/// unless `allow_off_hypothesis` is set, in which case the formula is
/// evaluated without its guarantee.
pub fn homogeneous_gap_bound(
    inputs: &BoundInputs,
    allow_off_hypothesis: bool,
) -> Result<BoundReport, BoundsError> {
    inputs.validate()?;
    if (inputs.p_hi - inputs.p_lo).abs() > 1e-12 {
        return Err(BoundsError::HeterogeneousP {
            lo: inputs.p_lo,
            hi: inputs.p_hi,
        });
    }
    let b = inputs.b.as_ref().ok_or(BoundsError::MissingUpperBounds)?;
    if !allow_off_hypothesis && (inputs.gamma - inputs.theta as f64).abs() > 1e-12 {
        return Err(BoundsError::OffHypothesis {
            gamma: inputs.gamma,
            theta: inputs.theta,
        });
    }
    let p = inputs.p_lo;
    let q = inputs.q_at(p);
    let theta = inputs.theta as f64;
    let sum_a: f64 = inputs.a.iter().sum();
    let sum_gap: f64 = inputs.a.iter().zip(b).map(|(&ai, &bi)| bi - ai).sum();
    let tau_term = inputs.tau * inputs.num_demands as f64 * theta.ln();
    let probability_term = (1.0 - p / q) * sum_gap;
    let numerator = tau_term + probability_term;
    let denominator = sum_a + ((theta / q - 1.0 / p + 1.0) / (theta + 1.0)) * sum_gap;
    if denominator <= 0.0 {
        return Err(BoundsError::Unbounded);
    }
    Ok(BoundReport {
        gap_bound: numerator / denominator,
        numerator,
        denominator,
        components: BoundComponents {
            tau_term,
            probability_term,
            baseline_term: denominator,
        },
    })
}

/// Per-instance gap bound for heterogeneous acceptance:
/// `1 - p_lo/q_hi + tau p_lo n ln(theta p_hi/p_lo) / D`, where `D` sums
/// `(1-(1-p_lo)^{floor(gamma)+1}) a_i` over the demands with the highest
/// lower bounds (those that can take one extra recommendation) and
/// `(1-(1-p_lo)^{floor(gamma)}) a_i` over the rest.
pub fn heterogeneous_gap_bound(inputs: &BoundInputs) -> Result<BoundReport, BoundsError> {
    inputs.validate()?;
    let top = inputs.top_demands()?;
    let floor_gamma = inputs.gamma.floor() as i32;
    let q_hi = inputs.q_at(inputs.p_hi);
    let reach_extra = 1.0 - (1.0 - inputs.p_lo).powi(floor_gamma + 1);
    let reach_base = 1.0 - (1.0 - inputs.p_lo).powi(floor_gamma);
    let denominator: f64 = inputs
        .a
        .iter()
        .zip(&top)
        .map(|(&ai, &is_top)| ai * if is_top { reach_extra } else { reach_base })
        .sum();
    if denominator <= 0.0 {
        return Err(BoundsError::Unbounded);
    }
    let probability_term = 1.0 - inputs.p_lo / q_hi;
    let tau_term = inputs.tau
        * inputs.p_lo
        * inputs.num_demands as f64
        * (inputs.theta as f64 * inputs.p_hi / inputs.p_lo).ln();
    let numerator = probability_term * denominator + tau_term;
    Ok(BoundReport {
        gap_bound: probability_term + tau_term / denominator,
        numerator,
        denominator,
        components: BoundComponents {
            tau_term,
            probability_term,
            baseline_term: denominator,
        },
    })
}

/// Gap bound when a supplier's acceptances may be correlated across demands:
/// `1 - p_lo + tau n ln(theta p_hi/p_lo) / sum_{A} a_i`, with `A` the
/// highest-lower-bound demands when floor(gamma) = 0 and all demands
/// otherwise.
pub fn correlated_gap_bound(inputs: &BoundInputs) -> Result<BoundReport, BoundsError> {
    inputs.validate()?;
    let floor_gamma = inputs.gamma.floor() as usize;
    let denominator: f64 = if floor_gamma == 0 {
        let top = inputs.top_demands()?;
        inputs
            .a
            .iter()
            .zip(&top)
            .filter(|(_, &is_top)| is_top)
            .map(|(&ai, _)| ai)
            .sum()
    } else {
        inputs.a.iter().sum()
    };
    if denominator <= 0.0 {
        return Err(BoundsError::Unbounded);
    }
    let probability_term = 1.0 - inputs.p_lo;
    let tau_term = inputs.tau
        * inputs.num_demands as f64
        * (inputs.theta as f64 * inputs.p_hi / inputs.p_lo).ln();
    let numerator = probability_term * denominator + tau_term;
    Ok(BoundReport {
        gap_bound: probability_term + tau_term / denominator,
        numerator,
        denominator,
        components: BoundComponents {
            tau_term,
            probability_term,
            baseline_term: denominator,
        },
    })
}

/// Closed-form expected best accepted utility of `theta` i.i.d. uniform
/// `[a, b]` utilities under Bernoulli(`p`) acceptance:
/// `a (1-(1-p)^theta) + (b-a) (1 - (1-(1-p)^{theta+1}) / ((theta+1) p))`.
/// `p = 0` is the zero limit.
pub fn uniform_baseline_value(theta: usize, p: f64, a: f64, b: f64) -> Result<f64, BoundsError> {
    if theta == 0 {
        return Err(BoundsError::ZeroTheta);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(BoundsError::BadProbBounds { lo: p, hi: p });
    }
    if a > b {
        return Err(BoundsError::CrossedBounds { index: 0, a, b });
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let miss = 1.0 - p;
    let any = 1.0 - miss.powi(theta as i32);
    let spread = 1.0 - (1.0 - miss.powi(theta as i32 + 1)) / ((theta as f64 + 1.0) * p);
    Ok(a * any + (b - a) * spread)
}

fn exact_reference(instance: &Instance) -> Result<crate::solvers::SolveReport, BoundsError> {
    let enumerable = ((instance.num_demands + 1) as f64).powi(instance.num_supplies as i32)
        <= ENUMERATION_BUDGET as f64;
    if enumerable {
        Ok(brute_force_opt(instance)?)
    } else if instance.is_homogeneous(crate::solvers::HOMOGENEITY_TOL) {
        Ok(solve_homogeneous_exact(instance)?)
    } else {
        Err(BoundsError::NoExactReference(
            "instance is too large to enumerate and heterogeneous".into(),
        ))
    }
}

/// Realized approximation gap of the direct assignment policy against an
/// exact reference: brute force when the instance is small enough to
/// enumerate, otherwise the ranked-slot exact solver (homogeneous only).
pub fn dap_gap_certificate(instance: &Instance) -> Result<f64, BoundsError> {
    let reference = exact_reference(instance)?;
    if reference.exact_value <= 0.0 {
        return Ok(0.0);
    }
    let dap = solve_dap(instance);
    Ok((reference.exact_value - dap.exact_value) / reference.exact_value)
}

/// Realized approximation gap of the certified surrogate maximizer against an
/// exact reference; the observed counterpart the parametric bounds are
/// compared to.
pub fn observed_surrogate_gap(instance: &Instance, tau: f64) -> Result<f64, BoundsError> {
    let reference = exact_reference(instance)?;
    if reference.exact_value <= 0.0 {
        return Ok(0.0);
    }
    let cfg = crate::solvers::SolverConfig {
        strategy: crate::solvers::SolverStrategy::ExactTiny,
        tau,
        ..Default::default()
    };
    let surrogate = crate::solvers::solve_surrogate(instance, &cfg)?;
    Ok((reference.exact_value - surrogate.exact_value) / reference.exact_value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::generate_adversarial_dap;

    fn headline_inputs() -> BoundInputs {
        BoundInputs::uniform(4, 0.01, 10, 5.0, Some(10.0), 0.8, 0.8, 4.0)
    }

    #[test]
    fn homogeneous_bound_reproduces_the_headline_number() {
        let report = homogeneous_gap_bound(&headline_inputs(), false).unwrap();
        assert!(
            (report.gap_bound - 0.1151).abs() < 1e-4,
            "got {}",
            report.gap_bound
        );
        // The ratio is independent of the number of demands when bounds are
        // identical across demands.
        let more = BoundInputs::uniform(4, 0.01, 137, 5.0, Some(10.0), 0.8, 0.8, 4.0);
        let report2 = homogeneous_gap_bound(&more, false).unwrap();
        assert!((report.gap_bound - report2.gap_bound).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_bound_vanishes_at_theta_one() {
        let inputs = BoundInputs::uniform(1, 0.01, 5, 5.0, Some(10.0), 0.8, 0.8, 1.0);
        let report = homogeneous_gap_bound(&inputs, false).unwrap();
        assert!(report.gap_bound.abs() < 1e-12);
    }

    #[test]
    fn homogeneous_bound_drops_probability_term_at_p_one() {
        let inputs = BoundInputs::uniform(4, 0.01, 5, 5.0, Some(10.0), 1.0, 1.0, 4.0);
        let report = homogeneous_gap_bound(&inputs, false).unwrap();
        assert!(report.components.probability_term.abs() < 1e-12);
        assert!(
            (report.gap_bound - report.components.tau_term / report.denominator).abs() < 1e-15
        );
    }

    #[test]
    fn homogeneous_bound_enforces_its_hypotheses() {
        let mut inputs = headline_inputs();
        inputs.gamma = 2.0;
        assert!(matches!(
            homogeneous_gap_bound(&inputs, false),
            Err(BoundsError::OffHypothesis { .. })
        ));
        assert!(homogeneous_gap_bound(&inputs, true).is_ok());

        let mut hetero = headline_inputs();
        hetero.p_hi = 0.9;
        assert!(matches!(
            homogeneous_gap_bound(&hetero, false),
            Err(BoundsError::HeterogeneousP { .. })
        ));

        let mut no_b = headline_inputs();
        no_b.b = None;
        assert!(matches!(
            homogeneous_gap_bound(&no_b, false),
            Err(BoundsError::MissingUpperBounds)
        ));
    }

    #[test]
    fn heterogeneous_bound_matches_its_formula() {
        let inputs = BoundInputs::uniform(4, 0.01, 20, 0.4, None, 0.7, 0.9, 4.0);
        let report = heterogeneous_gap_bound(&inputs).unwrap();
        let q_hi = 1.0 - (1.0 - 0.9_f64).powi(4);
        let base = 1.0 - 0.7 / q_hi;
        let denom = 20.0 * 0.4 * (1.0 - 0.3_f64.powi(4));
        let tau_term = 0.01 * 0.7 * 20.0 * (4.0 * 0.9 / 0.7_f64).ln();
        assert!((report.gap_bound - (base + tau_term / denom)).abs() < 1e-12);
        assert!(report.gap_bound > 0.3 && report.gap_bound < 0.35);
        assert!(
            (report.numerator / report.denominator - report.gap_bound).abs() < 1e-12
        );
    }

    #[test]
    fn heterogeneous_bound_collapses_to_homogeneous_shape() {
        let inputs = BoundInputs::uniform(3, 0.01, 6, 1.0, None, 0.8, 0.8, 2.0);
        let report = heterogeneous_gap_bound(&inputs).unwrap();
        let q_bar = 1.0 - 0.2_f64.powi(3);
        assert!((report.components.probability_term - (1.0 - 0.8 / q_bar)).abs() < 1e-12);
    }

    #[test]
    fn heterogeneous_bound_limit_consistency() {
        // theta = 1, huge lower bounds, vanishing tau: the bound collapses to
        // 1 - p/q = 0.
        let inputs = BoundInputs::uniform(1, 1e-12, 4, 1e6, None, 0.9, 0.9, 1.0);
        let report = heterogeneous_gap_bound(&inputs).unwrap();
        assert!(report.gap_bound.abs() < 1e-9);
    }

    #[test]
    fn heterogeneous_bound_uses_only_top_demands_when_supply_is_scarce() {
        // gamma = 0.5 on 4 demands: floor(gamma) = 0, two extra supplies go
        // to the two highest lower bounds.
        let inputs = BoundInputs {
            theta: 2,
            tau: 0.01,
            num_demands: 4,
            a: vec![0.1, 0.9, 0.5, 0.9],
            b: None,
            p_lo: 0.6,
            p_hi: 0.8,
            gamma: 0.5,
        };
        let report = heterogeneous_gap_bound(&inputs).unwrap();
        let expected_denominator = 0.6 * (0.9 + 0.9);
        assert!((report.denominator - expected_denominator).abs() < 1e-12);
    }

    #[test]
    fn heterogeneous_bound_reports_vacuous_inputs() {
        // All utility lower bounds zero makes the denominator vanish.
        let inputs = BoundInputs::uniform(2, 0.01, 3, 0.0, None, 0.6, 0.8, 1.0 / 3.0);
        assert!(matches!(heterogeneous_gap_bound(&inputs), Err(BoundsError::Unbounded)));
    }

    #[test]
    fn correlated_gap_bound_limits_and_selection() {
        let certain = BoundInputs::uniform(2, 1e-12, 4, 1.0, None, 1.0, 1.0, 2.0);
        let report = correlated_gap_bound(&certain).unwrap();
        assert!(report.gap_bound.abs() < 1e-9);

        // Same inputs as the heterogeneous example: the correlated first term
        // 1 - p_lo dominates 1 - p_lo/q_hi.
        let inputs = BoundInputs::uniform(4, 0.01, 20, 0.4, None, 0.7, 0.9, 4.0);
        let corr = correlated_gap_bound(&inputs).unwrap();
        let heter = heterogeneous_gap_bound(&inputs).unwrap();
        assert!(corr.components.probability_term >= heter.components.probability_term);

        // floor(gamma) = 0 sums only the designated demands.
        let scarce = BoundInputs {
            theta: 2,
            tau: 0.01,
            num_demands: 4,
            a: vec![0.5, 0.2, 0.8, 0.3],
            b: None,
            p_lo: 0.6,
            p_hi: 0.8,
            gamma: 0.5,
        };
        let report = correlated_gap_bound(&scarce).unwrap();
        assert!((report.denominator - (0.8 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn uniform_baseline_closed_forms() {
        assert!((uniform_baseline_value(1, 1.0, 0.0, 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((uniform_baseline_value(2, 1.0, 0.0, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(uniform_baseline_value(3, 0.0, 5.0, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn uniform_baseline_agrees_with_simulation() {
        use rand::{Rng, SeedableRng};
        let (theta, p, a, b) = (3, 0.8, 5.0, 10.0);
        let expect = uniform_baseline_value(theta, p, a, b).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let mut best = 0.0_f64;
            for _ in 0..theta {
                let u = a + (b - a) * rng.gen::<f64>();
                if rng.gen::<f64>() < p {
                    best = best.max(u);
                }
            }
            sum += best;
            sum_sq += best * best;
        }
        let mean = sum / n as f64;
        let stderr = (((sum_sq - sum * sum / n as f64) / (n as f64 - 1.0)) / n as f64).sqrt();
        assert!(
            (mean - expect).abs() <= 3.0 * stderr,
            "mean {mean}, closed form {expect}, stderr {stderr}"
        );
    }

    #[test]
    fn homogeneous_bound_dominates_expected_gap_empirically() {
        // The bound is on an expectation over utility draws: compare it with
        // the sample mean over 30 instances, allowing two standard errors.
        use crate::instance::{generate, GenConfig, ProbModel, UtilityModel};
        use crate::solvers::{solve_surrogate, SolverConfig, SolverStrategy};
        let (theta, p, nd) = (2usize, 0.8, 3usize);
        let cfg = SolverConfig {
            strategy: SolverStrategy::ExactTiny,
            tau: 0.01,
            ..SolverConfig::default()
        };
        let mut gaps = Vec::new();
        for seed in 0..30 {
            let inst = generate(&GenConfig {
                num_demands: nd,
                num_supplies: nd * theta,
                theta,
                utility_model: UtilityModel::UniformRange { lo: vec![0.4], hi: vec![1.0] },
                prob_model: ProbModel::Homogeneous { p },
                seed,
            })
            .unwrap();
            let optimum = brute_force_opt(&inst).unwrap().exact_value;
            let surrogate = solve_surrogate(&inst, &cfg).unwrap().exact_value;
            gaps.push((optimum - surrogate) / optimum);
        }
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let var = gaps.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>()
            / (gaps.len() as f64 - 1.0);
        let stderr = (var / gaps.len() as f64).sqrt();
        let inputs =
            BoundInputs::uniform(theta, 0.01, nd, 0.4, Some(1.0), p, p, theta as f64);
        let bound = homogeneous_gap_bound(&inputs, false).unwrap().gap_bound;
        assert!(
            mean - 2.0 * stderr <= bound,
            "mean gap {mean} (stderr {stderr}) exceeds bound {bound}"
        );
    }

    #[test]
    fn dap_certificate_on_the_worst_case_family() {
        let inst = generate_adversarial_dap(2, 2, 1.0, 1.0, 1.1, 0.9, 0).unwrap();
        let gap = dap_gap_certificate(&inst).unwrap();
        assert!((gap - (1.89 - 1.089) / 1.89).abs() < 1e-9, "gap {gap}");
        // Worst-case-family floor on the constructed family.
        let floor = 1.0 - (2.0 * 1.1) / (2.0 * 0.9 * 1.0);
        assert!(gap > floor);
    }

    #[test]
    fn dap_certificate_grows_along_the_theta_sweep() {
        let mut last = 0.0;
        for theta in [2usize, 4, 8] {
            let inst = generate_adversarial_dap(8, theta, 1.0, 1.0, 1.05, 0.9, 0).unwrap();
            let gap = dap_gap_certificate(&inst).unwrap();
            assert!(gap >= last - 1e-12, "theta {theta}: gap {gap} fell below {last}");
            last = gap;
        }
        assert!(last > 0.8, "final gap {last}");
    }

    #[test]
    fn dap_certificate_degenerate_family_stays_within_tie_slack() {
        // a = b: every feasible set is DAP-optimal under the linear proxy, so
        // any remaining exact-value gap is attributable to tie-breaking among
        // DAP optima, bounded by the stack-vs-split difference.
        let inst = generate_adversarial_dap(2, 2, 1.0, 1.0, 1.0, 0.9, 0).unwrap();
        let dap = solve_dap(&inst);
        assert!((dap.solver_objective - 2.0 * 0.9).abs() < 1e-12);
        let gap = dap_gap_certificate(&inst).unwrap();
        let stack = 0.9 + 0.9 * 0.1;
        let split = 1.8;
        assert!(gap <= (split - stack) / split + 1e-12);
    }
}
