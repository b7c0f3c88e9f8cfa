//! Two-stage recommend-to-match under random supply rejections.
//!
//! Each demand is recommended to at most `theta` supplies, every supply is
//! recommended to at most one demand, and each supply independently accepts
//! with a pair-specific probability. After responses are observed the demand
//! is matched to its highest-utility accepting supply. This crate provides
//! the instance model and generators, exact and sampled evaluation of the
//! expected matched utility, four matching policies (direct assignment,
//! nearby-priority, an exact solver for homogeneous acceptance, a log-sum-exp
//! surrogate, and sample-average approximation), and parametric bounds on the
//! surrogate's approximation gap.

pub mod bounds;
pub mod evaluation;
pub mod instance;
pub mod solvers;

pub use evaluation::{
    Correlation, Evaluation, EvaluationMethod, PerturbKind, PerturbSpec, ScenarioSet,
};
pub use instance::{GenConfig, Instance, ProbModel, Recommendation, UtilityModel};
pub use solvers::{SolveMethod, SolveReport, SolverConfig, SolverStrategy};

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a textual scope plus an index.
///
/// Used to give every (instance, replication) pair its own RNG stream so that
/// replications can run in any order, or concurrently, without changing
/// results. Stable across platforms.
pub fn derive_seed(master: u64, scope: &str, index: u64) -> u64 {
    let mut h = splitmix64(master ^ 0xA076_1D64_78BD_642F);
    for byte in scope.bytes() {
        h = splitmix64(h ^ u64::from(byte));
    }
    splitmix64(h ^ index)
}
