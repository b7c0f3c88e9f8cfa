//! Shared fixtures for the solver benchmarks.

use recmatch_core::instance::{generate, GenConfig, Instance, ProbModel, UtilityModel};

pub fn homogeneous(num_demands: usize, num_supplies: usize, theta: usize) -> Instance {
    generate(&GenConfig {
        num_demands,
        num_supplies,
        theta,
        utility_model: UtilityModel::Synthetic3Part,
        prob_model: ProbModel::Homogeneous { p: 0.8 },
        seed: 7,
    })
    .unwrap()
}

pub fn heterogeneous(num_demands: usize, num_supplies: usize, theta: usize) -> Instance {
    generate(&GenConfig {
        num_demands,
        num_supplies,
        theta,
        utility_model: UtilityModel::Synthetic3Part,
        prob_model: ProbModel::UniformRange { lo: 0.7, hi: 0.9 },
        seed: 7,
    })
    .unwrap()
}
