//! Problem data model: instances, recommendations, generators, and file I/O.
//!
//! An [`Instance`] holds the utility matrix `u[i][j]`, the acceptance
//! probability matrix `p[i][j]`, the per-demand recommendation cap `theta`,
//! and an optional distance matrix for the nearby-priority policy. A
//! [`Recommendation`] is the first-stage decision: one set of supply indices
//! per demand. Both are immutable after construction and safe to share across
//! threads.

mod gen;

pub use gen::{
    adjusted_acceptance, generate, generate_adversarial_dap, generate_case_like,
    generate_synthetic, historical_rate_quantile, GenConfig, GenError, ProbModel, UtilityModel,
};

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version tag written into every instance file.
pub const INSTANCE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("num_demands must be positive")]
    NoDemands,
    #[error("num_supplies must be positive")]
    NoSupplies,
    #[error("theta must be at least 1")]
    ZeroTheta,
    #[error("{matrix} must be {rows}x{cols}; row {row} has {got} entries (matrix has {got_rows} rows)")]
    BadShape {
        matrix: &'static str,
        rows: usize,
        cols: usize,
        row: usize,
        got: usize,
        got_rows: usize,
    },
    #[error("utility at ({row},{col}) is {value}; must be finite and nonnegative")]
    BadUtility { row: usize, col: usize, value: f64 },
    #[error("acceptance probability at ({row},{col}) is {value}; must lie in [0,1]")]
    BadProbability { row: usize, col: usize, value: f64 },
    #[error("distance at ({row},{col}) is {value}; must be finite and nonnegative")]
    BadDistance { row: usize, col: usize, value: f64 },
    #[error("instance file has schema_version {found}, expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("failed to parse instance file: {0}")]
    Parse(#[from] serde_json::Error),
}

/// A recommend-to-match problem instance.
///
/// Shapes are `num_demands x num_supplies`, row = demand, column = supply.
/// Construct through [`Instance::new`] (or a generator) so the invariants
/// below are checked once and hold for the lifetime of the value:
/// all utilities finite and nonnegative, all acceptance probabilities in
/// `[0,1]`, distances (when present) finite and nonnegative, `theta >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub num_demands: usize,
    pub num_supplies: usize,
    pub theta: usize,
    pub utilities: Vec<Vec<f64>>,
    pub accept_prob: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn check_shape(
    matrix: &'static str,
    data: &[Vec<f64>],
    rows: usize,
    cols: usize,
) -> Result<(), InstanceError> {
    let bad_row = data
        .iter()
        .enumerate()
        .find(|(_, row)| row.len() != cols)
        .map(|(i, row)| (i, row.len()));
    if data.len() != rows || bad_row.is_some() {
        let (row, got) = bad_row.unwrap_or((0, data.first().map_or(0, Vec::len)));
        return Err(InstanceError::BadShape {
            matrix,
            rows,
            cols,
            row,
            got,
            got_rows: data.len(),
        });
    }
    Ok(())
}

impl Instance {
    pub fn new(
        theta: usize,
        utilities: Vec<Vec<f64>>,
        accept_prob: Vec<Vec<f64>>,
        distances: Option<Vec<Vec<f64>>>,
        label: impl Into<String>,
        seed: Option<u64>,
    ) -> Result<Self, InstanceError> {
        let num_demands = utilities.len();
        let num_supplies = utilities.first().map_or(0, Vec::len);
        let instance = Instance {
            num_demands,
            num_supplies,
            theta,
            utilities,
            accept_prob,
            distances,
            label: label.into(),
            seed,
        };
        instance.validate()?;
        Ok(instance)
    }

    /// Re-checks every invariant; used by `new` and after deserialization.
    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.num_demands == 0 {
            return Err(InstanceError::NoDemands);
        }
        if self.num_supplies == 0 {
            return Err(InstanceError::NoSupplies);
        }
        if self.theta == 0 {
            return Err(InstanceError::ZeroTheta);
        }
        check_shape("utilities", &self.utilities, self.num_demands, self.num_supplies)?;
        check_shape("accept_prob", &self.accept_prob, self.num_demands, self.num_supplies)?;
        if let Some(d) = &self.distances {
            check_shape("distances", d, self.num_demands, self.num_supplies)?;
        }
        for (i, row) in self.utilities.iter().enumerate() {
            for (j, &u) in row.iter().enumerate() {
                if !u.is_finite() || u < 0.0 {
                    return Err(InstanceError::BadUtility { row: i, col: j, value: u });
                }
            }
        }
        for (i, row) in self.accept_prob.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                    return Err(InstanceError::BadProbability { row: i, col: j, value: p });
                }
            }
        }
        if let Some(d) = &self.distances {
            for (i, row) in d.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    if !v.is_finite() || v < 0.0 {
                        return Err(InstanceError::BadDistance { row: i, col: j, value: v });
                    }
                }
            }
        }
        Ok(())
    }

    /// Supply-to-demand ratio; derived, never stored.
    pub fn gamma(&self) -> f64 {
        self.num_supplies as f64 / self.num_demands as f64
    }

    pub fn utility(&self, demand: usize, supply: usize) -> f64 {
        self.utilities[demand][supply]
    }

    pub fn prob(&self, demand: usize, supply: usize) -> f64 {
        self.accept_prob[demand][supply]
    }

    /// True when every acceptance probability equals every other within `tol`.
    pub fn is_homogeneous(&self, tol: f64) -> bool {
        let p0 = self.accept_prob[0][0];
        self.accept_prob
            .iter()
            .all(|row| row.iter().all(|&p| (p - p0).abs() <= tol))
    }

    pub fn min_prob(&self) -> f64 {
        self.accept_prob
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_prob(&self) -> f64 {
        self.accept_prob
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), InstanceError> {
        let path = path.as_ref();
        let file = InstanceFile {
            schema_version: INSTANCE_SCHEMA_VERSION,
            instance: self.clone(),
        };
        let json = serde_json::to_string_pretty(&file)?;
        fs::write(path, json).map_err(|source| InstanceError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|source| InstanceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file: InstanceFile = serde_json::from_str(&raw)?;
        if file.schema_version != INSTANCE_SCHEMA_VERSION {
            return Err(InstanceError::SchemaVersion {
                found: file.schema_version,
                expected: INSTANCE_SCHEMA_VERSION,
            });
        }
        file.instance.validate()?;
        Ok(file.instance)
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    schema_version: u32,
    #[serde(flatten)]
    instance: Instance,
}

/// The first-stage decision: for each demand, the set of recommended supplies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recommendation {
    pub lists: Vec<Vec<usize>>,
}

impl Recommendation {
    pub fn empty(num_demands: usize) -> Self {
        Recommendation {
            lists: vec![Vec::new(); num_demands],
        }
    }

    pub fn from_lists(lists: Vec<Vec<usize>>) -> Self {
        Recommendation { lists }
    }

    /// Total number of (demand, supply) recommendations.
    pub fn num_recommended(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }

    /// Sorts every list ascending; the canonical form used by solvers.
    pub fn canonicalize(&mut self) {
        for list in &mut self.lists {
            list.sort_unstable();
        }
    }
}

impl fmt::Display for Recommendation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, list) in self.lists.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{i}:{list:?}")?;
        }
        Ok(())
    }
}

/// Why a recommendation is infeasible for an instance.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecommendationViolation {
    #[error("expected one list per demand ({expected}), got {got}")]
    ListCount { expected: usize, got: usize },
    #[error("demand {demand} recommends supply {supply}, outside 0..{num_supplies}")]
    SupplyOutOfRange {
        demand: usize,
        supply: usize,
        num_supplies: usize,
    },
    #[error("demand {demand} lists supply {supply} more than once")]
    DuplicateSupply { demand: usize, supply: usize },
    #[error("demand {demand} has {len} recommendations, cap is {theta}")]
    CapExceeded { demand: usize, len: usize, theta: usize },
    #[error("supply {supply} recommended to both demand {first} and demand {second}")]
    SupplyShared { supply: usize, first: usize, second: usize },
}

/// Checks the recommendation constraints against the instance dimensions:
/// at most `theta` supplies per demand, each supply in at most one list,
/// indices in range, no duplicates within a list.
pub fn validate_recommendation(
    instance: &Instance,
    rec: &Recommendation,
) -> Result<(), RecommendationViolation> {
    if rec.lists.len() != instance.num_demands {
        return Err(RecommendationViolation::ListCount {
            expected: instance.num_demands,
            got: rec.lists.len(),
        });
    }
    let mut owner: Vec<Option<usize>> = vec![None; instance.num_supplies];
    for (demand, list) in rec.lists.iter().enumerate() {
        if list.len() > instance.theta {
            return Err(RecommendationViolation::CapExceeded {
                demand,
                len: list.len(),
                theta: instance.theta,
            });
        }
        for &supply in list {
            if supply >= instance.num_supplies {
                return Err(RecommendationViolation::SupplyOutOfRange {
                    demand,
                    supply,
                    num_supplies: instance.num_supplies,
                });
            }
            match owner[supply] {
                Some(first) if first == demand => {
                    return Err(RecommendationViolation::DuplicateSupply { demand, supply });
                }
                Some(first) => {
                    return Err(RecommendationViolation::SupplyShared {
                        supply,
                        first,
                        second: demand,
                    });
                }
                None => owner[supply] = Some(demand),
            }
        }
    }
    Ok(())
}
