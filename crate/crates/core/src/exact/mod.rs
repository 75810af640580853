//! Exact evasion: branch-and-bound over the interval cells of the MILP
//! encoding, and a brute-force enumeration oracle.

mod bnb;
mod oracle;
mod reach;

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use bnb::{solve, SolveConfig};
pub use oracle::{brute_force_oracle, DEFAULT_CELL_CAP};
pub use reach::ReachIndex;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    /// Search stopped early; the incumbent is `upper`, the optimum is at
    /// least `lower`. Both in the metric's natural units.
    FeasibleWithBound { lower: f64, upper: f64 },
    Infeasible,
    /// Stopped early without any evading instance.
    Timeout,
    Failed { reason: String },
}

impl SolveStatus {
    pub fn label(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleWithBound { .. } => "feasible_with_bound",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Timeout => "timeout",
            SolveStatus::Failed { .. } => "failed",
        }
    }
}

/// Result of one evasion attempt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvasionOutcome {
    pub x_prime: Option<Vec<f64>>,
    /// Distance to the original instance in natural units (L2 not squared);
    /// infinite when no evading instance was found.
    pub distance: f64,
    pub status: SolveStatus,
    /// The original margin was negative and `x_prime` has margin exactly 0:
    /// it satisfies the mislabel constraint but keeps the negative label.
    pub boundary: bool,
    pub nodes_expanded: u64,
    #[serde(with = "secs")]
    pub wall_time: Duration,
}

impl EvasionOutcome {
    pub fn is_evading(&self) -> bool {
        self.x_prime.is_some()
    }

    pub(crate) fn not_found(status: SolveStatus, nodes_expanded: u64, wall_time: Duration) -> Self {
        EvasionOutcome {
            x_prime: None,
            distance: f64::INFINITY,
            status,
            boundary: false,
            nodes_expanded,
            wall_time,
        }
    }
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}
