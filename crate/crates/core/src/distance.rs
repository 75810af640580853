use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::DEFAULT_EPSILON;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    L0,
    L1,
    L2,
    LInf,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::L0, Metric::L1, Metric::L2, Metric::LInf];

    /// Exponent `rho` of the per-feature cost `|x_k - x'_k|^rho`. L-infinity
    /// bounds the rho = 1 cost of every feature.
    pub fn rho(self) -> u32 {
        match self {
            Metric::L0 => 0,
            Metric::L1 | Metric::LInf => 1,
            Metric::L2 => 2,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::L0 => "L0",
            Metric::L1 => "L1",
            Metric::L2 => "L2",
            Metric::LInf => "Linf",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l0" => Ok(Metric::L0),
            "l1" => Ok(Metric::L1),
            "l2" => Ok(Metric::L2),
            "linf" | "l_inf" | "inf" => Ok(Metric::LInf),
            _ => Err(Error::Config(format!("unknown metric `{s}`"))),
        }
    }
}

/// `|d|^rho` with `0^0 = 0`.
pub fn pow_cost(d: f64, rho: u32) -> f64 {
    let d = d.abs();
    match rho {
        0 => {
            if d == 0.0 {
                0.0
            } else {
                1.0
            }
        }
        1 => d,
        2 => d * d,
        r => d.powi(r as i32),
    }
}

/// Which distance to minimize, with its knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceSpec {
    pub metric: Metric,
    /// Per-feature costs for a weighted L0. `None` means unit costs.
    pub l0_weights: Option<Vec<f64>>,
    pub epsilon: f64,
}

impl DistanceSpec {
    pub fn new(metric: Metric) -> Self {
        DistanceSpec {
            metric,
            l0_weights: None,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn weighted_l0(weights: Vec<f64>) -> Self {
        DistanceSpec {
            metric: Metric::L0,
            l0_weights: Some(weights),
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if let Some(w) = &self.l0_weights {
            if self.metric != Metric::L0 {
                return Err(Error::Config("feature weights only apply to L0".into()));
            }
            if w.len() != n_features {
                return Err(Error::DimensionMismatch {
                    expected: n_features,
                    got: w.len(),
                });
            }
            if !w.iter().all(|a| a.is_finite() && *a >= 0.0) {
                return Err(Error::Config("L0 weights must be finite and >= 0".into()));
            }
        }
        Ok(())
    }

    fn alpha(&self, k: usize) -> f64 {
        self.l0_weights.as_ref().map_or(1.0, |w| w[k])
    }

    /// Cost of moving feature `k` from `a` to `b`, in objective units
    /// (squared for L2).
    pub fn feature_cost(&self, k: usize, a: f64, b: f64) -> f64 {
        let c = pow_cost(a - b, self.metric.rho());
        if self.metric == Metric::L0 {
            c * self.alpha(k)
        } else {
            c
        }
    }

    /// Folds per-feature costs into an objective value: sum, or max for
    /// L-infinity.
    pub fn combine(&self, acc: f64, cost: f64) -> f64 {
        match self.metric {
            Metric::LInf => acc.max(cost),
            _ => acc + cost,
        }
    }

    /// Objective value (squared L2) between two points.
    pub fn objective(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .enumerate()
            .fold(0.0, |acc, (k, (a, b))| self.combine(acc, self.feature_cost(k, *a, *b)))
    }

    /// Converts an objective value to the metric's natural units.
    pub fn to_distance(&self, objective: f64) -> f64 {
        match self.metric {
            Metric::L2 => objective.max(0.0).sqrt(),
            _ => objective,
        }
    }

    /// The distance in natural units (L2 un-squared).
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.to_distance(self.objective(x, y))
    }
}
