use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::Dataset;
use crate::distance::{DistanceSpec, Metric};
use crate::ensemble::label_of;
use crate::error::{Error, Result};
use crate::evade::{coordinate_descent_evade, DescentConfig};
use crate::exact::{solve, EvasionOutcome, SolveConfig, SolveStatus};
use crate::milp::build_program;
use crate::{TreeEnsemble, DEFAULT_EPSILON};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Exact,
    /// Coordinate descent; L0 only.
    Approx,
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverKind::Exact => "exact",
            SolverKind::Approx => "approx",
        })
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(SolverKind::Exact),
            "approx" => Ok(SolverKind::Approx),
            _ => Err(Error::Config(format!("unknown solver {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NamedModel {
    pub name: String,
    pub model: TreeEnsemble,
}

impl NamedModel {
    pub fn new(name: impl Into<String>, model: TreeEnsemble) -> Self {
        NamedModel {
            name: name.into(),
            model,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RobustnessConfig {
    pub solver: SolverKind,
    pub time_limit: Duration,
    pub node_limit: Option<u64>,
    pub epsilon: f64,
    /// Seed the exact solver with the coordinate-descent evasion.
    pub warm_start: bool,
    /// Store measured wall times; when false they are written as zero so
    /// that reruns produce identical files.
    pub record_timing: bool,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig {
            solver: SolverKind::Exact,
            time_limit: Duration::from_secs(60),
            node_limit: None,
            epsilon: DEFAULT_EPSILON,
            warm_start: true,
            record_timing: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub model: String,
    pub metric: Metric,
    pub instance_id: usize,
    pub outcome: EvasionOutcome,
    /// `x_prime` exists and its predicted label differs from the original's.
    pub verified: bool,
    /// Distance of the warm-start instance, when one was used.
    pub warm_distance: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Quartiles {
    /// Quantiles by linear interpolation between order statistics; `None`
    /// for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let (i, frac) = (h.floor() as usize, h - h.floor());
            if i + 1 < v.len() {
                v[i] + frac * (v[i + 1] - v[i])
            } else {
                v[i]
            }
        };
        Some(Quartiles {
            min: v[0],
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub model: String,
    pub metric: Metric,
    pub solver: SolverKind,
    /// Over instances with an evading `x_prime`.
    pub quartiles: Option<Quartiles>,
    pub optimal: usize,
    pub best_effort: usize,
    /// Infeasible, timed out, or failed.
    pub not_evaded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureFrequency {
    pub model: String,
    /// How many L0 evasions changed each feature.
    pub counts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub solver: SolverKind,
    pub outcomes: Vec<InstanceOutcome>,
    pub summaries: Vec<RunSummary>,
    pub frequencies: Vec<FeatureFrequency>,
}

impl RobustnessReport {
    pub fn outcomes_for<'a>(
        &'a self,
        model: &'a str,
        metric: Metric,
    ) -> impl Iterator<Item = &'a InstanceOutcome> + 'a {
        self.outcomes
            .iter()
            .filter(move |o| o.model == model && o.metric == metric)
    }

    pub fn summary(&self, model: &str, metric: Metric) -> Option<&RunSummary> {
        self.summaries
            .iter()
            .find(|s| s.model == model && s.metric == metric)
    }
}

fn failed(reason: String) -> EvasionOutcome {
    EvasionOutcome::not_found(SolveStatus::Failed { reason }, 0, Duration::ZERO)
}

fn evade_one(
    model: &TreeEnsemble,
    x: &[f64],
    metric: Metric,
    cfg: &RobustnessConfig,
) -> Result<(EvasionOutcome, Option<f64>)> {
    let descent = DescentConfig {
        epsilon: cfg.epsilon,
        ..Default::default()
    };
    match cfg.solver {
        SolverKind::Approx => Ok((coordinate_descent_evade(model, x, &descent)?.0, None)),
        SolverKind::Exact => {
            let d = DistanceSpec::new(metric).with_epsilon(cfg.epsilon);
            let prog = build_program(model, x, &d, &[])?;
            let mut sc = SolveConfig::default().with_time_limit(cfg.time_limit);
            sc.node_limit = cfg.node_limit;
            let mut warm = None;
            if cfg.warm_start {
                let (approx, _) = coordinate_descent_evade(model, x, &descent)?;
                if let Some(xp) = approx.x_prime {
                    warm = Some(d.distance(x, &xp));
                    sc.warm_start = Some(xp);
                }
            }
            Ok((solve(&prog, model, x, &sc)?, warm))
        }
    }
}

/// Evades every instance of `eval` on every model under every metric.
///
/// Work is spread over (instance, metric) pairs; the report lists outcomes
/// by model, then metric, then instance regardless of completion order.
/// Per-instance errors are recorded as failed outcomes.
pub fn run_robustness(
    models: &[NamedModel],
    eval: &Dataset,
    metrics: &[Metric],
    cfg: &RobustnessConfig,
) -> Result<RobustnessReport> {
    if cfg.solver == SolverKind::Approx && metrics.iter().any(|&m| m != Metric::L0) {
        return Err(Error::Config(
            "the approximate solver only supports the L0 metric".into(),
        ));
    }
    for m in models {
        if m.model.n_features != eval.n_features() {
            return Err(Error::DimensionMismatch {
                expected: m.model.n_features,
                got: eval.n_features(),
            });
        }
    }
    let mut outcomes = Vec::new();
    let mut summaries = Vec::new();
    let mut frequencies = Vec::new();
    for nm in models {
        let jobs: Vec<(Metric, usize)> = metrics
            .iter()
            .flat_map(|&m| (0..eval.len()).map(move |i| (m, i)))
            .collect();
        let results: Vec<InstanceOutcome> = jobs
            .par_iter()
            .map(|&(metric, i)| {
                let x = eval.row(i);
                let (mut outcome, warm_distance) = evade_one(&nm.model, x, metric, cfg)
                    .unwrap_or_else(|e| (failed(e.to_string()), None));
                if !cfg.record_timing {
                    outcome.wall_time = Duration::ZERO;
                }
                let verified = outcome.x_prime.as_ref().is_some_and(|xp| {
                    label_of(nm.model.margin(xp)) != label_of(nm.model.margin(x))
                });
                InstanceOutcome {
                    model: nm.name.clone(),
                    metric,
                    instance_id: i,
                    outcome,
                    verified,
                    warm_distance,
                }
            })
            .collect();

        for &metric in metrics {
            let rows: Vec<&InstanceOutcome> = results.iter().filter(|o| o.metric == metric).collect();
            let dists: Vec<f64> = rows
                .iter()
                .filter(|o| o.outcome.x_prime.is_some())
                .map(|o| o.outcome.distance)
                .collect();
            let count = |f: fn(&SolveStatus) -> bool| rows.iter().filter(|o| f(&o.outcome.status)).count();
            summaries.push(RunSummary {
                model: nm.name.clone(),
                metric,
                solver: cfg.solver,
                quartiles: Quartiles::of(&dists),
                optimal: count(|s| matches!(s, SolveStatus::Optimal)),
                best_effort: count(|s| matches!(s, SolveStatus::FeasibleWithBound { .. })),
                not_evaded: count(|s| {
                    matches!(
                        s,
                        SolveStatus::Failed { .. } | SolveStatus::Timeout | SolveStatus::Infeasible
                    )
                }),
            });
            if metric == Metric::L0 {
                let mut counts = vec![0u64; eval.n_features()];
                for o in &rows {
                    if let Some(xp) = &o.outcome.x_prime {
                        for (k, (a, b)) in eval.row(o.instance_id).iter().zip(xp).enumerate() {
                            if a != b {
                                counts[k] += 1;
                            }
                        }
                    }
                }
                frequencies.push(FeatureFrequency {
                    model: nm.name.clone(),
                    counts,
                });
            }
        }
        outcomes.extend(results);
    }
    Ok(RobustnessReport {
        solver: cfg.solver,
        outcomes,
        summaries,
        frequencies,
    })
}
