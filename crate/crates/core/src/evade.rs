//! Approximate L0 evasion by greedy single-feature changes.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ensemble::TreeEnsemble;
use crate::error::{Error, Result};
use crate::exact::{EvasionOutcome, SolveStatus};
use crate::interval::Interval;
use crate::milp::Target;
use crate::symbolic::{best_single_change_with, SearchDirection};
use crate::DEFAULT_EPSILON;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentStep {
    pub feature: usize,
    pub interval: Interval,
    pub value: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DescentTrace {
    pub steps: Vec<DescentStep>,
    /// Features that differ from the original instance at the end.
    pub changed_features: BTreeSet<usize>,
}

#[derive(Clone, Copy, Debug)]
pub struct DescentConfig {
    pub max_iter: usize,
    pub epsilon: f64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        DescentConfig {
            max_iter: 1000,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// Moves feature `k` of `cur` into `interval`, at the point nearest to the
/// original value.
fn step(
    model: &TreeEnsemble,
    x: &[f64],
    cur: &mut [f64],
    k: usize,
    interval: Interval,
    eps: f64,
) -> DescentStep {
    cur[k] = interval.nearest_point(x[k], eps);
    DescentStep {
        feature: k,
        interval,
        value: cur[k],
        margin: model.margin(cur),
    }
}

fn changed(x: &[f64], y: &[f64]) -> BTreeSet<usize> {
    x.iter()
        .zip(y)
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(k, _)| k)
        .collect()
}

/// Repeatedly applies the single-feature change that moves the margin
/// furthest towards the opposite label, until the label flips.
///
/// The reported distance counts the features that differ from the original
/// `x`; changing the same feature twice counts once.
pub fn coordinate_descent_evade(
    model: &TreeEnsemble,
    x: &[f64],
    cfg: &DescentConfig,
) -> Result<(EvasionOutcome, DescentTrace)> {
    let start = Instant::now();
    model.check_dim(x)?;
    let original = model.margin(x);
    let target = Target::for_margin(original)?;
    let sign = target.sign();
    let mut cur = x.to_vec();
    let mut margin = original;
    let mut trace = DescentTrace::default();
    let mut failure = None;
    while !target.is_met(margin) {
        if trace.steps.len() >= cfg.max_iter {
            failure = Some("iteration limit");
            break;
        }
        let dir = SearchDirection {
            sign,
            allowed: None,
        };
        let (best, _) = best_single_change_with(model, &cur, dir)?;
        let Some((k, interval)) = best.change else {
            failure = Some("no improving single-feature change");
            break;
        };
        let s = step(model, x, &mut cur, k, interval, cfg.epsilon);
        if sign * s.margin <= sign * margin {
            failure = Some("no improving single-feature change");
            break;
        }
        margin = s.margin;
        trace.steps.push(s);
    }
    trace.changed_features = changed(x, &cur);
    let wall = start.elapsed();
    let nodes = trace.steps.len() as u64;
    if let Some(reason) = failure {
        let status = SolveStatus::Failed {
            reason: reason.into(),
        };
        return Ok((EvasionOutcome::not_found(status, nodes, wall), trace));
    }
    let l0 = trace.changed_features.len() as f64;
    let outcome = EvasionOutcome {
        boundary: original < 0.0 && margin == 0.0,
        x_prime: Some(cur),
        distance: l0,
        status: SolveStatus::FeasibleWithBound {
            lower: 1.0,
            upper: l0,
        },
        nodes_expanded: nodes,
        wall_time: wall,
    };
    Ok((outcome, trace))
}

/// A training instance within L0 distance `budget` of `x` whose margin
/// `y * f` is as small as the greedy descent can make it. Once `budget`
/// features have changed, only those may change further. The label need not
/// flip.
pub fn budgeted_adversarial(
    model: &TreeEnsemble,
    x: &[f64],
    y: f64,
    budget: usize,
    epsilon: f64,
) -> Result<Vec<f64>> {
    if budget == 0 {
        return Err(Error::Config("adversarial budget must be at least 1".into()));
    }
    model.check_dim(x)?;
    let sign = -y.signum();
    let mut cur = x.to_vec();
    let mut margin = model.margin(x);
    let mut touched = BTreeSet::new();
    for _ in 0..2 * budget + 8 {
        let full = touched.len() >= budget;
        let only_touched = |k: usize| touched.contains(&k);
        let dir = SearchDirection {
            sign,
            allowed: if full { Some(&only_touched) } else { None },
        };
        let (best, _) = best_single_change_with(model, &cur, dir)?;
        let Some((k, interval)) = best.change else {
            break;
        };
        let mut next = cur.clone();
        let s = step(model, x, &mut next, k, interval, epsilon);
        if sign * s.margin <= sign * margin {
            break;
        }
        cur = next;
        margin = s.margin;
        touched = changed(x, &cur);
    }
    Ok(cur)
}
