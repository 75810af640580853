//! Symbolic prediction: every margin change reachable by modifying a single
//! feature, without enumerating candidate values.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::ensemble::{Node, Predicate, Tree, TreeEnsemble};
use crate::error::{Error, Result};
use crate::interval::{cell, Interval};

/// An instance `x~` differing from a base instance in at most one feature,
/// described by an admissible interval per constrained feature.
#[derive(Clone, Debug)]
pub struct SymbolicInstance<'a> {
    base: &'a [f64],
    intervals: SmallVec<[(usize, Interval); 8]>,
    changed_dim: Option<usize>,
}

impl<'a> SymbolicInstance<'a> {
    pub fn new(base: &'a [f64]) -> Self {
        SymbolicInstance {
            base,
            intervals: SmallVec::new(),
            changed_dim: None,
        }
    }

    pub fn base(&self) -> &[f64] {
        self.base
    }

    /// Admissible interval of feature `k`; unconstrained features are
    /// [`Interval::FULL`].
    pub fn interval(&self, k: usize) -> Interval {
        self.intervals
            .iter()
            .find(|(f, _)| *f == k)
            .map_or(Interval::FULL, |(_, i)| *i)
    }

    /// Whether some `x~` with at most one modified feature satisfies the
    /// current constraints and `p` (or its negation when `holds` is false).
    pub fn is_feasible(&self, p: &Predicate, holds: bool) -> bool {
        let k = p.feature;
        let i = self.interval(k).intersect(&p.interval(holds));
        !i.is_empty() && (i.contains(self.base[k]) || self.changed_dim.is_none_or(|c| c == k))
    }

    /// Intersects the constraint of `p` into the instance. Call only after
    /// [`is_feasible`](Self::is_feasible) returned true.
    pub fn update(&mut self, p: &Predicate, holds: bool) {
        let k = p.feature;
        let add = p.interval(holds);
        let i = match self.intervals.iter_mut().find(|(f, _)| *f == k) {
            Some((_, i)) => {
                *i = i.intersect(&add);
                *i
            }
            None => {
                self.intervals.push((k, add));
                add
            }
        };
        debug_assert!(!i.is_empty());
        if !i.contains(self.base[k]) {
            debug_assert!(self.changed_dim.is_none_or(|c| c == k));
            self.changed_dim = Some(k);
        }
    }

    pub fn is_changed(&self) -> bool {
        self.changed_dim.is_some()
    }

    pub fn changed_dim(&self) -> Option<usize> {
        self.changed_dim
    }

    pub fn get_perturbation(&self) -> Result<(usize, Interval)> {
        let k = self.changed_dim.ok_or(Error::NotChanged)?;
        Ok((k, self.interval(k)))
    }
}

/// Modifying `feature` to any value of `interval` changes the tree's
/// prediction by `delta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationTuple {
    pub feature: usize,
    pub interval: Interval,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SymbolicStats {
    pub internal_visited: u64,
    pub leaves_visited: u64,
    pub copies: u64,
    pub tuples: u64,
}

/// Perturbations of `x` that change the prediction of `tree`, one per leaf
/// reachable with a single modified feature (other than `x`'s own leaf).
pub fn symbolic_predict(tree: &Tree, x: &[f64]) -> Vec<PerturbationTuple> {
    let mut out = Vec::new();
    let mut stats = SymbolicStats::default();
    symbolic_predict_into(tree, x, &mut out, &mut stats);
    out
}

/// As [`symbolic_predict`], appending to `out` and counting work in `stats`.
pub fn symbolic_predict_into(
    tree: &Tree,
    x: &[f64],
    out: &mut Vec<PerturbationTuple>,
    stats: &mut SymbolicStats,
) {
    let own = tree.predict(x);
    let mut s = SymbolicInstance::new(x);
    walk(tree.nodes(), 0, &mut s, own, out, stats);
}

fn walk(
    nodes: &[Node],
    i: usize,
    s: &mut SymbolicInstance,
    own: f64,
    out: &mut Vec<PerturbationTuple>,
    stats: &mut SymbolicStats,
) {
    match &nodes[i] {
        Node::Leaf(v) => {
            stats.leaves_visited += 1;
            if let Ok((feature, interval)) = s.get_perturbation() {
                stats.tuples += 1;
                out.push(PerturbationTuple {
                    feature,
                    interval,
                    delta: v - own,
                });
            }
        }
        Node::Split {
            predicate,
            false_child,
        } => {
            stats.internal_visited += 1;
            if s.is_feasible(predicate, true) {
                let mut t = s.clone();
                stats.copies += 1;
                t.update(predicate, true);
                walk(nodes, i + 1, &mut t, own, out, stats);
            }
            if s.is_feasible(predicate, false) {
                s.update(predicate, false);
                walk(nodes, *false_child, s, own, out, stats);
            }
        }
    }
}

/// Outcome of the best single-feature modification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleChange {
    /// Feature and admissible values; `None` when no change improves.
    pub change: Option<(usize, Interval)>,
    /// Margin change `f(x~) - f(x)`.
    pub delta: f64,
    pub new_margin: f64,
}

impl SingleChange {
    /// `x` with the changed feature moved to the point of the interval
    /// nearest to `anchor` (usually the feature's original value).
    pub fn apply(&self, x: &[f64], anchor: f64, epsilon: f64) -> Vec<f64> {
        let mut y = x.to_vec();
        if let Some((k, i)) = self.change {
            y[k] = i.nearest_point(anchor, epsilon);
        }
        y
    }
}

/// Options for [`best_single_change_with`].
#[derive(Clone, Copy)]
pub struct SearchDirection<'f> {
    /// `+1` to maximize the margin, `-1` to minimize it.
    pub sign: f64,
    /// Restricts the features that may change.
    pub allowed: Option<&'f dyn Fn(usize) -> bool>,
}

impl Default for SearchDirection<'_> {
    fn default() -> Self {
        SearchDirection {
            sign: 1.0,
            allowed: None,
        }
    }
}

/// The single-feature modification of `x` with the largest margin.
pub fn best_single_change(model: &TreeEnsemble, x: &[f64]) -> Result<SingleChange> {
    Ok(best_single_change_with(model, x, SearchDirection::default())?.0)
}

/// Merges the perturbations of every tree and sweeps each feature axis for
/// the segment with the best summed delta (`sign * delta`). Ties go to the
/// lowest feature, then the leftmost segment; adjacent segments with equal
/// totals are reported as one interval.
pub fn best_single_change_with(
    model: &TreeEnsemble,
    x: &[f64],
    dir: SearchDirection,
) -> Result<(SingleChange, SymbolicStats)> {
    model.check_dim(x)?;
    let mut tuples = Vec::new();
    let mut stats = SymbolicStats::default();
    for tree in &model.trees {
        symbolic_predict_into(tree, x, &mut tuples, &mut stats);
    }
    let mut events: Vec<(usize, f64, f64)> = Vec::with_capacity(2 * tuples.len());
    for t in &tuples {
        if dir.allowed.is_some_and(|ok| !ok(t.feature)) {
            continue;
        }
        let d = dir.sign * t.delta;
        events.push((t.feature, t.interval.lo, d));
        events.push((t.feature, t.interval.hi, -d));
    }
    events.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut best: Option<(f64, usize, Interval)> = None;
    let mut i = 0;
    while i < events.len() {
        let k = events[i].0;
        let xk = x[k];
        let mut acc = 0.0;
        // Current run of equal totals: (total, start).
        let mut run: Option<(f64, f64)> = None;
        while i < events.len() && events[i].0 == k {
            let pos = events[i].1;
            while i < events.len() && events[i].0 == k && events[i].1 == pos {
                acc += events[i].2;
                i += 1;
            }
            let end = if i < events.len() && events[i].0 == k {
                events[i].1
            } else {
                f64::INFINITY
            };
            let seg = Interval::new(pos, end);
            // Segments are delimited by tuple ends, none of which straddles x.
            let total = if seg.contains(xk) || seg.is_empty() {
                None
            } else {
                Some(acc)
            };
            match (run, total) {
                (Some((r, _)), Some(t)) if r == t => {}
                _ => {
                    if let Some((r, start)) = run {
                        consider(&mut best, r, k, Interval::new(start, pos));
                    }
                    run = total.map(|t| (t, pos));
                }
            }
        }
        if let Some((r, start)) = run {
            consider(&mut best, r, k, Interval::new(start, f64::INFINITY));
        }
    }
    let margin = model.margin(x);
    let out = match best {
        Some((total, k, interval)) if total > 0.0 => {
            let delta = dir.sign * total;
            SingleChange {
                change: Some((k, interval)),
                delta,
                new_margin: margin + delta,
            }
        }
        _ => SingleChange {
            change: None,
            delta: 0.0,
            new_margin: margin,
        },
    };
    Ok((out, stats))
}

fn consider(best: &mut Option<(f64, usize, Interval)>, total: f64, k: usize, i: Interval) {
    // Zero-total segments far from x are indistinguishable from staying put.
    if total != 0.0 && best.is_none_or(|(b, _, _)| total > b) {
        *best = Some((total, k, i));
    }
}

/// Baseline: re-predicts, for every feature and every cell of its
/// thresholds, the trees that split on that feature.
pub fn brute_force_single_change(model: &TreeEnsemble, x: &[f64], sign: f64) -> Result<SingleChange> {
    model.check_dim(x)?;
    let thresholds = model.collect_thresholds();
    let mut trees_of: Vec<Vec<usize>> = vec![Vec::new(); model.n_features];
    for (t, tree) in model.trees.iter().enumerate() {
        for p in tree.predicates() {
            if trees_of[p.feature].last() != Some(&t) {
                trees_of[p.feature].push(t);
            }
        }
    }
    let margin = model.margin(x);
    let mut best: Option<(f64, usize, Interval)> = None;
    let mut y = x.to_vec();
    for (k, ts) in thresholds.iter().enumerate() {
        let trees = &trees_of[k];
        let own: f64 = trees.iter().map(|&t| model.trees[t].predict(x)).sum();
        for c in 0..=ts.len() {
            let iv = cell(ts, c);
            if iv.contains(x[k]) {
                continue;
            }
            y[k] = if iv.lo.is_finite() { iv.lo } else { iv.hi - 1.0 };
            let total: f64 = trees.iter().map(|&t| model.trees[t].predict(&y)).sum();
            let gain = sign * (total - own);
            if gain > 0.0 && best.is_none_or(|(b, _, _)| gain > b) {
                best = Some((gain, k, iv));
            }
        }
        y[k] = x[k];
    }
    Ok(match best {
        Some((g, k, iv)) => SingleChange {
            change: Some((k, iv)),
            delta: sign * g,
            new_margin: margin + sign * g,
        },
        None => SingleChange {
            change: None,
            delta: 0.0,
            new_margin: margin,
        },
    })
}

#[cfg(test)]
mod tests;
