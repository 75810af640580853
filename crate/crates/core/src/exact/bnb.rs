use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use super::reach::{CreditScratch, ReachIndex, FREE};
use super::{EvasionOutcome, SolveStatus};
use crate::distance::Metric;
use crate::ensemble::TreeEnsemble;
use crate::error::{Error, Result};
use crate::milp::MilpProgram;

#[derive(Clone, Debug)]
pub struct SolveConfig {
    pub time_limit: Duration,
    /// Cap on expanded search nodes; `None` for no cap.
    pub node_limit: Option<u64>,
    /// A known evading instance used as the first incumbent.
    pub warm_start: Option<Vec<f64>>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            time_limit: Duration::from_secs(60),
            node_limit: None,
            warm_start: None,
        }
    }
}

impl SolveConfig {
    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = limit;
        self
    }

    pub fn with_node_limit(mut self, limit: u64) -> Self {
        self.node_limit = Some(limit);
        self
    }

    pub fn with_warm_start(mut self, x: Vec<f64>) -> Self {
        self.warm_start = Some(x);
        self
    }
}

struct SearchNode {
    parent: u32,
    feature: u32,
    cell: u32,
}

#[derive(Clone, Copy)]
struct Open {
    bound: f64,
    fixed: f64,
    depth: u32,
    id: u32,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    // Max-heap: smallest bound first, then deepest, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

enum Eval {
    /// No completion can reach the target.
    Dead,
    /// Leaving the free features at their original cells already works.
    Solved,
    Open { bound: f64, branch: usize },
}

struct Search {
    reach: ReachIndex,
    x_cells: Vec<u32>,
    /// Cheapest cost of leaving the original cell, per feature.
    min_cost: Vec<f64>,
    linf: bool,
    integral: bool,
    bias: f64,
    gain: Vec<f64>,
    items: Vec<(f64, f64, usize)>,
    scratch: CreditScratch,
}

impl Search {
    fn new(model: &TreeEnsemble, prog: &MilpProgram) -> Self {
        let sign = prog.target.sign();
        let min_cost = prog
            .features
            .iter()
            .map(|fe| {
                fe.interval_costs
                    .iter()
                    .enumerate()
                    .filter(|&(c, _)| c != fe.x_cell)
                    .map(|(_, &v)| v)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        Search {
            reach: ReachIndex::new(model, prog, sign),
            x_cells: prog.features.iter().map(|f| f.x_cell as u32).collect(),
            min_cost,
            linf: prog.distance.metric == Metric::LInf,
            integral: prog.distance.metric == Metric::L0 && prog.distance.l0_weights.is_none(),
            bias: sign * prog.bias,
            gain: vec![0.0; model.n_features],
            items: Vec::new(),
            scratch: CreditScratch::default(),
        }
    }

    fn evaluate(&mut self, cells: &[u32], fixed: f64) -> Eval {
        let n_trees = self.reach.n_trees();
        let mut margin = self.bias;
        let mut best = self.bias;
        self.gain.fill(0.0);
        for t in 0..n_trees {
            let v = self.reach.value(t, cells, &self.x_cells);
            let hi = self
                .reach
                .credit(t, cells, &self.x_cells, v, &mut self.scratch, &mut self.gain);
            margin += v;
            best += hi;
        }
        if margin >= 0.0 {
            return Eval::Solved;
        }
        if best < 0.0 {
            return Eval::Dead;
        }
        let gap = -margin;
        self.items.clear();
        let mut branch = usize::MAX;
        let mut branch_key = (f64::NEG_INFINITY, f64::INFINITY);
        for (k, trees) in self.reach.trees_of_feature.iter().enumerate() {
            if cells[k] != FREE || trees.is_empty() {
                continue;
            }
            let g = self.gain[k];
            if g <= 0.0 {
                continue;
            }
            self.items.push((g, self.min_cost[k], k));
            if g > branch_key.0 || (g == branch_key.0 && self.min_cost[k] < branch_key.1) {
                branch = k;
                branch_key = (g, self.min_cost[k]);
            }
        }
        match self.relaxed_cost(gap) {
            None => Eval::Dead,
            Some(extra) => {
                let bound = if self.linf {
                    fixed.max(extra)
                } else {
                    fixed + extra
                };
                Eval::Open { bound, branch }
            }
        }
    }

    /// Lower bound on the extra cost needed to close `gap` with the free
    /// features, each of which can add at most its gain.
    fn relaxed_cost(&mut self, gap: f64) -> Option<f64> {
        let total: f64 = self.items.iter().map(|i| i.0).sum();
        if total < gap {
            return None;
        }
        if self.linf {
            self.items.sort_by(|a, b| a.1.total_cmp(&b.1));
            let mut acc = 0.0;
            for &(g, c, _) in &self.items {
                acc += g;
                if acc >= gap {
                    return Some(c);
                }
            }
            return self.items.last().map(|i| i.1);
        }
        self.items
            .sort_by(|a, b| (b.0 * a.1).total_cmp(&(a.0 * b.1)).then(a.2.cmp(&b.2)));
        let mut rest = gap;
        let mut cost = 0.0;
        for &(g, c, _) in &self.items {
            if g >= rest {
                cost += c * rest / g;
                break;
            }
            cost += c;
            rest -= g;
        }
        if self.integral {
            cost = (cost - 1e-9).ceil().max(0.0);
        }
        Some(cost)
    }
}

/// Finds an evading instance of minimum distance by branch-and-bound over
/// the interval cells encoded in `prog`.
///
/// Feature cells are fixed one at a time; a node is pruned when no reachable
/// leaf combination flips the label, or when a fractional-knapsack relaxation
/// of the remaining cost reaches the incumbent.
pub fn solve(
    prog: &MilpProgram,
    model: &TreeEnsemble,
    x: &[f64],
    config: &SolveConfig,
) -> Result<EvasionOutcome> {
    let start = Instant::now();
    model.check_dim(x)?;
    if prog.x != x || prog.trees.len() != model.trees.len() || prog.features.len() != x.len() {
        return Err(Error::Config(
            "program was not built from this model and instance".into(),
        ));
    }
    let d = &prog.distance;
    let target = prog.target;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    if let Some(w) = &config.warm_start {
        model.check_dim(w)?;
        if target.is_met(model.margin(w)) {
            incumbent = Some((d.objective(x, w), w.clone()));
        }
    }

    let mut search = Search::new(model, prog);
    let n = x.len();
    let mut cells = vec![FREE; n];
    let mut arena: Vec<SearchNode> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut expanded: u64 = 0;
    let tol = |v: f64| 1e-12 * v.abs().max(1.0);

    let offer = |cells: &[u32], incumbent: &mut Option<(f64, Vec<f64>)>| {
        let full: Vec<usize> = cells
            .iter()
            .zip(&prog.features)
            .map(|(&c, fe)| if c == FREE { fe.x_cell } else { c as usize })
            .collect();
        let xp = prog.decode_cells(&full);
        if !target.is_met(model.margin(&xp)) {
            return;
        }
        let obj = d.objective(x, &xp);
        if incumbent.as_ref().is_none_or(|(best, _)| obj < *best) {
            *incumbent = Some((obj, xp));
        }
    };

    match search.evaluate(&cells, 0.0) {
        Eval::Dead => {}
        Eval::Solved => offer(&cells, &mut incumbent),
        Eval::Open { bound, branch } => {
            arena.push(SearchNode {
                parent: u32::MAX,
                feature: branch as u32,
                cell: FREE,
            });
            heap.push(Open {
                bound,
                fixed: 0.0,
                depth: 0,
                id: 0,
            });
        }
    }

    let mut stopped = false;
    while let Some(open) = heap.peek().copied() {
        if let Some((best, _)) = &incumbent {
            if open.bound >= best - tol(*best) {
                heap.clear();
                break;
            }
        }
        if config.node_limit.is_some_and(|m| expanded >= m)
            || (expanded.is_multiple_of(64) && start.elapsed() >= config.time_limit)
        {
            stopped = true;
            break;
        }
        heap.pop();
        expanded += 1;

        // Rebuild the partial assignment; the node's own branch feature is
        // stored on the root entry, children record the cell they fixed.
        cells.fill(FREE);
        let mut id = open.id;
        while id != u32::MAX {
            let node = &arena[id as usize];
            if node.cell != FREE {
                cells[node.feature as usize] = node.cell;
            }
            id = node.parent;
        }
        let branch = match search.evaluate(&cells, open.fixed) {
            Eval::Open { branch, .. } => branch,
            _ => unreachable!("open nodes are re-evaluated unchanged"),
        };
        let fe = &prog.features[branch];
        let mut order: Vec<usize> = (0..fe.n_cells()).collect();
        order.sort_by(|&a, &b| fe.interval_costs[a].total_cmp(&fe.interval_costs[b]));
        for c in order {
            let child_fixed = d.combine(open.fixed, fe.interval_costs[c]);
            if let Some((best, _)) = &incumbent {
                if child_fixed >= best - tol(*best) {
                    continue;
                }
            }
            cells[branch] = c as u32;
            match search.evaluate(&cells, child_fixed) {
                Eval::Dead => {}
                Eval::Solved => offer(&cells, &mut incumbent),
                Eval::Open { bound, .. } => {
                    if incumbent
                        .as_ref()
                        .is_none_or(|(best, _)| bound < best - tol(*best))
                    {
                        let cid = arena.len() as u32;
                        arena.push(SearchNode {
                            parent: open.id,
                            feature: branch as u32,
                            cell: c as u32,
                        });
                        heap.push(Open {
                            bound,
                            fixed: child_fixed,
                            depth: open.depth + 1,
                            id: cid,
                        });
                    }
                }
            }
            cells[branch] = FREE;
        }
    }

    let wall = start.elapsed();
    let lower = heap.peek().map(|o| o.bound);
    Ok(match incumbent {
        Some((obj, xp)) => {
            let status = if stopped {
                let lo = lower.map_or(obj, |b| b.min(obj));
                SolveStatus::FeasibleWithBound {
                    lower: d.to_distance(lo),
                    upper: d.to_distance(obj),
                }
            } else {
                SolveStatus::Optimal
            };
            let boundary = prog.original_margin < 0.0 && model.margin(&xp) == 0.0;
            EvasionOutcome {
                x_prime: Some(xp),
                distance: d.to_distance(obj),
                status,
                boundary,
                nodes_expanded: expanded,
                wall_time: wall,
            }
        }
        None if stopped => EvasionOutcome::not_found(SolveStatus::Timeout, expanded, wall),
        None => EvasionOutcome::not_found(SolveStatus::Infeasible, expanded, wall),
    })
}
