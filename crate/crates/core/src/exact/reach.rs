use crate::ensemble::{Node, TreeEnsemble};
use crate::milp::MilpProgram;

/// Marker for a feature whose cell is not fixed.
pub const FREE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
enum RankNode {
    /// `x_feature` lies in a cell `<= rank` iff the predicate holds.
    Split {
        feature: u32,
        rank: u32,
        false_child: u32,
    },
    Leaf(f64),
}

/// Trees re-expressed over cell indices, for evaluating partial cell
/// assignments. Leaf values are multiplied by `sign`.
#[derive(Clone, Debug)]
pub struct ReachIndex {
    trees: Vec<Vec<RankNode>>,
    /// Trees that split on each feature.
    pub trees_of_feature: Vec<Vec<u32>>,
}

impl ReachIndex {
    pub fn new(model: &TreeEnsemble, prog: &MilpProgram, sign: f64) -> Self {
        let mut trees_of_feature = vec![Vec::new(); model.n_features];
        let trees = model
            .trees
            .iter()
            .enumerate()
            .map(|(t, tree)| {
                tree.nodes()
                    .iter()
                    .map(|n| match n {
                        Node::Leaf(v) => RankNode::Leaf(sign * v),
                        Node::Split {
                            predicate,
                            false_child,
                        } => {
                            let k = predicate.feature;
                            let list = &mut trees_of_feature[k];
                            if list.last() != Some(&(t as u32)) {
                                list.push(t as u32);
                            }
                            RankNode::Split {
                                feature: k as u32,
                                rank: prog.features[k]
                                    .rank_of(predicate.threshold)
                                    .expect("program built from this model") as u32,
                                false_child: *false_child as u32,
                            }
                        }
                    })
                    .collect()
            })
            .collect();
        ReachIndex {
            trees,
            trees_of_feature,
        }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Leaf value reached when every feature sits in `cells[k]`, or in
    /// `default[k]` where `cells[k]` is [`FREE`].
    pub fn value(&self, t: usize, cells: &[u32], default: &[u32]) -> f64 {
        let nodes = &self.trees[t];
        let mut i = 0;
        loop {
            match nodes[i] {
                RankNode::Leaf(v) => return v,
                RankNode::Split {
                    feature,
                    rank,
                    false_child,
                } => {
                    let mut c = cells[feature as usize];
                    if c == FREE {
                        c = default[feature as usize];
                    }
                    i = if c <= rank { i + 1 } else { false_child as usize };
                }
            }
        }
    }

    /// Smallest and largest leaf reachable when free features may take any
    /// cell.
    pub fn range(&self, t: usize, cells: &[u32]) -> (f64, f64) {
        let nodes = &self.trees[t];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            match nodes[i] {
                RankNode::Leaf(v) => {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                RankNode::Split {
                    feature,
                    rank,
                    false_child,
                } => {
                    let c = cells[feature as usize];
                    if c == FREE || c <= rank {
                        stack.push(i + 1);
                    }
                    if c == FREE || c > rank {
                        stack.push(false_child as usize);
                    }
                }
            }
        }
        (lo, hi)
    }
}

/// Buffers reused across [`ReachIndex::credit`] calls.
#[derive(Default)]
pub struct CreditScratch {
    required: Vec<u32>,
    local: Vec<(u32, f64)>,
}

impl ReachIndex {
    /// Largest reachable leaf of tree `t`, and per-feature credits for
    /// raising the tree above `base` (the value at the default cells).
    ///
    /// A reachable leaf whose value exceeds `base` by `g` needs every free
    /// feature it disagrees with to change; each of those `r` features is
    /// credited `g / r`, keeping the largest credit per feature. Any set of
    /// changed features then raises the tree by at most the sum of their
    /// credits. Credits are added to `credit`.
    pub fn credit(
        &self,
        t: usize,
        cells: &[u32],
        default: &[u32],
        base: f64,
        scratch: &mut CreditScratch,
        credit: &mut [f64],
    ) -> f64 {
        scratch.required.clear();
        scratch.local.clear();
        let hi = self.credit_walk(t, 0, cells, default, base, scratch);
        for &(k, c) in &scratch.local {
            credit[k as usize] += c;
        }
        hi
    }

    fn credit_walk(
        &self,
        t: usize,
        i: usize,
        cells: &[u32],
        default: &[u32],
        base: f64,
        s: &mut CreditScratch,
    ) -> f64 {
        match self.trees[t][i] {
            RankNode::Leaf(v) => {
                let g = v - base;
                if g > 0.0 && !s.required.is_empty() {
                    let share = g / s.required.len() as f64;
                    for &k in &s.required {
                        match s.local.iter_mut().find(|(f, _)| *f == k) {
                            Some((_, c)) => *c = c.max(share),
                            None => s.local.push((k, share)),
                        }
                    }
                }
                v
            }
            RankNode::Split {
                feature,
                rank,
                false_child,
            } => {
                let k = feature as usize;
                let c = cells[k];
                if c != FREE {
                    let next = if c <= rank { i + 1 } else { false_child as usize };
                    return self.credit_walk(t, next, cells, default, base, s);
                }
                let on_true = default[k] <= rank;
                let mut hi = f64::NEG_INFINITY;
                for (child, stays) in [(i + 1, on_true), (false_child as usize, !on_true)] {
                    let pushed = !stays && !s.required.contains(&feature);
                    if pushed {
                        s.required.push(feature);
                    }
                    hi = hi.max(self.credit_walk(t, child, cells, default, base, s));
                    if pushed {
                        s.required.pop();
                    }
                }
                hi
            }
        }
    }
}
