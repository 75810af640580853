use super::binning::Binned;
use crate::ensemble::TreeNode;

pub(crate) struct FitParams {
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_split_gain: f64,
    pub min_leaf_count: usize,
    pub lambda: f64,
    pub min_child_weight: f64,
    pub max_delta_step: f64,
}

pub(crate) struct Fitted {
    /// `None` when the root could not be split; its value is then in
    /// `constant`.
    pub root: Option<TreeNode>,
    pub constant: f64,
    /// Leaf value added to each row's margin.
    pub update: Vec<f64>,
}

struct Split {
    feature: usize,
    left_max: u32,
    threshold: f64,
}

struct Fitter<'a> {
    binned: &'a Binned,
    resid: &'a [f64],
    hess: &'a [f64],
    params: &'a FitParams,
    active: Vec<usize>,
    sums: Vec<f64>,
    hsums: Vec<f64>,
    counts: Vec<u32>,
    update: Vec<f64>,
}

/// Fits one regression tree to the residuals `resid` (negative gradients)
/// with variance-reduction splits. Each leaf predicts the regularized Newton
/// step `learning_rate * sum(resid) / (sum(hess) + lambda)` over its rows
/// (the step clamped to `max_delta_step` when that is positive), and no child
/// may hold less than `min_child_weight` of hessian.
pub(crate) fn fit_tree(binned: &Binned, resid: &[f64], hess: &[f64], params: &FitParams) -> Fitted {
    let total = *binned.offsets.last().unwrap();
    let active = (0..binned.n_features())
        .filter(|&k| binned.uniques[k].len() > 1)
        .collect();
    let mut f = Fitter {
        binned,
        resid,
        hess,
        params,
        active,
        sums: vec![0.0; total],
        hsums: vec![0.0; total],
        counts: vec![0; total],
        update: vec![0.0; resid.len()],
    };
    let rows: Vec<u32> = (0..resid.len() as u32).collect();
    let root = f.grow(rows, 0);
    match root {
        TreeNode::Leaf { prediction } => Fitted {
            root: None,
            constant: prediction,
            update: f.update,
        },
        node => Fitted {
            root: Some(node),
            constant: 0.0,
            update: f.update,
        },
    }
}

impl Fitter<'_> {
    fn grow(&mut self, rows: Vec<u32>, depth: usize) -> TreeNode {
        let split = if depth < self.params.max_depth && rows.len() >= 2 * self.params.min_leaf_count.max(1) {
            self.best_split(&rows)
        } else {
            None
        };
        match split {
            None => self.leaf(&rows),
            Some(s) => {
                let (left, right): (Vec<u32>, Vec<u32>) = rows
                    .iter()
                    .partition(|&&r| self.binned.row(r as usize)[s.feature] <= s.left_max);
                drop(rows);
                let t = self.grow(left, depth + 1);
                let f = self.grow(right, depth + 1);
                TreeNode::split(s.feature, s.threshold, t, f)
            }
        }
    }

    fn leaf(&mut self, rows: &[u32]) -> TreeNode {
        let (mut g, mut h) = (0.0, 0.0);
        for &r in rows {
            g += self.resid[r as usize];
            h += self.hess[r as usize];
        }
        let mut step = if h + self.params.lambda > 0.0 {
            g / (h + self.params.lambda)
        } else {
            0.0
        };
        let cap = self.params.max_delta_step;
        if cap > 0.0 {
            step = step.clamp(-cap, cap);
        }
        let v = self.params.learning_rate * step;
        for &r in rows {
            self.update[r as usize] = v;
        }
        TreeNode::leaf(v)
    }

    fn best_split(&mut self, rows: &[u32]) -> Option<Split> {
        let b = self.binned;
        for &k in &self.active {
            let (lo, hi) = (b.offsets[k], b.offsets[k + 1]);
            self.sums[lo..hi].fill(0.0);
            self.hsums[lo..hi].fill(0.0);
            self.counts[lo..hi].fill(0);
        }
        let (mut total, mut htotal) = (0.0, 0.0);
        for &r in rows {
            let g = self.resid[r as usize];
            let h = self.hess[r as usize];
            total += g;
            htotal += h;
            let bins = b.row(r as usize);
            for &k in &self.active {
                let i = b.offsets[k] + bins[k] as usize;
                self.sums[i] += g;
                self.hsums[i] += h;
                self.counts[i] += 1;
            }
        }
        let n = rows.len() as f64;
        let parent = total * total / n;
        let min_leaf = self.params.min_leaf_count.max(1) as u32;
        let mut best: Option<(f64, usize, u32, u32)> = None;
        for &k in &self.active {
            let off = b.offsets[k];
            let n_bins = b.offsets[k + 1] - off;
            let (mut s, mut hs, mut c) = (0.0, 0.0, 0u32);
            let mcw = self.params.min_child_weight;
            let mut prev: Option<u32> = None;
            for j in 0..n_bins {
                let cj = self.counts[off + j];
                if cj == 0 {
                    continue;
                }
                if let Some(p) = prev {
                    let cr = rows.len() as u32 - c;
                    if c >= min_leaf && cr >= min_leaf && hs >= mcw && htotal - hs >= mcw {
                        let sr = total - s;
                        let gain = s * s / c as f64 + sr * sr / cr as f64 - parent;
                        if best.is_none_or(|(g, ..)| gain > g) {
                            best = Some((gain, k, p, j as u32));
                        }
                    }
                }
                s += self.sums[off + j];
                hs += self.hsums[off + j];
                c += cj;
                prev = Some(j as u32);
            }
        }
        let (gain, feature, left_max, right_min) = best?;
        if gain <= self.params.min_split_gain {
            return None;
        }
        Some(Split {
            feature,
            left_max,
            threshold: b.threshold(feature, left_max, right_min),
        })
    }
}
