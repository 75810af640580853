//! Seeded random ensembles for tests, benchmarks and model zoos.

use rand::Rng;

use super::{TreeEnsemble, TreeNode};

#[derive(Clone, Debug)]
pub struct RandomEnsembleConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub n_features: usize,
    /// Grow every branch to `max_depth` instead of stopping at random.
    pub full: bool,
    /// Probability of snapping a threshold to a multiple of 0.05, so that
    /// trees share predicates.
    pub grid_prob: f64,
    pub leaf_scale: f64,
}

impl Default for RandomEnsembleConfig {
    fn default() -> Self {
        RandomEnsembleConfig {
            n_trees: 5,
            max_depth: 3,
            n_features: 6,
            full: false,
            grid_prob: 0.5,
            leaf_scale: 1.0,
        }
    }
}

/// Thresholds fall in (0, 1); leaf values in `[-leaf_scale, leaf_scale]`.
pub fn random_ensemble<R: Rng>(rng: &mut R, cfg: &RandomEnsembleConfig) -> TreeEnsemble {
    let roots: Vec<TreeNode> = (0..cfg.n_trees)
        .map(|_| random_tree(rng, cfg, cfg.max_depth))
        .collect();
    TreeEnsemble::from_nodes(&roots, cfg.n_features, 0.0).expect("generated model is valid")
}

fn random_tree<R: Rng>(rng: &mut R, cfg: &RandomEnsembleConfig, depth: usize) -> TreeNode {
    let stop = depth == 0 || cfg.n_features == 0 || (!cfg.full && depth < cfg.max_depth && rng.gen_bool(0.25));
    if stop {
        return TreeNode::leaf(rng.gen_range(-cfg.leaf_scale..=cfg.leaf_scale));
    }
    let feature = rng.gen_range(0..cfg.n_features);
    let threshold = if rng.gen_bool(cfg.grid_prob) {
        rng.gen_range(1..20) as f64 * 0.05
    } else {
        rng.gen_range(0.01..0.99)
    };
    TreeNode::split(
        feature,
        threshold,
        random_tree(rng, cfg, depth - 1),
        random_tree(rng, cfg, depth - 1),
    )
}

/// A point of `[0, 1]^n`.
pub fn random_instance<R: Rng>(rng: &mut R, n_features: usize) -> Vec<f64> {
    (0..n_features).map(|_| rng.gen_range(0.0..1.0)).collect()
}
