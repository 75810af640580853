//! Gradient boosting with logistic loss, and adversarial boosting that
//! trains each round on the originals plus fresh budgeted adversarial
//! copies.

mod binning;
mod data;
mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{Tree, TreeEnsemble};
use crate::error::{Error, Result};
use crate::evade::budgeted_adversarial;
use crate::DEFAULT_EPSILON;
use binning::Binned;
pub use data::Dataset;
use tree::{fit_tree, FitParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub adversarial: bool,
    /// L0 budget of adversarial instances.
    pub budget: usize,
    pub min_split_gain: f64,
    pub min_leaf_count: usize,
    /// L2 penalty on leaf values (XGBoost's `lambda`).
    pub lambda: f64,
    /// Minimum hessian sum of a child (XGBoost's `min_child_weight`).
    pub min_child_weight: f64,
    /// Bound on the Newton step of a leaf before shrinkage; 0 disables it
    /// (XGBoost's `max_delta_step`).
    pub max_delta_step: f64,
    /// Guard for right-open interval ends when placing adversarial values.
    pub epsilon: f64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            rounds: 100,
            max_depth: 4,
            learning_rate: 0.1,
            adversarial: false,
            budget: 28,
            min_split_gain: 1e-6,
            min_leaf_count: 1,
            lambda: 1.0,
            min_child_weight: 1.0,
            max_delta_step: 0.0,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning rate {} outside (0, 1]",
                self.learning_rate
            )));
        }
        if !(self.lambda >= 0.0 && self.min_child_weight >= 0.0 && self.max_delta_step >= 0.0) {
            return Err(Error::Config(
                "lambda, min_child_weight and max_delta_step must be non-negative".into(),
            ));
        }
        if self.adversarial && self.budget == 0 {
            return Err(Error::Config("adversarial budget must be at least 1".into()));
        }
        Ok(())
    }

    fn fit_params(&self) -> FitParams {
        FitParams {
            max_depth: self.max_depth,
            learning_rate: self.learning_rate,
            min_split_gain: self.min_split_gain,
            min_leaf_count: self.min_leaf_count,
            lambda: self.lambda,
            min_child_weight: self.min_child_weight,
            max_delta_step: self.max_delta_step,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    /// Mean logistic loss on the original training rows after each round.
    pub losses: Vec<f64>,
    pub adversarial_generated: u64,
    /// Largest L0 distance of any adversarial instance from its original.
    pub max_adversarial_l0: usize,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `log(1 + exp(-y f))` without overflow.
fn logistic_loss(y: f64, f: f64) -> f64 {
    let z = -y * f;
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn mean_loss(labels: &[i8], margins: &[f64]) -> f64 {
    let s: f64 = labels
        .iter()
        .zip(margins)
        .map(|(&y, &f)| logistic_loss(y as f64, f))
        .sum();
    s / labels.len() as f64
}

/// Negative gradient and second derivative of the logistic loss.
fn gradients(labels: &[i8], margins: &[f64], resid: &mut Vec<f64>, hess: &mut Vec<f64>) {
    resid.clear();
    hess.clear();
    for (&y, &f) in labels.iter().zip(margins) {
        let y = y as f64;
        let p = sigmoid(-y * f);
        resid.push(y * p);
        hess.push(p * (1.0 - p));
    }
}

fn initial_bias(data: &Dataset) -> f64 {
    let pos = data.labels().iter().filter(|&&y| y > 0).count() as f64;
    let p = (pos / data.len() as f64).clamp(1e-6, 1.0 - 1e-6);
    (p / (1.0 - p)).ln()
}

/// Plain gradient boosting.
pub fn train(data: &Dataset, cfg: &BoostConfig) -> Result<TreeEnsemble> {
    let cfg = BoostConfig {
        adversarial: false,
        ..cfg.clone()
    };
    Ok(train_with_summary(data, &cfg)?.0)
}

/// Adversarial boosting; requires `cfg.adversarial`.
pub fn train_adversarial(data: &Dataset, cfg: &BoostConfig) -> Result<TreeEnsemble> {
    if !cfg.adversarial {
        return Err(Error::Config("adversarial training not enabled".into()));
    }
    Ok(train_with_summary(data, cfg)?.0)
}

/// Trains plain or adversarial boosting according to `cfg.adversarial`.
///
/// Each round fits a tree of depth at most `max_depth` to the logistic
/// residuals. In adversarial mode every original row `x` gets a fresh copy
/// `x*` within L0 distance `budget` minimizing `y * f(x*)` under the current
/// model; the tree is fitted on both. Copies are discarded after the round.
pub fn train_with_summary(data: &Dataset, cfg: &BoostConfig) -> Result<(TreeEnsemble, TrainSummary)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let n = data.len();
    let mut model = TreeEnsemble::new(Vec::new(), data.n_features(), initial_bias(data))?;
    let base_bins = Binned::build(data);
    let params = cfg.fit_params();
    let mut margins = vec![model.bias; n];
    let mut summary = TrainSummary::default();
    let (mut resid, mut hess) = (Vec::new(), Vec::new());
    let origin: Vec<usize> = (0..n).collect();

    for _ in 0..cfg.rounds {
        let fitted = if cfg.adversarial {
            let adv: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let y = data.label(i) as f64;
                    budgeted_adversarial(&model, data.row(i), y, cfg.budget, cfg.epsilon)
                })
                .collect::<Result<_>>()?;
            for (i, a) in adv.iter().enumerate() {
                let l0 = a.iter().zip(data.row(i)).filter(|(p, q)| p != q).count();
                summary.max_adversarial_l0 = summary.max_adversarial_l0.max(l0);
            }
            summary.adversarial_generated += n as u64;
            let extra = Dataset::from_rows(&adv, data.labels())?;
            let bins = base_bins.extend(data, &extra, &origin);
            let mut all_margins = margins.clone();
            all_margins.extend(adv.iter().map(|a| model.margin(a)));
            let mut labels = data.labels().to_vec();
            labels.extend_from_slice(data.labels());
            gradients(&labels, &all_margins, &mut resid, &mut hess);
            fit_tree(&bins, &resid, &hess, &params)
        } else {
            gradients(data.labels(), &margins, &mut resid, &mut hess);
            fit_tree(&base_bins, &resid, &hess, &params)
        };
        match fitted.root {
            Some(root) => model.trees.push(Tree::from_node(&root)),
            None => model.bias += fitted.constant,
        }
        for (m, u) in margins.iter_mut().zip(&fitted.update) {
            *m += u;
        }
        summary.losses.push(mean_loss(data.labels(), &margins));
    }
    Ok((model, summary))
}
