//! Sum-ensembles of binary regression trees over single-feature threshold
//! predicates.

mod io;
pub mod random;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;

pub use io::{load_model, load_xgboost_dump, parse_xgboost_dump, save_model, ModelFormat};

/// `x[feature] < threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub feature: usize,
    pub threshold: f64,
}

impl Predicate {
    pub fn new(feature: usize, threshold: f64) -> Self {
        Predicate { feature, threshold }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> bool {
        x[self.feature] < self.threshold
    }

    /// Values of `x[feature]` for which the predicate has truth value `holds`.
    pub fn interval(&self, holds: bool) -> Interval {
        if holds {
            Interval::below(self.threshold)
        } else {
            Interval::at_or_above(self.threshold)
        }
    }
}

/// Recursive tree form, used to build trees and for serialization.
#[derive(Clone, Debug, PartialEq)]
pub enum TreeNode {
    Internal {
        predicate: Predicate,
        true_child: Box<TreeNode>,
        false_child: Box<TreeNode>,
    },
    Leaf {
        prediction: f64,
    },
}

impl TreeNode {
    pub fn leaf(prediction: f64) -> Self {
        TreeNode::Leaf { prediction }
    }

    pub fn split(feature: usize, threshold: f64, true_child: TreeNode, false_child: TreeNode) -> Self {
        TreeNode::Internal {
            predicate: Predicate::new(feature, threshold),
            true_child: Box::new(true_child),
            false_child: Box::new(false_child),
        }
    }
}

/// One node of a flattened tree. Nodes are stored in preorder, so the true
/// child of the node at `i` is at `i + 1`.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Split {
        predicate: Predicate,
        false_child: usize,
    },
    Leaf(f64),
}

/// A regression tree in flat preorder layout.
///
/// Leaves are numbered left to right (true branch first); the leaves below
/// any node form a contiguous range of that numbering.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    leaf_spans: Vec<(u32, u32)>,
    leaf_nodes: Vec<usize>,
}

impl Tree {
    pub fn from_node(root: &TreeNode) -> Self {
        let mut tree = Tree {
            nodes: Vec::new(),
            leaf_spans: Vec::new(),
            leaf_nodes: Vec::new(),
        };
        tree.push(root);
        tree
    }

    fn push(&mut self, node: &TreeNode) -> usize {
        let at = self.nodes.len();
        let first_leaf = self.leaf_nodes.len() as u32;
        match node {
            TreeNode::Leaf { prediction } => {
                self.nodes.push(Node::Leaf(*prediction));
                self.leaf_spans.push((first_leaf, first_leaf + 1));
                self.leaf_nodes.push(at);
            }
            TreeNode::Internal {
                predicate,
                true_child,
                false_child,
            } => {
                self.nodes.push(Node::Split {
                    predicate: *predicate,
                    false_child: 0,
                });
                self.leaf_spans.push((first_leaf, first_leaf));
                self.push(true_child);
                let f = self.push(false_child);
                if let Node::Split { false_child, .. } = &mut self.nodes[at] {
                    *false_child = f;
                }
                self.leaf_spans[at].1 = self.leaf_nodes.len() as u32;
            }
        }
        at
    }

    pub fn to_node(&self) -> TreeNode {
        self.node_at(0)
    }

    fn node_at(&self, i: usize) -> TreeNode {
        match &self.nodes[i] {
            Node::Leaf(v) => TreeNode::leaf(*v),
            Node::Split {
                predicate,
                false_child,
            } => TreeNode::Internal {
                predicate: *predicate,
                true_child: Box::new(self.node_at(i + 1)),
                false_child: Box::new(self.node_at(*false_child)),
            },
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_nodes.len()
    }

    pub fn n_internal(&self) -> usize {
        self.nodes.len() - self.leaf_nodes.len()
    }

    /// Leaf numbers (left-to-right) under node `i`.
    pub fn leaf_span(&self, i: usize) -> std::ops::Range<usize> {
        let (a, b) = self.leaf_spans[i];
        a as usize..b as usize
    }

    pub fn leaf_value(&self, leaf: usize) -> f64 {
        match self.nodes[self.leaf_nodes[leaf]] {
            Node::Leaf(v) => v,
            Node::Split { .. } => unreachable!("leaf table points at a split"),
        }
    }

    pub fn leaf_values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_leaves()).map(|j| self.leaf_value(j))
    }

    /// Node index of the leaf reached by `x`.
    #[inline]
    pub fn leaf_node_for(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(_) => return i,
                Node::Split {
                    predicate,
                    false_child,
                } => {
                    i = if predicate.eval(x) { i + 1 } else { *false_child };
                }
            }
        }
    }

    /// Left-to-right number of the leaf reached by `x`.
    pub fn leaf_for(&self, x: &[f64]) -> usize {
        self.leaf_spans[self.leaf_node_for(x)].0 as usize
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_node_for(x)] {
            Node::Leaf(v) => v,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { false_child, .. } => 1 + go(t, i + 1).max(go(t, *false_child)),
            }
        }
        go(self, 0)
    }

    pub fn predicates(&self) -> impl Iterator<Item = &Predicate> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { predicate, .. } => Some(predicate),
            Node::Leaf(_) => None,
        })
    }
}

/// The model: `f(x) = bias + sum of the trees' leaf values along x's paths`.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeEnsemble {
    pub trees: Vec<Tree>,
    pub n_features: usize,
    pub bias: f64,
}

impl TreeEnsemble {
    pub fn new(trees: Vec<Tree>, n_features: usize, bias: f64) -> Result<Self> {
        let model = TreeEnsemble {
            trees,
            n_features,
            bias,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn from_nodes(roots: &[TreeNode], n_features: usize, bias: f64) -> Result<Self> {
        Self::new(roots.iter().map(Tree::from_node).collect(), n_features, bias)
    }

    fn validate(&self) -> Result<()> {
        if !self.bias.is_finite() {
            return Err(Error::InvalidModel("bias is not finite".into()));
        }
        for (t, tree) in self.trees.iter().enumerate() {
            for node in tree.nodes() {
                match node {
                    Node::Split { predicate, .. } => {
                        if predicate.feature >= self.n_features {
                            return Err(Error::InvalidModel(format!(
                                "tree {t} splits on feature {} but the model has {} features",
                                predicate.feature, self.n_features
                            )));
                        }
                        if !predicate.threshold.is_finite() {
                            return Err(Error::InvalidModel(format!(
                                "tree {t} has a non-finite threshold"
                            )));
                        }
                    }
                    Node::Leaf(v) if !v.is_finite() => {
                        return Err(Error::InvalidModel(format!("tree {t} has a non-finite leaf")));
                    }
                    Node::Leaf(_) => {}
                }
            }
        }
        Ok(())
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `f(x)` without the length check.
    #[inline]
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.trees.iter().fold(self.bias, |acc, t| acc + t.predict(x))
    }

    pub fn predict_margin(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.margin(x))
    }

    /// `+1` iff the margin is strictly positive.
    pub fn predict_label(&self, x: &[f64]) -> Result<i8> {
        Ok(label_of(self.predict_margin(x)?))
    }

    /// Sorted distinct thresholds of the predicates on each feature.
    pub fn collect_thresholds(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); self.n_features];
        for tree in &self.trees {
            for p in tree.predicates() {
                out[p.feature].push(p.threshold);
            }
        }
        for t in &mut out {
            t.sort_by(f64::total_cmp);
            t.dedup();
        }
        out
    }

    pub fn n_internal(&self) -> usize {
        self.trees.iter().map(Tree::n_internal).sum()
    }

    pub fn n_leaves(&self) -> usize {
        self.trees.iter().map(Tree::n_leaves).sum()
    }
}

pub fn label_of(margin: f64) -> i8 {
    if margin > 0.0 {
        1
    } else {
        -1
    }
}
