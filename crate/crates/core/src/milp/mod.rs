//! Reduction of minimal-perturbation evasion to a mixed integer linear
//! program.
//!
//! Variables:
//! * `p_{k}_{r}`: binary, truth of `x'_k < t_r` for the `r`-th smallest
//!   distinct threshold on feature `k`. Identical predicates share a variable.
//! * `l_{t}_{j}`: continuous in `[0, 1]`, leaf `j` (left to right) of tree `t`
//!   is active. Integral in every feasible solution.
//! * `b`: the L-infinity bound, only for that metric.
//!
//! Constraints are the per-feature consistency chains, per-tree leaf
//! consistency (an exclusion equality, equalities at the root, one-sided
//! implications below), and the mislabel constraint on the weighted leaf sum.
//! No big-M constants are involved.

mod lp;
mod weights;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distance::{DistanceSpec, Metric};
use crate::ensemble::{Node, TreeEnsemble};
use crate::error::{Error, Result};
use crate::interval::{cell, cell_of};

pub use lp::{export_lp, write_lp};
use weights::weights_from_costs;
pub use weights::{objective_weights, ObjectiveWeights};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    BinaryP,
    ContinuousL,
    ContinuousB,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MilpVar {
    pub name: String,
    pub kind: VarKind,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn holds(self, lhs: f64, rhs: f64, tol: f64) -> bool {
        match self {
            Relation::Le => lhs <= rhs + tol,
            Relation::Eq => (lhs - rhs).abs() <= tol,
            Relation::Ge => lhs >= rhs - tol,
        }
    }

    pub(crate) fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintFamily {
    PredicateConsistency,
    LeafExclusion,
    LeafRoot,
    LeafInternal,
    Mislabel,
    DistanceBound,
    Extra,
}

impl ConstraintFamily {
    fn prefix(self) -> &'static str {
        match self {
            ConstraintFamily::PredicateConsistency => "chain",
            ConstraintFamily::LeafExclusion => "excl",
            ConstraintFamily::LeafRoot => "root",
            ConstraintFamily::LeafInternal => "node",
            ConstraintFamily::Mislabel => "mislabel",
            ConstraintFamily::DistanceBound => "dist",
            ConstraintFamily::Extra => "extra",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub terms: Vec<(f64, VarId)>,
    pub relation: Relation,
    pub rhs: f64,
    pub family: ConstraintFamily,
}

impl LinearConstraint {
    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|(c, v)| c * values[v.0]).sum()
    }

    pub fn is_satisfied(&self, values: &[f64], tol: f64) -> bool {
        self.relation.holds(self.lhs(values), self.rhs, tol)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearObjective {
    pub terms: Vec<(f64, VarId)>,
    pub constant: f64,
}

/// Which side of zero the evading margin must reach.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    /// `f(x) < 0`, so `f(x') >= 0` is required.
    NonNegative,
    /// `f(x) > 0`, so `f(x') <= 0` is required.
    NonPositive,
}

impl Target {
    pub fn for_margin(margin: f64) -> Result<Self> {
        if margin < 0.0 {
            Ok(Target::NonNegative)
        } else if margin > 0.0 {
            Ok(Target::NonPositive)
        } else {
            Err(Error::ZeroMargin)
        }
    }

    /// `+1` when the margin has to go up.
    pub fn sign(self) -> f64 {
        match self {
            Target::NonNegative => 1.0,
            Target::NonPositive => -1.0,
        }
    }

    pub fn is_met(self, margin: f64) -> bool {
        self.sign() * margin >= 0.0
    }
}

/// Encoding of one feature axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoding {
    pub thresholds: Vec<f64>,
    /// One variable per threshold, ascending.
    pub p_vars: Vec<VarId>,
    /// Cell of the original value.
    pub x_cell: usize,
    /// Objective-unit cost of each cell (rho = 1 for L-infinity), scaled by
    /// the feature's L0 weight when present.
    pub interval_costs: Vec<f64>,
}

impl FeatureEncoding {
    pub fn n_cells(&self) -> usize {
        self.thresholds.len() + 1
    }

    /// Index of the `p` variable for `x_k < threshold`.
    pub fn rank_of(&self, threshold: f64) -> Option<usize> {
        self.thresholds
            .binary_search_by(|t| t.total_cmp(&threshold))
            .ok()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeEncoding {
    pub leaf_vars: Vec<VarId>,
}

/// A reference to the predicate variable of `x_feature < threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredicateRef {
    pub feature: usize,
    pub threshold: f64,
}

/// User constraint over predicate variables, e.g. one-hot feature groups.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintGroup {
    pub terms: Vec<(f64, PredicateRef)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl ConstraintGroup {
    /// Exactly one of `features` is non-zero, with the predicate of each
    /// binary feature being `x < threshold`: `sum p = K - 1`.
    pub fn mutually_exclusive(features: &[usize], threshold: f64) -> Self {
        ConstraintGroup {
            terms: features
                .iter()
                .map(|&feature| (1.0, PredicateRef { feature, threshold }))
                .collect(),
            relation: Relation::Eq,
            rhs: features.len() as f64 - 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MilpProgram {
    pub vars: Vec<MilpVar>,
    pub constraints: Vec<LinearConstraint>,
    pub objective: LinearObjective,
    /// One entry per model feature, including features without thresholds.
    pub features: Vec<FeatureEncoding>,
    pub trees: Vec<TreeEncoding>,
    pub bound_var: Option<VarId>,
    pub target: Target,
    pub distance: DistanceSpec,
    /// The leaf values, bias, and original point the program was built for.
    pub bias: f64,
    pub x: Vec<f64>,
    pub original_margin: f64,
}

pub fn build_program(
    model: &TreeEnsemble,
    x: &[f64],
    distance: &DistanceSpec,
    extra: &[ConstraintGroup],
) -> Result<MilpProgram> {
    model.check_dim(x)?;
    distance.validate(model.n_features)?;
    if model.trees.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let original_margin = model.margin(x);
    let target = Target::for_margin(original_margin)?;
    let rho = distance.metric.rho();

    let mut vars = Vec::new();
    let mut new_var = |name: String, kind: VarKind, lo: f64, hi: f64| {
        vars.push(MilpVar { name, kind, lo, hi });
        VarId(vars.len() - 1)
    };

    let mut features = Vec::with_capacity(model.n_features);
    for (k, thresholds) in model.collect_thresholds().into_iter().enumerate() {
        let p_vars = (0..thresholds.len())
            .map(|r| new_var(format!("p_{k}_{r}"), VarKind::BinaryP, 0.0, 1.0))
            .collect();
        let mut interval_costs =
            objective_weights(x[k], &thresholds, rho, distance.epsilon).interval_costs;
        if let (Metric::L0, Some(alpha)) = (distance.metric, &distance.l0_weights) {
            interval_costs.iter_mut().for_each(|c| *c *= alpha[k]);
        }
        features.push(FeatureEncoding {
            x_cell: cell_of(&thresholds, x[k]),
            thresholds,
            p_vars,
            interval_costs,
        });
    }
    let trees: Vec<TreeEncoding> = model
        .trees
        .iter()
        .enumerate()
        .map(|(t, tree)| TreeEncoding {
            leaf_vars: (0..tree.n_leaves())
                .map(|j| new_var(format!("l_{t}_{j}"), VarKind::ContinuousL, 0.0, 1.0))
                .collect(),
        })
        .collect();
    let bound_var = (distance.metric == Metric::LInf)
        .then(|| new_var("b".into(), VarKind::ContinuousB, 0.0, f64::INFINITY));

    let mut constraints = Vec::new();
    let mut add = |terms: Vec<(f64, VarId)>, relation, rhs, family| {
        constraints.push(LinearConstraint {
            terms,
            relation,
            rhs,
            family,
        })
    };

    for fe in &features {
        for pair in fe.p_vars.windows(2) {
            add(
                vec![(1.0, pair[0]), (-1.0, pair[1])],
                Relation::Le,
                0.0,
                ConstraintFamily::PredicateConsistency,
            );
        }
    }

    for (tree, enc) in model.trees.iter().zip(&trees) {
        let sum = |span: std::ops::Range<usize>, sign: f64| -> Vec<(f64, VarId)> {
            span.map(|j| (sign, enc.leaf_vars[j])).collect()
        };
        add(
            sum(0..tree.n_leaves(), 1.0),
            Relation::Eq,
            1.0,
            ConstraintFamily::LeafExclusion,
        );
        for (i, node) in tree.nodes().iter().enumerate() {
            let Node::Split {
                predicate,
                false_child,
            } = node
            else {
                continue;
            };
            let fe = &features[predicate.feature];
            let p = fe.p_vars[fe.rank_of(predicate.threshold).expect("threshold was collected")];
            // p = sum(l_true) and p = 1 - sum(l_false) at the root,
            // sum(l_true) <= p <= 1 - sum(l_false) elsewhere.
            let mut lower = vec![(1.0, p)];
            lower.extend(sum(tree.leaf_span(i + 1), -1.0));
            let mut upper = vec![(1.0, p)];
            upper.extend(sum(tree.leaf_span(*false_child), 1.0));
            if i == 0 {
                add(lower, Relation::Eq, 0.0, ConstraintFamily::LeafRoot);
                add(upper, Relation::Eq, 1.0, ConstraintFamily::LeafRoot);
            } else {
                add(lower, Relation::Ge, 0.0, ConstraintFamily::LeafInternal);
                add(upper, Relation::Le, 1.0, ConstraintFamily::LeafInternal);
            }
        }
    }

    let mislabel_terms: Vec<(f64, VarId)> = model
        .trees
        .iter()
        .zip(&trees)
        .flat_map(|(tree, enc)| tree.leaf_values().zip(enc.leaf_vars.iter().copied()))
        .filter(|(v, _)| *v != 0.0)
        .collect();
    let relation = match target {
        Target::NonNegative => Relation::Ge,
        Target::NonPositive => Relation::Le,
    };
    add(
        mislabel_terms,
        relation,
        0.0 - model.bias,
        ConstraintFamily::Mislabel,
    );

    let mut objective = LinearObjective::default();
    for fe in &features {
        let w = weights_from_costs(&fe.interval_costs);
        let terms: Vec<(f64, VarId)> = fe
            .p_vars
            .iter()
            .enumerate()
            .filter(|(m, _)| w[m + 1] != 0.0)
            .map(|(m, &p)| (w[m + 1], p))
            .collect();
        let constant = w[w.len() - 1];
        match bound_var {
            Some(b) => {
                let mut terms = terms;
                terms.push((-1.0, b));
                add(terms, Relation::Le, -constant, ConstraintFamily::DistanceBound);
            }
            None => {
                objective.terms.extend(terms);
                objective.constant += constant;
            }
        }
    }
    if let Some(b) = bound_var {
        objective.terms.push((1.0, b));
    }

    for group in extra {
        let mut terms = Vec::with_capacity(group.terms.len());
        for (c, pref) in &group.terms {
            let fe = features.get(pref.feature).ok_or_else(|| {
                Error::Config(format!("constraint references unknown feature {}", pref.feature))
            })?;
            let r = fe.rank_of(pref.threshold).ok_or_else(|| {
                Error::Config(format!(
                    "no predicate x{} < {} in the model",
                    pref.feature, pref.threshold
                ))
            })?;
            terms.push((*c, fe.p_vars[r]));
        }
        add(terms, group.relation, group.rhs, ConstraintFamily::Extra);
    }

    Ok(MilpProgram {
        vars,
        constraints,
        objective,
        features,
        trees,
        bound_var,
        target,
        distance: distance.clone(),
        bias: model.bias,
        x: x.to_vec(),
        original_margin,
    })
}

impl MilpProgram {
    pub fn n_p_vars(&self) -> usize {
        self.features.iter().map(|f| f.p_vars.len()).sum()
    }

    pub fn n_l_vars(&self) -> usize {
        self.trees.iter().map(|t| t.leaf_vars.len()).sum()
    }

    pub fn var(&self, id: VarId) -> &MilpVar {
        &self.vars[id.0]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.constant
            + self
                .objective
                .terms
                .iter()
                .map(|(c, v)| c * values[v.0])
                .sum::<f64>()
    }

    pub fn is_feasible(&self, values: &[f64], tol: f64) -> bool {
        self.vars.iter().zip(values).all(|(v, &val)| {
            val >= v.lo - tol
                && val <= v.hi + tol
                && (v.kind != VarKind::BinaryP || val.abs() <= tol || (val - 1.0).abs() <= tol)
        }) && self.constraints.iter().all(|c| c.is_satisfied(values, tol))
    }

    /// Cell index of each feature under a valuation of the `p` variables,
    /// given in program order (features ascending, thresholds ascending).
    pub fn cells_of_valuation(&self, p_values: &[f64]) -> Result<Vec<usize>> {
        if p_values.len() != self.n_p_vars() {
            return Err(Error::DimensionMismatch {
                expected: self.n_p_vars(),
                got: p_values.len(),
            });
        }
        let mut offset = 0;
        let mut cells = Vec::with_capacity(self.features.len());
        for (k, fe) in self.features.iter().enumerate() {
            let bits = &p_values[offset..offset + fe.p_vars.len()];
            offset += fe.p_vars.len();
            let zeros = bits.iter().take_while(|&&v| v < 0.5).count();
            if bits[zeros..].iter().any(|&v| v < 0.5) {
                return Err(Error::InconsistentValuation { feature: k });
            }
            cells.push(zeros);
        }
        Ok(cells)
    }

    /// The point of each chosen cell nearest to the original instance.
    pub fn decode_cells(&self, cells: &[usize]) -> Vec<f64> {
        self.features
            .iter()
            .zip(cells)
            .zip(&self.x)
            .map(|((fe, &c), &xk)| cell(&fe.thresholds, c).nearest_point(xk, self.distance.epsilon))
            .collect()
    }

    /// Objective value of a cell choice, computed from the cell costs.
    pub fn cells_cost(&self, cells: &[usize]) -> f64 {
        self.features
            .iter()
            .zip(cells)
            .fold(0.0, |acc, (fe, &c)| self.distance.combine(acc, fe.interval_costs[c]))
    }

    /// Full variable assignment for a cell choice of every feature: `p` from
    /// the cells, `l` from the leaves reached by the decoded point, `b` the
    /// largest per-feature cost.
    pub fn assignment_for_cells(&self, model: &TreeEnsemble, cells: &[usize]) -> Vec<f64> {
        let mut values = vec![0.0; self.vars.len()];
        for (fe, &c) in self.features.iter().zip(cells) {
            for (r, p) in fe.p_vars.iter().enumerate() {
                values[p.0] = if r >= c { 1.0 } else { 0.0 };
            }
        }
        let xp = self.decode_cells(cells);
        for (tree, enc) in model.trees.iter().zip(&self.trees) {
            values[enc.leaf_vars[tree.leaf_for(&xp)].0] = 1.0;
        }
        if let Some(b) = self.bound_var {
            values[b.0] = self.cells_cost(cells);
        }
        values
    }

    /// Mislabel constraint left-hand side plus bias, i.e. `f(x')` as encoded.
    pub fn encoded_margin(&self, values: &[f64]) -> f64 {
        let c = self
            .constraints
            .iter()
            .find(|c| c.family == ConstraintFamily::Mislabel)
            .expect("program has a mislabel constraint");
        c.lhs(values) + self.bias
    }

    pub fn display_constraint(&self, c: &LinearConstraint) -> String {
        format!(
            "{} {} {}",
            lp::format_terms(&c.terms, |v| &self.vars[v.0].name),
            c.relation.symbol(),
            c.rhs
        )
    }
}

/// Decodes a `p` valuation into an evading candidate: features whose cell
/// contains `x_k` keep it, the others move to the nearest cell border
/// (`hi - epsilon` for right borders).
pub fn decode_solution(prog: &MilpProgram, p_values: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != prog.features.len() {
        return Err(Error::DimensionMismatch {
            expected: prog.features.len(),
            got: x.len(),
        });
    }
    let cells = prog.cells_of_valuation(p_values)?;
    Ok(prog
        .features
        .iter()
        .zip(&cells)
        .zip(x)
        .map(|((fe, &c), &xk)| cell(&fe.thresholds, c).nearest_point(xk, prog.distance.epsilon))
        .collect())
}

impl fmt::Display for MilpProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", lp::to_lp_string(self))
    }
}
