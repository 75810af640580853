//! Reduction from 3-SAT to tree-ensemble feasibility.
//!
//! Each clause becomes one tree whose only negative leaf (valued minus the
//! number of clauses) sits on the unique path falsifying the clause; every
//! other leaf is worth 1. Variable `v` (1-based, DIMACS) is feature `v - 1`
//! and is true iff `x[v-1] >= 0.5`. Hence `f(x) > 0` for some `x` exactly when
//! the formula is satisfiable.

use std::fs;
use std::path::Path;

use rand::Rng;

use crate::ensemble::{TreeEnsemble, TreeNode};
use crate::error::{Error, Result};

/// Split threshold encoding variable truth.
pub const TRUTH_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnfFormula {
    pub n_vars: usize,
    pub clauses: Vec<[i32; 3]>,
}

impl CnfFormula {
    pub fn new(n_vars: usize, clauses: Vec<[i32; 3]>) -> Result<Self> {
        for c in &clauses {
            for &lit in c {
                if lit == 0 || lit.unsigned_abs() as usize > n_vars {
                    return Err(Error::Config(format!(
                        "literal {lit} out of range for {n_vars} variables"
                    )));
                }
            }
        }
        Ok(CnfFormula { n_vars, clauses })
    }

    /// Truth value of the formula under `assignment[v - 1]`.
    pub fn eval(&self, assignment: &[bool]) -> bool {
        self.clauses
            .iter()
            .all(|c| c.iter().any(|&l| lit_value(l, assignment)))
    }

    /// Encodes an assignment as an instance (`1.0` for true, `0.0` for false).
    pub fn encode(assignment: &[bool]) -> Vec<f64> {
        assignment.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    pub fn decode(x: &[f64]) -> Vec<bool> {
        x.iter().map(|&v| v >= TRUTH_THRESHOLD).collect()
    }
}

fn lit_value(lit: i32, assignment: &[bool]) -> bool {
    let v = assignment[lit.unsigned_abs() as usize - 1];
    if lit > 0 {
        v
    } else {
        !v
    }
}

/// One tree per clause, one predicate per level.
pub fn reduce_to_ensemble(formula: &CnfFormula) -> TreeEnsemble {
    let penalty = -(formula.clauses.len() as f64);
    let roots: Vec<TreeNode> = formula
        .clauses
        .iter()
        .map(|c| clause_tree(c, &mut Vec::new(), penalty))
        .collect();
    TreeEnsemble::from_nodes(&roots, formula.n_vars, 0.0).expect("literals are in range")
}

/// `path` holds the literals already known false on the current branch.
fn clause_tree(rest: &[i32], path: &mut Vec<i32>, penalty: f64) -> TreeNode {
    let Some((&lit, tail)) = rest.split_first() else {
        return TreeNode::leaf(penalty);
    };
    if path.contains(&lit) {
        // repeated literal: already false here
        return clause_tree(tail, path, penalty);
    }
    if path.contains(&-lit) {
        // complement is false, so this literal is true
        return TreeNode::leaf(1.0);
    }
    let feature = lit.unsigned_abs() as usize - 1;
    path.push(lit);
    let falsified = clause_tree(tail, path, penalty);
    path.pop();
    let satisfied = TreeNode::leaf(1.0);
    // `x < 0.5` holds iff the variable is false.
    if lit > 0 {
        TreeNode::split(feature, TRUTH_THRESHOLD, falsified, satisfied)
    } else {
        TreeNode::split(feature, TRUTH_THRESHOLD, satisfied, falsified)
    }
}

pub fn load_dimacs(path: impl AsRef<Path>) -> Result<CnfFormula> {
    let path = path.as_ref();
    parse_dimacs(&fs::read_to_string(path)?, path)
}

/// Parses DIMACS CNF restricted to clauses of exactly three literals.
pub fn parse_dimacs(text: &str, path: &Path) -> Result<CnfFormula> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<i32> = Vec::new();
    let mut last_line = 0;

    'lines: for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        last_line = lineno;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if header.is_some() {
                return Err(perr(lineno, "duplicate problem line".into()));
            }
            match parts.as_slice() {
                ["p", "cnf", v, c] => {
                    let v = v.parse().map_err(|_| perr(lineno, format!("bad variable count `{v}`")))?;
                    let c = c.parse().map_err(|_| perr(lineno, format!("bad clause count `{c}`")))?;
                    header = Some((v, c));
                }
                _ => return Err(perr(lineno, format!("malformed problem line `{line}`"))),
            }
            continue;
        }
        let Some((n_vars, _)) = header else {
            return Err(perr(lineno, "clause before `p cnf` line".into()));
        };
        for tok in line.split_whitespace() {
            if tok == "%" {
                break 'lines;
            }
            let lit: i32 = tok
                .parse()
                .map_err(|_| perr(lineno, format!("bad literal `{tok}`")))?;
            if lit == 0 {
                if current.len() != 3 {
                    return Err(perr(
                        lineno,
                        format!("clause has {} literals, only 3-SAT is supported", current.len()),
                    ));
                }
                clauses.push([current[0], current[1], current[2]]);
                current.clear();
            } else {
                if lit.unsigned_abs() as usize > n_vars {
                    return Err(perr(lineno, format!("literal {lit} exceeds {n_vars} variables")));
                }
                current.push(lit);
            }
        }
    }
    let Some((n_vars, n_clauses)) = header else {
        return Err(perr(last_line, "missing `p cnf` line".into()));
    };
    if !current.is_empty() {
        return Err(perr(last_line, "last clause is not terminated by 0".into()));
    }
    if clauses.len() != n_clauses {
        return Err(perr(
            last_line,
            format!("header declares {n_clauses} clauses, found {}", clauses.len()),
        ));
    }
    CnfFormula::new(n_vars, clauses)
}

pub fn to_dimacs(formula: &CnfFormula) -> String {
    let mut out = format!("p cnf {} {}\n", formula.n_vars, formula.clauses.len());
    for c in &formula.clauses {
        out.push_str(&format!("{} {} {} 0\n", c[0], c[1], c[2]));
    }
    out
}

/// Uniform random 3-SAT with three distinct variables per clause (fewer if
/// `n_vars < 3`).
pub fn random_3sat<R: Rng>(rng: &mut R, n_vars: usize, n_clauses: usize) -> CnfFormula {
    assert!(n_vars >= 1);
    let clauses = (0..n_clauses)
        .map(|_| {
            let mut vars: Vec<i32> = Vec::with_capacity(3);
            while vars.len() < 3 {
                let v = rng.gen_range(1..=n_vars as i32);
                if !vars.contains(&v) || n_vars < 3 {
                    vars.push(v);
                }
            }
            let mut c = [0; 3];
            for (slot, v) in c.iter_mut().zip(vars) {
                *slot = if rng.gen_bool(0.5) { v } else { -v };
            }
            c
        })
        .collect();
    CnfFormula { n_vars, clauses }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Node;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn parse(text: &str) -> Result<CnfFormula> {
        parse_dimacs(text, Path::new("f.cnf"))
    }

    #[test]
    fn dimacs_basic() {
        let f = parse("c hi\np cnf 3 1\n1 -2 3 0\n").unwrap();
        assert_eq!(f.n_vars, 3);
        assert_eq!(f.clauses, vec![[1, -2, 3]]);
        let empty = parse("p cnf 4 0\n").unwrap();
        assert!(empty.clauses.is_empty());
        // clauses may span lines; SATLIB trailer
        let f = parse("p cnf 3 2\n1 2\n3 0 -1 -2 -3 0\n%\n0\n").unwrap();
        assert_eq!(f.clauses.len(), 2);
    }

    #[test]
    fn dimacs_errors() {
        assert!(parse("p cnf 3 1\n1 -2 0\n").is_err());
        assert!(parse("p cnf x 1\n1 2 3 0\n").is_err());
        assert!(parse("p dnf 3 1\n1 2 3 0\n").is_err());
        assert!(parse("1 2 3 0\n").is_err());
        assert!(parse("p cnf 2 1\n1 2 3 0\n").is_err());
        assert!(parse("p cnf 3 2\n1 2 3 0\n").is_err());
        assert!(parse("p cnf 3 1\n1 2 3\n").is_err());
    }

    #[test]
    fn clause_tree_shape() {
        // x0 or not x1 or x2 in a 13-clause formula
        let mut clauses = vec![[1, -2, 3]];
        clauses.extend(std::iter::repeat_n([1, 2, 3], 12));
        let f = CnfFormula::new(3, clauses).unwrap();
        let m = reduce_to_ensemble(&f);
        assert_eq!(m.trees.len(), 13);
        assert_eq!(m.n_features, 3);
        for t in &m.trees {
            assert_eq!(t.n_internal(), 3);
            assert_eq!(t.n_leaves(), 4);
            assert_eq!(t.depth(), 3);
            let leaves: Vec<f64> = t.leaf_values().collect();
            assert_eq!(leaves.iter().filter(|&&v| v == -13.0).count(), 1);
            assert_eq!(leaves.iter().filter(|&&v| v == 1.0).count(), 3);
            for n in t.nodes() {
                if let Node::Split { predicate, .. } = n {
                    assert_eq!(predicate.threshold, 0.5);
                }
            }
        }
        // the falsifying assignment x0=F, x1=T, x2=F hits the penalty leaf
        assert_eq!(m.trees[0].predict(&[0.0, 1.0, 0.0]), -13.0);
        assert_eq!(m.trees[0].predict(&[0.0, 0.0, 0.0]), 1.0);
    }

    #[test]
    fn degenerate_clauses() {
        // repeated literal gives a two-level tree
        let f = CnfFormula::new(2, vec![[1, 1, 2]]).unwrap();
        let t = &reduce_to_ensemble(&f).trees[0];
        assert_eq!(t.n_internal(), 2);
        assert_eq!(t.predict(&[0.0, 0.0]), -1.0);
        // tautology has no falsifying path
        let f = CnfFormula::new(2, vec![[1, -1, 2]]).unwrap();
        let t = &reduce_to_ensemble(&f).trees[0];
        assert!(t.leaf_values().all(|v| v == 1.0));
    }

    #[test]
    fn margins_match_formula_semantics() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(3..=8);
            let m_clauses = rng.gen_range(1..=20);
            let f = random_3sat(&mut rng, n, m_clauses);
            let m = reduce_to_ensemble(&f);
            for bits in 0..(1u32 << n) {
                let a: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
                let margin = m.margin(&CnfFormula::encode(&a));
                if f.eval(&a) {
                    assert_eq!(margin, f.clauses.len() as f64);
                } else {
                    assert!(margin <= -1.0);
                }
            }
        }
    }

    #[test]
    fn decode_matches_the_split_side() {
        let f = CnfFormula::new(2, vec![[1, 1, -2]]).unwrap();
        let m = reduce_to_ensemble(&f);
        for x in [[0.5, 0.7], [0.49, 0.2], [0.2, 0.5], [0.0, 0.49]] {
            assert_eq!(m.margin(&x) > 0.0, f.eval(&CnfFormula::decode(&x)), "{x:?}");
        }
    }

    #[test]
    fn dimacs_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_3sat(&mut rng, 10, 25);
        assert_eq!(parse(&to_dimacs(&f)).unwrap(), f);
    }
}
