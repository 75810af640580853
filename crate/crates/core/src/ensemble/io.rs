use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Predicate, Tree, TreeEnsemble, TreeNode};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelFormat {
    /// XGBoost text dump (`dump_model` output without statistics is fine).
    XgboostDump,
    /// `{n_features, bias, trees: [node...]}`.
    NativeJson,
}

impl FromStr for ModelFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xgboost" | "xgboost_dump" | "dump" => Ok(ModelFormat::XgboostDump),
            "json" | "native_json" => Ok(ModelFormat::NativeJson),
            _ => Err(Error::Config(format!("unknown model format `{s}`"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NodeRepr {
    Internal {
        feature: usize,
        threshold: f64,
        #[serde(rename = "true")]
        true_child: Box<NodeRepr>,
        #[serde(rename = "false")]
        false_child: Box<NodeRepr>,
    },
    Leaf {
        leaf: f64,
    },
}

#[derive(Serialize, Deserialize)]
struct EnsembleRepr {
    n_features: usize,
    #[serde(default)]
    bias: f64,
    trees: Vec<NodeRepr>,
}

impl From<&TreeNode> for NodeRepr {
    fn from(node: &TreeNode) -> Self {
        match node {
            TreeNode::Leaf { prediction } => NodeRepr::Leaf { leaf: *prediction },
            TreeNode::Internal {
                predicate,
                true_child,
                false_child,
            } => NodeRepr::Internal {
                feature: predicate.feature,
                threshold: predicate.threshold,
                true_child: Box::new(true_child.as_ref().into()),
                false_child: Box::new(false_child.as_ref().into()),
            },
        }
    }
}

impl From<NodeRepr> for TreeNode {
    fn from(node: NodeRepr) -> Self {
        match node {
            NodeRepr::Leaf { leaf } => TreeNode::leaf(leaf),
            NodeRepr::Internal {
                feature,
                threshold,
                true_child,
                false_child,
            } => TreeNode::split(feature, threshold, (*true_child).into(), (*false_child).into()),
        }
    }
}

impl TreeEnsemble {
    pub fn to_json(&self) -> Result<String> {
        let repr = EnsembleRepr {
            n_features: self.n_features,
            bias: self.bias,
            trees: self.trees.iter().map(|t| NodeRepr::from(&t.to_node())).collect(),
        };
        Ok(serde_json::to_string(&repr)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: EnsembleRepr = serde_json::from_str(text)?;
        let roots: Vec<TreeNode> = repr.trees.into_iter().map(TreeNode::from).collect();
        TreeEnsemble::from_nodes(&roots, repr.n_features, repr.bias)
    }
}

pub fn save_model(model: &TreeEnsemble, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model.to_json()?)?;
    Ok(())
}

/// Loads a model. XGBoost dumps get `n_features = 1 + max feature index`
/// and a zero bias; use [`load_xgboost_dump`] to set either.
pub fn load_model(path: impl AsRef<Path>, format: ModelFormat) -> Result<TreeEnsemble> {
    let path = path.as_ref();
    match format {
        ModelFormat::NativeJson => TreeEnsemble::from_json(&fs::read_to_string(path)?),
        ModelFormat::XgboostDump => load_xgboost_dump(path, None, 0.0),
    }
}

pub fn load_xgboost_dump(
    path: impl AsRef<Path>,
    n_features: Option<usize>,
    bias: f64,
) -> Result<TreeEnsemble> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_xgboost_dump(&text, path, n_features, bias)
}

enum DumpNode {
    Split {
        predicate: Predicate,
        yes: usize,
        no: usize,
        line: usize,
    },
    Leaf(f64),
}

/// Parses the text dump format:
///
/// ```text
/// booster[0]:
/// 0:[f12<0.5] yes=1,no=2,missing=1
///     1:leaf=0.3
///     2:leaf=-0.1
/// ```
///
/// `missing=` and statistics fields are ignored. Anything other than a
/// `f<index><threshold` split is rejected.
pub fn parse_xgboost_dump(
    text: &str,
    path: &Path,
    n_features: Option<usize>,
    bias: f64,
) -> Result<TreeEnsemble> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut boosters: Vec<(usize, HashMap<usize, DumpNode>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with("booster[") {
            boosters.push((lineno, HashMap::new()));
            continue;
        }
        if boosters.is_empty() {
            boosters.push((lineno, HashMap::new()));
        }
        let (id, rest) = line
            .split_once(':')
            .ok_or_else(|| perr(lineno, format!("expected `id:...`, got `{line}`")))?;
        let id: usize = id
            .trim()
            .parse()
            .map_err(|_| perr(lineno, format!("bad node id `{id}`")))?;
        let node = if let Some(v) = rest.strip_prefix("leaf=") {
            let v = v.split(',').next().unwrap_or_default();
            DumpNode::Leaf(
                v.parse()
                    .map_err(|_| perr(lineno, format!("bad leaf value `{v}`")))?,
            )
        } else if let Some(body) = rest.strip_prefix('[') {
            let (cond, fields) = body
                .split_once(']')
                .ok_or_else(|| perr(lineno, "unterminated split condition".into()))?;
            let predicate = parse_condition(cond).ok_or_else(|| Error::UnsupportedPredicate {
                path: path.to_path_buf(),
                line: lineno,
                text: cond.to_string(),
            })?;
            let mut yes = None;
            let mut no = None;
            for kv in fields.trim().split(',') {
                match kv.split_once('=') {
                    Some(("yes", v)) => yes = v.parse().ok(),
                    Some(("no", v)) => no = v.parse().ok(),
                    _ => {}
                }
            }
            match (yes, no) {
                (Some(yes), Some(no)) => DumpNode::Split {
                    predicate,
                    yes,
                    no,
                    line: lineno,
                },
                _ => return Err(perr(lineno, "split without yes=/no= children".into())),
            }
        } else {
            return Err(perr(lineno, format!("unrecognized node `{rest}`")));
        };
        let nodes = &mut boosters.last_mut().unwrap().1;
        if nodes.insert(id, node).is_some() {
            return Err(perr(lineno, format!("duplicate node id {id}")));
        }
    }

    let mut roots = Vec::with_capacity(boosters.len());
    for (header_line, nodes) in &boosters {
        roots.push(assemble(nodes, 0, 0, *header_line, path)?);
    }
    let n_features = match n_features {
        Some(n) => n,
        None => roots
            .iter()
            .map(|r| max_feature(r).map_or(0, |f| f + 1))
            .max()
            .unwrap_or(0),
    };
    TreeEnsemble::new(roots.iter().map(Tree::from_node).collect(), n_features, bias)
}

fn parse_condition(cond: &str) -> Option<Predicate> {
    let (lhs, rhs) = cond.split_once('<')?;
    let idx = lhs.trim().strip_prefix('f')?;
    if idx.is_empty() || !idx.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let threshold: f64 = rhs.trim().parse().ok()?;
    if !threshold.is_finite() {
        return None;
    }
    Some(Predicate::new(idx.parse().ok()?, threshold))
}

fn assemble(
    nodes: &HashMap<usize, DumpNode>,
    id: usize,
    depth: usize,
    line: usize,
    path: &Path,
) -> Result<TreeNode> {
    let missing = |msg: String| Error::Parse {
        path: PathBuf::from(path),
        line,
        msg,
    };
    if depth > nodes.len() {
        return Err(missing("cycle in tree structure".into()));
    }
    match nodes.get(&id) {
        None => Err(missing(format!("node {id} is referenced but never defined"))),
        Some(DumpNode::Leaf(v)) => Ok(TreeNode::leaf(*v)),
        Some(DumpNode::Split {
            predicate,
            yes,
            no,
            line,
        }) => Ok(TreeNode::Internal {
            predicate: *predicate,
            true_child: Box::new(assemble(nodes, *yes, depth + 1, *line, path)?),
            false_child: Box::new(assemble(nodes, *no, depth + 1, *line, path)?),
        }),
    }
}

fn max_feature(node: &TreeNode) -> Option<usize> {
    match node {
        TreeNode::Leaf { .. } => None,
        TreeNode::Internal {
            predicate,
            true_child,
            false_child,
        } => [Some(predicate.feature), max_feature(true_child), max_feature(false_child)]
            .into_iter()
            .flatten()
            .max(),
    }
}
