//! Evasion and hardening of sum-ensembles of regression trees.
//!
//! The crate covers the whole pipeline:
//!
//! * [`ensemble`]: the model, its prediction and its file formats.
//! * [`satgen`]: 3-SAT to tree-ensemble reduction (hard feasibility instances).
//! * [`milp`]: reduction of minimal-perturbation evasion to a mixed integer
//!   linear program, with CPLEX LP export.
//! * [`exact`]: a branch-and-bound solver for that program and a brute-force
//!   cell enumeration oracle.
//! * [`symbolic`]: symbolic prediction, i.e. every margin change reachable by
//!   modifying a single feature, in `O(|f| log |f|)`.
//! * [`evade`]: coordinate-descent L0 evasion and budgeted adversarial instances.
//! * [`boost`]: logistic gradient boosting and adversarial boosting.
//! * [`bench`]: MNIST ingestion, robustness sweeps and report artifacts.

pub mod bench;
pub mod boost;
pub mod distance;
pub mod ensemble;
pub mod error;
pub mod evade;
pub mod exact;
pub mod interval;
pub mod milp;
pub mod satgen;
pub mod symbolic;

pub use distance::{DistanceSpec, Metric};
pub use ensemble::{Predicate, Tree, TreeEnsemble, TreeNode};
pub use error::{Error, Result};
pub use exact::{EvasionOutcome, SolveStatus};
pub use interval::Interval;

/// Default guard used in place of the unattainable supremum of a right-open
/// interval.
pub const DEFAULT_EPSILON: f64 = 1e-4;
