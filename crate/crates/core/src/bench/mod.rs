//! Experiment pipeline: MNIST ingestion, evaluation sets, robustness sweeps
//! and their output files.

mod artifacts;
mod eval;
mod mnist;
mod robustness;

pub use artifacts::{
    emit_artifacts, frequency_image, image_shape, to_grey, write_outcomes_csv, write_pgm,
};
pub use eval::{build_eval_set, eval_indices};
pub use mnist::{load_mnist_subtask, mnist_paths, read_idx_images, read_idx_labels};
pub use robustness::{
    run_robustness, FeatureFrequency, InstanceOutcome, NamedModel, Quartiles, RobustnessConfig,
    RobustnessReport, RunSummary, SolverKind,
};
