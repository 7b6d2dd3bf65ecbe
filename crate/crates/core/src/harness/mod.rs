//! Experiment harness: dataset bundles on disk, split generation,
//! synthetic dataset presets, S-vs-AS experiment orchestration, and
//! report/plot emission.

pub mod dataset;
pub mod experiment;
pub mod report;
pub mod splits;
pub mod synth;

pub use dataset::{load_dataset, save_dataset, DatasetBundle, DatasetStats};
pub use experiment::{run_experiment, ExperimentConfig, GnnObjective, RunReport};
pub use report::emit_report;
pub use splits::{make_splits, SplitMasks, SplitPolicy};
