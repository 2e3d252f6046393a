//! Experiment configuration, dataset ingestion, and result bundles.
//!
//! A bundle is a directory holding one `trajectory-<run>.csv` and one
//! `marginals-<run>.csv` per configured run plus `manifest.toml`, which echoes
//! the config verbatim together with derived seeds, wall times, the library
//! version and a hash of the resolved objective.

mod compare;
mod config;
mod edgelist;
mod experiment;
mod presets;

pub use compare::{compare_runs, epochs_to_band, format_comparison, ComparisonRow, CONVERGENCE_BAND};
pub use config::{
    AlgorithmSpec, ExperimentConfig, GraphSource, InitSpec, Method, ObjectiveSpec, SamplingSpec, ScheduleSpec,
    AUTO_EXACT_LIMIT, DEFAULT_EPOCHS,
};
pub use edgelist::{load_edge_list, parse_edge_list, write_edge_list, LoadOptions, LoadStats};
pub use experiment::{
    file_stem, resolve_sampling, run_experiment, write_atomic, BuiltObjective, Experiment, ExperimentOutcome, Manifest,
    RunRecord, MANIFEST_FILE,
};
pub use presets::{preset, DatasetRow, DATASETS, PRESETS};
