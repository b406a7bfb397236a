//! Experiment configs, multi-seed runs, checkpoint storage and robustness reports.

mod config;
mod robustness;
mod run;

pub use config::{CheckpointPolicy, ExperimentConfig, FamilySource, CONFIG_VERSION};
pub use robustness::{
    evaluate_robustness, timeseries_csv, unsat_timeseries, CheckpointRef, CheckpointStore, Percentages,
    ReportCell, RobustnessReport, RunRow,
};
pub use run::{
    checkpoint_episodes, run_experiment, run_seed, ExperimentSummary, RunPaths, RunSummary, SeedOutcome,
};
