//! Config-driven experiments: data generation, two-stage training, lambda
//! sweeps and policy comparisons with CSV/JSON outputs.

mod checkpoint;
mod config;
mod runner;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{ExperimentConfig, PolicySpec, SplitSizes, StageSurrogates, CONFIG_VERSION};
pub use runner::{
    compare_csv, compare_seeds_csv, compare_summary_csv, eval_checkpoint, generate_data, init_params, localization,
    mean_std, run_stage1, run_stage2, sweep_csv, sweep_summary_csv, CompareRow, EvalReport, Experiment, Manifest,
    SeedData, SweepRow, CODE_VERSION,
};
