//! Experiment harness: configuration, seeded training runs, CSV metrics
//! and summaries.

mod config;
mod oracle;
mod report;
mod run;

pub use config::{parse_config, Algorithm, ExperimentConfig, Hyperparameters, RewardMode};
pub use oracle::chain_oracle_report;
pub use report::{
    aggregate, format_summaries, parse_csv, read_sidecar, summarize, time_ratios, write_aggregate, write_csv, AggregateRow,
    Summary, TimeRatio, CSV_HEADER,
};
pub use run::{
    run_experiment, run_seed, train_seed, write_outputs, EpisodeRecord, ExperimentOutput, RunTiming, TrainedLearner,
};
