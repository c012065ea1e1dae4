//! Prequential scoring, metric records, experiment configuration and the
//! seed-sweep driver.

mod config;
mod experiment;
mod prequential;
mod record;

pub use config::{parse_config_text, ConfigError, ExperimentConfig, Scenario, ScenarioFlags};
pub use experiment::{
    aggregate, run_experiment, run_file_name, run_seeds, seeds, write_aggregate, AggregateRow,
    ExperimentError, ExperimentReport, ExperimentSummary, Stat,
};
pub use prequential::{f1_score, ClassCounts, F1Mode, Prequential};
pub use record::{write_records, MetricsRecord, RECORD_HEADER};
