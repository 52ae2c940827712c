//! Splitting, class balancing, metrics and the ablation grid.

mod ablation;
mod config;
mod metrics;
mod split;

use std::path::PathBuf;

use thiserror::Error;

use crate::embed::EmbedError;
use crate::fuzzy::FuzzyError;
use crate::kb::KbError;
use crate::rules::RuleError;

pub use ablation::{
    attach_grounding, induce_params, load_dataset, load_handcrafted, partition, run_ablation, run_ablation_on, LoadedDataset,
    MetricsReport, Partition, ReportRow,
};
pub use config::{AblationConfig, AblationVariant, DatasetConfig, ExperimentConfig, InduceConfig, SplitConfig, PROFILES};
pub use metrics::{metrics, Confusion, Metrics};
pub use split::{split, undersample, validate_ratios};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{preds} predictions for {labels} labels")]
    LengthMismatch { preds: usize, labels: usize },
    #[error("dataset has {0} instances; at least 3 are needed to split")]
    TooSmall(usize),
    #[error("undersampling needs at least two classes")]
    SingleClass,
    #[error("configuration: {0}")]
    Config(String),
    #[error("cannot read `{path}`: {source}")]
    Open { path: PathBuf, source: std::io::Error },
    #[error("a hand-crafted variant was requested but `ablation.handcrafted_rules` is not set")]
    MissingHandcrafted,
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
