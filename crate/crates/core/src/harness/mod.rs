//! End-to-end pipeline commands over an output directory.
//!
//! ```text
//! <output>/episodes/   ep_NNNNN.csv, manifest.csv, recordings.csv
//! <output>/styles/     profiles.json, statistics.json, histograms.csv, dataset_<style>.csv
//! <models>/            regressor_<style>.aac, idm_<style>.kv, agent_<style>.aac
//! <output>/reports/    training logs, evaluation metrics, tables, rollouts/
//! ```
//!
//! Every file starts with (or, for JSON, carries) the config hash and seed.

mod commands;
mod config;
mod table;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use commands::{
    cmd_calibrate_idm, cmd_classify, cmd_evaluate, cmd_ingest, cmd_report, cmd_train_agent, cmd_train_regressor,
    CommandOutput, Stage,
};
pub use config::{
    AgentSection, IdmSection, IngestSection, Paths, RegressorSection, RunConfig, StyleSelection, OUTPUT_DIR_ENV,
};
pub use table::TextTable;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("no input: {0}")]
    NoInput(String),
    #[error("episode store at {0} is empty")]
    EmptyStore(PathBuf),
    #[error("missing upstream artifact from `{stage}`: {path}")]
    MissingUpstream { stage: Stage, path: PathBuf },
    #[error("nothing to report: no trained or calibrated predictor found")]
    NothingToReport,
    #[error("{style}: need {need} labelled episodes, found {have}")]
    NotEnoughEpisodes { style: String, need: usize, have: usize },
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Stage(String),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn data(path: &Path, message: impl ToString) -> Self {
        Self::Data {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }

    /// Process exit status: 2 usage/config, 3 data, 4 missing upstream.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::MissingUpstream { .. } => 4,
            _ => 3,
        }
    }
}
