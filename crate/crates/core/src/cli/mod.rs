//! Batch front end: the identification pipeline, the band comparison, the
//! correlation study and identification with saved models.

mod args;
mod commands;
mod config;

pub use args::{run, Cli};
pub use commands::{
    cmd_compare_patterns, cmd_correlate, cmd_identify, cmd_pipeline, cmd_synth, load_dataset,
    run_pipeline, write_artifacts, CorrelationReport, Dataset, Identification, PatternRow,
    PatternTable, PipelineOutcome, PipelineReport, RunManifest, BOOST_MODEL_FILE, CORRELATION_FILE,
    CORRELATION_TEXT_FILE, PATTERNS_FILE, PATTERNS_TEXT_FILE, REPORT_FILE, REPORT_FORMAT_VERSION,
    RNN_MODEL_FILE, ROC_FILE, RUN_MANIFEST_FILE,
};
pub use config::{DatasetSource, Preset, RunConfig};

/// Stage-tagged failure; [`PipelineError::exit_code`] maps it to the process
/// status.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("training: {0}")]
    Training(String),
    #[error("evaluation: {0}")]
    Evaluation(String),
    #[error("output: {0}")]
    Output(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data(_) | PipelineError::Output(_) => 3,
            PipelineError::Training(_) => 4,
            PipelineError::Evaluation(_) => 5,
        }
    }
}
