//! Classification metrics, one-vs-rest ROC curves and the inter-subject
//! correlation study.

mod correlation;
mod metrics;
mod roc;

pub use correlation::{
    inter_subject_correlation, pearson, BandCorrelation, CorrelationConfig, CorrelationTable,
};
pub use metrics::{confusion_and_report, ClassMetrics, EvaluationReport};
pub use roc::{roc_auc, roc_csv, RocCurve};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("no samples to evaluate")]
    Empty,
    #[error("{0}")]
    Shape(String),
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("correlation undefined: {0}")]
    Undefined(String),
    #[error(transparent)]
    Signal(#[from] crate::signal::SignalError),
}
