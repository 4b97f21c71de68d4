//! Confusion matrices, macro metrics, the per-subject 80/20 protocol,
//! corpus aggregation and report files.

mod metrics;
mod protocol;
pub mod report;

use thiserror::Error;

pub use metrics::{confusion, metrics_from_confusion, BinaryCounts, ClassMetrics, ConfusionMatrix, MetricSet};
pub use protocol::{
    cross_validate, run_corpus, run_subject, CorpusInput, CorpusOutcome, CorpusSummary, EpochPrediction,
    PipelineConfig, Stage, SubjectFailure, SubjectResult, SubjectRun,
};
pub use report::{BaselineRow, BaselineTable, ResultRow};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {truth} true labels, {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("subject {subject}: {stage} failed: {source}")]
    Stage {
        subject: String,
        stage: Stage,
        #[source]
        source: Box<crate::Error>,
    },
    #[error("all {0} subjects failed")]
    AllSubjectsFailed(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed results file, line {line}: {reason}")]
    BadResults { line: usize, reason: String },
    #[error("I/O failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
