//! Evaluation harness: stratified cross-validation, the S1 to S16 ablation grid,
//! per-class metrics, one-vs-rest ROC, Krippendorff's alpha and lexicon
//! score diagnostics.

mod ablation;
mod agreement;
mod cv;
mod diagnostics;
mod metrics;
pub mod report;
mod roc;

use thiserror::Error;

use crate::corpus::CorpusError;
use crate::models::ModelError;

pub use ablation::{ablation_grid, run_ablation, AblationRow, AblationSpec};
pub use agreement::{
    krippendorff_alpha, pairwise_alpha, parse_annotations_csv, AgreementReport, AnnotationMatrix, PairAlpha,
};
pub use cv::{cross_validate, stratified_folds, CvPrediction, CvResult, DEFAULT_FOLDS};
pub use diagnostics::{
    load_score_lexicon, parse_score_lexicon, post_score, sentiment_diagnostics, AnovaSummary, GroupSummary,
    LexiconDiagnostics, SentimentReport,
};
pub use metrics::{compute_metrics, ClassMetrics, ConfusionMatrix, MacroMetrics, MetricsReport};
pub use roc::{compute_roc, roc_from_scores, RocCurve};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {truth} truth labels vs {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("label `{0}` is not one of the evaluated classes")]
    UnknownLabel(String),
    #[error("ROC undefined: truth contains only one class relative to `{0}`")]
    RocUndefined(String),
    #[error("missing or non-finite score for class `{class}` at position {index}")]
    MissingScore { class: String, index: usize },
    #[error("folds must be at least 2, got {0}")]
    InvalidFolds(usize),
    #[error("stratification impossible: class `{class}` has {count} users but {folds} folds were requested; use at most {count} folds")]
    Stratification { class: String, count: usize, folds: usize },
    #[error("cross-validation needs at least two classes")]
    SingleClass,
    #[error("no pairable values: every item has fewer than two annotations")]
    NoPairableValues,
    #[error("need at least two annotators, got {0}")]
    TooFewAnnotators(usize),
    #[error("malformed {what}: {message}")]
    Malformed { what: String, message: String },
    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}
