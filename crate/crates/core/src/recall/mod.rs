//! Recall scoring from segment embeddings.

mod gist;
mod matrix;
mod reliability;
mod scoring;

use thiserror::Error;

pub use gist::{read_human_scores, write_human_scores, HumanScore};
pub use matrix::{resize_square, similarity_matrix, SimilarityMatrix};
pub use reliability::{split_half, standardized_regression, RegressionResult, SplitHalfResult};
pub use scoring::{
    baseline_scores, event_recall_scores, intersubject_agreement, standardize_by_model, BaselineMode,
    IntersubjectResult, IntersubjectScore, RecallReport,
};

use crate::stats::StatError;

#[derive(Debug, Error)]
pub enum RecallError {
    #[error("no vectors or scores to work with")]
    Empty,
    #[error("segment {segment} is constant; its rank correlation is undefined")]
    UndefinedEntry { segment: String },
    #[error("model {got} differs from {expected}")]
    ModelMismatch { expected: String, got: String },
    #[error("dimension {got} differs from {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length {got} differs from {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("need at least {needed} participants, got {got}")]
    TooFewParticipants { needed: usize, got: usize },
    #[error("group {group} has {got} score(s); need at least 2")]
    TooFewScores { group: String, got: usize },
    #[error("group {group} has zero variance")]
    ZeroVariance { group: String },
    #[error(transparent)]
    Stat(#[from] StatError),
    #[error("human scores: {0}")]
    Csv(String),
}
