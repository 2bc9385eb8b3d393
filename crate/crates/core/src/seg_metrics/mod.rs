//! Segmentation statistics over binary word-level boundary series.

mod agreement;
mod consistency;
mod normative;
mod ratings;
mod series;
mod shared;

use thiserror::Error;

pub use agreement::{cross_agreement, loo_agreement, AgreementScore};
pub use consistency::{
    between_group_consistency, consistency_iteration, find_peaks, ConsistencyIteration, ConsistencyParams,
};
pub use normative::{normative_boundaries, select_non_boundaries, NormativeBoundaries};
pub use ratings::{
    rating_summary, scale_rating, ConditionSummary, MarkKind, ParticipantRatingMeans, RatingScale, RatingSummary,
};
pub use series::{boundaries_per_1000, mean_series, to_series, BoundarySeries, MeanSeries};
pub use shared::{classify_shared_distinct, BoundaryClassification, BoundaryKind};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("boundary index {index} outside (0, {token_count})")]
    InvalidIndex { index: usize, token_count: usize },
    #[error("series length {got} differs from {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("need at least {needed} members, got {got}")]
    TooFewMembers { needed: usize, got: usize },
    #[error("narrative has no tokens")]
    EmptyNarrative,
    #[error("confidence {0} outside 1..=10")]
    InvalidConfidence(u8),
}
