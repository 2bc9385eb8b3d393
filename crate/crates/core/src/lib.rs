pub mod cache;
pub mod corpus;
pub mod embed;
pub mod extract;
pub mod http;
pub mod llm;
pub mod pipeline;
pub mod recall;
pub mod retry;
pub mod scalar;
pub mod seg_metrics;
pub mod stats;

#[cfg(test)]
mod test_server;

pub use scalar::Real;

/// Concrete scalar instantiations.
pub type SimilarityMatrixF64 = recall::SimilarityMatrix<f64>;
pub type SplitHalfResultF64 = recall::SplitHalfResult<f64>;
pub type RegressionResultF64 = recall::RegressionResult<f64>;
pub type IntersubjectResultF64 = recall::IntersubjectResult<f64>;
pub type RecallReportF64 = recall::RecallReport<f64>;
pub type EmbeddingVectorF64 = embed::EmbeddingVector<f64>;
pub type EmbeddingStoreF64 = embed::EmbeddingStore<f64>;
pub type AgreementScoreF64 = seg_metrics::AgreementScore<f64>;
pub type MeanSeriesF64 = seg_metrics::MeanSeries<f64>;
pub type RatingSummaryF64 = seg_metrics::RatingSummary<f64>;
pub type TTestF64 = stats::TTest<f64>;

pub type SimilarityMatrixF32 = recall::SimilarityMatrix<f32>;
pub type SplitHalfResultF32 = recall::SplitHalfResult<f32>;
pub type RegressionResultF32 = recall::RegressionResult<f32>;
pub type IntersubjectResultF32 = recall::IntersubjectResult<f32>;
pub type RecallReportF32 = recall::RecallReport<f32>;
pub type EmbeddingVectorF32 = embed::EmbeddingVector<f32>;
pub type EmbeddingStoreF32 = embed::EmbeddingStore<f32>;
pub type AgreementScoreF32 = seg_metrics::AgreementScore<f32>;
pub type MeanSeriesF32 = seg_metrics::MeanSeries<f32>;
pub type RatingSummaryF32 = seg_metrics::RatingSummary<f32>;
pub type TTestF32 = stats::TTest<f32>;
