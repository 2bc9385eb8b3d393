//! Recovers boundary indices on the source narrative from a segmented copy.
//!
//! The copy is split on newlines, re-tokenized and globally aligned to the
//! source. Each segment after the first contributes one boundary: the source
//! index of its first token when that token aligned, otherwise one past the
//! last matched source index before the segment (falling back to the
//! segment's first matched token when nothing earlier matched).

mod align;

pub use align::{align_tokens, AlignmentResult, BANDED_THRESHOLD};

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, BoundarySet, Narrative};

pub const DEFAULT_COVERAGE_THRESHOLD: f64 = 0.8;
/// A run of this many consecutive unmatched source tokens means a stretch of
/// the story is missing from the copy.
pub const MISSING_SPAN_TOKENS: usize = 5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtractError {
    #[error("segmented copy has no alphanumeric content")]
    NoContent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractionOutcome {
    pub boundaries: BoundarySet,
    pub n_segments_in_output: usize,
    pub coverage: f64,
    pub source_coverage: f64,
    pub flagged: bool,
    pub reason: Option<String>,
}

pub fn extract_boundaries(
    source: &Narrative,
    raw_text: &str,
    coverage_threshold: f64,
) -> Result<ExtractionOutcome, ExtractError> {
    if !raw_text.chars().any(char::is_alphanumeric) {
        return Err(ExtractError::NoContent);
    }
    let segments: Vec<&str> = raw_text.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut seg_starts = Vec::with_capacity(segments.len());
    let mut output = Vec::new();
    for seg in &segments {
        seg_starts.push(output.len());
        output.extend(tokenize(seg));
    }
    let seg_ends: Vec<usize> = seg_starts.iter().skip(1).copied().chain([output.len()]).collect();

    let alignment = align_tokens(&source.tokens, &output);
    let mut to_source = vec![None; output.len()];
    for &(s, o) in &alignment.pairs {
        to_source[o] = Some(s);
    }

    let mut reasons = Vec::new();
    let mut boundaries = Vec::new();
    let mut unaligned = Vec::new();
    for (k, (&start, &end)) in seg_starts.iter().zip(&seg_ends).enumerate() {
        let first_matched = (start..end).find_map(|o| to_source[o]);
        let Some(first_matched) = first_matched else {
            unaligned.push(k);
            continue;
        };
        if k == 0 {
            continue;
        }
        let boundary = match to_source[start] {
            Some(s) => s,
            None => match (0..start).rev().find_map(|o| to_source[o]) {
                Some(prev) => prev + 1,
                None => first_matched,
            },
        };
        boundaries.push(boundary);
    }
    if !unaligned.is_empty() {
        reasons.push(format!("segment unaligned: output segment(s) {unaligned:?} share no token with the source"));
    }
    if let Some((a, b)) = longest_unmatched_source_run(source.token_count(), &alignment.pairs) {
        if b - a >= MISSING_SPAN_TOKENS {
            reasons.push(format!("segment unaligned: source tokens {a}..{b} missing from copy"));
        }
    }
    if alignment.coverage < coverage_threshold {
        reasons.push(format!("low coverage {:.3} < {coverage_threshold}", alignment.coverage));
    }

    let n_source = source.token_count().max(1);
    Ok(ExtractionOutcome {
        boundaries: BoundarySet::new(boundaries.into_iter().filter(|&b| b > 0 && b < source.token_count())),
        n_segments_in_output: segments.len(),
        coverage: alignment.coverage,
        source_coverage: alignment.pairs.len() as f64 / n_source as f64,
        flagged: !reasons.is_empty(),
        reason: if reasons.is_empty() { None } else { Some(reasons.join("; ")) },
    })
}

fn longest_unmatched_source_run(n: usize, pairs: &[(usize, usize)]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let mut prev_end = 0;
    for s in pairs.iter().map(|p| p.0).chain([n]) {
        if s > prev_end && best.is_none_or(|(a, b)| s - prev_end > b - a) {
            best = Some((prev_end, s));
        }
        prev_end = s + 1;
    }
    best
}

/// Who produced a boundary set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Llm,
    Human,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceInfo {
    pub kind: SourceKind,
    pub model_id: Option<String>,
    pub temperature: Option<f64>,
    pub instance_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant_id: Option<String>,
}

impl SourceInfo {
    /// Stable identifier such as `gpt-4@t0.5#3` or `human:p01`.
    pub fn label(&self) -> String {
        match (&self.participant_id, &self.model_id) {
            (Some(p), _) => format!("human:{p}"),
            (None, Some(m)) => format!(
                "{m}@t{}#{}",
                self.temperature.unwrap_or_default(),
                self.instance_index.unwrap_or_default()
            ),
            (None, None) => format!("{:?}#{}", self.kind, self.instance_index.unwrap_or_default()),
        }
    }
}

/// Per-instance boundary record written to `segmentation/…/*.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceBoundaries {
    pub narrative_id: String,
    pub source: SourceInfo,
    pub boundaries: Vec<usize>,
    pub coverage: f64,
    pub flagged: bool,
    pub reason: Option<String>,
}
