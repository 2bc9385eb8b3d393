use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::matrix::{matrix_from_ranks, ranked, resize_square, similarity_matrix};
use super::RecallError;
use crate::embed::EmbeddingVector;
use crate::scalar::Real;
use crate::stats::{self, zscore, StatError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersubjectScore<T> {
    pub participant_id: String,
    pub diag_mean: T,
    pub rev_diag_mean: T,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersubjectResult<T> {
    pub scores: Vec<IntersubjectScore<T>>,
    pub diagnostics: Vec<String>,
}

/// For every ordered pair of participants, the recall-by-recall similarity
/// matrix is resized to `n_events × n_events`; each participant's diagonal and
/// anti-diagonal means are averaged over their pairs.
pub fn intersubject_agreement<T: Real>(
    recalls: &[(String, Vec<EmbeddingVector<T>>)],
    n_events: usize,
) -> Result<IntersubjectResult<T>, RecallError> {
    if n_events == 0 {
        return Err(RecallError::Empty);
    }
    let mut diagnostics = Vec::new();
    let mut kept = Vec::new();
    for (pid, vecs) in recalls {
        if vecs.len() < 2 {
            diagnostics.push(format!("{pid}: {} recall event(s), excluded", vecs.len()));
            continue;
        }
        kept.push((pid, vecs));
    }
    if kept.len() < 2 {
        return Err(RecallError::TooFewParticipants { needed: 2, got: kept.len() });
    }
    let ranks: Vec<Vec<Vec<T>>> = kept.iter().map(|(_, v)| ranked(v)).collect::<Result<_, _>>()?;
    let mut scores = Vec::with_capacity(kept.len());
    for (p, (pid, pv)) in kept.iter().enumerate() {
        let (mut diag, mut rev) = (T::zero(), T::zero());
        for (q, (_, qv)) in kept.iter().enumerate() {
            if p == q {
                continue;
            }
            if qv[0].model_id != pv[0].model_id {
                return Err(RecallError::ModelMismatch { expected: pv[0].model_id.clone(), got: qv[0].model_id.clone() });
            }
            let m = resize_square(&matrix_from_ranks(&pv[0].owner_id, &qv[0].owner_id, &ranks[p], &ranks[q]), n_events);
            diag = diag + m.diagonal_mean();
            rev = rev + m.anti_diagonal_mean();
        }
        let pairs = kept.len() - 1;
        scores.push(IntersubjectScore {
            participant_id: pid.to_string(),
            diag_mean: diag / T::of_usize(pairs),
            rev_diag_mean: rev / T::of_usize(pairs),
            n_pairs: pairs,
        });
    }
    Ok(IntersubjectResult { scores, diagnostics })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport<T> {
    pub participant_id: String,
    pub narrative_id: String,
    pub model_id: String,
    pub per_event_scores: Vec<T>,
    pub mean_score: T,
    pub baseline_mean: Option<T>,
    pub z_score: Option<T>,
    pub baseline_z_score: Option<T>,
}

/// Splits a recall owner id `participant/narrative`.
fn split_owner(owner: &str) -> (String, String) {
    match owner.split_once('/') {
        Some((p, n)) => (p.to_string(), n.to_string()),
        None => (owner.to_string(), String::new()),
    }
}

/// Narrative-by-recall similarity resized to the narrative's event count;
/// each event scores the maximum of its row.
pub fn event_recall_scores<T: Real>(
    narrative_vecs: &[EmbeddingVector<T>],
    recall_vecs: &[EmbeddingVector<T>],
) -> Result<RecallReport<T>, RecallError> {
    let m = similarity_matrix(narrative_vecs, recall_vecs)?;
    let per_event_scores = resize_square(&m, narrative_vecs.len()).row_maxima();
    let mean_score = stats::mean(&per_event_scores).map_err(|_| RecallError::Empty)?;
    let (participant_id, recalled) = split_owner(&recall_vecs[0].owner_id);
    let narrative_id = if recalled.is_empty() { narrative_vecs[0].owner_id.clone() } else { recalled };
    Ok(RecallReport {
        participant_id,
        narrative_id,
        model_id: narrative_vecs[0].model_id.clone(),
        per_event_scores,
        mean_score,
        baseline_mean: None,
        z_score: None,
        baseline_z_score: None,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    /// Mean of each unrelated narrative's mean score.
    #[default]
    NarrativeMean,
    /// Mean over the per-event scores of all unrelated narratives together.
    Pooled,
}

/// Recall scored against narratives it does not describe.
pub fn baseline_scores<T: Real>(
    recall_vecs: &[EmbeddingVector<T>],
    other_narratives: &[&[EmbeddingVector<T>]],
    mode: BaselineMode,
) -> Result<T, RecallError> {
    if other_narratives.is_empty() {
        return Err(RecallError::Empty);
    }
    let reports: Vec<RecallReport<T>> =
        other_narratives.iter().map(|n| event_recall_scores(n, recall_vecs)).collect::<Result<_, _>>()?;
    let values: Vec<T> = match mode {
        BaselineMode::NarrativeMean => reports.iter().map(|r| r.mean_score).collect(),
        BaselineMode::Pooled => reports.iter().flat_map(|r| r.per_event_scores.iter().copied()).collect(),
    };
    stats::mean(&values).map_err(|_| RecallError::Empty)
}

/// z-scores within each group, using the n − 1 standard deviation.
pub fn standardize_by_model<T: Real>(groups: &BTreeMap<String, Vec<T>>) -> Result<BTreeMap<String, Vec<T>>, RecallError> {
    groups
        .iter()
        .map(|(k, xs)| {
            if xs.len() < 2 {
                return Err(RecallError::TooFewScores { group: k.clone(), got: xs.len() });
            }
            let z = zscore(xs).map_err(|e| match e {
                StatError::ConstantInput => RecallError::ZeroVariance { group: k.clone() },
                other => RecallError::Stat(other),
            })?;
            Ok((k.clone(), z))
        })
        .collect()
}
