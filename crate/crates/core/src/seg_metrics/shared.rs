use serde::Serialize;

use super::series::{check_lengths, counts, BoundarySeries};
use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Shared,
    Distinct,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryClassification {
    pub token_index: usize,
    pub kind: BoundaryKind,
    pub human_proportion: f64,
}

/// Every index marked by at least one human is `shared` when some LLM
/// instance marked a boundary within `tolerance` tokens of it, else `distinct`.
pub fn classify_shared_distinct(
    human_group: &[&BoundarySeries],
    llm_group: &[&BoundarySeries],
    tolerance: usize,
) -> Result<Vec<BoundaryClassification>, MetricsError> {
    if human_group.is_empty() {
        return Ok(Vec::new());
    }
    let len = check_lengths(human_group)?;
    let all: Vec<&BoundarySeries> = human_group.iter().chain(llm_group).copied().collect();
    check_lengths(&all)?;
    let human = counts(human_group, len);
    let llm = counts(llm_group, len);
    let n = human_group.len() as f64;
    Ok(human
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| {
            let lo = i.saturating_sub(tolerance);
            let hi = (i + tolerance).min(len - 1);
            let shared = llm[lo..=hi].iter().any(|&c| c > 0);
            BoundaryClassification {
                token_index: i,
                kind: if shared { BoundaryKind::Shared } else { BoundaryKind::Distinct },
                human_proportion: c as f64 / n,
            }
        })
        .collect())
}
