use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::series::{check_lengths, counts, BoundarySeries};
use super::MetricsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormativeBoundaries {
    pub narrative_id: String,
    pub n: usize,
    pub indices: Vec<usize>,
    /// Set when fewer than `n` positions carry any boundary at all.
    pub flagged: bool,
}

/// The `n` positions with the highest group proportion, where `n` is the
/// mean per-instance boundary count rounded half away from zero. Ties go
/// to the earlier index.
pub fn normative_boundaries(instances: &[&BoundarySeries]) -> Result<NormativeBoundaries, MetricsError> {
    if instances.is_empty() {
        return Err(MetricsError::TooFewMembers { needed: 1, got: 0 });
    }
    let len = check_lengths(instances)?;
    let total: usize = instances.iter().map(|s| s.boundary_count()).sum();
    let n = (total as f64 / instances.len() as f64).round() as usize;
    let c = counts(instances, len);
    let mut positive: Vec<usize> = (0..len).filter(|&i| c[i] > 0).collect();
    positive.sort_by(|&a, &b| c[b].cmp(&c[a]).then(a.cmp(&b)));
    let flagged = positive.len() < n;
    positive.truncate(n);
    positive.sort_unstable();
    Ok(NormativeBoundaries {
        narrative_id: instances[0].narrative_id.clone(),
        n,
        indices: positive,
        flagged,
    })
}

/// Control marks near event centres: for each span between consecutive
/// normative boundaries (plus the first and last spans) the candidate
/// nearest the span midpoint that is not itself a normative boundary.
/// Equidistant candidates resolve to the earlier index.
pub fn select_non_boundaries(
    normative: &NormativeBoundaries,
    candidates: &BTreeSet<usize>,
    token_count: usize,
) -> (Vec<usize>, Vec<String>) {
    let mut cuts = vec![0];
    cuts.extend(normative.indices.iter().copied().filter(|&b| b > 0 && b < token_count));
    cuts.push(token_count);
    let is_normative = |i: usize| normative.indices.binary_search(&i).is_ok();
    let mut picks = BTreeSet::new();
    let mut diagnostics = Vec::new();
    for (span, w) in cuts.windows(2).enumerate() {
        let (start, end) = (w[0], w[1]);
        if end <= start {
            continue;
        }
        // compare doubled distances to keep the midpoint exact
        let best = candidates
            .range(start..end)
            .copied()
            .filter(|&i| !is_normative(i))
            .min_by_key(|&i| ((2 * i).abs_diff(start + end), i));
        match best {
            Some(i) => {
                picks.insert(i);
            }
            None => diagnostics.push(format!("span {span} [{start}, {end}) has no eligible sentence end")),
        }
    }
    (picks.into_iter().collect(), diagnostics)
}
