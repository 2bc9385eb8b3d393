use serde::Serialize;

use super::series::{check_lengths, counts, BoundarySeries, MeanSeries};
use super::MetricsError;
use crate::scalar::Real;
use crate::stats::point_biserial;

/// Agreement index for one segmenter; `value` is `None` when the
/// correlation is undefined (a constant series on either side).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementScore<T> {
    pub source_id: String,
    pub narrative_id: String,
    pub value: Option<T>,
}

/// Leave-one-out agreement: each member's binary series against the mean
/// series of all other members.
pub fn loo_agreement<T: Real>(group: &[&BoundarySeries]) -> Result<Vec<AgreementScore<T>>, MetricsError> {
    if group.len() < 2 {
        return Err(MetricsError::TooFewMembers { needed: 2, got: group.len() });
    }
    let len = check_lengths(group)?;
    let totals = counts(group, len);
    let others = T::of_usize(group.len() - 1);
    Ok(group
        .iter()
        .map(|member| {
            let rest: Vec<T> = totals
                .iter()
                .zip(&member.values)
                .map(|(&c, &v)| T::of_usize(c - usize::from(v)) / others)
                .collect();
            AgreementScore {
                source_id: member.source_id.clone(),
                narrative_id: member.narrative_id.clone(),
                value: point_biserial(&member.as_real::<T>(), &rest).ok(),
            }
        })
        .collect())
}

pub fn cross_agreement<T: Real>(
    human: &BoundarySeries,
    llm_group_mean: &MeanSeries<T>,
) -> Result<AgreementScore<T>, MetricsError> {
    if human.len() != llm_group_mean.values.len() {
        return Err(MetricsError::LengthMismatch { expected: human.len(), got: llm_group_mean.values.len() });
    }
    Ok(AgreementScore {
        source_id: human.source_id.clone(),
        narrative_id: human.narrative_id.clone(),
        value: point_biserial(&human.as_real::<T>(), &llm_group_mean.values).ok(),
    })
}
