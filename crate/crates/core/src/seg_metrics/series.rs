use serde::Serialize;

use super::MetricsError;
use crate::corpus::BoundarySet;
use crate::scalar::Real;

/// Binary word-level series: `values[i] == 1` iff a boundary lies just prior to token `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundarySeries {
    pub narrative_id: String,
    pub source_id: String,
    pub values: Vec<u8>,
}

impl BoundarySeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn boundary_count(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    pub fn boundaries(&self) -> BoundarySet {
        self.values.iter().enumerate().filter(|(_, &v)| v == 1).map(|(i, _)| i).collect()
    }

    pub fn as_real<T: Real>(&self) -> Vec<T> {
        self.values.iter().map(|&v| if v == 1 { T::one() } else { T::zero() }).collect()
    }
}

pub fn to_series(
    boundaries: &BoundarySet,
    token_count: usize,
    narrative_id: &str,
    source_id: &str,
) -> Result<BoundarySeries, MetricsError> {
    let mut values = vec![0u8; token_count];
    for b in boundaries.iter() {
        if b == 0 || b >= token_count {
            return Err(MetricsError::InvalidIndex { index: b, token_count });
        }
        values[b] = 1;
    }
    Ok(BoundarySeries { narrative_id: narrative_id.to_string(), source_id: source_id.to_string(), values })
}

/// Proportion of group members with a boundary at each token.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanSeries<T> {
    pub narrative_id: String,
    pub group_id: String,
    pub values: Vec<T>,
    pub group_size: usize,
}

pub(crate) fn check_lengths(group: &[&BoundarySeries]) -> Result<usize, MetricsError> {
    let len = group.first().map(|s| s.len()).unwrap_or(0);
    if let Some(bad) = group.iter().find(|s| s.len() != len) {
        return Err(MetricsError::LengthMismatch { expected: len, got: bad.len() });
    }
    Ok(len)
}

/// Per-token boundary counts across a group.
pub(crate) fn counts(group: &[&BoundarySeries], len: usize) -> Vec<usize> {
    let mut counts = vec![0usize; len];
    for s in group {
        for (c, &v) in counts.iter_mut().zip(&s.values) {
            *c += usize::from(v);
        }
    }
    counts
}

pub fn mean_series<T: Real>(group: &[&BoundarySeries], group_id: &str) -> Result<MeanSeries<T>, MetricsError> {
    if group.is_empty() {
        return Err(MetricsError::TooFewMembers { needed: 1, got: 0 });
    }
    let len = check_lengths(group)?;
    let size = T::of_usize(group.len());
    Ok(MeanSeries {
        narrative_id: group[0].narrative_id.clone(),
        group_id: group_id.to_string(),
        values: counts(group, len).into_iter().map(|c| T::of_usize(c) / size).collect(),
        group_size: group.len(),
    })
}

pub fn boundaries_per_1000(boundary_count: usize, token_count: usize) -> Result<f64, MetricsError> {
    if token_count == 0 {
        return Err(MetricsError::EmptyNarrative);
    }
    Ok(1000.0 * boundary_count as f64 / token_count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn to_series_examples() {
        let s = to_series(&BoundarySet::new([2]), 4, "n", "p").unwrap();
        assert_eq!(s.values, vec![0, 0, 1, 0]);
        assert_eq!(to_series(&BoundarySet::default(), 4, "n", "p").unwrap().values, vec![0; 4]);
        assert!(matches!(
            to_series(&BoundarySet::new([0]), 4, "n", "p"),
            Err(MetricsError::InvalidIndex { index: 0, .. })
        ));
        assert!(to_series(&BoundarySet::new([4]), 4, "n", "p").is_err());
    }

    #[test]
    fn per_1000_examples() {
        assert_eq!(boundaries_per_1000(15, 1500).unwrap(), 10.0);
        assert_eq!(boundaries_per_1000(0, 1500).unwrap(), 0.0);
        assert_eq!(boundaries_per_1000(7, 1400).unwrap(), 5.0);
        assert!(boundaries_per_1000(1, 0).is_err());
    }

    #[test]
    fn mean_series_is_proportion() {
        let a = to_series(&BoundarySet::new([1, 3]), 5, "n", "a").unwrap();
        let b = to_series(&BoundarySet::new([1]), 5, "n", "b").unwrap();
        let m: MeanSeries<f64> = mean_series(&[&a, &b], "g").unwrap();
        assert_eq!(m.values, vec![0.0, 1.0, 0.0, 0.5, 0.0]);
        assert_eq!(m.group_size, 2);
    }
}
