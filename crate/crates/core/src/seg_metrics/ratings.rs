use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::corpus::RatingRecord;
use crate::scalar::Real;
use crate::stats::{self, t_one_sample, t_two_sample_welch, TTest};

/// Mapping from a 1..=10 confidence to a magnitude in (0, 1].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatingScale {
    /// `confidence / 10`, so confidence 1 maps to 0.1.
    #[default]
    Tenths,
    /// `(confidence - 1) / 9`, so confidence 1 maps to 0.
    ZeroAnchored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkKind {
    Boundary,
    NonBoundary,
}

pub fn scale_rating<T: Real>(record: &RatingRecord, scale: RatingScale) -> Result<T, MetricsError> {
    let c = record.confidence;
    if !(1..=10).contains(&c) {
        return Err(MetricsError::InvalidConfidence(c));
    }
    let magnitude = match scale {
        RatingScale::Tenths => T::of_usize(c as usize) / T::of(10.0),
        RatingScale::ZeroAnchored => T::of_usize(c as usize - 1) / T::of(9.0),
    };
    Ok(if record.judged_boundary { magnitude } else { -magnitude })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipantRatingMeans<T> {
    pub participant_id: String,
    pub boundary: Option<T>,
    pub non_boundary: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionSummary<T> {
    pub n: usize,
    pub mean: Option<T>,
    pub sd: Option<T>,
    /// One-sample test against zero; `None` when degenerate.
    pub t_test: Option<TTest<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatingSummary<T> {
    pub participants: Vec<ParticipantRatingMeans<T>>,
    pub boundary: ConditionSummary<T>,
    pub non_boundary: ConditionSummary<T>,
    pub welch: Option<TTest<T>>,
    pub diagnostics: Vec<String>,
}

fn condition<T: Real>(label: &str, xs: &[T], diagnostics: &mut Vec<String>) -> ConditionSummary<T> {
    let mean = stats::mean(xs).ok();
    let sd = stats::sample_sd(xs).ok();
    let t_test = match t_one_sample(xs, T::zero()) {
        Ok(t) => Some(t),
        Err(e) => {
            diagnostics.push(format!("{label}: one-sample t-test degenerate ({e})"));
            None
        }
    };
    ConditionSummary { n: xs.len(), mean, sd, t_test }
}

/// Per-participant mean scaled rating at each kind of mark, pooled across
/// narratives, followed by one-sample tests against zero and a Welch test
/// between conditions. `kinds` maps (narrative id, mark index) to its kind.
pub fn rating_summary<T: Real>(
    records: &[RatingRecord],
    kinds: &HashMap<(String, usize), MarkKind>,
    scale: RatingScale,
) -> Result<RatingSummary<T>, MetricsError> {
    let mut by_participant: BTreeMap<&str, [Vec<T>; 2]> = BTreeMap::new();
    let mut diagnostics = Vec::new();
    for r in records {
        let v = scale_rating::<T>(r, scale)?;
        let entry = by_participant.entry(r.participant_id.as_str()).or_default();
        match kinds.get(&(r.narrative_id.clone(), r.mark_token_index)) {
            Some(MarkKind::Boundary) => entry[0].push(v),
            Some(MarkKind::NonBoundary) => entry[1].push(v),
            None => diagnostics.push(format!(
                "{}: mark {} in {} has no kind, ignored",
                r.participant_id, r.mark_token_index, r.narrative_id
            )),
        }
    }
    if by_participant.len() < 2 {
        return Err(MetricsError::TooFewMembers { needed: 2, got: by_participant.len() });
    }
    let mut participants = Vec::with_capacity(by_participant.len());
    let (mut bmeans, mut nmeans) = (Vec::new(), Vec::new());
    for (pid, [b, nb]) in by_participant {
        let boundary = stats::mean(&b).ok();
        let non_boundary = stats::mean(&nb).ok();
        match boundary {
            Some(m) => bmeans.push(m),
            None => diagnostics.push(format!("{pid}: no boundary marks, excluded from that condition")),
        }
        match non_boundary {
            Some(m) => nmeans.push(m),
            None => diagnostics.push(format!("{pid}: no non-boundary marks, excluded from that condition")),
        }
        participants.push(ParticipantRatingMeans { participant_id: pid.to_string(), boundary, non_boundary });
    }
    let boundary = condition("boundary", &bmeans, &mut diagnostics);
    let non_boundary = condition("non-boundary", &nmeans, &mut diagnostics);
    let welch = match t_two_sample_welch(&bmeans, &nmeans) {
        Ok(t) => Some(t),
        Err(e) => {
            diagnostics.push(format!("boundary vs non-boundary: Welch t-test degenerate ({e})"));
            None
        }
    };
    Ok(RatingSummary { participants, boundary, non_boundary, welch, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rec(p: &str, idx: usize, judged: bool, c: u8) -> RatingRecord {
        RatingRecord {
            participant_id: p.into(),
            narrative_id: "n".into(),
            mark_token_index: idx,
            judged_boundary: judged,
            confidence: c,
        }
    }

    fn kinds() -> HashMap<(String, usize), MarkKind> {
        [(("n".to_string(), 5), MarkKind::Boundary), (("n".to_string(), 9), MarkKind::NonBoundary)]
            .into_iter()
            .collect()
    }

    #[test]
    fn scaling_examples() {
        assert_eq!(scale_rating::<f64>(&rec("a", 0, true, 10), RatingScale::Tenths).unwrap(), 1.0);
        assert_eq!(scale_rating::<f64>(&rec("a", 0, false, 10), RatingScale::Tenths).unwrap(), -1.0);
        assert_eq!(scale_rating::<f64>(&rec("a", 0, true, 1), RatingScale::Tenths).unwrap(), 0.1);
        assert_eq!(scale_rating::<f64>(&rec("a", 0, true, 1), RatingScale::ZeroAnchored).unwrap(), 0.0);
        assert_eq!(scale_rating::<f32>(&rec("a", 0, false, 10), RatingScale::ZeroAnchored).unwrap(), -1.0);
        assert!(matches!(
            scale_rating::<f64>(&rec("a", 0, true, 11), RatingScale::Tenths),
            Err(MetricsError::InvalidConfidence(11))
        ));
        assert!(scale_rating::<f64>(&rec("a", 0, true, 0), RatingScale::Tenths).is_err());
    }

    #[test]
    fn perfect_raters_are_degenerate() {
        let recs: Vec<RatingRecord> =
            ["a", "b", "c"].iter().flat_map(|p| [rec(p, 5, true, 10), rec(p, 9, false, 10)]).collect();
        let s = rating_summary::<f64>(&recs, &kinds(), RatingScale::Tenths).unwrap();
        assert_eq!(s.boundary.mean, Some(1.0));
        assert_eq!(s.non_boundary.mean, Some(-1.0));
        assert!(s.boundary.t_test.is_none());
        assert!(s.non_boundary.t_test.is_none());
        assert!(s.welch.is_none());
        assert_eq!(s.diagnostics.len(), 3);
    }

    #[test]
    fn symmetric_ratings_give_zero_t() {
        let recs = vec![rec("a", 5, true, 6), rec("b", 5, false, 6), rec("c", 5, true, 2), rec("d", 5, false, 2)];
        let s = rating_summary::<f64>(&recs, &kinds(), RatingScale::Tenths).unwrap();
        assert_relative_eq!(s.boundary.t_test.unwrap().t, 0.0, epsilon = 1e-15);
        assert_eq!(s.non_boundary.n, 0);
        assert_eq!(s.diagnostics.iter().filter(|d| d.contains("no non-boundary")).count(), 4);
    }

    #[test]
    fn t_matches_hand_formula() {
        // boundary means 0.3, 0.5, 0.7 (mean 0.5, sd 0.2)
        let recs = vec![
            rec("a", 5, true, 3),
            rec("b", 5, true, 5),
            rec("c", 5, true, 7),
            rec("a", 9, false, 8),
            rec("b", 9, false, 4),
            rec("c", 9, false, 6),
        ];
        let s = rating_summary::<f64>(&recs, &kinds(), RatingScale::Tenths).unwrap();
        let t = 0.5 / (0.2 / 3f64.sqrt());
        assert_relative_eq!(s.boundary.mean.unwrap(), 0.5, epsilon = 1e-12);
        assert_relative_eq!(s.boundary.sd.unwrap(), 0.2, epsilon = 1e-12);
        let tt = s.boundary.t_test.unwrap();
        assert_relative_eq!(tt.t, t, epsilon = 1e-12);
        assert_eq!(tt.df, 2.0);
        assert!(s.welch.is_some());
    }

    #[test]
    fn single_participant_rejected() {
        let recs = vec![rec("a", 5, true, 3)];
        assert!(rating_summary::<f64>(&recs, &kinds(), RatingScale::Tenths).is_err());
    }
}
