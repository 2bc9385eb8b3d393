use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RecallError;
use crate::scalar::Real;
use crate::stats::{self, permutation_p, spearman, spearman_brown, special::student_t_two_sided, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitHalfResult<T> {
    pub rho_mean: T,
    pub rho_sb: T,
    pub p_value: T,
    pub iterations: usize,
    /// Iterations where either correlation was undefined and was skipped.
    pub undefined_iterations: usize,
    pub null_mean: T,
    pub null_sd: T,
    pub n_participants: usize,
    pub dropped_participant: Option<String>,
    pub diagnostics: Vec<String>,
}

/// Stream id reserved for choosing the participant dropped from an odd cohort.
const DROP_STREAM: u64 = u64::MAX;

/// Split-half consistency between automated and human per-event scores.
///
/// Each iteration splits participants into two halves. The first half gives
/// the observed Spearman correlation; on the second half the human scores are
/// shuffled to give a null correlation. The p-value is the add-one share of
/// nulls at or above the mean observed correlation.
pub fn split_half<T: Real>(
    auto_scores: &[T],
    human_scores: &[T],
    participant_ids: &[String],
    iterations: usize,
    seed: u64,
) -> Result<SplitHalfResult<T>, RecallError> {
    if auto_scores.len() != human_scores.len() || auto_scores.len() != participant_ids.len() {
        return Err(RecallError::LengthMismatch { expected: auto_scores.len(), got: human_scores.len().min(participant_ids.len()) });
    }
    if iterations == 0 {
        return Err(RecallError::Empty);
    }
    let mut participants: Vec<&str> = participant_ids.iter().map(String::as_str).collect();
    participants.sort_unstable();
    participants.dedup();
    let mut diagnostics = Vec::new();
    let mut dropped_participant = None;
    if participants.len() % 2 == 1 {
        let k = RngStream::new(seed, DROP_STREAM).index(participants.len());
        let d = participants.remove(k);
        diagnostics.push(format!("odd participant count; dropped {d}"));
        dropped_participant = Some(d.to_string());
    }
    if participants.len() < 4 {
        return Err(RecallError::TooFewParticipants { needed: 4, got: participants.len() });
    }
    let rows: Vec<Vec<usize>> = participants
        .iter()
        .map(|p| participant_ids.iter().enumerate().filter(|(_, q)| q.as_str() == *p).map(|(i, _)| i).collect())
        .collect();
    let half = participants.len() / 2;
    let gather = |members: &[usize], xs: &[T]| -> Vec<T> { members.iter().flat_map(|&m| rows[m].iter().map(|&i| xs[i])).collect() };

    let draws: Vec<(Option<T>, Option<T>)> = (0..iterations)
        .into_par_iter()
        .map(|it| {
            let mut rng = RngStream::new(seed, it as u64);
            let mut order: Vec<usize> = (0..participants.len()).collect();
            rng.shuffle(&mut order);
            let (first, second) = order.split_at(half);
            let actual = spearman(&gather(first, auto_scores), &gather(first, human_scores)).ok();
            let mut shuffled = gather(second, human_scores);
            rng.shuffle(&mut shuffled);
            let null = spearman(&gather(second, auto_scores), &shuffled).ok();
            (actual, null)
        })
        .collect();

    let valid: Vec<(T, T)> = draws.iter().filter_map(|&(a, n)| Some((a?, n?))).collect();
    let undefined_iterations = iterations - valid.len();
    if undefined_iterations > 0 {
        diagnostics.push(format!("{undefined_iterations} iteration(s) had a constant half and were skipped"));
    }
    if valid.is_empty() {
        return Err(RecallError::Stat(stats::StatError::ConstantInput));
    }
    let actual: Vec<T> = valid.iter().map(|v| v.0).collect();
    let nulls: Vec<T> = valid.iter().map(|v| v.1).collect();
    let rho_mean = stats::mean(&actual)?;
    Ok(SplitHalfResult {
        rho_mean,
        rho_sb: spearman_brown(rho_mean)?,
        p_value: permutation_p(rho_mean, &nulls)?,
        iterations,
        undefined_iterations,
        null_mean: stats::mean(&nulls)?,
        null_sd: if nulls.len() > 1 { stats::sample_sd(&nulls)? } else { T::zero() },
        n_participants: participants.len(),
        dropped_participant,
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult<T> {
    pub beta: T,
    /// `None` on an exact fit, where the statistic is unbounded.
    pub t_statistic: Option<T>,
    pub p_value: Option<T>,
    pub n: usize,
    pub exact_fit: bool,
}

/// Least-squares slope of `human_z` on `auto_z`, with `t = β·√((n−2)/(1−β²))`
/// on `n − 2` degrees of freedom.
pub fn standardized_regression<T: Real>(auto_z: &[T], human_z: &[T]) -> Result<RegressionResult<T>, RecallError> {
    let n = auto_z.len();
    if human_z.len() != n {
        return Err(RecallError::LengthMismatch { expected: n, got: human_z.len() });
    }
    if n < 3 {
        return Err(RecallError::TooFewScores { group: "regression".into(), got: n });
    }
    let mx = stats::mean(auto_z)?;
    let my = stats::mean(human_z)?;
    let (mut sxx, mut sxy) = (T::zero(), T::zero());
    for (&x, &y) in auto_z.iter().zip(human_z) {
        sxx = sxx + (x - mx) * (x - mx);
        sxy = sxy + (x - mx) * (y - my);
    }
    if sxx == T::zero() {
        return Err(RecallError::ZeroVariance { group: "auto".into() });
    }
    let beta = sxy / sxx;
    let resid = T::one() - beta * beta;
    let exact_fit = resid <= T::of(4.0) * T::epsilon();
    let (t_statistic, p_value) = if exact_fit {
        (None, None)
    } else {
        let df = T::of_usize(n - 2);
        let t = beta * (df / resid).sqrt();
        (Some(t), Some(student_t_two_sided(t, df)))
    };
    Ok(RegressionResult { beta, t_statistic, p_value, n, exact_fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{pearson, zscore};
    use approx::assert_relative_eq;

    fn ids(n_participants: usize, per: usize) -> Vec<String> {
        (0..n_participants).flat_map(|p| std::iter::repeat_n(format!("p{p:02}"), per)).collect()
    }

    #[test]
    fn identical_scores() {
        let ids = ids(6, 4);
        let auto: Vec<f64> = (0..24).map(|i| ((i * 7) % 11) as f64).collect();
        let r = split_half(&auto, &auto, &ids, 200, 3).unwrap();
        assert_eq!(r.rho_mean, 1.0);
        assert_eq!(r.rho_sb, 1.0);
        assert!(r.p_value <= 1.0 / 201.0 + 1e-15);
    }

    #[test]
    fn odd_cohort_drops_one_reproducibly() {
        let ids = ids(5, 3);
        let mut rng = RngStream::new(1, 1);
        let a: Vec<f64> = (0..15).map(|_| rng.uniform()).collect();
        let h: Vec<f64> = (0..15).map(|_| rng.uniform()).collect();
        let r1 = split_half(&a, &h, &ids, 50, 9).unwrap();
        let r2 = split_half(&a, &h, &ids, 50, 9).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.n_participants, 4);
        assert!(r1.dropped_participant.is_some());
        assert_eq!(r1.diagnostics.len(), 1);
    }

    #[test]
    fn too_few_participants() {
        let ids = ids(3, 2);
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert!(matches!(split_half(&x, &x, &ids, 10, 0), Err(RecallError::TooFewParticipants { .. })));
    }

    #[test]
    fn independent_scores_are_not_significant_on_average() {
        let ids = ids(20, 5);
        let mut rng = RngStream::new(4, 0);
        let a: Vec<f64> = (0..100).map(|_| rng.uniform()).collect();
        let h: Vec<f64> = (0..100).map(|_| rng.uniform()).collect();
        let r = split_half(&a, &h, &ids, 500, 2).unwrap();
        assert!(r.rho_mean.abs() < 0.3);
        assert!(r.null_sd > 0.0);
        assert_relative_eq!(r.rho_sb, 2.0 * r.rho_mean / (1.0 + r.rho_mean), epsilon = 1e-12);
    }

    #[test]
    fn regression_exact_fits() {
        let z = zscore(&[1.0, 4.0, 2.0, 8.0, 5.0]).unwrap();
        let r = standardized_regression(&z, &z).unwrap();
        assert_eq!(r.beta, 1.0);
        assert!(r.exact_fit && r.t_statistic.is_none());
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        let r = standardized_regression(&z, &neg).unwrap();
        assert_eq!(r.beta, -1.0);
        assert!(r.exact_fit);
    }

    #[test]
    fn regression_hand_dataset() {
        // x = [1,2,3,4,5], y = [2,1,4,3,5]: sxy = 8, sxx = syy = 10, r = 0.8
        let x = zscore(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let y = zscore(&[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        let r = standardized_regression(&x, &y).unwrap();
        assert_relative_eq!(r.beta, 0.8, epsilon = 1e-12);
        let t = 0.8 * (3.0f64 / (1.0 - 0.64)).sqrt();
        assert_relative_eq!(r.t_statistic.unwrap(), t, epsilon = 1e-12);
        assert!(r.p_value.unwrap() > 0.05 && r.p_value.unwrap() < 0.2);
        assert_relative_eq!(r.beta, pearson(&x, &y).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn regression_f32() {
        let x = zscore(&[1.0f32, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let y = zscore(&[2.0f32, 1.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((standardized_regression(&x, &y).unwrap().beta - 0.8).abs() < 1e-5);
    }
}
