//! Deterministic statistics kernel: correlations, rank machinery, t-tests,
//! permutation utilities, Spearman–Brown, z-scores and seedable RNG streams.
//!
//! Every statistic that can be undefined (constant input, zero variance)
//! reports that through [`StatError`] instead of returning NaN.

mod correlation;
mod rng;
pub mod special;
mod ttest;

pub use correlation::{average_ranks, pearson, point_biserial, spearman};
pub use rng::{mix64, RngStream};
pub use ttest::{t_one_sample, t_two_sample_welch, TTest};

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatError {
    #[error("input has zero variance; statistic undefined")]
    ConstantInput,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} observations, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("domain error: {0}")]
    Domain(String),
}

pub type StatResult<T> = Result<T, StatError>;

pub fn mean<T: Real>(x: &[T]) -> StatResult<T> {
    if x.is_empty() {
        return Err(StatError::TooFewSamples { needed: 1, got: 0 });
    }
    Ok(x.iter().copied().sum::<T>() / T::of_usize(x.len()))
}

/// Sample standard deviation with the n−1 denominator.
pub fn sample_sd<T: Real>(x: &[T]) -> StatResult<T> {
    if x.len() < 2 {
        return Err(StatError::TooFewSamples { needed: 2, got: x.len() });
    }
    let m = mean(x)?;
    let ss: T = x.iter().map(|&v| (v - m) * (v - m)).sum();
    Ok((ss / T::of_usize(x.len() - 1)).sqrt())
}

/// One-sided (greater) Monte Carlo p-value with the add-one estimator:
/// `(1 + #{null >= observed}) / (1 + |null|)`.
pub fn permutation_p<T: Real>(observed: T, null_samples: &[T]) -> StatResult<T> {
    if null_samples.is_empty() {
        return Err(StatError::TooFewSamples { needed: 1, got: 0 });
    }
    let exceed = null_samples.iter().filter(|&&v| v >= observed).count();
    Ok(T::of_usize(1 + exceed) / T::of_usize(1 + null_samples.len()))
}

/// Spearman–Brown prophecy for doubling test length: `2ρ / (1 + ρ)`.
pub fn spearman_brown<T: Real>(rho: T) -> StatResult<T> {
    if !rho.is_finite() || rho <= -T::one() {
        return Err(StatError::Domain(format!("spearman_brown needs rho > -1, got {rho}")));
    }
    let two = T::one() + T::one();
    Ok(two * rho / (T::one() + rho))
}

/// Standard scores using the n−1 standard deviation.
pub fn zscore<T: Real>(x: &[T]) -> StatResult<Vec<T>> {
    let m = mean(x)?;
    let sd = sample_sd(x)?;
    if sd <= T::zero() || !sd.is_finite() {
        return Err(StatError::ConstantInput);
    }
    Ok(x.iter().map(|&v| (v - m) / sd).collect())
}

pub(crate) fn check_finite<T: Real>(x: &[T]) -> StatResult<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatError::NonFinite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_p_examples() {
        let nulls: Vec<f64> = (0..99).map(|i| i as f64 / 100.0).collect();
        assert_eq!(permutation_p(2.0, &nulls).unwrap(), 0.01);
        assert_eq!(permutation_p(-1.0, &nulls).unwrap(), 1.0);
        // ties count toward the numerator
        let tied = [0.5, 0.5, 0.5, 0.1];
        assert_eq!(permutation_p(0.5, &tied).unwrap(), 4.0 / 5.0);
        assert!(permutation_p(0.0_f64, &[]).is_err());
    }

    #[test]
    fn spearman_brown_examples() {
        assert_eq!(spearman_brown(0.0_f64).unwrap(), 0.0);
        assert_eq!(spearman_brown(1.0_f64).unwrap(), 1.0);
        assert!((spearman_brown(0.45_f64).unwrap() - 0.6206897).abs() < 1e-7);
        assert!(spearman_brown(-1.0_f64).is_err());
        assert!(spearman_brown(-1.5_f64).is_err());
    }

    #[test]
    fn zscore_examples() {
        assert_eq!(zscore(&[1.0_f64, 2.0, 3.0]).unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(zscore(&[4.0_f64, 4.0, 4.0]), Err(StatError::ConstantInput));
        let x = [0.3_f64, 1.7, -2.0, 5.5];
        let ax: Vec<f64> = x.iter().map(|v| 3.0 * v + 7.0).collect();
        for (a, b) in zscore(&x).unwrap().iter().zip(zscore(&ax).unwrap()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zscore_generic_in_f32() {
        let z = zscore(&[1.0_f32, 2.0, 3.0]).unwrap();
        assert_eq!(z, vec![-1.0_f32, 0.0, 1.0]);
    }
}
