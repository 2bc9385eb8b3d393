use serde::Serialize;

use super::special::student_t_two_sided;
use super::{check_finite, mean, StatError, StatResult};
use crate::scalar::Real;

/// Outcome of a t-test; `p` is two-sided.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest<T> {
    pub t: T,
    pub df: T,
    pub p: T,
}

fn sum_sq_dev<T: Real>(x: &[T], m: T) -> T {
    x.iter().map(|&v| (v - m) * (v - m)).sum()
}

pub fn t_one_sample<T: Real>(x: &[T], mu0: T) -> StatResult<TTest<T>> {
    if x.len() < 2 {
        return Err(StatError::TooFewSamples { needed: 2, got: x.len() });
    }
    check_finite(x)?;
    if x.iter().all(|&v| v == x[0]) {
        return Err(StatError::ConstantInput);
    }
    let n = T::of_usize(x.len());
    let m = mean(x)?;
    let sd = (sum_sq_dev(x, m) / (n - T::one())).sqrt();
    let t = (m - mu0) / (sd / n.sqrt());
    let df = n - T::one();
    Ok(TTest { t, df, p: student_t_two_sided(t, df) })
}

/// Welch's unequal-variance t-test with Welch–Satterthwaite degrees of freedom.
pub fn t_two_sample_welch<T: Real>(x: &[T], y: &[T]) -> StatResult<TTest<T>> {
    for s in [x, y] {
        if s.len() < 2 {
            return Err(StatError::TooFewSamples { needed: 2, got: s.len() });
        }
        check_finite(s)?;
    }
    let (nx, ny) = (T::of_usize(x.len()), T::of_usize(y.len()));
    let (mx, my) = (mean(x)?, mean(y)?);
    let vx = sum_sq_dev(x, mx) / (nx - T::one());
    let vy = sum_sq_dev(y, my) / (ny - T::one());
    let (ax, ay) = (vx / nx, vy / ny);
    let se2 = ax + ay;
    if se2 <= T::zero() {
        return Err(StatError::ConstantInput);
    }
    let t = (mx - my) / se2.sqrt();
    let df = se2 * se2 / (ax * ax / (nx - T::one()) + ay * ay / (ny - T::one()));
    Ok(TTest { t, df, p: student_t_two_sided(t, df) })
}
