use super::{check_finite, StatError, StatResult};
use crate::scalar::Real;

fn check_pair<T: Real>(x: &[T], y: &[T]) -> StatResult<()> {
    if x.len() != y.len() {
        return Err(StatError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(StatError::TooFewSamples { needed: 2, got: x.len() });
    }
    check_finite(x)?;
    check_finite(y)
}

fn is_constant<T: Real>(x: &[T]) -> bool {
    x.iter().all(|&v| v == x[0])
}

/// Sample Pearson correlation (two-pass, centered).
pub fn pearson<T: Real>(x: &[T], y: &[T]) -> StatResult<T> {
    check_pair(x, y)?;
    if is_constant(x) || is_constant(y) {
        return Err(StatError::ConstantInput);
    }
    let n = T::of_usize(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy = sxy + da * db;
        sxx = sxx + da * da;
        syy = syy + db * db;
    }
    if sxx <= T::zero() || syy <= T::zero() {
        return Err(StatError::ConstantInput);
    }
    let r = sxy / (sxx * syy).sqrt();
    Ok(r.max(-T::one()).min(T::one()))
}

/// 1-based ranks; tied values receive the mean of the ranks they span.
pub fn average_ranks<T: Real>(x: &[T]) -> StatResult<Vec<T>> {
    check_finite(x)?;
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("finite values are ordered"));
    let mut ranks = vec![T::zero(); x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = T::of_usize(start + 1 + end) / T::of(2.0);
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    Ok(ranks)
}

/// Spearman rank correlation: Pearson of average ranks.
pub fn spearman<T: Real>(x: &[T], y: &[T]) -> StatResult<T> {
    check_pair(x, y)?;
    if is_constant(x) || is_constant(y) {
        return Err(StatError::ConstantInput);
    }
    pearson(&average_ranks(x)?, &average_ranks(y)?)
}

/// Point-biserial correlation between a 0/1 vector and a real vector.
///
/// Evaluated through the group-mean form `(M1 − M0)·√(n1·n0) / (√n·√SS_y)`,
/// which is algebraically identical to `pearson(binary, y)`.
pub fn point_biserial<T: Real>(binary: &[T], y: &[T]) -> StatResult<T> {
    check_pair(binary, y)?;
    if binary.iter().any(|&b| b != T::zero() && b != T::one()) {
        return Err(StatError::Domain("point_biserial expects a 0/1 vector".into()));
    }
    if is_constant(binary) || is_constant(y) {
        return Err(StatError::ConstantInput);
    }
    let n = T::of_usize(y.len());
    let my = y.iter().copied().sum::<T>() / n;
    let ss: T = y.iter().map(|&v| (v - my) * (v - my)).sum();
    if ss <= T::zero() {
        return Err(StatError::ConstantInput);
    }
    let (mut sum1, mut n1) = (T::zero(), 0usize);
    let mut sum0 = T::zero();
    for (&b, &v) in binary.iter().zip(y) {
        if b == T::one() {
            sum1 = sum1 + v;
            n1 += 1;
        } else {
            sum0 = sum0 + v;
        }
    }
    let n0 = y.len() - n1;
    let m1 = sum1 / T::of_usize(n1);
    let m0 = sum0 / T::of_usize(n0);
    let r = (m1 - m0) * (T::of_usize(n1) * T::of_usize(n0)).sqrt() / (n.sqrt() * ss.sqrt());
    Ok(r.max(-T::one()).min(T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Textbook Pearson from raw sums, used as an independent oracle.
    fn pearson_by_sums(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let syy: f64 = y.iter().map(|v| v * v).sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(pearson(&x, &x).unwrap(), 1.0);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(pearson(&x, &neg).unwrap(), -1.0);
        // hand evaluation: deviations x (-1.5,-.5,.5,1.5), y (-1.5,.5,-.5,1.5)
        // sxy = 2.25 - .25 - .25 + 2.25 = 4, sxx = syy = 5 -> 0.8
        let r = pearson(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-15);
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(StatError::ConstantInput));
        assert!(matches!(pearson(&[1.0], &[1.0]), Err(StatError::TooFewSamples { .. })));
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0]), Err(StatError::LengthMismatch { .. })));
        assert_eq!(pearson(&[1.0, f64::NAN], &[1.0, 2.0]), Err(StatError::NonFinite));
    }

    #[test]
    fn average_ranks_ties() {
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[5.0, 5.0, 5.0]).unwrap(), vec![2.0, 2.0, 2.0]);
        assert_eq!(average_ranks(&[3.0, 1.0, 2.0]).unwrap(), vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        // ranks x = (1, 2.5, 2.5, 4), y = (1, 2, 3, 4)
        let expected = pearson_by_sums(&[1.0, 2.5, 2.5, 4.0], &[1.0, 2.0, 3.0, 4.0]);
        let r = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((r - expected).abs() < 1e-12);
        // deviations (-1.5,0,0,1.5)·(-1.5,-.5,.5,1.5) = 4.5; sxx = 4.5, syy = 5
        assert!((r - 4.5 / (4.5_f64 * 5.0).sqrt()).abs() < 1e-12);
        assert_eq!(spearman(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]), Err(StatError::ConstantInput));
    }

    #[test]
    fn point_biserial_examples() {
        let b = [0.0, 1.0, 1.0, 0.0];
        assert_eq!(point_biserial(&b, &b).unwrap(), 1.0);
        assert_eq!(point_biserial(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0]), Err(StatError::ConstantInput));
        assert!(matches!(point_biserial(&[0.0, 0.5], &[1.0, 2.0]), Err(StatError::Domain(_))));
        let y = [0.2, 0.6, 0.1, 0.1];
        let bin = [0.0, 1.0, 0.0, 0.0];
        assert!((point_biserial(&bin, &y).unwrap() - pearson_by_sums(&bin, &y)).abs() < 1e-12);
    }

    #[test]
    fn generic_over_f32() {
        let r: f32 = spearman(&[1.0_f32, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap();
        assert!((r - 0.6).abs() < 1e-6);
    }

    fn non_constant(v: &[f64]) -> bool {
        v.iter().any(|&a| a != v[0])
    }

    proptest! {
        #[test]
        fn correlations_bounded_and_symmetric(
            pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..40)
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assume!(non_constant(&x) && non_constant(&y));
            let p = pearson(&x, &y).unwrap();
            let s = spearman(&x, &y).unwrap();
            prop_assert!((-1.0..=1.0).contains(&p) && (-1.0..=1.0).contains(&s));
            prop_assert!((p - pearson(&y, &x).unwrap()).abs() < 1e-12);
            prop_assert!((s - spearman(&y, &x).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn spearman_invariant_under_monotone_transform(
            pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..30)
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assume!(non_constant(&x) && non_constant(&y));
            let fx: Vec<f64> = x.iter().map(|v| v.exp() * 3.0 + 1.0).collect();
            let gy: Vec<f64> = y.iter().map(|v| v * v * v).collect();
            let base = spearman(&x, &y).unwrap();
            prop_assert!((base - spearman(&fx, &gy).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn spearman_reversal_is_minus_one(
            x in prop::collection::btree_set(-1000i32..1000, 2..30)
                .prop_map(|s| s.into_iter().map(f64::from).collect::<Vec<_>>())
        ) {
            let rev: Vec<f64> = x.iter().rev().copied().collect();
            prop_assert!((spearman(&x, &rev).unwrap() + 1.0).abs() < 1e-12);
        }

        #[test]
        fn point_biserial_matches_pearson(
            pairs in prop::collection::vec((any::<bool>(), -10.0f64..10.0), 2..60)
        ) {
            let bin: Vec<f64> = pairs.iter().map(|p| if p.0 { 1.0 } else { 0.0 }).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            prop_assume!(non_constant(&bin) && non_constant(&y));
            let d = point_biserial(&bin, &y).unwrap() - pearson(&bin, &y).unwrap();
            prop_assert!(d.abs() < 1e-12);
        }
    }
}
