use serde::Serialize;

use super::RecallError;
use crate::embed::EmbeddingVector;
use crate::scalar::Real;
use crate::stats::{average_ranks, pearson};

/// Row-major matrix of Spearman correlations between two lists of segment vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityMatrix<T> {
    pub row_owner: String,
    pub col_owner: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<T>,
}

impl<T: Real> SimilarityMatrix<T> {
    pub fn from_rows(row_owner: impl Into<String>, col_owner: impl Into<String>, rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged matrix");
        Self {
            row_owner: row_owner.into(),
            col_owner: col_owner.into(),
            rows: rows.len(),
            cols,
            values: rows.concat(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    fn square_len(&self) -> usize {
        assert_eq!(self.rows, self.cols, "diagonals need a square matrix");
        self.rows
    }

    pub fn diagonal_mean(&self) -> T {
        let n = self.square_len();
        (0..n).map(|i| self.get(i, i)).sum::<T>() / T::of_usize(n)
    }

    /// Mean of the anti-diagonal, running from the top-right to the bottom-left corner.
    pub fn anti_diagonal_mean(&self) -> T {
        let n = self.square_len();
        (0..n).map(|i| self.get(i, n - 1 - i)).sum::<T>() / T::of_usize(n)
    }

    pub fn row_maxima(&self) -> Vec<T> {
        (0..self.rows).map(|i| self.row(i).iter().copied().fold(T::neg_infinity(), T::max)).collect()
    }
}

/// Average ranks of each vector, with checks for model and dimension agreement.
pub(crate) fn ranked<T: Real>(vectors: &[EmbeddingVector<T>]) -> Result<Vec<Vec<T>>, RecallError> {
    vectors
        .iter()
        .map(|v| {
            let undefined = || RecallError::UndefinedEntry { segment: format!("{}#{}", v.owner_id, v.event_index) };
            if v.is_constant() || v.dim() < 2 {
                return Err(undefined());
            }
            average_ranks(&v.values).map_err(|_| undefined())
        })
        .collect()
}

fn check_compatible<T: Real>(a: &[EmbeddingVector<T>], b: &[EmbeddingVector<T>]) -> Result<(), RecallError> {
    if a.is_empty() || b.is_empty() {
        return Err(RecallError::Empty);
    }
    let (model, dim) = (&a[0].model_id, a[0].dim());
    for v in a.iter().chain(b) {
        if &v.model_id != model {
            return Err(RecallError::ModelMismatch { expected: model.clone(), got: v.model_id.clone() });
        }
        if v.dim() != dim {
            return Err(RecallError::DimensionMismatch { expected: dim, got: v.dim() });
        }
    }
    Ok(())
}

pub(crate) fn matrix_from_ranks<T: Real>(row_owner: &str, col_owner: &str, ra: &[Vec<T>], rb: &[Vec<T>]) -> SimilarityMatrix<T> {
    let mut values = Vec::with_capacity(ra.len() * rb.len());
    for x in ra {
        for y in rb {
            // ranks of a non-constant vector are never constant
            values.push(pearson(x, y).expect("ranks of non-constant vectors"));
        }
    }
    SimilarityMatrix { row_owner: row_owner.into(), col_owner: col_owner.into(), rows: ra.len(), cols: rb.len(), values }
}

/// Entry `(i, j)` is the Spearman correlation of `a[i]` with `b[j]`.
pub fn similarity_matrix<T: Real>(a: &[EmbeddingVector<T>], b: &[EmbeddingVector<T>]) -> Result<SimilarityMatrix<T>, RecallError> {
    check_compatible(a, b)?;
    let (ra, rb) = (ranked(a)?, ranked(b)?);
    Ok(matrix_from_ranks(&a[0].owner_id, &b[0].owner_id, &ra, &rb))
}

/// Source coordinate and interpolation weight for output index `dst`.
/// Center-aligned: `src = (dst + 0.5) * input / output - 0.5`, clamped to `[0, input - 1]`.
fn source_coordinate<T: Real>(dst: usize, input: usize, output: usize) -> (usize, usize, T) {
    let num = T::of_usize((2 * dst + 1) * input) - T::of_usize(output);
    let src = (num / T::of_usize(2 * output)).max(T::zero()).min(T::of_usize(input - 1));
    let lo = src.floor().to_usize().expect("clamped coordinate");
    let hi = (lo + 1).min(input - 1);
    (lo, hi, src - T::of_usize(lo))
}

/// Bilinear resize to `n × n`.
pub fn resize_square<T: Real>(m: &SimilarityMatrix<T>, n: usize) -> SimilarityMatrix<T> {
    assert!(m.rows > 0 && m.cols > 0 && n > 0, "resize needs a non-empty matrix and target");
    if m.rows == n && m.cols == n {
        return m.clone();
    }
    let ys: Vec<(usize, usize, T)> = (0..n).map(|i| source_coordinate(i, m.rows, n)).collect();
    let xs: Vec<(usize, usize, T)> = (0..n).map(|j| source_coordinate(j, m.cols, n)).collect();
    let mut values = Vec::with_capacity(n * n);
    for &(y0, y1, wy) in &ys {
        for &(x0, x1, wx) in &xs {
            let top = m.get(y0, x0) * (T::one() - wx) + m.get(y0, x1) * wx;
            let bottom = m.get(y1, x0) * (T::one() - wx) + m.get(y1, x1) * wx;
            values.push(top * (T::one() - wy) + bottom * wy);
        }
    }
    SimilarityMatrix { row_owner: m.row_owner.clone(), col_owner: m.col_owner.clone(), rows: n, cols: n, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ev(owner: &str, i: usize, values: Vec<f64>) -> EmbeddingVector<f64> {
        EmbeddingVector { owner_id: owner.into(), event_index: i, model_id: "m".into(), values }
    }

    #[test]
    fn self_similarity_diagonal() {
        let a = vec![ev("n", 0, vec![1.0, 5.0, 2.0, 4.0]), ev("n", 1, vec![3.0, 1.0, 2.0, 9.0])];
        let m = similarity_matrix(&a, &a).unwrap();
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(1, 1), 1.0);
    }

    #[test]
    fn reversed_ordering_is_minus_one() {
        let a = vec![ev("a", 0, vec![0.1, 0.4, 0.3, 0.9])];
        let b = vec![ev("b", 0, vec![-0.1, -0.4, -0.3, -0.9])];
        assert_eq!(similarity_matrix(&a, &b).unwrap().get(0, 0), -1.0);
    }

    #[test]
    fn hand_ranked_two_by_two() {
        // ranks: a0 [1,3,2,4], a1 [2.5,2.5,1,4]; b0 [4,3,2,1], b1 [1,2,3,4]
        let a = vec![ev("a", 0, vec![10.0, 30.0, 20.0, 40.0]), ev("a", 1, vec![5.0, 5.0, 1.0, 8.0])];
        let b = vec![ev("b", 0, vec![4.0, 3.0, 2.0, 1.0]), ev("b", 1, vec![0.1, 0.2, 0.3, 0.4])];
        let m = similarity_matrix(&a, &b).unwrap();
        // a0 vs b1: deviations [-1.5,.5,-.5,1.5] and [-1.5,-.5,.5,1.5]: sxy = 2.25-.25-.25+2.25 = 4, sxx = syy = 5
        assert_relative_eq!(m.get(0, 1), 0.8, epsilon = 1e-12);
        assert_relative_eq!(m.get(0, 0), -0.8, epsilon = 1e-12);
        // a1 deviations [0,0,-1.5,1.5], sxx = 4.5; vs b1: sxy = -.75+2.25 = 1.5
        assert_relative_eq!(m.get(1, 1), 1.5 / (4.5f64 * 5.0).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(m.get(1, 0), -1.5 / (4.5f64 * 5.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn constant_vector_named() {
        let a = vec![ev("p/n", 3, vec![1.0, 1.0, 1.0])];
        let b = vec![ev("n", 0, vec![1.0, 2.0, 3.0])];
        match similarity_matrix(&a, &b) {
            Err(RecallError::UndefinedEntry { segment }) => assert_eq!(segment, "p/n#3"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mismatches_rejected() {
        let a = vec![ev("a", 0, vec![1.0, 2.0, 3.0])];
        let mut b = vec![ev("b", 0, vec![1.0, 2.0])];
        assert!(matches!(similarity_matrix(&a, &b), Err(RecallError::DimensionMismatch { .. })));
        b[0].values.push(0.0);
        b[0].model_id = "k".into();
        assert!(matches!(similarity_matrix(&a, &b), Err(RecallError::ModelMismatch { .. })));
    }

    #[test]
    fn resize_two_to_three() {
        let m = SimilarityMatrix::from_rows("a", "b", &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let r = resize_square(&m, 3);
        let expected: [[f64; 3]; 3] = [[1.0, 0.5, 0.0], [0.5, 0.5, 0.5], [0.0, 0.5, 1.0]];
        for (i, row) in expected.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                assert!((r.get(i, j) - e).abs() < 1e-12, "({i},{j}) = {}", r.get(i, j));
            }
        }
    }

    #[test]
    fn resize_constant_extension_and_identity() {
        let one = SimilarityMatrix::from_rows("a", "b", &[vec![0.3]]);
        assert!(resize_square(&one, 4).values.iter().all(|&v| v == 0.3));
        let m = SimilarityMatrix::from_rows("a", "b", &[vec![0.1, 0.2], vec![0.3, 0.4]]);
        assert_eq!(resize_square(&m, 2), m);
    }

    #[test]
    fn resize_three_by_two_hand() {
        // columns 2 -> 3: src x = -1/6, 1/2, 7/6 -> clamp gives x0, mid, x1; rows unchanged
        let m = SimilarityMatrix::from_rows("a", "b", &[vec![0.2, 0.6], vec![0.5, -0.1], vec![0.0, 0.4]]);
        let r = resize_square(&m, 3);
        let expected = [[0.2, 0.4, 0.6], [0.5, 0.2, -0.1], [0.0, 0.2, 0.4]];
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(r.get(i, j), expected[i][j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn resize_f32() {
        let m = SimilarityMatrix::from_rows("a", "b", &[vec![1.0f32, 0.0], vec![0.0, 1.0]]);
        assert_eq!(resize_square(&m, 3).get(1, 1), 0.5);
    }

    proptest! {
        #[test]
        fn resize_stays_in_range(rows in 1usize..7, cols in 1usize..7, n in 1usize..10, seed in any::<u64>()) {
            let mut rng = crate::stats::RngStream::new(seed, 0);
            let data: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| rng.uniform() * 2.0 - 1.0).collect()).collect();
            let m = SimilarityMatrix::from_rows("a", "b", &data);
            let lo = m.values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = m.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for v in resize_square(&m, n).values {
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }
}
