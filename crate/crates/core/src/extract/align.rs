//! Global token alignment (Needleman–Wunsch) over normalized tokens.

use serde::Serialize;

use crate::corpus::Token;

pub const MATCH_SCORE: i32 = 2;
pub const MISMATCH_SCORE: i32 = -1;
pub const GAP_SCORE: i32 = -1;

/// Inputs longer than this use a diagonal band instead of the full matrix.
pub const BANDED_THRESHOLD: usize = 5_000;
const MIN_BAND: usize = 32;
const NEG: i32 = i32::MIN / 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentResult {
    /// Matched `(source index, output index)` pairs, strictly increasing in both.
    pub pairs: Vec<(usize, usize)>,
    /// Fraction of output tokens matched.
    pub coverage: f64,
}

pub(crate) fn tokens_match(a: &Token, b: &Token) -> bool {
    if a.normalized.is_empty() && b.normalized.is_empty() {
        a.surface == b.surface
    } else {
        a.normalized == b.normalized
    }
}

/// Score rows restricted to a column window per row.
struct Grid {
    lo: Vec<usize>,
    cells: Vec<Vec<i32>>,
}

impl Grid {
    fn get(&self, i: usize, j: usize) -> i32 {
        let lo = self.lo[i];
        if j < lo {
            return NEG;
        }
        self.cells[i].get(j - lo).copied().unwrap_or(NEG)
    }
}

fn column_windows(n: usize, m: usize, banded: bool) -> Vec<(usize, usize)> {
    if !banded {
        return vec![(0, m); n + 1];
    }
    let width = (n.max(m) / 10).max(MIN_BAND) + n.abs_diff(m);
    (0..=n)
        .map(|i| {
            let center = (i * m + n / 2) / n.max(1);
            (center.saturating_sub(width), (center + width).min(m))
        })
        .collect()
}

fn fill(source: &[Token], output: &[Token], banded: bool) -> Grid {
    let (n, m) = (source.len(), output.len());
    let windows = column_windows(n, m, banded);
    let mut grid = Grid { lo: windows.iter().map(|w| w.0).collect(), cells: Vec::with_capacity(n + 1) };
    for (i, &(lo, hi)) in windows.iter().enumerate() {
        let mut row = Vec::with_capacity(hi - lo + 1);
        for j in lo..=hi {
            let score = if i == 0 {
                GAP_SCORE * j as i32
            } else if j == 0 {
                GAP_SCORE * i as i32
            } else {
                let s = if tokens_match(&source[i - 1], &output[j - 1]) { MATCH_SCORE } else { MISMATCH_SCORE };
                let diag = grid.get(i - 1, j - 1) + s;
                let up = grid.get(i - 1, j) + GAP_SCORE;
                let left = if j > lo { row[j - lo - 1] } else { NEG } + GAP_SCORE;
                diag.max(up).max(left)
            };
            row.push(score);
        }
        grid.cells.push(row);
    }
    grid
}

/// Aligns `output` against `source` with match +2, mismatch −1, gap −1.
///
/// Among equally scoring alignments the traceback skips source tokens
/// before taking a diagonal step, which places matches as early in the
/// source as possible.
pub fn align_tokens(source: &[Token], output: &[Token]) -> AlignmentResult {
    let (n, m) = (source.len(), output.len());
    if n == 0 || m == 0 {
        return AlignmentResult { pairs: Vec::new(), coverage: 0.0 };
    }
    let banded = n.max(m) > BANDED_THRESHOLD;
    let grid = fill(source, output, banded);
    let mut pairs = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = grid.get(i, j);
        if i > 0 && grid.get(i - 1, j) + GAP_SCORE == here {
            i -= 1;
            continue;
        }
        if i > 0 && j > 0 {
            let is_match = tokens_match(&source[i - 1], &output[j - 1]);
            let s = if is_match { MATCH_SCORE } else { MISMATCH_SCORE };
            if grid.get(i - 1, j - 1) + s == here {
                if is_match {
                    pairs.push((i - 1, j - 1));
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        debug_assert!(j > 0 && grid.get(i, j - 1) + GAP_SCORE == here);
        j -= 1;
    }
    pairs.reverse();
    let coverage = pairs.len() as f64 / m as f64;
    AlignmentResult { pairs, coverage }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use std::collections::HashMap;

    fn toks(words: &[&str]) -> Vec<Token> {
        tokenize(&words.join(" "))
    }

    /// Top-down memoized optimum of the same scoring scheme.
    fn oracle_best_score(a: &[Token], b: &[Token]) -> i32 {
        fn go(i: usize, j: usize, a: &[Token], b: &[Token], memo: &mut HashMap<(usize, usize), i32>) -> i32 {
            if i == a.len() {
                return GAP_SCORE * (b.len() - j) as i32;
            }
            if j == b.len() {
                return GAP_SCORE * (a.len() - i) as i32;
            }
            if let Some(&v) = memo.get(&(i, j)) {
                return v;
            }
            let s = if tokens_match(&a[i], &b[j]) { MATCH_SCORE } else { MISMATCH_SCORE };
            let v = (go(i + 1, j + 1, a, b, memo) + s)
                .max(go(i + 1, j, a, b, memo) + GAP_SCORE)
                .max(go(i, j + 1, a, b, memo) + GAP_SCORE);
            memo.insert((i, j), v);
            v
        }
        go(0, 0, a, b, &mut HashMap::new())
    }

    /// Best score of any path through exactly these matched pairs: each
    /// unmatched stretch of `di` source and `dj` output tokens costs max(di, dj).
    fn score_of_pairs(pairs: &[(usize, usize)], n: usize, m: usize) -> i32 {
        let mut score = 0;
        let (mut pi, mut pj) = (0usize, 0usize);
        for &(i, j) in pairs {
            score -= (i - pi).max(j - pj) as i32;
            score += MATCH_SCORE;
            pi = i + 1;
            pj = j + 1;
        }
        score - (n - pi).max(m - pj) as i32
    }

    #[test]
    fn identity_alignment() {
        let words: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
        let w: Vec<&str> = words.iter().map(String::as_str).collect();
        let r = align_tokens(&toks(&w), &toks(&w));
        assert_eq!(r.pairs, (0..10).map(|i| (i, i)).collect::<Vec<_>>());
        assert_eq!(r.coverage, 1.0);
    }

    #[test]
    fn single_substitution_keeps_offsets() {
        let src: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
        let mut out = src.clone();
        out[4] = "zz".into();
        let s: Vec<&str> = src.iter().map(String::as_str).collect();
        let o: Vec<&str> = out.iter().map(String::as_str).collect();
        let (a, b) = (toks(&s), toks(&o));
        let r = align_tokens(&a, &b);
        assert_eq!(r.pairs.len(), 9);
        assert!((r.coverage - 0.9).abs() < 1e-15);
        assert!(r.pairs.iter().all(|&(i, j)| i == j && i != 4));
        assert_eq!(score_of_pairs(&r.pairs, 10, 10), oracle_best_score(&a, &b));
    }

    #[test]
    fn reversed_distinct_tokens_match_at_most_once() {
        let src = toks(&["a", "b", "c", "d", "e"]);
        let out = toks(&["e", "d", "c", "b", "a"]);
        // exhaustive: every strictly increasing subset of equal pairs
        let equal: Vec<(usize, usize)> =
            (0..5).flat_map(|i| (0..5).map(move |j| (i, j))).filter(|&(i, j)| tokens_match(&src[i], &out[j])).collect();
        let mut best = 0;
        for mask in 0u32..(1 << equal.len()) {
            let chosen: Vec<_> = (0..equal.len()).filter(|k| mask & (1 << k) != 0).map(|k| equal[k]).collect();
            if chosen.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1) {
                best = best.max(chosen.len());
            }
        }
        assert_eq!(best, 1);
        let r = align_tokens(&src, &out);
        assert!(r.pairs.len() <= best);
        assert!(r.coverage <= 0.2);
    }

    #[test]
    fn ties_prefer_earlier_source_match() {
        let r = align_tokens(&toks(&["a", "a"]), &toks(&["a"]));
        assert_eq!(r.pairs, vec![(0, 0)]);
    }

    #[test]
    fn alignment_ignores_case_and_edge_punctuation() {
        let r = align_tokens(&toks(&["The", "dog", "ran."]), &toks(&["the", "dog", "ran"]));
        assert_eq!(r.pairs.len(), 3);
    }

    #[test]
    fn banded_agrees_with_full_on_near_identity() {
        let src: Vec<String> = (0..400).map(|i| format!("t{}", i % 37)).collect();
        let mut out = src.clone();
        out.remove(120);
        out.insert(300, "extra".into());
        out[50] = "zz".into();
        let a = tokenize(&src.join(" "));
        let b = tokenize(&out.join(" "));
        let full = fill(&a, &b, false);
        let band = fill(&a, &b, true);
        assert_eq!(full.get(a.len(), b.len()), band.get(a.len(), b.len()));
    }

    proptest::proptest! {
        #[test]
        fn matches_oracle_optimum_and_is_monotone(
            src in proptest::collection::vec(0u8..4, 1..12),
            out in proptest::collection::vec(0u8..4, 1..12),
        ) {
            let a = tokenize(&src.iter().map(|v| format!("x{v}")).collect::<Vec<_>>().join(" "));
            let b = tokenize(&out.iter().map(|v| format!("x{v}")).collect::<Vec<_>>().join(" "));
            let r = align_tokens(&a, &b);
            proptest::prop_assert!(r.pairs.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
            proptest::prop_assert!(r.pairs.iter().all(|&(i, j)| tokens_match(&a[i], &b[j])));
            proptest::prop_assert_eq!(score_of_pairs(&r.pairs, a.len(), b.len()), oracle_best_score(&a, &b));
            proptest::prop_assert!((0.0..=1.0).contains(&r.coverage));
        }
    }
}
