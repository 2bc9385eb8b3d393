use rayon::prelude::*;
use serde::Serialize;

use super::series::{check_lengths, counts, BoundarySeries};
use super::MetricsError;
use crate::stats::RngStream;

/// Indices `i` with `v[i] > 0`, `v[i] > v[i−1]` and `v[i] ≥ v[i+1]`, taking
/// the values outside the series as zero. A plateau yields its first index.
pub fn find_peaks<T: PartialOrd + Copy + Default>(values: &[T]) -> Vec<usize> {
    let zero = T::default();
    (0..values.len())
        .filter(|&i| {
            let v = values[i];
            let prev = if i == 0 { zero } else { values[i - 1] };
            let next = values.get(i + 1).copied().unwrap_or(zero);
            v > zero && v > prev && v >= next
        })
        .collect()
}

/// Number of peaks in `a` that have a peak in `b` within `tolerance` tokens.
fn matched_peaks(a: &[usize], b: &[usize], tolerance: usize) -> usize {
    a.iter().filter(|&&p| b.iter().any(|&q| p.abs_diff(q) <= tolerance)).count()
}

fn overlap_proportion(a: &[usize], b: &[usize], tolerance: usize) -> Option<f64> {
    let denom = a.len().min(b.len());
    if denom == 0 {
        return None;
    }
    Some((matched_peaks(a, b, tolerance).min(denom)) as f64 / denom as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyIteration {
    pub iteration: usize,
    pub prop_human_human: Option<f64>,
    pub prop_human_llm: Option<f64>,
    /// Fewest peaks among the main and human-comparison groups.
    pub n_events_used: usize,
    /// Fewest peaks among the main and LLM-comparison groups.
    pub n_events_used_llm: usize,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyParams {
    pub group_size: usize,
    pub iterations: usize,
    pub seed: u64,
    pub tolerance: usize,
}

impl Default for ConsistencyParams {
    fn default() -> Self {
        Self { group_size: 10, iterations: 100, seed: 0, tolerance: 0 }
    }
}

fn group_peaks(members: &[&BoundarySeries], len: usize) -> Vec<usize> {
    // peaks of the mean series equal peaks of the count series
    find_peaks(&counts(members, len))
}

/// One draw of the split-group test.
pub fn consistency_iteration(
    humans: &[&BoundarySeries],
    llms: &[&BoundarySeries],
    len: usize,
    params: &ConsistencyParams,
    iteration: usize,
) -> ConsistencyIteration {
    let g = params.group_size;
    let mut rng = RngStream::new(params.seed, iteration as u64);
    let mut order: Vec<usize> = (0..humans.len()).collect();
    rng.shuffle(&mut order);
    let main: Vec<&BoundarySeries> = order[..g].iter().map(|&i| humans[i]).collect();
    let comparison: Vec<&BoundarySeries> = order[g..2 * g].iter().map(|&i| humans[i]).collect();
    let llm_pick: Vec<&BoundarySeries> = rng.sample_indices(llms.len(), g).into_iter().map(|i| llms[i]).collect();

    let (pm, ph, pl) = (group_peaks(&main, len), group_peaks(&comparison, len), group_peaks(&llm_pick, len));
    let hh = overlap_proportion(&pm, &ph, params.tolerance);
    let hl = overlap_proportion(&pm, &pl, params.tolerance);
    let diagnostic = match (pm.is_empty(), ph.is_empty(), pl.is_empty()) {
        (false, false, false) => None,
        (m, h, l) => Some(format!(
            "iteration {iteration}: zero peaks in {}",
            [(m, "main"), (h, "human comparison"), (l, "llm comparison")]
                .iter()
                .filter(|x| x.0)
                .map(|x| x.1)
                .collect::<Vec<_>>()
                .join(", ")
        )),
    };
    ConsistencyIteration {
        iteration,
        prop_human_human: hh,
        prop_human_llm: hl,
        n_events_used: pm.len().min(ph.len()),
        n_events_used_llm: pm.len().min(pl.len()),
        diagnostic,
    }
}

/// Split-group consistency: per iteration the humans are split into a main
/// and a comparison group of `group_size`, `group_size` LLM instances are
/// drawn without replacement, and the peak sets of the group means are
/// compared relative to the smaller of the two peak counts.
pub fn between_group_consistency(
    humans: &[&BoundarySeries],
    llms: &[&BoundarySeries],
    params: &ConsistencyParams,
) -> Result<Vec<ConsistencyIteration>, MetricsError> {
    let g = params.group_size;
    if g == 0 {
        return Err(MetricsError::TooFewMembers { needed: 1, got: 0 });
    }
    if humans.len() < 2 * g {
        return Err(MetricsError::TooFewMembers { needed: 2 * g, got: humans.len() });
    }
    if llms.len() < g {
        return Err(MetricsError::TooFewMembers { needed: g, got: llms.len() });
    }
    let all: Vec<&BoundarySeries> = humans.iter().chain(llms).copied().collect();
    let len = check_lengths(&all)?;
    Ok((0..params.iterations)
        .into_par_iter()
        .map(|it| consistency_iteration(humans, llms, len, params, it))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::BoundarySet;
    use crate::seg_metrics::to_series;

    fn s(b: &[usize], len: usize) -> BoundarySeries {
        to_series(&BoundarySet::new(b.iter().copied()), len, "n", "x").unwrap()
    }

    #[test]
    fn peak_examples() {
        assert_eq!(find_peaks(&[0.0, 0.5, 0.0, 0.3, 0.0]), vec![1, 3]);
        assert_eq!(find_peaks(&[0.0, 0.4, 0.4, 0.0]), vec![1]);
        assert!(find_peaks(&[0.0; 6]).is_empty());
        // edges count against an implicit zero
        assert_eq!(find_peaks(&[0.7, 0.1, 0.2]), vec![0, 2]);
    }

    #[test]
    fn identical_cohorts_give_one() {
        let humans: Vec<BoundarySeries> = (0..20).map(|_| s(&[3, 9, 15], 20)).collect();
        let llms: Vec<BoundarySeries> = (0..20).map(|_| s(&[3, 9, 15], 20)).collect();
        let h: Vec<&BoundarySeries> = humans.iter().collect();
        let l: Vec<&BoundarySeries> = llms.iter().collect();
        let out = between_group_consistency(&h, &l, &ConsistencyParams { seed: 1, ..Default::default() }).unwrap();
        assert_eq!(out.len(), 100);
        assert!(out.iter().all(|it| it.prop_human_human == Some(1.0) && it.prop_human_llm == Some(1.0)));
    }

    #[test]
    fn disjoint_llms_give_zero() {
        let humans: Vec<BoundarySeries> = (0..20).map(|_| s(&[3, 9], 20)).collect();
        let llms: Vec<BoundarySeries> = (0..20).map(|_| s(&[5, 12], 20)).collect();
        let h: Vec<&BoundarySeries> = humans.iter().collect();
        let l: Vec<&BoundarySeries> = llms.iter().collect();
        let out = between_group_consistency(&h, &l, &ConsistencyParams { seed: 2, ..Default::default() }).unwrap();
        assert!(out.iter().all(|it| it.prop_human_llm == Some(0.0)));
    }

    #[test]
    fn zero_peaks_is_undefined_not_zero() {
        let humans: Vec<BoundarySeries> = (0..4).map(|_| s(&[2], 6)).collect();
        let llms: Vec<BoundarySeries> = (0..2).map(|_| s(&[], 6)).collect();
        let h: Vec<&BoundarySeries> = humans.iter().collect();
        let l: Vec<&BoundarySeries> = llms.iter().collect();
        let params = ConsistencyParams { group_size: 2, iterations: 5, seed: 0, tolerance: 0 };
        let out = between_group_consistency(&h, &l, &params).unwrap();
        assert!(out.iter().all(|it| it.prop_human_llm.is_none() && it.diagnostic.is_some()));
        assert!(out.iter().all(|it| it.prop_human_human == Some(1.0)));
    }

    #[test]
    fn seeded_runs_are_identical() {
        let humans: Vec<BoundarySeries> = (0..20).map(|i| s(&[1 + i % 5, 10 + i % 3], 20)).collect();
        let h: Vec<&BoundarySeries> = humans.iter().collect();
        let params = ConsistencyParams { seed: 77, ..Default::default() };
        let a = between_group_consistency(&h, &h, &params).unwrap();
        let b = between_group_consistency(&h, &h, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn precondition_errors() {
        let humans: Vec<BoundarySeries> = (0..3).map(|_| s(&[2], 6)).collect();
        let h: Vec<&BoundarySeries> = humans.iter().collect();
        let params = ConsistencyParams { group_size: 2, iterations: 1, seed: 0, tolerance: 0 };
        assert!(matches!(between_group_consistency(&h, &h, &params), Err(MetricsError::TooFewMembers { .. })));
    }

    #[test]
    fn sampler_values_lie_in_enumerated_splits() {
        let humans = [s(&[2, 6], 10), s(&[2, 7], 10), s(&[4, 6], 10), s(&[2, 8], 10)];
        let llms = [s(&[2], 10), s(&[6, 8], 10), s(&[4], 10)];
        let h: Vec<&BoundarySeries> = humans.iter().collect();
        let l: Vec<&BoundarySeries> = llms.iter().collect();

        // every (main pair, llm pair) with the comparison group being the remaining humans
        let peaks = |idx: &[usize], pool: &[&BoundarySeries]| -> Vec<usize> {
            let mut c = vec![0.0; 10];
            for &i in idx {
                for (k, &v) in pool[i].values.iter().enumerate() {
                    c[k] += v as f64 / idx.len() as f64;
                }
            }
            find_peaks(&c)
        };
        let frac = |a: &[usize], b: &[usize]| {
            let d = a.len().min(b.len());
            (d > 0).then(|| a.iter().filter(|p| b.contains(p)).count() as f64 / d as f64)
        };
        let mut expected = Vec::new();
        for a in 0..4 {
            for b in a + 1..4 {
                let rest: Vec<usize> = (0..4).filter(|&i| i != a && i != b).collect();
                for x in 0..3 {
                    for y in x + 1..3 {
                        let pm = peaks(&[a, b], &h);
                        let ph = peaks(&rest, &h);
                        let pl = peaks(&[x, y], &l);
                        expected.push((frac(&pm, &ph), frac(&pm, &pl)));
                    }
                }
            }
        }
        let params = ConsistencyParams { group_size: 2, iterations: 200, seed: 5, tolerance: 0 };
        let out = between_group_consistency(&h, &l, &params).unwrap();
        let mut seen = std::collections::HashSet::new();
        for it in &out {
            let pair = (it.prop_human_human, it.prop_human_llm);
            let pos = expected.iter().position(|e| *e == pair);
            assert!(pos.is_some(), "iteration {} gave {pair:?}", it.iteration);
            seen.insert(format!("{pair:?}"));
        }
        let distinct: std::collections::HashSet<String> = expected.iter().map(|e| format!("{e:?}")).collect();
        assert_eq!(seen, distinct);
    }
}
