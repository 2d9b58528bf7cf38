//! Search quality metrics and phase timing.
//!
//! * Missing rate: `m = sum(m_i) / (n k)`, where `m_i` counts the true k
//!   nearest neighbors of point `i` absent from the returned list.
//! * Distance error: `d_k = mean(found_kth(i) - true_kth(i))`.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forest::NeighborList;
use crate::strategy::Method;

#[derive(Clone, Debug, PartialEq)]
pub struct MissingRate {
    pub rate: f64,
    pub per_point: Vec<usize>,
}

/// Mean distance error plus how many rows were left out of the mean.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceError {
    /// NaN when every row was excluded.
    pub mean: f64,
    /// Rows whose found list was empty.
    pub excluded: usize,
}

pub fn missing_rate(truth: &[NeighborList], found: &[NeighborList], k: usize) -> Result<MissingRate> {
    check_tables(truth, found, k)?;
    let per_point: Vec<usize> = truth
        .iter()
        .zip(found)
        .map(|(t, f)| {
            let found_ids: Vec<_> = f.ids().take(k).collect();
            t.ids().filter(|id| !found_ids.contains(id)).count()
        })
        .collect();
    let total: usize = per_point.iter().sum();
    Ok(MissingRate {
        rate: total as f64 / (truth.len() * k) as f64,
        per_point,
    })
}

/// When a found row is shorter than `k`, its furthest entry stands in for
/// the k-th; empty rows are skipped and counted in
/// [`DistanceError::excluded`].
pub fn distance_error(truth: &[NeighborList], found: &[NeighborList], k: usize) -> Result<DistanceError> {
    check_tables(truth, found, k)?;
    let mut sum = 0.0;
    let mut used = 0usize;
    for (t, f) in truth.iter().zip(found) {
        if f.is_empty() {
            continue;
        }
        let found_kth = f.entries()[k.min(f.len()) - 1].distance;
        let true_kth = t.entries()[k - 1].distance;
        sum += found_kth - true_kth;
        used += 1;
    }
    Ok(DistanceError {
        mean: if used == 0 { f64::NAN } else { sum / used as f64 },
        excluded: truth.len() - used,
    })
}

fn check_tables(truth: &[NeighborList], found: &[NeighborList], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if truth.is_empty() {
        return Err(Error::invalid("empty truth table"));
    }
    if truth.len() != found.len() {
        return Err(Error::invalid(format!(
            "truth has {} rows, found has {}",
            truth.len(),
            found.len()
        )));
    }
    if let Some(i) = truth.iter().position(|row| row.len() != k) {
        return Err(Error::invalid(format!(
            "truth row {i} has {} entries, expected {k}",
            truth[i].len()
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PhaseTimes {
    pub build: Duration,
    pub query: Duration,
}

/// Runs `build`, then `query` on its output, timing each phase on the
/// monotonic clock.
pub fn time_run<B, Q>(build: impl FnOnce() -> B, query: impl FnOnce(&B) -> Q) -> (B, Q, PhaseTimes) {
    let start = Instant::now();
    let built = build();
    let build_time = start.elapsed();
    let start = Instant::now();
    let answered = query(&built);
    let query_time = start.elapsed();
    (
        built,
        answered,
        PhaseTimes {
            build: build_time,
            query: query_time,
        },
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RunMetadata {
    pub method: Method,
    pub trees: usize,
    pub k: usize,
    pub leaf_capacity: usize,
    pub seed: u64,
}

/// Outcome of one forest evaluated against the exact table.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub missing_rate: f64,
    pub distance_error: f64,
    pub excluded_rows: usize,
    pub per_point_missed: Vec<usize>,
    pub times: PhaseTimes,
    pub metadata: RunMetadata,
}

impl EvalReport {
    pub fn evaluate(
        truth: &[NeighborList],
        found: &[NeighborList],
        times: PhaseTimes,
        metadata: RunMetadata,
    ) -> Result<Self> {
        let missing = missing_rate(truth, found, metadata.k)?;
        let dist = distance_error(truth, found, metadata.k)?;
        Ok(Self {
            missing_rate: missing.rate,
            distance_error: dist.mean,
            excluded_rows: dist.excluded,
            per_point_missed: missing.per_point,
            times,
            metadata,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::Neighbor;

    fn list(pairs: &[(usize, f64)]) -> NeighborList {
        NeighborList::from_entries(pairs.iter().map(|&(id, distance)| Neighbor { id, distance }).collect()).unwrap()
    }

    fn kth_row(k: usize, kth: f64, base: usize) -> NeighborList {
        list(&(0..k).map(|i| (base + i, if i + 1 == k { kth } else { kth * i as f64 / k as f64 })).collect::<Vec<_>>())
    }

    #[test]
    fn perfect_retrieval_scores_zero() {
        let truth = vec![list(&[(1, 0.5), (2, 1.0)]), list(&[(0, 0.5), (2, 0.7)])];
        let m = missing_rate(&truth, &truth, 2).unwrap();
        assert_eq!(m.rate, 0.0);
        assert_eq!(m.per_point, vec![0, 0]);
        let d = distance_error(&truth, &truth, 2).unwrap();
        assert_eq!(d, DistanceError { mean: 0.0, excluded: 0 });
    }

    #[test]
    fn set_difference_counts_misses() {
        let truth = vec![list(&[(1, 1.0), (2, 2.0), (3, 3.0), (4, 4.0), (5, 5.0)])];
        let found = vec![list(&[(1, 1.0), (2, 2.0), (10, 6.0), (11, 7.0), (12, 8.0)])];
        let m = missing_rate(&truth, &found, 5).unwrap();
        assert_eq!(m.per_point, vec![3]);
        assert!((m.rate - 0.6).abs() < 1e-15);
    }

    #[test]
    fn empty_found_rows_miss_everything() {
        let truth = vec![kth_row(3, 1.0, 10), kth_row(3, 2.0, 20)];
        let found = vec![NeighborList::default(), NeighborList::default()];
        assert_eq!(missing_rate(&truth, &found, 3).unwrap().rate, 1.0);
        let d = distance_error(&truth, &found, 3).unwrap();
        assert!(d.mean.is_nan());
        assert_eq!(d.excluded, 2);
    }

    #[test]
    fn distance_error_hand_case() {
        let truth = vec![kth_row(2, 1.0, 10), kth_row(2, 2.0, 20)];
        let found = vec![kth_row(2, 1.5, 30), kth_row(2, 2.0, 20)];
        let d = distance_error(&truth, &found, 2).unwrap();
        // Per-row loop oracle.
        let mut acc = 0.0;
        for (t, f) in truth.iter().zip(&found) {
            acc += f.entries()[1].distance - t.entries()[1].distance;
        }
        assert_eq!(d.mean, acc / 2.0);
        assert!((d.mean - 0.25).abs() < 1e-15);
    }

    #[test]
    fn short_rows_use_their_furthest_entry() {
        let truth = vec![kth_row(3, 1.0, 10), kth_row(3, 1.0, 20)];
        let found = vec![list(&[(10, 0.0), (40, 4.0)]), NeighborList::default()];
        let d = distance_error(&truth, &found, 3).unwrap();
        assert_eq!(d.excluded, 1);
        assert_eq!(d.mean, 3.0);
        let m = missing_rate(&truth, &found, 3).unwrap();
        assert_eq!(m.per_point, vec![2, 3]);
    }

    #[test]
    fn table_shape_errors() {
        let truth = vec![kth_row(2, 1.0, 0)];
        assert!(missing_rate(&truth, &[], 2).is_err());
        assert!(missing_rate(&truth, &truth, 3).is_err());
        assert!(distance_error(&[], &[], 2).is_err());
        assert!(distance_error(&truth, &truth, 0).is_err());
    }

    #[test]
    fn timing_is_non_negative_and_threads_outputs() {
        let (b, q, t) = time_run(|| 2, |b| b * 21);
        assert_eq!((b, q), (2, 42));
        assert!(t.build >= Duration::ZERO && t.query >= Duration::ZERO);
    }
}
