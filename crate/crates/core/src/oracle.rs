//! Exact k-nn by full scan. Ground truth for every metric.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forest::{check_query, rank, NeighborList};
use crate::primitives::{Dataset, PointId};

/// Exact k nearest neighbors of `x`, ranked with the same `(distance, id)`
/// order as forest queries.
pub fn exact_knn(data: &Dataset, x: &[f64], k: usize, self_id: Option<PointId>) -> Result<NeighborList> {
    check_query(data, x, k, self_id)?;
    let available = data.len() - usize::from(self_id.is_some());
    if k > available {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the {available} points available"
        )));
    }
    Ok(rank(data, x, data.ids(), k, self_id))
}

/// Row `i` holds the exact k-nn of point `i`, excluding `i` itself.
pub fn all_true_neighbors(data: &Dataset, k: usize) -> Result<Vec<NeighborList>> {
    if k == 0 || k >= data.len() {
        return Err(Error::invalid(format!(
            "k = {k} must lie in 1..={}",
            data.len().saturating_sub(1)
        )));
    }
    let row = |id: PointId| rank(data, data.point(id), data.ids(), k, Some(id));
    #[cfg(feature = "parallel")]
    let rows = data.ids().into_par_iter().map(row).collect();
    #[cfg(not(feature = "parallel"))]
    let rows = data.ids().map(row).collect();
    Ok(rows)
}
