//! Forests of random projection trees and k-nn queries over them.
//!
//! A query is routed to one leaf per tree. The union of those leaves, with
//! duplicates removed, is ranked by Euclidean distance to the query.

use std::cmp::Ordering;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::primitives::{distance_unchecked, Dataset, PointId};
use crate::rng::SeedStream;
use crate::tree::{build_tree, RpTree, TreeConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub id: PointId,
    pub distance: f64,
}

/// Total order used to rank neighbors everywhere in the crate: by distance,
/// then by ascending id.
pub fn neighbor_order(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id))
}

/// Neighbors sorted ascending by `(distance, id)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NeighborList {
    entries: Vec<Neighbor>,
}

impl NeighborList {
    /// Sorts `entries` into neighbor order. Duplicate ids are rejected.
    pub fn from_entries(mut entries: Vec<Neighbor>) -> Result<Self> {
        entries.sort_by(neighbor_order);
        let mut ids: Vec<PointId> = entries.iter().map(|n| n.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("neighbor list contains a duplicate id"));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[Neighbor] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = PointId> + '_ {
        self.entries.iter().map(|n| n.id)
    }

    pub fn distances(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|n| n.distance)
    }

    /// Distance of the furthest entry.
    pub fn last_distance(&self) -> Option<f64> {
        self.entries.last().map(|n| n.distance)
    }

    pub fn truncated(&self, k: usize) -> Self {
        Self {
            entries: self.entries[..k.min(self.entries.len())].to_vec(),
        }
    }
}

/// Ranks `candidates` (already free of duplicates) against `x` and keeps the
/// first `k`. Shared by the forest and the exact oracle.
pub(crate) fn rank(
    data: &Dataset,
    x: &[f64],
    candidates: impl Iterator<Item = PointId>,
    k: usize,
    self_id: Option<PointId>,
) -> NeighborList {
    let mut scored: Vec<Neighbor> = candidates
        .filter(|&id| Some(id) != self_id)
        .map(|id| Neighbor {
            id,
            distance: distance_unchecked(x, data.point(id)),
        })
        .collect();
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, neighbor_order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(neighbor_order);
    NeighborList { entries: scored }
}

pub(crate) fn check_query(data: &Dataset, x: &[f64], k: usize, self_id: Option<PointId>) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if x.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            actual: x.len(),
        });
    }
    if let Some(id) = self_id {
        if id >= data.len() {
            return Err(Error::invalid(format!("self id {id} out of range")));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RpForest {
    trees: Vec<RpTree>,
    tree_config: TreeConfig,
    master_seed: u64,
    n_points: usize,
}

impl RpForest {
    pub fn trees(&self) -> &[RpTree] {
        &self.trees
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn tree_config(&self) -> &TreeConfig {
        &self.tree_config
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Deduplicated ids of every leaf `x` reaches, ascending.
    pub fn candidates(&self, data: &Dataset, x: &[f64]) -> Result<Vec<PointId>> {
        self.check_data(data)?;
        check_query(data, x, 1, None)?;
        Ok(candidates_in(&self.trees, x))
    }

    /// Approximate k-nn of `x`. When `self_id` is given that point is never
    /// returned. Fewer than `k` entries come back when the leaves reached
    /// hold fewer candidates.
    pub fn query_knn(
        &self,
        data: &Dataset,
        x: &[f64],
        k: usize,
        self_id: Option<PointId>,
    ) -> Result<NeighborList> {
        self.query_knn_prefix(data, x, k, self_id, self.trees.len())
    }

    /// As [`RpForest::query_knn`], using only the first `n_trees` trees.
    /// Because tree `t` depends only on the master seed and `t`, this is
    /// the answer a forest of `n_trees` trees with the same seed gives.
    pub fn query_knn_prefix(
        &self,
        data: &Dataset,
        x: &[f64],
        k: usize,
        self_id: Option<PointId>,
        n_trees: usize,
    ) -> Result<NeighborList> {
        self.check_data(data)?;
        check_query(data, x, k, self_id)?;
        if n_trees == 0 || n_trees > self.trees.len() {
            return Err(Error::invalid(format!(
                "prefix of {n_trees} trees from a forest of {}",
                self.trees.len()
            )));
        }
        let pool = candidates_in(&self.trees[..n_trees], x);
        Ok(rank(data, x, pool.into_iter(), k, self_id))
    }

    /// Queries every dataset point against the forest, excluding the point
    /// itself. Row `i` answers point `i`.
    pub fn query_all(&self, data: &Dataset, k: usize) -> Result<Vec<NeighborList>> {
        self.check_data(data)?;
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        let answer = |id: PointId| {
            let x = data.point(id);
            rank(data, x, candidates_in(&self.trees, x).into_iter(), k, Some(id))
        };
        #[cfg(feature = "parallel")]
        let rows = data.ids().into_par_iter().map(answer).collect();
        #[cfg(not(feature = "parallel"))]
        let rows = data.ids().map(answer).collect();
        Ok(rows)
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        let dim = self.trees[0].dim();
        if data.len() != self.n_points || data.dim() != dim {
            return Err(Error::invalid(format!(
                "forest was built over {}x{dim} points, got {}x{}",
                self.n_points,
                data.len(),
                data.dim()
            )));
        }
        Ok(())
    }
}

fn candidates_in(trees: &[RpTree], x: &[f64]) -> Vec<PointId> {
    let mut pool: Vec<PointId> = trees.iter().flat_map(|t| t.leaf_for(x).iter().copied()).collect();
    pool.sort_unstable();
    pool.dedup();
    pool
}

/// Builds `n_trees` trees; tree `t` draws from child stream `t` of
/// `master_seed`. Trees are built in parallel when the `parallel` feature is
/// on; the result is identical either way.
pub fn build_forest(data: &Dataset, cfg: &TreeConfig, n_trees: usize, master_seed: u64) -> Result<RpForest> {
    #[cfg(feature = "parallel")]
    {
        build_with(data, cfg, n_trees, master_seed, |range, f| {
            range.into_par_iter().map(f).collect()
        })
    }
    #[cfg(not(feature = "parallel"))]
    {
        build_forest_serial(data, cfg, n_trees, master_seed)
    }
}

/// Single-threaded [`build_forest`].
pub fn build_forest_serial(
    data: &Dataset,
    cfg: &TreeConfig,
    n_trees: usize,
    master_seed: u64,
) -> Result<RpForest> {
    build_with(data, cfg, n_trees, master_seed, |range, f| range.map(f).collect())
}

fn build_with<F>(data: &Dataset, cfg: &TreeConfig, n_trees: usize, master_seed: u64, run: F) -> Result<RpForest>
where
    F: FnOnce(
        std::ops::Range<u64>,
        &(dyn Fn(u64) -> Result<RpTree> + Sync),
    ) -> Result<Vec<RpTree>>,
{
    if n_trees == 0 {
        return Err(Error::invalid("a forest needs at least one tree"));
    }
    cfg.validate()?;
    let root = SeedStream::new(master_seed);
    let build_one = |t: u64| build_tree(data, cfg, &mut root.child(t).rng());
    let trees = run(0..n_trees as u64, &build_one)?;
    Ok(RpForest {
        trees,
        tree_config: cfg.clone(),
        master_seed,
        n_points: data.len(),
    })
}
