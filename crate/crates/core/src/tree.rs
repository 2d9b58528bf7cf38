//! A single random projection tree.
//!
//! Nodes holding at least `leaf_capacity` points are split: the node's
//! points are projected onto a direction picked by the configured strategy,
//! a split value `c` is drawn between the first and third quartiles of the
//! projections, and points with `x . r < c` go left while the rest go right.
//! Queries are routed with the same comparison, so every training point
//! routes to the leaf that holds it.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::primitives::{dot, Dataset, DirectionVector, PointId};
use crate::rng::Rng;
use crate::strategy::{choose_direction, StrategyConfig};

pub const DEFAULT_LEAF_CAPACITY: usize = 20;
pub const DEFAULT_DEGENERATE_RETRIES: usize = 3;

/// Quantile fractions the split value is drawn between.
pub const SPLIT_QUANTILE_RANGE: (f64, f64) = (0.25, 0.75);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Nodes with fewer points than this become leaves.
    pub leaf_capacity: usize,
    pub strategy: StrategyConfig,
    /// Fresh directions tried when a split leaves one side empty before
    /// the node is forced to be a leaf.
    pub max_degenerate_retries: usize,
}

impl TreeConfig {
    pub fn new(strategy: StrategyConfig) -> Self {
        Self {
            leaf_capacity: DEFAULT_LEAF_CAPACITY,
            strategy,
            max_degenerate_retries: DEFAULT_DEGENERATE_RETRIES,
        }
    }

    pub fn with_leaf_capacity(mut self, leaf_capacity: usize) -> Self {
        self.leaf_capacity = leaf_capacity;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.leaf_capacity < 2 {
            return Err(Error::Validation(format!(
                "leaf capacity must be at least 2, got {}",
                self.leaf_capacity
            )));
        }
        self.strategy.validate()
    }
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self::new(StrategyConfig::default())
    }
}

/// Index of a node in [`RpTree::nodes`].
pub type NodeIndex = usize;

#[derive(Clone, Debug, PartialEq)]
pub enum RpNode {
    Internal {
        direction: DirectionVector,
        split: f64,
        left: NodeIndex,
        right: NodeIndex,
        /// Best dispersion after each stage of the direction search.
        stage_dispersions: Vec<f64>,
    },
    Leaf {
        members: Vec<PointId>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RpTree {
    nodes: Vec<RpNode>,
    root: NodeIndex,
    dim: usize,
    forced_leaves: usize,
}

impl RpTree {
    pub fn nodes(&self) -> &[RpNode] {
        &self.nodes
    }

    pub fn root(&self) -> NodeIndex {
        self.root
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Leaves created at or above capacity because no direction split the
    /// node into two non-empty halves.
    pub fn forced_leaves(&self) -> usize {
        self.forced_leaves
    }

    pub fn leaves(&self) -> impl Iterator<Item = &[PointId]> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            RpNode::Leaf { members } => Some(members.as_slice()),
            RpNode::Internal { .. } => None,
        })
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        let mut deepest = 0;
        let mut stack = vec![(self.root, 0usize)];
        while let Some((idx, depth)) = stack.pop() {
            match &self.nodes[idx] {
                RpNode::Leaf { .. } => deepest = deepest.max(depth),
                RpNode::Internal { left, right, .. } => {
                    stack.push((*left, depth + 1));
                    stack.push((*right, depth + 1));
                }
            }
        }
        deepest
    }

    /// Hash of the full structure, including split directions and values
    /// bit for bit.
    pub fn structure_digest(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.root.hash(&mut h);
        for node in &self.nodes {
            match node {
                RpNode::Internal {
                    direction,
                    split,
                    left,
                    right,
                    ..
                } => {
                    0u8.hash(&mut h);
                    for c in direction.components() {
                        c.to_bits().hash(&mut h);
                    }
                    split.to_bits().hash(&mut h);
                    left.hash(&mut h);
                    right.hash(&mut h);
                }
                RpNode::Leaf { members } => {
                    1u8.hash(&mut h);
                    members.hash(&mut h);
                }
            }
        }
        h.finish()
    }

    /// Routes `x` from the root to a leaf and returns that leaf's members.
    pub fn traverse_to_leaf(&self, x: &[f64]) -> Result<&[PointId]> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(self.leaf_for(x))
    }

    pub(crate) fn leaf_for(&self, x: &[f64]) -> &[PointId] {
        let mut idx = self.root;
        loop {
            match &self.nodes[idx] {
                RpNode::Internal {
                    direction,
                    split,
                    left,
                    right,
                    ..
                } => {
                    idx = if dot(x, direction.components()) < *split {
                        *left
                    } else {
                        *right
                    };
                }
                RpNode::Leaf { members } => return members,
            }
        }
    }

    /// Hand-assembles a tree; used to build fixtures. Children must be
    /// valid indices into `nodes`.
    pub fn from_nodes(nodes: Vec<RpNode>, root: NodeIndex, dim: usize) -> Result<Self> {
        for node in &nodes {
            match node {
                RpNode::Internal {
                    direction,
                    left,
                    right,
                    ..
                } => {
                    if *left >= nodes.len() || *right >= nodes.len() {
                        return Err(Error::invalid("child index out of range"));
                    }
                    if direction.dim() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            actual: direction.dim(),
                        });
                    }
                }
                RpNode::Leaf { .. } => {}
            }
        }
        if root >= nodes.len() {
            return Err(Error::invalid("root index out of range"));
        }
        Ok(Self {
            nodes,
            root,
            dim,
            forced_leaves: 0,
        })
    }
}

/// Draws a split value uniformly between the first and third quartiles:
/// `u ~ U[0.25, 0.75]`, then the empirical `u`-quantile of `values`.
///
/// Returns [`Error::DegenerateSplit`] when fewer than two values are given
/// or all values are equal.
pub fn pick_split_point(values: &[f64], rng: &mut Rng) -> Result<f64> {
    check_spread(values)?;
    let (lo, hi) = SPLIT_QUANTILE_RANGE;
    let u = rng.random_range(lo..=hi);
    Ok(quantile_unchecked(values, u))
}

/// Empirical `u`-quantile of `values` by linear interpolation between order
/// statistics: position `u * (m - 1)` in sorted order.
pub fn quantile(values: &[f64], u: f64) -> Result<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&u) {
        return Err(Error::invalid(format!(
            "quantile {u} of {} values",
            values.len()
        )));
    }
    Ok(quantile_unchecked(values, u))
}

fn quantile_unchecked(values: &[f64], u: f64) -> f64 {
    let pos = u * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    let mut scratch = values.to_vec();
    let (_, &mut below, above) = scratch.select_nth_unstable_by(lo, f64::total_cmp);
    if frac == 0.0 || above.is_empty() {
        return below;
    }
    let next = above.iter().copied().fold(f64::INFINITY, f64::min);
    below + frac * (next - below)
}

fn check_spread(values: &[f64]) -> Result<()> {
    match values.split_first() {
        Some((first, rest)) if rest.iter().any(|v| v != first) => Ok(()),
        _ => Err(Error::DegenerateSplit),
    }
}

/// Builds one tree over all points of `data`.
pub fn build_tree(data: &Dataset, cfg: &TreeConfig, rng: &mut Rng) -> Result<RpTree> {
    cfg.validate()?;
    let mut builder = Builder {
        data,
        cfg,
        rng,
        nodes: Vec::new(),
        forced_leaves: 0,
    };
    let root = builder.grow(data.ids().collect());
    Ok(RpTree {
        nodes: builder.nodes,
        root,
        dim: data.dim(),
        forced_leaves: builder.forced_leaves,
    })
}

struct Builder<'a> {
    data: &'a Dataset,
    cfg: &'a TreeConfig,
    rng: &'a mut Rng,
    nodes: Vec<RpNode>,
    forced_leaves: usize,
}

impl Builder<'_> {
    fn grow(&mut self, ids: Vec<PointId>) -> NodeIndex {
        if ids.len() < self.cfg.leaf_capacity {
            return self.push(RpNode::Leaf { members: ids });
        }
        for _ in 0..=self.cfg.max_degenerate_retries {
            let choice = match choose_direction(self.data, &ids, &self.cfg.strategy, self.rng) {
                Ok(choice) => choice,
                Err(Error::DegenerateNode) => break,
                Err(e) => unreachable!("strategy failed on a validated node: {e}"),
            };
            let r = choice.direction.components();
            let projected: Vec<f64> = ids.iter().map(|&id| dot(self.data.point(id), r)).collect();
            let Ok(split) = pick_split_point(&projected, self.rng) else {
                continue;
            };
            let (left, right): (Vec<_>, Vec<_>) = ids
                .iter()
                .zip(&projected)
                .partition(|&(_, &v)| v < split);
            if left.is_empty() || right.is_empty() {
                continue;
            }
            let left: Vec<PointId> = left.into_iter().map(|(&id, _)| id).collect();
            let right: Vec<PointId> = right.into_iter().map(|(&id, _)| id).collect();

            let slot = self.push(RpNode::Leaf {
                members: Vec::new(),
            });
            let left = self.grow(left);
            let right = self.grow(right);
            self.nodes[slot] = RpNode::Internal {
                direction: choice.direction,
                split,
                left,
                right,
                stage_dispersions: choice.stage_dispersions,
            };
            return slot;
        }
        self.forced_leaves += 1;
        self.push(RpNode::Leaf { members: ids })
    }

    fn push(&mut self, node: RpNode) -> NodeIndex {
        self.nodes.push(node);
        self.nodes.len() - 1
    }
}
