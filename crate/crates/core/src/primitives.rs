//! Numeric building blocks shared by every other module: the point matrix,
//! unit directions, projections, Euclidean distance and dispersion.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Tolerance used when checking that a direction has unit length.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

/// Stable identifier of a dataset row.
pub type PointId = usize;

/// An `n x d` matrix of finite coordinates, stored row-major. Point ids are
/// the row indices `0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    coords: Vec<f64>,
    n: usize,
    dim: usize,
}

impl Dataset {
    /// Builds a dataset from a flat row-major buffer.
    pub fn from_flat(coords: Vec<f64>, n: usize, dim: usize) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::invalid(format!(
                "dataset must have n >= 1 and d >= 1 (got {n}x{dim})"
            )));
        }
        if coords.len() != n * dim {
            return Err(Error::invalid(format!(
                "buffer of length {} does not hold {n}x{dim} values",
                coords.len()
            )));
        }
        if let Some(pos) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite coordinate at row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { coords, n, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: rows[bad].len(),
            });
        }
        Self::from_flat(rows.concat(), rows.len(), dim)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coordinates of point `id`. Panics if `id >= n`.
    pub fn point(&self, id: PointId) -> &[f64] {
        &self.coords[id * self.dim..(id + 1) * self.dim]
    }

    pub fn ids(&self) -> std::ops::Range<PointId> {
        0..self.n
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }
}

/// A unit-length direction in `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionVector(Vec<f64>);

impl DirectionVector {
    /// Scales `components` to unit length. Fails on a zero or non-finite
    /// vector.
    pub fn normalized(mut components: Vec<f64>) -> Result<Self> {
        let norm = components.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::invalid("cannot normalize a zero or non-finite vector"));
        }
        components.iter_mut().for_each(|c| *c /= norm);
        Ok(Self(components))
    }

    /// Wraps components that are already unit length.
    pub fn from_unit(components: Vec<f64>) -> Result<Self> {
        let norm = components.iter().map(|c| c * c).sum::<f64>().sqrt();
        if components.is_empty() || (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(Error::invalid(format!("direction norm {norm} is not 1")));
        }
        Ok(Self(components))
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Scalar projections of a set of points, aligned with their ids.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedValues {
    pub values: Vec<f64>,
    pub ids: Vec<PointId>,
}

impl ProjectedValues {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projects the points `ids` of `data` onto `direction`, keeping id order.
pub fn project(data: &Dataset, ids: &[PointId], direction: &DirectionVector) -> Result<ProjectedValues> {
    check_dim(data.dim(), direction.dim())?;
    if let Some(&bad) = ids.iter().find(|&&id| id >= data.len()) {
        return Err(Error::invalid(format!("point id {bad} out of range")));
    }
    Ok(project_unchecked(data, ids, direction.components()))
}

pub(crate) fn project_unchecked(data: &Dataset, ids: &[PointId], r: &[f64]) -> ProjectedValues {
    ProjectedValues {
        values: ids.iter().map(|&id| dot(data.point(id), r)).collect(),
        ids: ids.to_vec(),
    }
}

/// Projection of a single point.
pub fn project_point(x: &[f64], direction: &DirectionVector) -> Result<f64> {
    check_dim(direction.dim(), x.len())?;
    Ok(dot(x, direction.components()))
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    Ok(distance_unchecked(a, b))
}

#[inline]
pub(crate) fn distance_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let diff = x - y;
            diff * diff
        })
        .sum::<f64>()
        .sqrt()
}

/// Sample standard deviation (divisor `m - 1`) of the projected values;
/// zero for a single value.
pub fn dispersion(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("dispersion of an empty set"));
    }
    Ok(dispersion_unchecked(values))
}

pub(crate) fn dispersion_unchecked(values: &[f64]) -> f64 {
    welford_std(values.iter().copied())
}

/// Sample standard deviation by Welford's update; zero for fewer than two
/// values.
pub(crate) fn welford_std(values: impl Iterator<Item = f64>) -> f64 {
    let mut count = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for v in values {
        count += 1;
        let delta = v - mean;
        mean += delta / count as f64;
        m2 += delta * (v - mean);
    }
    if count < 2 {
        return 0.0;
    }
    (m2.max(0.0) / (count - 1) as f64).sqrt()
}

/// Direction drawn uniformly from the unit sphere in `R^dim`, by
/// normalizing a vector of independent standard normals.
pub fn random_unit_direction(dim: usize, rng: &mut Rng) -> DirectionVector {
    assert!(dim >= 1, "direction dimension must be at least 1");
    loop {
        let raw: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(dir) = DirectionVector::normalized(raw) {
            return dir;
        }
    }
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}
