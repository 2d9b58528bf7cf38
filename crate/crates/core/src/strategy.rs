//! Split-direction strategies.
//!
//! Four ways of choosing the direction a node's points are projected onto:
//!
//! 1. [`Method::RandomDirection`]: one uniform random direction.
//! 2. [`Method::MaxDispersion`]: the most dispersed of `n_try` random directions.
//! 3. [`Method::NoiseTunedDispersion`]: method 2, then one tuning stage per
//!    noise scale, each trying `n_try` Gaussian perturbations of the
//!    incumbent and keeping any that spreads the points further.
//! 4. [`Method::PrincipalComponent`]: the node's first principal component.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::primitives::{dot, random_unit_direction, Dataset, DirectionVector, PointId};
use crate::rng::Rng;

pub const DEFAULT_N_TRY: usize = 3;
pub const DEFAULT_NOISE_SIGMAS: [f64; 2] = [0.1, 0.01];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    RandomDirection,
    MaxDispersion,
    NoiseTunedDispersion,
    PrincipalComponent,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::RandomDirection,
        Method::MaxDispersion,
        Method::NoiseTunedDispersion,
        Method::PrincipalComponent,
    ];

    /// The method's number, 1 through 4.
    pub fn number(self) -> u8 {
        match self {
            Method::RandomDirection => 1,
            Method::MaxDispersion => 2,
            Method::NoiseTunedDispersion => 3,
            Method::PrincipalComponent => 4,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.number() == n)
            .ok_or_else(|| Error::invalid(format!("unknown method {n}, expected 1-4")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub method: Method,
    /// Candidate directions per draw (methods 2 and 3) and perturbations
    /// per tuning stage (method 3).
    pub n_try: usize,
    /// Noise scales of method 3's tuning stages, strictly decreasing.
    pub noise_sigmas: Vec<f64>,
}

impl StrategyConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            n_try: DEFAULT_N_TRY,
            noise_sigmas: DEFAULT_NOISE_SIGMAS.to_vec(),
        }
    }

    pub fn with_n_try(mut self, n_try: usize) -> Self {
        self.n_try = n_try;
        self
    }

    pub fn with_noise_sigmas(mut self, sigmas: Vec<f64>) -> Self {
        self.noise_sigmas = sigmas;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_try == 0 {
            return Err(Error::Validation("n_try must be at least 1".into()));
        }
        if self.noise_sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Validation("noise sigmas must be positive".into()));
        }
        if self.noise_sigmas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Validation(
                "noise sigmas must be strictly decreasing".into(),
            ));
        }
        Ok(())
    }
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self::new(Method::RandomDirection)
    }
}

/// The chosen direction for one node split.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionChoice {
    pub direction: DirectionVector,
    /// Sample standard deviation of the node's points along `direction`.
    pub dispersion: f64,
    pub candidates_evaluated: usize,
    /// Best dispersion after each stage. A single entry except for
    /// method 3, where stage 0 is the plain max-of-`n_try` search and each
    /// further entry follows one noise stage.
    pub stage_dispersions: Vec<f64>,
}

/// Selects a split direction for the node holding `ids`, per `cfg.method`.
pub fn choose_direction(
    data: &Dataset,
    ids: &[PointId],
    cfg: &StrategyConfig,
    rng: &mut Rng,
) -> Result<DirectionChoice> {
    match cfg.method {
        Method::RandomDirection => choose_direction_method1(data, ids, rng),
        Method::MaxDispersion => choose_direction_method2(data, ids, cfg, rng),
        Method::NoiseTunedDispersion => choose_direction_method3(data, ids, cfg, rng),
        Method::PrincipalComponent => choose_direction_method4(data, ids),
    }
}

/// Method 1: a single uniform random direction.
pub fn choose_direction_method1(
    data: &Dataset,
    ids: &[PointId],
    rng: &mut Rng,
) -> Result<DirectionChoice> {
    check_node(ids)?;
    let direction = random_unit_direction(data.dim(), rng);
    let dispersion = dispersion_along(data, ids, direction.components());
    Ok(DirectionChoice {
        direction,
        dispersion,
        candidates_evaluated: 1,
        stage_dispersions: vec![dispersion],
    })
}

/// Method 2: the most dispersed of `cfg.n_try` random directions. The
/// earliest draw wins ties.
pub fn choose_direction_method2(
    data: &Dataset,
    ids: &[PointId],
    cfg: &StrategyConfig,
    rng: &mut Rng,
) -> Result<DirectionChoice> {
    check_node(ids)?;
    check_n_try(cfg)?;
    let (direction, dispersion) = best_random_direction(data, ids, cfg.n_try, rng);
    Ok(DirectionChoice {
        direction,
        dispersion,
        candidates_evaluated: cfg.n_try,
        stage_dispersions: vec![dispersion],
    })
}

/// Method 3: method 2 followed by noise tuning. For each sigma, `n_try`
/// candidates are made by adding N(0, sigma^2) to every component of the
/// stage's incumbent and renormalizing; a candidate replaces the running
/// best only if strictly more dispersed.
pub fn choose_direction_method3(
    data: &Dataset,
    ids: &[PointId],
    cfg: &StrategyConfig,
    rng: &mut Rng,
) -> Result<DirectionChoice> {
    check_node(ids)?;
    check_n_try(cfg)?;
    let (mut best, mut best_disp) = best_random_direction(data, ids, cfg.n_try, rng);
    let mut stages = Vec::with_capacity(cfg.noise_sigmas.len() + 1);
    stages.push(best_disp);
    let mut evaluated = cfg.n_try;

    for &sigma in &cfg.noise_sigmas {
        let noise = Normal::new(0.0, sigma)
            .map_err(|e| Error::invalid(format!("noise sigma {sigma}: {e}")))?;
        let base = best.clone();
        for _ in 0..cfg.n_try {
            let perturbed: Vec<f64> = base
                .components()
                .iter()
                .map(|c| c + noise.sample(rng))
                .collect();
            evaluated += 1;
            // A perturbation that cancels the vector exactly is skipped.
            let Ok(candidate) = DirectionVector::normalized(perturbed) else {
                continue;
            };
            let disp = dispersion_along(data, ids, candidate.components());
            if disp > best_disp {
                best = candidate;
                best_disp = disp;
            }
        }
        stages.push(best_disp);
    }

    Ok(DirectionChoice {
        direction: best,
        dispersion: best_disp,
        candidates_evaluated: evaluated,
        stage_dispersions: stages,
    })
}

/// Method 4: the first principal component of the node's own points,
/// signed so that its first nonzero component is positive.
///
/// Returns [`Error::DegenerateNode`] when every point in the node is the
/// same, since no direction separates them.
pub fn choose_direction_method4(data: &Dataset, ids: &[PointId]) -> Result<DirectionChoice> {
    check_node(ids)?;
    let first = data.point(ids[0]);
    if ids.iter().all(|&id| data.point(id) == first) {
        return Err(Error::DegenerateNode);
    }

    let dim = data.dim();
    let m = ids.len() as f64;
    let mut mean = vec![0.0; dim];
    for &id in ids {
        for (acc, x) in mean.iter_mut().zip(data.point(id)) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);

    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    let mut centered = vec![0.0; dim];
    for &id in ids {
        for ((c, x), mu) in centered.iter_mut().zip(data.point(id)).zip(&mean) {
            *c = x - mu;
        }
        for i in 0..dim {
            let ci = centered[i];
            for j in i..dim {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let v = cov[(i, j)] / (m - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let (top, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("covariance has at least one eigenvalue");
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::DegenerateNode);
    }
    let mut components: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
    if let Some(lead) = components.iter().find(|c| c.abs() > 1e-12) {
        if *lead < 0.0 {
            components.iter_mut().for_each(|c| *c = -*c);
        }
    }
    let direction = DirectionVector::normalized(components)?;
    let dispersion = dispersion_along(data, ids, direction.components());
    Ok(DirectionChoice {
        direction,
        dispersion,
        candidates_evaluated: 1,
        stage_dispersions: vec![dispersion],
    })
}

/// Sample standard deviation of the projections of `ids` onto `r`. Uses the
/// same accumulation order as [`crate::primitives::dispersion`], so the two
/// agree bit for bit.
pub(crate) fn dispersion_along(data: &Dataset, ids: &[PointId], r: &[f64]) -> f64 {
    crate::primitives::welford_std(ids.iter().map(|&id| dot(data.point(id), r)))
}

fn best_random_direction(
    data: &Dataset,
    ids: &[PointId],
    n_try: usize,
    rng: &mut Rng,
) -> (DirectionVector, f64) {
    let mut best = random_unit_direction(data.dim(), rng);
    let mut best_disp = dispersion_along(data, ids, best.components());
    for _ in 1..n_try {
        let candidate = random_unit_direction(data.dim(), rng);
        let disp = dispersion_along(data, ids, candidate.components());
        if disp > best_disp {
            best = candidate;
            best_disp = disp;
        }
    }
    (best, best_disp)
}

fn check_node(ids: &[PointId]) -> Result<()> {
    if ids.len() < 2 {
        return Err(Error::invalid(format!(
            "a split needs at least 2 points, node has {}",
            ids.len()
        )));
    }
    Ok(())
}

fn check_n_try(cfg: &StrategyConfig) -> Result<()> {
    if cfg.n_try == 0 {
        return Err(Error::invalid("n_try must be at least 1"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::{dispersion, project};
    use crate::rng::SeedStream;
    use rand_distr::StandardNormal;
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    use rand::Rng as _;

    fn gaussian_2d(n: usize, sx: f64, sy: f64, seed: u64) -> Dataset {
        let mut rng = SeedStream::new(seed).rng();
        let mut flat = Vec::with_capacity(2 * n);
        for _ in 0..n {
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            flat.push(sx * x);
            flat.push(sy * y);
        }
        Dataset::from_flat(flat, n, 2).unwrap()
    }

    fn all_ids(data: &Dataset) -> Vec<PointId> {
        data.ids().collect()
    }

    fn recomputed(data: &Dataset, ids: &[PointId], choice: &DirectionChoice) -> f64 {
        dispersion(&project(data, ids, &choice.direction).unwrap().values).unwrap()
    }

    #[test]
    fn method_numbers_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::from_number(m.number()).unwrap(), m);
        }
        assert!(Method::from_number(0).is_err());
        assert!(Method::from_number(5).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(StrategyConfig::default().validate().is_ok());
        assert!(StrategyConfig::default().with_n_try(0).validate().is_err());
        assert!(StrategyConfig::default().with_noise_sigmas(vec![0.01, 0.1]).validate().is_err());
        assert!(StrategyConfig::default().with_noise_sigmas(vec![0.1, 0.1]).validate().is_err());
        assert!(StrategyConfig::default().with_noise_sigmas(vec![-0.1]).validate().is_err());
        assert!(StrategyConfig::default().with_noise_sigmas(vec![]).validate().is_ok());
    }

    #[test]
    fn nodes_need_two_points() {
        let data = gaussian_2d(5, 1.0, 1.0, 0);
        let mut rng = SeedStream::new(0).rng();
        for m in Method::ALL {
            let cfg = StrategyConfig::new(m);
            assert!(choose_direction(&data, &[3], &cfg, &mut rng).is_err());
        }
    }

    #[test]
    fn method1_is_seed_deterministic() {
        let data = gaussian_2d(50, 1.0, 1.0, 1);
        let ids = all_ids(&data);
        let a = choose_direction_method1(&data, &ids, &mut SeedStream::new(9).rng()).unwrap();
        let b = choose_direction_method1(&data, &ids, &mut SeedStream::new(9).rng()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.candidates_evaluated, 1);
    }

    #[test]
    fn method1_angles_are_uniform() {
        let data = gaussian_2d(10, 1.0, 1.0, 2);
        let ids = all_ids(&data);
        let mut rng = SeedStream::new(77).rng();
        let bins = 40;
        let draws = 10_000;
        let mut counts = vec![0usize; bins];
        for _ in 0..draws {
            let c = choose_direction_method1(&data, &ids, &mut rng).unwrap();
            let r = c.direction.components();
            let angle = r[1].atan2(r[0]) + std::f64::consts::PI;
            let bin = ((angle / (2.0 * std::f64::consts::PI)) * bins as f64) as usize;
            counts[bin.min(bins - 1)] += 1;
        }
        let expected = draws as f64 / bins as f64;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat);
        assert!(p > 0.001, "chi-square {stat}, p = {p}");
    }

    #[test]
    fn method2_with_one_try_matches_method1() {
        let data = gaussian_2d(40, 3.0, 1.0, 3);
        let ids = all_ids(&data);
        let cfg = StrategyConfig::new(Method::MaxDispersion).with_n_try(1);
        for seed in 0..20 {
            let one = choose_direction_method1(&data, &ids, &mut SeedStream::new(seed).rng()).unwrap();
            let two = choose_direction_method2(&data, &ids, &cfg, &mut SeedStream::new(seed).rng()).unwrap();
            assert_eq!(one, two);
        }
    }

    #[test]
    fn method2_returns_the_argmax_candidate() {
        let data = gaussian_2d(60, 2.0, 1.0, 4);
        let ids = all_ids(&data);
        let cfg = StrategyConfig::new(Method::MaxDispersion).with_n_try(7);
        for seed in 0..30 {
            let choice = choose_direction_method2(&data, &ids, &cfg, &mut SeedStream::new(seed).rng()).unwrap();
            assert_eq!(choice.candidates_evaluated, 7);
            assert_eq!(choice.dispersion, recomputed(&data, &ids, &choice));
            // Replay the same draws independently.
            let mut rng = SeedStream::new(seed).rng();
            let candidates: Vec<f64> = (0..7)
                .map(|_| {
                    let r = random_unit_direction(2, &mut rng);
                    dispersion(&project(&data, &ids, &r).unwrap().values).unwrap()
                })
                .collect();
            let max = candidates.iter().cloned().fold(f64::MIN, f64::max);
            assert!(candidates.iter().all(|&d| choice.dispersion >= d));
            assert_eq!(choice.dispersion, max);
        }
    }

    #[test]
    fn method2_aligns_with_the_long_axis_more_often() {
        let data = gaussian_2d(200, 10.0, 1.0, 5);
        let ids = all_ids(&data);
        let cfg = StrategyConfig::new(Method::MaxDispersion).with_n_try(3);
        let trials = 1000;
        let mut rng1 = SeedStream::new(100).rng();
        let mut rng2 = SeedStream::new(200).rng();
        let (mut cos1, mut cos2) = (0.0, 0.0);
        for _ in 0..trials {
            cos1 += choose_direction_method1(&data, &ids, &mut rng1).unwrap().direction.components()[0].abs();
            cos2 += choose_direction_method2(&data, &ids, &cfg, &mut rng2).unwrap().direction.components()[0].abs();
        }
        assert!(cos2 / trials as f64 > cos1 / trials as f64, "{cos2} vs {cos1}");
    }

    #[test]
    fn method3_stages_never_lose_dispersion() {
        let data = gaussian_2d(80, 1.5, 1.0, 6);
        let ids = all_ids(&data);
        let cfg = StrategyConfig::new(Method::NoiseTunedDispersion);
        for seed in 0..50 {
            let choice = choose_direction_method3(&data, &ids, &cfg, &mut SeedStream::new(seed).rng()).unwrap();
            assert_eq!(choice.stage_dispersions.len(), 3);
            assert!(choice.stage_dispersions.windows(2).all(|w| w[1] >= w[0]));
            assert!(choice.dispersion >= choice.stage_dispersions[0]);
            assert_eq!(choice.dispersion, *choice.stage_dispersions.last().unwrap());
            assert_eq!(choice.dispersion, recomputed(&data, &ids, &choice));
            assert_eq!(choice.candidates_evaluated, 9);
        }
    }

    #[test]
    fn method3_without_noise_is_method2() {
        let data = gaussian_2d(30, 1.0, 4.0, 7);
        let ids = all_ids(&data);
        let m2 = StrategyConfig::new(Method::MaxDispersion);
        let m3 = StrategyConfig::new(Method::NoiseTunedDispersion).with_noise_sigmas(vec![]);
        for seed in 0..20 {
            let a = choose_direction_method2(&data, &ids, &m2, &mut SeedStream::new(seed).rng()).unwrap();
            let b = choose_direction_method3(&data, &ids, &m3, &mut SeedStream::new(seed).rng()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn method4_on_a_line() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let data = Dataset::from_rows(&rows).unwrap();
        let choice = choose_direction_method4(&data, &all_ids(&data)).unwrap();
        let s5 = 5f64.sqrt();
        let r = choice.direction.components();
        assert!((r[0] - 1.0 / s5).abs() < 1e-12 && (r[1] - 2.0 / s5).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn method4_sign_convention_survives_negated_slope() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, -3.0 * i as f64]).collect();
        let data = Dataset::from_rows(&rows).unwrap();
        let r = choose_direction_method4(&data, &all_ids(&data)).unwrap().direction;
        assert!(r.components()[0] > 0.0);
        assert!((r.components()[1] / r.components()[0] + 3.0).abs() < 1e-9);
    }

    #[test]
    fn method4_flags_identical_points() {
        let data = Dataset::from_rows(&vec![vec![0.3, -1.7, 2.0]; 25]).unwrap();
        assert!(matches!(
            choose_direction_method4(&data, &all_ids(&data)),
            Err(Error::DegenerateNode)
        ));
    }

    #[test]
    fn method4_beats_an_angle_grid() {
        for seed in 0..20 {
            let mut rng = SeedStream::new(1000 + seed).rng();
            let (sx, sy) = (rng.random_range(0.5..5.0), rng.random_range(0.5..5.0));
            let data = gaussian_2d(30, sx, sy, seed);
            // Rotate by a random angle so the principal axis is oblique.
            let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let rows: Vec<Vec<f64>> = data
                .rows()
                .map(|p| vec![p[0] * theta.cos() - p[1] * theta.sin(), p[0] * theta.sin() + p[1] * theta.cos()])
                .collect();
            let data = Dataset::from_rows(&rows).unwrap();
            let ids = all_ids(&data);
            let pc = choose_direction_method4(&data, &ids).unwrap();
            let grid_best = (0..360)
                .map(|deg| {
                    let a = (deg as f64).to_radians();
                    let r = DirectionVector::from_unit(vec![a.cos(), a.sin()]).unwrap();
                    dispersion(&project(&data, &ids, &r).unwrap().values).unwrap()
                })
                .fold(f64::MIN, f64::max);
            assert!(pc.dispersion >= grid_best - 1e-6, "{} < {grid_best}", pc.dispersion);
            let random = choose_direction_method1(&data, &ids, &mut rng).unwrap();
            assert!(pc.dispersion >= random.dispersion - 1e-12);
        }
    }

    #[test]
    fn every_method_returns_unit_directions() {
        let mut rng = SeedStream::new(3).rng();
        let flat: Vec<f64> = (0..40 * 6).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let data = Dataset::from_flat(flat, 40, 6).unwrap();
        let ids = all_ids(&data);
        for m in Method::ALL {
            let choice = choose_direction(&data, &ids, &StrategyConfig::new(m), &mut rng).unwrap();
            assert!((choice.direction.norm() - 1.0).abs() < crate::primitives::UNIT_NORM_TOLERANCE);
            assert_eq!(choice.dispersion, recomputed(&data, &ids, &choice));
        }
    }
}
