//! Random datasets: i.i.d. continuous vectors with a bounded density, an
//! independent categorical symbol, and an independent corruption flag that
//! hides the continuous part.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::theory::TheoryParams;

/// How the `p0` field of a [`GeneratorConfig`] is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum P0Means {
    /// `p0` is the probability that a point keeps its continuous part.
    ProbUncorrupted,
    /// `p0` is the probability that a point is corrupted. This is the reading
    /// under which Δ and Λ pair `p0` with the corrupted branch.
    #[default]
    ProbCorrupted,
}

/// Density of the continuous part, supported on the unit cube `[0,1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DensitySpec {
    UniformUnitCube,
    /// Piecewise constant: mass `hot_mass` spread uniformly over the cube
    /// `corner + [0, side]^d`, the rest uniformly over its complement.
    TwoLevel {
        corner: Vec<f64>,
        side: f64,
        hot_mass: f64,
    },
}

impl DensitySpec {
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            DensitySpec::UniformUnitCube => Ok(()),
            DensitySpec::TwoLevel {
                corner,
                side,
                hot_mass,
            } => {
                if corner.len() != d {
                    return Err(Error::invalid(format!(
                        "hot square corner has {} coordinates, expected {d}",
                        corner.len()
                    )));
                }
                if !(*side > 0.0 && *side <= 1.0) {
                    return Err(Error::invalid("hot square side must lie in (0,1]"));
                }
                if corner.iter().any(|&c| c < 0.0 || c + side > 1.0) {
                    return Err(Error::invalid("hot square must lie inside the unit cube"));
                }
                if !(*hot_mass > 0.0 && *hot_mass <= 1.0) {
                    return Err(Error::invalid("hot_mass must lie in (0,1]"));
                }
                if *side == 1.0 && *hot_mass < 1.0 {
                    return Err(Error::invalid(
                        "hot square covers the cube, so hot_mass must be 1",
                    ));
                }
                Ok(())
            }
        }
    }

    fn hot_volume(side: f64, d: usize) -> f64 {
        libm::pow(side, d as f64)
    }

    /// Density lower bound inside the hot square (the whole cube when uniform).
    pub fn eps_low(&self, d: usize) -> f64 {
        match self {
            DensitySpec::UniformUnitCube => 1.0,
            DensitySpec::TwoLevel { side, hot_mass, .. } => hot_mass / Self::hot_volume(*side, d),
        }
    }

    /// Global density upper bound.
    pub fn eps_up(&self, d: usize) -> f64 {
        match self {
            DensitySpec::UniformUnitCube => 1.0,
            DensitySpec::TwoLevel { side, hot_mass, .. } => {
                let hot = Self::hot_volume(*side, d);
                let inside = hot_mass / hot;
                if hot < 1.0 {
                    inside.max((1.0 - hot_mass) / (1.0 - hot))
                } else {
                    inside
                }
            }
        }
    }

    /// Total probability mass, computed piecewise.
    pub fn total_mass(&self, d: usize) -> f64 {
        match self {
            DensitySpec::UniformUnitCube => 1.0,
            DensitySpec::TwoLevel { side, hot_mass, .. } => {
                let hot = Self::hot_volume(*side, d);
                let outside = if hot < 1.0 {
                    (1.0 - hot_mass) / (1.0 - hot) * (1.0 - hot)
                } else {
                    0.0
                };
                hot_mass + outside
            }
        }
    }

    pub fn in_hot_square(&self, x: &[f64]) -> bool {
        match self {
            DensitySpec::UniformUnitCube => true,
            DensitySpec::TwoLevel { corner, side, .. } => x
                .iter()
                .zip(corner)
                .all(|(&xi, &c)| xi >= c && xi < c + side),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        let unit = |rng: &mut ChaCha8Rng| (0..d).map(|_| rng.random::<f64>()).collect::<Vec<_>>();
        match self {
            DensitySpec::UniformUnitCube => unit(rng),
            DensitySpec::TwoLevel {
                corner,
                side,
                hot_mass,
            } => {
                if rng.random::<f64>() < *hot_mass {
                    corner
                        .iter()
                        .map(|&c| c + side * rng.random::<f64>())
                        .collect()
                } else {
                    loop {
                        let x = unit(rng);
                        if !self.in_hot_square(&x) {
                            break x;
                        }
                    }
                }
            }
        }
    }
}

/// Law of the categorical part over the dense ids `0..cat_size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CategoricalSpec {
    Uniform { cat_size: usize },
    /// Symbol 0 has probability `p_up`, the others share the remainder.
    TwoLevel { cat_size: usize, p_up: f64 },
    /// `p(y) ∝ (y + 1)^{-exponent}`.
    PowerLaw { cat_size: usize, exponent: f64 },
}

impl CategoricalSpec {
    pub fn cat_size(&self) -> usize {
        match *self {
            CategoricalSpec::Uniform { cat_size }
            | CategoricalSpec::TwoLevel { cat_size, .. }
            | CategoricalSpec::PowerLaw { cat_size, .. } => cat_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.cat_size();
        if m == 0 {
            return Err(Error::invalid("cat_size must be >= 1"));
        }
        match *self {
            CategoricalSpec::Uniform { .. } => {}
            CategoricalSpec::TwoLevel { p_up, .. } => {
                if !(p_up > 0.0 && p_up <= 1.0) {
                    return Err(Error::invalid("p_up must lie in (0,1]"));
                }
                if m == 1 && p_up != 1.0 {
                    return Err(Error::invalid("a single category must have p_up = 1"));
                }
                if m > 1 && p_up >= 1.0 {
                    return Err(Error::invalid("p_up = 1 leaves zero mass for other symbols"));
                }
            }
            CategoricalSpec::PowerLaw { exponent, .. } => {
                if !exponent.is_finite() || exponent < 0.0 {
                    return Err(Error::invalid("power-law exponent must be finite and >= 0"));
                }
            }
        }
        Ok(())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let m = self.cat_size();
        match *self {
            CategoricalSpec::Uniform { .. } => vec![1.0 / m as f64; m],
            CategoricalSpec::TwoLevel { p_up, .. } => {
                if m == 1 {
                    return vec![1.0];
                }
                let rest = (1.0 - p_up) / (m - 1) as f64;
                std::iter::once(p_up)
                    .chain(std::iter::repeat_n(rest, m - 1))
                    .collect()
            }
            CategoricalSpec::PowerLaw { exponent, .. } => {
                let w: Vec<f64> = (1..=m).map(|y| libm::pow(y as f64, -exponent)).collect();
                let total: f64 = w.iter().sum();
                w.into_iter().map(|v| v / total).collect()
            }
        }
    }

    pub fn p_up(&self) -> f64 {
        self.probabilities().into_iter().fold(0.0, f64::max)
    }

    pub fn p_low(&self) -> f64 {
        self.probabilities().into_iter().fold(1.0, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub d: usize,
    pub r_n: f64,
    pub p0: f64,
    #[serde(default)]
    pub p0_means: P0Means,
    pub density: DensitySpec,
    pub categorical: CategoricalSpec,
    pub seed: u64,
}

impl GeneratorConfig {
    /// Uniform unit cube, uniform categories, no corruption.
    pub fn uniform(n: usize, d: usize, r_n: f64, cat_size: usize, seed: u64) -> Self {
        GeneratorConfig {
            n,
            d,
            r_n,
            p0: 0.0,
            p0_means: P0Means::ProbCorrupted,
            density: DensitySpec::UniformUnitCube,
            categorical: CategoricalSpec::Uniform { cat_size },
            seed,
        }
    }

    pub fn with_corruption(mut self, prob_corrupted: f64) -> Self {
        self.p0 = prob_corrupted;
        self.p0_means = P0Means::ProbCorrupted;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be >= 1"));
        }
        if self.d == 0 {
            return Err(Error::invalid("d must be >= 1"));
        }
        if !(self.r_n.is_finite() && self.r_n >= 0.0) {
            return Err(Error::invalid(format!("r_n must be >= 0, got {}", self.r_n)));
        }
        if !(0.0..=1.0).contains(&self.p0) {
            return Err(Error::invalid(format!("p0 must lie in [0,1], got {}", self.p0)));
        }
        self.density.validate(self.d)?;
        self.categorical.validate()
    }

    /// Probability that a point is corrupted, whatever `p0_means` says.
    pub fn corruption_probability(&self) -> f64 {
        match self.p0_means {
            P0Means::ProbCorrupted => self.p0,
            P0Means::ProbUncorrupted => 1.0 - self.p0,
        }
    }

    pub fn theory_params(&self) -> TheoryParams {
        let cat = &self.categorical;
        TheoryParams {
            n: self.n,
            d: self.d,
            r_n: self.r_n,
            p0: self.corruption_probability(),
            p_up: cat.p_up(),
            p_low: cat.p_low(),
            cat_size: cat.cat_size(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub index: usize,
    /// Continuous part; `None` when the point is corrupted.
    pub x: Option<Vec<f64>>,
    pub y: u32,
}

impl DataPoint {
    pub fn corrupted(&self) -> bool {
        self.x.is_none()
    }
}

/// An immutable dataset of `n >= 1` points indexed `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    points: Vec<DataPoint>,
}

impl Dataset {
    pub fn new(dim: usize, points: Vec<DataPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("a dataset needs at least one point"));
        }
        if dim == 0 {
            return Err(Error::invalid("d must be >= 1"));
        }
        for (i, p) in points.iter().enumerate() {
            if p.index != i {
                return Err(Error::invalid(format!(
                    "point at position {i} carries index {}",
                    p.index
                )));
            }
            if let Some(x) = &p.x {
                if x.len() != dim {
                    return Err(Error::invalid(format!(
                        "point {i} has {} coordinates, expected {dim}",
                        x.len()
                    )));
                }
            }
        }
        Ok(Dataset { dim, points })
    }

    /// Builds a dataset from `(x, y)` pairs, assigning indices in order.
    pub fn from_parts(dim: usize, parts: impl IntoIterator<Item = (Option<Vec<f64>>, u32)>) -> Result<Self> {
        let points = parts
            .into_iter()
            .enumerate()
            .map(|(index, (x, y))| DataPoint { index, x, y })
            .collect();
        Dataset::new(dim, points)
    }

    /// The points at `indices`, reindexed from zero.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Dataset::from_parts(
            self.dim,
            indices.iter().map(|&i| (self.points[i].x.clone(), self.points[i].y)),
        )
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &DataPoint {
        &self.points[i]
    }

    pub fn category(&self, i: usize) -> u32 {
        self.points[i].y
    }

    pub fn coords(&self, i: usize) -> Option<&[f64]> {
        self.points[i].x.as_deref()
    }

    pub fn is_corrupted(&self, i: usize) -> bool {
        self.points[i].corrupted()
    }

    /// One more than the largest category id present.
    pub fn observed_cat_size(&self) -> usize {
        self.points.iter().map(|p| p.y as usize + 1).max().unwrap_or(0)
    }

    pub fn uncorrupted_count(&self) -> usize {
        self.points.iter().filter(|p| !p.corrupted()).count()
    }
}

/// Draws a dataset. Point `i` uses its own stream keyed by `(seed, i)`, so
/// the result does not depend on thread scheduling and is stable when `n`
/// grows. The continuous part is always drawn, then discarded for corrupted
/// points, so the coordinates do not depend on `p0`.
pub fn generate(cfg: &GeneratorConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut cdf: Vec<f64> = cfg
        .categorical
        .probabilities()
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    let corrupt = cfg.corruption_probability();
    let points = (0..cfg.n)
        .into_par_iter()
        .map(|index| {
            let mut rng = rng::stream(cfg.seed, index as u64);
            let x = cfg.density.sample(&mut rng, cfg.d);
            let u: f64 = rng.random();
            let y = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u32;
            let corrupted = rng.random::<f64>() < corrupt;
            DataPoint {
                index,
                x: (!corrupted).then_some(x),
                y,
            }
        })
        .collect();
    Dataset::new(cfg.d, points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub d: usize,
    pub frac_corrupted: f64,
    pub p_up: f64,
    pub p_low: f64,
    /// Counts for category ids `0..=max id present`.
    pub histogram: Vec<usize>,
}

pub fn summary(ds: &Dataset) -> Summary {
    let mut histogram = vec![0usize; ds.observed_cat_size()];
    for p in ds.points() {
        histogram[p.y as usize] += 1;
    }
    let n = ds.n() as f64;
    let max = histogram.iter().copied().max().unwrap_or(0);
    let min = histogram.iter().copied().min().unwrap_or(0);
    Summary {
        n: ds.n(),
        d: ds.dim(),
        frac_corrupted: (ds.n() - ds.uncorrupted_count()) as f64 / n,
        p_up: max as f64 / n,
        p_low: min as f64 / n,
        histogram,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::chernoff_tail;

    fn cfg(n: usize, p0: f64, means: P0Means) -> GeneratorConfig {
        GeneratorConfig {
            p0,
            p0_means: means,
            ..GeneratorConfig::uniform(n, 2, 0.1, 3, 99)
        }
    }

    #[test]
    fn p0_conventions() {
        let all_clean = generate(&cfg(5, 1.0, P0Means::ProbUncorrupted)).unwrap();
        assert!(all_clean.points().iter().all(|p| !p.corrupted()));
        let all_dirty = generate(&cfg(5, 0.0, P0Means::ProbUncorrupted)).unwrap();
        assert!(all_dirty.points().iter().all(|p| p.corrupted()));

        let all_clean = generate(&cfg(5, 0.0, P0Means::ProbCorrupted)).unwrap();
        assert!(all_clean.points().iter().all(|p| !p.corrupted()));
        let all_dirty = generate(&cfg(5, 1.0, P0Means::ProbCorrupted)).unwrap();
        assert!(all_dirty.points().iter().all(|p| p.corrupted()));
    }

    #[test]
    fn generation_is_deterministic_and_seed_sensitive() {
        let c = cfg(200, 0.3, P0Means::ProbCorrupted);
        assert_eq!(generate(&c).unwrap(), generate(&c).unwrap());
        let other = GeneratorConfig { seed: 100, ..c.clone() };
        assert_ne!(generate(&c).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn extending_n_keeps_prefix() {
        let small = generate(&cfg(50, 0.2, P0Means::ProbCorrupted)).unwrap();
        let large = generate(&cfg(80, 0.2, P0Means::ProbCorrupted)).unwrap();
        assert_eq!(small.points(), &large.points()[..50]);
    }

    #[test]
    fn coordinates_do_not_depend_on_p0() {
        let a = generate(&cfg(100, 0.0, P0Means::ProbCorrupted)).unwrap();
        let b = generate(&cfg(100, 0.5, P0Means::ProbCorrupted)).unwrap();
        for (pa, pb) in a.points().iter().zip(b.points()) {
            assert_eq!(pa.y, pb.y);
            if let Some(xb) = &pb.x {
                assert_eq!(pa.x.as_ref(), Some(xb));
            }
        }
    }

    /// Relative deviation `g` such that the two-sided Bernoulli tail bound
    /// at mean `m` is below `1e-6`.
    fn tolerance(mean: f64) -> f64 {
        let mut g = 0.5;
        while g > 0.01 && chernoff_tail(mean, g * 0.9).unwrap() < 1e-6 {
            g *= 0.9;
        }
        assert!(chernoff_tail(mean, g).unwrap() < 1e-6, "mean {mean} too small");
        g
    }

    #[test]
    fn category_frequencies_concentrate() {
        let c = GeneratorConfig::uniform(10_000, 2, 0.1, 4, 5);
        let s = summary(&generate(&c).unwrap());
        let mean = 2500.0;
        let g = tolerance(mean);
        for &count in &s.histogram {
            assert!((count as f64 - mean).abs() <= g * mean, "{count} vs {mean}");
        }
    }

    #[test]
    fn summary_p_up_for_ten_categories() {
        let c = GeneratorConfig::uniform(100_000, 1, 0.1, 10, 8);
        let s = summary(&generate(&c).unwrap());
        assert!(s.p_up >= 0.09 && s.p_up <= 0.11, "{}", s.p_up);
        assert!(s.p_low >= 0.09 && s.p_low <= 0.11, "{}", s.p_low);
    }

    #[test]
    fn summary_single_category() {
        let ds = Dataset::from_parts(1, (0..7).map(|i| (Some(vec![i as f64]), 0))).unwrap();
        let s = summary(&ds);
        assert_eq!((s.p_up, s.p_low), (1.0, 1.0));
        assert_eq!(s.histogram, vec![7]);
        assert_eq!(s.frac_corrupted, 0.0);
    }

    #[test]
    fn corruption_frequency_concentrates() {
        let c = cfg(20_000, 0.3, P0Means::ProbCorrupted);
        let s = summary(&generate(&c).unwrap());
        let mean = 0.3 * 20_000.0;
        let observed = s.frac_corrupted * 20_000.0;
        assert!((observed - mean).abs() <= tolerance(mean) * mean, "{observed}");
    }

    #[test]
    fn two_level_density_mass_in_hot_square() {
        let density = DensitySpec::TwoLevel {
            corner: vec![0.25, 0.25],
            side: 0.5,
            hot_mass: 0.6,
        };
        assert!((density.total_mass(2) - 1.0).abs() < 1e-12);
        assert!((density.eps_low(2) - 2.4).abs() < 1e-12);
        assert!((density.eps_up(2) - 2.4).abs() < 1e-12);
        let c = GeneratorConfig {
            density: density.clone(),
            ..GeneratorConfig::uniform(20_000, 2, 0.1, 2, 17)
        };
        let ds = generate(&c).unwrap();
        let hot = ds
            .points()
            .iter()
            .filter(|p| density.in_hot_square(p.x.as_ref().unwrap()))
            .count() as f64;
        let mean = 0.6 * 20_000.0;
        assert!((hot - mean).abs() <= tolerance(mean) * mean, "{hot}");
        assert!(ds
            .points()
            .iter()
            .all(|p| p.x.as_ref().unwrap().iter().all(|&v| (0.0..1.0).contains(&v))));
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = GeneratorConfig::uniform(10, 2, 0.1, 2, 1);
        assert!(generate(&GeneratorConfig { n: 0, ..base.clone() }).is_err());
        assert!(generate(&GeneratorConfig { r_n: -1.0, ..base.clone() }).is_err());
        assert!(generate(&GeneratorConfig { p0: 1.5, ..base.clone() }).is_err());
        let bad_density = DensitySpec::TwoLevel {
            corner: vec![0.8, 0.0],
            side: 0.5,
            hot_mass: 0.5,
        };
        assert!(generate(&GeneratorConfig { density: bad_density, ..base.clone() }).is_err());
        let bad_cat = CategoricalSpec::TwoLevel { cat_size: 1, p_up: 0.5 };
        assert!(generate(&GeneratorConfig { categorical: bad_cat, ..base }).is_err());
    }

    #[test]
    fn categorical_laws_are_normalized() {
        for spec in [
            CategoricalSpec::Uniform { cat_size: 7 },
            CategoricalSpec::TwoLevel { cat_size: 5, p_up: 0.6 },
            CategoricalSpec::PowerLaw { cat_size: 9, exponent: 1.3 },
        ] {
            let p = spec.probabilities();
            assert_eq!(p.len(), spec.cat_size());
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(spec.p_low() > 0.0);
            let uniform = 1.0 / spec.cat_size() as f64;
            assert!(spec.p_low() <= uniform + 1e-15 && uniform <= spec.p_up() + 1e-15);
        }
    }

    #[test]
    fn dataset_rejects_bad_indices_and_widths() {
        assert!(Dataset::new(2, vec![]).is_err());
        let p = DataPoint { index: 1, x: None, y: 0 };
        assert!(Dataset::new(2, vec![p]).is_err());
        let p = DataPoint { index: 0, x: Some(vec![0.0]), y: 0 };
        assert!(Dataset::new(2, vec![p]).is_err());
    }
}
