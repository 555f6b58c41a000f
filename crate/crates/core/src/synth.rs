//! Synthetic data generators.
//!
//! * [`GaussianMixture`]: `X = sqrt(a) * V + W` with `V` standard normal and
//!   `W` drawn uniformly from a frozen set of component centers. Inliers and
//!   outliers share the centers and differ only in `a`.
//! * [`LogisticModel`]: standard normal features with a two-class softmax
//!   label model whose intercept is calibrated to a target outlier fraction.
//! * [`Blobs`]: isotropic Gaussian clusters for multi-class prediction sets.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::rng::{self, tag, ChaCha8Rng};
use crate::tcv::MultiClassData;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMixtureConfig {
    pub d: usize,
    /// Scale of the Gaussian noise around the chosen center.
    pub a: f64,
    pub n_components: usize,
    /// Centers are uniform on `[-component_box, component_box]^d`.
    pub component_box: f64,
    /// Seed of the frozen center set.
    pub seed: u64,
}

impl GaussianMixtureConfig {
    fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n_components == 0 {
            return Err(Error::InvalidArgument(
                "mixture needs d >= 1 and at least one component".into(),
            ));
        }
        if !(self.a >= 0.0 && self.a.is_finite()) || !(self.component_box > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "invalid mixture scale a = {} or box = {}",
                self.a, self.component_box
            )));
        }
        Ok(())
    }

    fn same_centers(&self, other: &Self) -> bool {
        self.d == other.d
            && self.n_components == other.n_components
            && self.component_box == other.component_box
            && self.seed == other.seed
    }
}

/// A frozen set of component centers.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    d: usize,
    centers: Vec<Vec<f64>>,
}

impl GaussianMixture {
    pub fn new(d: usize, n_components: usize, component_box: f64, seed: u64) -> Result<Self> {
        GaussianMixtureConfig {
            d,
            a: 1.0,
            n_components,
            component_box,
            seed,
        }
        .validate()?;
        let mut r = rng::rng(rng::derive(seed, tag::CENTERS));
        let centers = (0..n_components)
            .map(|_| {
                (0..d)
                    .map(|_| r.random_range(-component_box..=component_box))
                    .collect()
            })
            .collect();
        Ok(GaussianMixture { d, centers })
    }

    pub fn from_config(cfg: &GaussianMixtureConfig) -> Result<Self> {
        cfg.validate()?;
        Self::new(cfg.d, cfg.n_components, cfg.component_box, cfg.seed)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    /// Coordinate-wise mean of the component centers (the mixture mean).
    pub fn mean(&self) -> Vec<f64> {
        let mut m = alloc::vec![0.0; self.d];
        for c in &self.centers {
            for (mj, cj) in m.iter_mut().zip(c) {
                *mj += cj;
            }
        }
        let k = self.centers.len() as f64;
        m.iter_mut().for_each(|v| *v /= k);
        m
    }

    pub fn sample_row(&self, a: f64, r: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        let c = &self.centers[r.random_range(0..self.centers.len())];
        let scale = libm::sqrt(a);
        out.clear();
        out.extend(c.iter().map(|&w| {
            scale * rng::normal(r) + w
        }));
    }

    /// Append `n` rows with noise scale `a` and the given label.
    pub fn sample_into(&self, data: &mut Dataset, a: f64, n: usize, label: Label, seed: u64) -> Result<()> {
        let mut r = rng::rng(seed);
        let mut row = Vec::with_capacity(self.d);
        for _ in 0..n {
            self.sample_row(a, &mut r, &mut row);
            data.push(&row, label)?;
        }
        Ok(())
    }

    /// Labeled sample with separate scales for inliers and outliers, rows in
    /// label order (inliers first).
    pub fn sample(&self, a_inlier: f64, a_outlier: f64, n_inlier: usize, n_outlier: usize, seed: u64) -> Result<Dataset> {
        let mut data = Dataset::empty(self.d)?;
        self.sample_into(&mut data, a_inlier, n_inlier, Label::Inlier, rng::derive(seed, 0))?;
        self.sample_into(&mut data, a_outlier, n_outlier, Label::Outlier, rng::derive(seed, 1))?;
        Ok(data)
    }
}

/// Inliers from `inlier_cfg.a`, outliers from `outlier_cfg.a`, sharing one
/// frozen center set.
pub fn gen_gaussian_mixture(
    inlier_cfg: &GaussianMixtureConfig,
    outlier_cfg: &GaussianMixtureConfig,
    n_inlier: usize,
    n_outlier: usize,
    seed: u64,
) -> Result<Dataset> {
    if inlier_cfg.d != outlier_cfg.d {
        return Err(Error::DimensionMismatch {
            expected: inlier_cfg.d,
            got: outlier_cfg.d,
        });
    }
    if !inlier_cfg.same_centers(outlier_cfg) {
        return Err(Error::InvalidArgument(
            "inlier and outlier configs must share the component set".into(),
        ));
    }
    outlier_cfg.validate()?;
    let mix = GaussianMixture::from_config(inlier_cfg)?;
    mix.sample(inlier_cfg.a, outlier_cfg.a, n_inlier, n_outlier, seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticModelConfig {
    pub n: usize,
    pub d: usize,
    pub beta_variance: f64,
    pub target_outlier_frac: f64,
    pub mc_samples: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for LogisticModelConfig {
    fn default() -> Self {
        LogisticModelConfig {
            n: 1000,
            d: 100,
            beta_variance: 3.0,
            target_outlier_frac: 0.1,
            mc_samples: 10_000,
            tol: 0.005,
            seed: 0,
        }
    }
}

/// Two-class softmax label model. The intercept enters the outlier logit
/// only, so `P(Y = 1 | x) = sigmoid(gamma + x'(beta_1 - beta_0))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub beta0: Vec<f64>,
    pub beta1: Vec<f64>,
    pub gamma: f64,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + libm::exp(-t))
    } else {
        let e = libm::exp(t);
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LogisticModel {
    /// Draw the coefficients and calibrate the intercept.
    pub fn new(cfg: &LogisticModelConfig) -> Result<Self> {
        if !(cfg.target_outlier_frac > 0.0 && cfg.target_outlier_frac < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "target outlier fraction must lie in (0,1), got {}",
                cfg.target_outlier_frac
            )));
        }
        if cfg.mc_samples < 1000 {
            return Err(Error::InvalidArgument("mc_samples must be at least 1000".into()));
        }
        if cfg.d == 0 || !(cfg.beta_variance >= 0.0) {
            return Err(Error::InvalidArgument("invalid dimension or beta variance".into()));
        }
        let sd = libm::sqrt(cfg.beta_variance);
        let mut r = rng::rng(rng::derive(cfg.seed, tag::MODEL));
        let mut draw = || -> Vec<f64> {
            (0..cfg.d)
                .map(|_| sd * rng::normal(&mut r))
                .collect::<Vec<f64>>()
        };
        let beta0 = draw();
        let beta1 = draw();
        let gamma = calibrate_intercept(
            &beta0,
            &beta1,
            cfg.target_outlier_frac,
            cfg.mc_samples,
            cfg.tol,
            rng::derive(cfg.seed, tag::DATA),
        )?;
        Ok(LogisticModel { beta0, beta1, gamma })
    }

    pub fn dim(&self) -> usize {
        self.beta0.len()
    }

    pub fn outlier_probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.gamma + dot(x, &self.beta1) - dot(x, &self.beta0))
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        let mut data = Dataset::empty(self.dim())?;
        let mut r = rng::rng(seed);
        let mut x = Vec::with_capacity(self.dim());
        for _ in 0..n {
            x.clear();
            x.extend((0..self.dim()).map(|_| rng::normal(&mut r)));
            let y = if r.random::<f64>() < self.outlier_probability(&x) {
                Label::Outlier
            } else {
                Label::Inlier
            };
            data.push(&x, y)?;
        }
        Ok(data)
    }

    /// Sample until exactly `n_inlier` inliers and `n_outlier` outliers have
    /// been collected (rejection on the label), inliers first.
    pub fn sample_counts(&self, n_inlier: usize, n_outlier: usize, seed: u64) -> Result<Dataset> {
        let d = self.dim();
        let mut inl = Dataset::empty(d)?;
        let mut out = Dataset::empty(d)?;
        let mut r = rng::rng(seed);
        let mut x = Vec::with_capacity(d);
        let cap = 1000 * (n_inlier + n_outlier + 1);
        let mut tries = 0usize;
        while inl.len() < n_inlier || out.len() < n_outlier {
            tries += 1;
            if tries > cap {
                return Err(Error::NoConvergence(
                    "label model too unbalanced to reach the requested counts".into(),
                ));
            }
            x.clear();
            x.extend((0..d).map(|_| rng::normal(&mut r)));
            if r.random::<f64>() < self.outlier_probability(&x) {
                if out.len() < n_outlier {
                    out.push(&x, Label::Outlier)?;
                }
            } else if inl.len() < n_inlier {
                inl.push(&x, Label::Inlier)?;
            }
        }
        inl.concat(&out)
    }
}

pub fn gen_logistic_model(cfg: &LogisticModelConfig) -> Result<Dataset> {
    LogisticModel::new(cfg)?.sample(cfg.n, rng::derive(cfg.seed, tag::TEST))
}

/// Find the outlier-logit intercept whose Monte Carlo outlier fraction is
/// within `tol` of `target_frac`, by bracketing and bisection on a fixed
/// Monte Carlo sample.
pub fn calibrate_intercept(
    beta0: &[f64],
    beta1: &[f64],
    target_frac: f64,
    mc_samples: usize,
    tol: f64,
    seed: u64,
) -> Result<f64> {
    if !(target_frac > 0.0 && target_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target fraction must lie in (0,1), got {target_frac}"
        )));
    }
    if beta0.len() != beta1.len() {
        return Err(Error::DimensionMismatch {
            expected: beta0.len(),
            got: beta1.len(),
        });
    }
    if mc_samples == 0 || !(tol > 0.0) {
        return Err(Error::InvalidArgument("need mc_samples >= 1 and tol > 0".into()));
    }
    let delta: Vec<f64> = beta1.iter().zip(beta0).map(|(b1, b0)| b1 - b0).collect();
    let mut r = rng::rng(seed);
    let mut x = alloc::vec![0.0; delta.len()];
    let logits: Vec<f64> = (0..mc_samples)
        .map(|_| {
            x.iter_mut().for_each(|v| *v = rng::normal(&mut r));
            dot(&x, &delta)
        })
        .collect();
    let frac = |g: f64| logits.iter().map(|&t| sigmoid(g + t)).sum::<f64>() / mc_samples as f64;

    let mut lo = -1.0;
    let mut hi = 1.0;
    let mut expansions = 0;
    while frac(lo) > target_frac || frac(hi) < target_frac {
        expansions += 1;
        if expansions > 60 {
            return Err(Error::NoConvergence(format!(
                "could not bracket outlier fraction {target_frac}"
            )));
        }
        if frac(lo) > target_frac {
            lo *= 2.0;
        }
        if frac(hi) < target_frac {
            hi *= 2.0;
        }
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..100 {
        let f = frac(mid);
        if libm::fabs(f - target_frac) <= 0.1 * tol {
            return Ok(mid);
        }
        if f < target_frac {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
    }
    if libm::fabs(frac(mid) - target_frac) <= tol {
        Ok(mid)
    } else {
        Err(Error::NoConvergence(format!(
            "bisection did not reach outlier fraction {target_frac} within {tol}"
        )))
    }
}

/// Isotropic Gaussian clusters, one per class, with centers uniform on
/// `[-spread, spread]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Blobs {
    centers: Vec<Vec<f64>>,
    pub sd: f64,
}

impl Blobs {
    pub fn new(n_classes: usize, d: usize, spread: f64, sd: f64, seed: u64) -> Result<Self> {
        if n_classes < 2 || d == 0 || !(sd > 0.0) || !(spread > 0.0) {
            return Err(Error::InvalidArgument(
                "blobs need >= 2 classes, d >= 1 and positive spread/sd".into(),
            ));
        }
        let mut r = rng::rng(rng::derive(seed, tag::CENTERS));
        let centers = (0..n_classes)
            .map(|_| (0..d).map(|_| r.random_range(-spread..=spread)).collect())
            .collect();
        Ok(Blobs { centers, sd })
    }

    pub fn n_classes(&self) -> usize {
        self.centers.len()
    }

    /// `n` points with labels uniform over the classes.
    pub fn sample(&self, n: usize, seed: u64) -> MultiClassData {
        let mut r = rng::rng(seed);
        let d = self.centers[0].len();
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let (row, y) = self.sample_one(&mut r);
            debug_assert_eq!(row.len(), d);
            rows.push(row);
            labels.push(y);
        }
        MultiClassData::new(rows, labels, self.n_classes()).expect("blob sample is well formed")
    }

    pub fn sample_one(&self, r: &mut ChaCha8Rng) -> (Vec<f64>, usize) {
        let y = r.random_range(0..self.centers.len());
        let row = self.centers[y]
            .iter()
            .map(|&c| {
                c + self.sd * rng::normal(r)
            })
            .collect();
        (row, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(a: f64) -> GaussianMixtureConfig {
        GaussianMixtureConfig {
            d: 5,
            a,
            n_components: 7,
            component_box: 3.0,
            seed: 42,
        }
    }

    #[test]
    fn centers_live_in_the_box() {
        let m = GaussianMixture::new(1000, 1000, 3.0, 1).unwrap();
        assert_eq!(m.centers().len(), 1000);
        assert!(m.centers().iter().all(|c| c.len() == 1000 && c.iter().all(|v| v.abs() <= 3.0)));
    }

    #[test]
    fn zero_scale_returns_centers() {
        let data = gen_gaussian_mixture(&cfg(0.0), &cfg(0.0), 20, 5, 3).unwrap();
        let m = GaussianMixture::from_config(&cfg(0.0)).unwrap();
        for row in data.rows() {
            assert!(m.centers().iter().any(|c| c.as_slice() == row));
        }
        assert_eq!(data.indices_of(Label::Outlier).len(), 5);
    }

    #[test]
    fn mismatched_configs_error() {
        let mut other = cfg(1.0);
        other.d = 6;
        assert!(gen_gaussian_mixture(&cfg(1.0), &other, 3, 3, 0).is_err());
        let mut shifted = cfg(1.0);
        shifted.seed = 43;
        assert!(gen_gaussian_mixture(&cfg(1.0), &shifted, 3, 3, 0).is_err());
    }

    #[test]
    fn mixture_mean_matches_monte_carlo() {
        // Each coordinate has variance a + Var(W_j); the sample mean over
        // 1e5 draws must sit within 3 standard errors of the center mean.
        let m = GaussianMixture::new(3, 10, 3.0, 9).unwrap();
        let a = 0.7;
        let n = 100_000;
        let data = m.sample(a, 1.0, n, 0, 5).unwrap();
        let mu = m.mean();
        for j in 0..3 {
            let col: Vec<f64> = data.rows().map(|r| r[j]).collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            let se = libm::sqrt(var / n as f64);
            assert!((mean - mu[j]).abs() <= 3.0 * se, "coord {j}: {mean} vs {}", mu[j]);
        }
    }

    #[test]
    fn symmetric_betas_give_half_outliers() {
        let b = alloc::vec![0.3, -1.0, 2.0];
        let g = calibrate_intercept(&b, &b, 0.5, 2000, 0.01, 1).unwrap();
        assert_eq!(g, 0.0);
        let m = LogisticModel {
            beta0: b.clone(),
            beta1: b,
            gamma: 0.0,
        };
        assert_eq!(m.outlier_probability(&[1.0, 2.0, 3.0]), 0.5);
    }

    #[test]
    fn intercept_reaches_target_fraction() {
        let c = LogisticModelConfig {
            n: 100_000,
            d: 10,
            beta_variance: 3.0,
            target_outlier_frac: 0.2,
            mc_samples: 20_000,
            tol: 0.02,
            seed: 3,
        };
        let data = gen_logistic_model(&c).unwrap();
        let frac = data.indices_of(Label::Outlier).len() as f64 / data.len() as f64;
        assert!((0.18..=0.22).contains(&frac), "realized fraction {frac}");
    }

    #[test]
    fn small_target_converges() {
        let c = LogisticModelConfig {
            d: 100,
            target_outlier_frac: 0.01,
            tol: 0.005,
            ..Default::default()
        };
        let m = LogisticModel::new(&c).unwrap();
        assert!(m.gamma < 0.0);
    }

    #[test]
    fn outlier_fraction_increases_with_intercept() {
        let c = LogisticModelConfig {
            d: 4,
            target_outlier_frac: 0.3,
            mc_samples: 5000,
            ..Default::default()
        };
        let mut m = LogisticModel::new(&c).unwrap();
        let mut last = 0.0;
        for g in [-4.0, -1.0, 0.0, 1.0, 4.0] {
            m.gamma = g;
            let data = m.sample(20_000, 11).unwrap();
            let frac = data.indices_of(Label::Outlier).len() as f64 / data.len() as f64;
            assert!(frac > last, "gamma {g}: {frac} <= {last}");
            last = frac;
        }
    }

    #[test]
    fn invalid_logistic_configs() {
        let bad = LogisticModelConfig {
            target_outlier_frac: 1.0,
            ..Default::default()
        };
        assert!(LogisticModel::new(&bad).is_err());
        let bad = LogisticModelConfig {
            mc_samples: 10,
            ..Default::default()
        };
        assert!(LogisticModel::new(&bad).is_err());
    }

    #[test]
    fn blobs_cover_all_classes() {
        let b = Blobs::new(3, 2, 4.0, 1.0, 0).unwrap();
        let s = b.sample(300, 1);
        for y in 0..3 {
            assert!(s.labels().contains(&y));
        }
    }
}
