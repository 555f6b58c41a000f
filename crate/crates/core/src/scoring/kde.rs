use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{canonical_rows, check_rows, Family, FittedModel, ScoreModel};
use crate::error::Result;

/// Gaussian product-kernel density estimate; the score is the log density.
///
/// Per-coordinate bandwidths follow Scott's rule, `sd_j * n^(-1/(d+4))`,
/// multiplied by `bandwidth_scale`. Constant coordinates use `sd_j = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kde {
    pub bandwidth_scale: f64,
}

impl Default for Kde {
    fn default() -> Self {
        Kde { bandwidth_scale: 1.0 }
    }
}

impl Kde {
    pub fn with_scale(bandwidth_scale: f64) -> Self {
        Kde { bandwidth_scale }
    }
}

#[derive(Debug, Clone)]
struct KdeFit {
    rows: Vec<Vec<f64>>,
    inv_h: Vec<f64>,
    log_norm: f64,
}

impl ScoreModel for Kde {
    fn name(&self) -> String {
        if self.bandwidth_scale == 1.0 {
            "kde".into()
        } else {
            format!("kde(scale={})", self.bandwidth_scale)
        }
    }

    fn family(&self) -> Family {
        Family::OneClass
    }

    fn min_samples(&self) -> usize {
        2
    }

    fn fit(&self, target: &[&[f64]], _others: &[&[f64]]) -> Result<Arc<dyn FittedModel>> {
        let d = check_rows(&self.name(), target, 2)?;
        let rows = canonical_rows(target);
        let n = rows.len() as f64;
        let factor = libm::pow(n, -1.0 / (d as f64 + 4.0)) * self.bandwidth_scale;
        let mut inv_h = Vec::with_capacity(d);
        let mut log_norm = -libm::log(n);
        for j in 0..d {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean) * (r[j] - mean)).sum::<f64>() / (n - 1.0);
            let sd = if var > 0.0 { libm::sqrt(var) } else { 1.0 };
            let h = sd * factor;
            inv_h.push(1.0 / h);
            log_norm -= libm::log(h) + 0.5 * libm::log(2.0 * core::f64::consts::PI);
        }
        Ok(Arc::new(KdeFit {
            rows: rows.into_iter().map(<[f64]>::to_vec).collect(),
            inv_h,
            log_norm,
        }))
    }
}

impl FittedModel for KdeFit {
    fn score(&self, x: &[f64]) -> f64 {
        let exps: Vec<f64> = self
            .rows
            .iter()
            .map(|r| {
                -0.5 * r
                    .iter()
                    .zip(x)
                    .zip(&self.inv_h)
                    .map(|((a, b), ih)| {
                        let z = (a - b) * ih;
                        z * z
                    })
                    .sum::<f64>()
            })
            .collect();
        let max = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = exps.iter().map(|e| libm::exp(e - max)).sum();
        self.log_norm + max + libm::log(sum)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_density() {
        // Two points at +-1: sd = sqrt(2), h = sqrt(2) * 2^(-1/5).
        let rows = [[-1.0], [1.0]];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let fit = Kde::default().fit(&refs, &[]).unwrap();
        let h = 2f64.sqrt() * 2f64.powf(-0.2);
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * core::f64::consts::PI).sqrt();
        let x = 0.3;
        let expect = (0.5 * (phi((x + 1.0) / h) + phi((x - 1.0) / h)) / h).ln();
        assert!((fit.score(&[x]) - expect).abs() < 1e-12);
    }

    #[test]
    fn far_points_keep_finite_scores() {
        let rows = [[0.0, 0.0], [0.1, 0.2], [0.3, -0.1]];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let fit = Kde::with_scale(0.01).fit(&refs, &[]).unwrap();
        let s = fit.score(&[100.0, -100.0]);
        assert!(s.is_finite());
        assert!(s < fit.score(&[0.0, 0.0]));
    }
}
