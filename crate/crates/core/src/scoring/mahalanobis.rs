use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{canonical_rows, check_rows, Family, FittedModel, ScoreModel};
use crate::error::{Error, Result};

/// Minus the Mahalanobis distance to the training mean. The covariance gets
/// a ridge of `ridge * (1 + mean variance)` on the diagonal; if that is still
/// not positive definite the ridge grows tenfold until it is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mahalanobis {
    pub ridge: f64,
}

impl Default for Mahalanobis {
    fn default() -> Self {
        Mahalanobis { ridge: 1e-3 }
    }
}

#[derive(Debug, Clone)]
struct MahalanobisFit {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
}

impl ScoreModel for Mahalanobis {
    fn name(&self) -> String {
        format!("mahalanobis(ridge={})", self.ridge)
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
        let mut mean = DVector::<f64>::zeros(d);
        for r in &rows {
            mean += DVector::from_column_slice(r);
        }
        mean /= n;
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for r in &rows {
            let c = DVector::from_column_slice(r) - &mean;
            cov.ger(1.0, &c, &c, 1.0);
        }
        cov /= n - 1.0;
        if cov.iter().chain(mean.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{} covariance", self.name())));
        }
        let mut eps = self.ridge.max(f64::MIN_POSITIVE) * (1.0 + cov.trace() / d as f64);
        let precision = loop {
            let mut reg = cov.clone();
            for i in 0..d {
                reg[(i, i)] += eps;
            }
            if let Some(ch) = reg.cholesky() {
                break ch.inverse();
            }
            eps *= 10.0;
        };
        Ok(Arc::new(MahalanobisFit { mean, precision }))
    }
}

impl FittedModel for MahalanobisFit {
    fn score(&self, x: &[f64]) -> f64 {
        let c = DVector::from_column_slice(x) - &self.mean;
        let q = c.dot(&(&self.precision * &c));
        -libm::sqrt(if q.is_nan() { q } else { q.max(0.0) })
    }
}
