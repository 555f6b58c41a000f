use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{canonical_labeled, check_rows, Family, FittedModel, ScoreModel};
use crate::error::{Error, Result};

/// L2-regularized logistic regression fitted by full-batch gradient descent
/// with Armijo backtracking, on standardized features. The score is the
/// fitted probability of the target class. The intercept is not penalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticRegression {
    pub l2: f64,
    pub iterations: usize,
}

impl Default for LogisticRegression {
    fn default() -> Self {
        LogisticRegression {
            l2: 1e-4,
            iterations: 500,
        }
    }
}

#[derive(Debug, Clone)]
struct LogisticFit {
    center: Vec<f64>,
    inv_scale: Vec<f64>,
    w: Vec<f64>,
    b: f64,
}

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

struct Problem {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    l2: f64,
}

impl Problem {
    fn objective(&self, w: &[f64], b: f64) -> f64 {
        let n = self.x.len() as f64;
        let loss: f64 = self
            .x
            .iter()
            .zip(&self.y)
            .map(|(xi, yi)| {
                let z = b + xi.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
                log1p_exp(z) - yi * z
            })
            .sum();
        loss / n + 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let n = self.x.len() as f64;
        let mut gw = alloc::vec![0.0; w.len()];
        let mut gb = 0.0;
        for (xi, yi) in self.x.iter().zip(&self.y) {
            let z = b + xi.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
            let e = sigmoid(z) - yi;
            gb += e;
            for (g, a) in gw.iter_mut().zip(xi) {
                *g += e * a;
            }
        }
        for (g, wj) in gw.iter_mut().zip(w) {
            *g = *g / n + self.l2 * wj;
        }
        (gw, gb / n)
    }
}

impl ScoreModel for LogisticRegression {
    fn name(&self) -> String {
        format!("logistic(l2={})", self.l2)
    }

    fn family(&self) -> Family {
        Family::Binary
    }

    fn min_samples(&self) -> usize {
        1
    }

    fn fit(&self, target: &[&[f64]], others: &[&[f64]]) -> Result<Arc<dyn FittedModel>> {
        if target.is_empty() || others.is_empty() {
            return Err(Error::SingleClass(self.name()));
        }
        let all: Vec<&[f64]> = target.iter().chain(others).copied().collect();
        let d = check_rows(&self.name(), &all, 2)?;
        let labels: Vec<usize> = (0..all.len()).map(|i| usize::from(i >= target.len())).collect();
        let data = canonical_labeled(&all, &labels);
        let n = data.len() as f64;

        let mut center = alloc::vec![0.0; d];
        let mut inv_scale = alloc::vec![1.0; d];
        for j in 0..d {
            let m = data.iter().map(|(r, _)| r[j]).sum::<f64>() / n;
            let v = data.iter().map(|(r, _)| (r[j] - m) * (r[j] - m)).sum::<f64>() / n;
            center[j] = m;
            if v > 0.0 {
                inv_scale[j] = 1.0 / libm::sqrt(v);
            }
        }
        let problem = Problem {
            x: data
                .iter()
                .map(|(r, _)| r.iter().zip(&center).zip(&inv_scale).map(|((v, c), s)| (v - c) * s).collect())
                .collect(),
            // Target class is the positive label.
            y: data.iter().map(|&(_, l)| if l == 0 { 1.0 } else { 0.0 }).collect(),
            l2: self.l2,
        };

        let mut w = alloc::vec![0.0; d];
        let mut b = 0.0;
        let mut f = problem.objective(&w, b);
        let mut step = 1.0;
        for _ in 0..self.iterations {
            let (gw, gb) = problem.gradient(&w, b);
            let gnorm2 = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
            if gnorm2 < 1e-20 {
                break;
            }
            step *= 2.0;
            let mut accepted = false;
            for _ in 0..60 {
                let w_new: Vec<f64> = w.iter().zip(&gw).map(|(a, g)| a - step * g).collect();
                let b_new = b - step * gb;
                let f_new = problem.objective(&w_new, b_new);
                if f_new <= f - 0.5 * step * gnorm2 {
                    w = w_new;
                    b = b_new;
                    f = f_new;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Ok(Arc::new(LogisticFit { center, inv_scale, w, b }))
    }
}

impl FittedModel for LogisticFit {
    fn score(&self, x: &[f64]) -> f64 {
        let z = self.b
            + x.iter()
                .zip(&self.center)
                .zip(&self.inv_scale)
                .zip(&self.w)
                .map(|(((v, c), s), w)| (v - c) * s * w)
                .sum::<f64>();
        sigmoid(z)
    }
}
