use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{canonical_labeled, check_rows, Classifier, Family, FittedClassifier, FittedModel, ScoreModel};
use crate::error::{Error, Result};

/// Gaussian naive Bayes. Variances are smoothed by
/// `var_smoothing * max_j var_j` (with a tiny absolute floor).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianNb {
    pub var_smoothing: f64,
}

impl Default for GaussianNb {
    fn default() -> Self {
        GaussianNb { var_smoothing: 1e-9 }
    }
}

#[derive(Debug, Clone)]
struct NbFit {
    log_prior: Vec<f64>,
    means: Vec<Vec<f64>>,
    vars: Vec<Vec<f64>>,
}

impl NbFit {
    fn train(rows: &[&[f64]], labels: &[usize], n_classes: usize, smoothing: f64) -> Result<NbFit> {
        let d = check_rows("naive-bayes", rows, 1)?;
        let data = canonical_labeled(rows, labels);
        let n = data.len() as f64;
        let mut counts = alloc::vec![0usize; n_classes];
        let mut means = alloc::vec![alloc::vec![0.0; d]; n_classes];
        for (r, y) in &data {
            if *y >= n_classes {
                return Err(Error::InvalidArgument("label out of range".into()));
            }
            counts[*y] += 1;
            for (m, v) in means[*y].iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        for (m, &c) in means.iter_mut().zip(&counts) {
            if c > 0 {
                m.iter_mut().for_each(|v| *v /= c as f64);
            }
        }
        let mut vars = alloc::vec![alloc::vec![0.0; d]; n_classes];
        for (r, y) in &data {
            for ((s, v), m) in vars[*y].iter_mut().zip(r.iter()).zip(&means[*y]) {
                *s += (v - m) * (v - m);
            }
        }
        for (s, &c) in vars.iter_mut().zip(&counts) {
            if c > 0 {
                s.iter_mut().for_each(|v| *v /= c as f64);
            }
        }
        let gmean: Vec<f64> = (0..d).map(|j| data.iter().map(|(r, _)| r[j]).sum::<f64>() / n).collect();
        let max_var = (0..d)
            .map(|j| data.iter().map(|(r, _)| (r[j] - gmean[j]) * (r[j] - gmean[j])).sum::<f64>() / n)
            .fold(0.0, f64::max);
        let eps = (smoothing * max_var).max(1e-12);
        vars.iter_mut().for_each(|s| s.iter_mut().for_each(|v| *v += eps));
        let log_prior = counts
            .iter()
            .map(|&c| if c > 0 { libm::log(c as f64 / n) } else { f64::NEG_INFINITY })
            .collect();
        Ok(NbFit { log_prior, means, vars })
    }

    fn proba(&self, x: &[f64]) -> Vec<f64> {
        let joint: Vec<f64> = (0..self.log_prior.len())
            .map(|c| {
                if self.log_prior[c] == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                self.log_prior[c]
                    - 0.5
                        * x.iter()
                            .zip(&self.means[c])
                            .zip(&self.vars[c])
                            .map(|((v, m), s)| libm::log(2.0 * core::f64::consts::PI * s) + (v - m) * (v - m) / s)
                            .sum::<f64>()
            })
            .collect();
        let max = joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = joint.iter().map(|j| libm::exp(j - max)).collect();
        let total: f64 = e.iter().sum();
        e.into_iter().map(|v| v / total).collect()
    }
}

impl ScoreModel for GaussianNb {
    fn name(&self) -> String {
        "naive-bayes".into()
    }

    fn family(&self) -> Family {
        Family::Binary
    }

    fn min_samples(&self) -> usize {
        1
    }

    fn fit(&self, target: &[&[f64]], others: &[&[f64]]) -> Result<Arc<dyn FittedModel>> {
        if target.is_empty() || others.is_empty() {
            return Err(Error::SingleClass(ScoreModel::name(self)));
        }
        let rows: Vec<&[f64]> = target.iter().chain(others).copied().collect();
        let labels: Vec<usize> = (0..rows.len()).map(|i| usize::from(i >= target.len())).collect();
        Ok(Arc::new(NbBinary(NbFit::train(&rows, &labels, 2, self.var_smoothing)?)))
    }
}

#[derive(Debug, Clone)]
struct NbBinary(NbFit);

impl FittedModel for NbBinary {
    fn score(&self, x: &[f64]) -> f64 {
        self.0.proba(x)[0]
    }
}

impl FittedClassifier for NbFit {
    fn proba(&self, x: &[f64]) -> Vec<f64> {
        NbFit::proba(self, x)
    }
}

impl Classifier for GaussianNb {
    fn name(&self) -> String {
        "naive-bayes".into()
    }

    fn fit(&self, rows: &[&[f64]], labels: &[usize], n_classes: usize) -> Result<Arc<dyn FittedClassifier>> {
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        Ok(Arc::new(NbFit::train(rows, labels, n_classes, self.var_smoothing)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::fit_binary;

    #[test]
    fn identical_likelihoods_return_the_prior() {
        let rows = [[0.0, 1.0], [2.0, -1.0], [0.0, 1.0], [2.0, -1.0], [0.0, 1.0], [2.0, -1.0]];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let fit = fit_binary(&GaussianNb::default(), &refs, &[0, 0, 0, 0, 1, 1]).unwrap();
        for x in [[1.0, 0.0], [5.0, 5.0]] {
            assert!((fit.score(&x) - 2.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn multiclass_probabilities_sum_to_one() {
        let rows = [[0.0], [0.2], [3.0], [3.1], [6.0], [6.3]];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let fit = Classifier::fit(&GaussianNb::default(), &refs, &[0, 0, 1, 1, 2, 2], 3).unwrap();
        let p = fit.proba(&[3.05]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[1] > 0.99);
    }
}
