//! Conformity-score models.
//!
//! Orientation is fixed crate-wide: larger scores mean "more like the
//! training target". For one-class models the target is the single training
//! class; binary models score `P(target class | x)`.
//!
//! Every `fit` is invariant to the order of its training rows. Models whose
//! arithmetic depends on summation order first sort their inputs into a
//! canonical order (see [`canonical_rows`]).

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::error::{Error, Result};

mod iforest;
mod kde;
mod knn;
mod logistic;
mod mahalanobis;
mod naive_bayes;
mod toolbox;

pub use iforest::{average_path_length, IsolationForest};
pub use kde::Kde;
pub use knn::{KnnBinary, KnnClassifier, KnnOneClass};
pub use logistic::LogisticRegression;
pub use mahalanobis::Mahalanobis;
pub use naive_bayes::GaussianNb;
pub use toolbox::{Candidate, FittedToolbox, Role, Toolbox, ToolboxEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    OneClass,
    Binary,
}

pub trait FittedModel: Send + Sync + fmt::Debug {
    fn score(&self, x: &[f64]) -> f64;

    fn score_batch(&self, rows: &[&[f64]]) -> Vec<f64> {
        rows.iter().map(|x| self.score(x)).collect()
    }
}

/// An untrained score model.
pub trait ScoreModel: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn family(&self) -> Family;

    /// Smallest training set (of the target class) the model accepts.
    fn min_samples(&self) -> usize;

    /// Fit on `target`, the class the score should call conforming. Binary
    /// models also use `others`; one-class models ignore it.
    fn fit(&self, target: &[&[f64]], others: &[&[f64]]) -> Result<Arc<dyn FittedModel>>;
}

pub fn fit_one_class(model: &dyn ScoreModel, rows: &[&[f64]]) -> Result<Arc<dyn FittedModel>> {
    model.fit(rows, &[])
}

/// Fit a binary model with 0/1 labels; the result scores `P(Y = 0 | x)`.
pub fn fit_binary(
    model: &dyn ScoreModel,
    rows: &[&[f64]],
    labels: &[u8],
) -> Result<Arc<dyn FittedModel>> {
    if rows.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: rows.len(),
            got: labels.len(),
        });
    }
    let zero: Vec<&[f64]> = rows.iter().zip(labels).filter(|(_, &l)| l == 0).map(|(r, _)| *r).collect();
    let one: Vec<&[f64]> = rows.iter().zip(labels).filter(|(_, &l)| l != 0).map(|(r, _)| *r).collect();
    if zero.is_empty() || one.is_empty() {
        return Err(Error::SingleClass(model.name()));
    }
    model.fit(&zero, &one)
}

/// Sign-flipped twin of a model: `score_flip(x) = -score(x)`.
#[derive(Debug, Clone)]
pub struct Flip(pub Arc<dyn ScoreModel>);

impl ScoreModel for Flip {
    fn name(&self) -> String {
        flipped_name(&self.0.name())
    }

    fn family(&self) -> Family {
        self.0.family()
    }

    fn min_samples(&self) -> usize {
        self.0.min_samples()
    }

    fn fit(&self, target: &[&[f64]], others: &[&[f64]]) -> Result<Arc<dyn FittedModel>> {
        Ok(Arc::new(FlippedFit(self.0.fit(target, others)?)))
    }
}

pub fn flip(model: Arc<dyn ScoreModel>) -> Arc<dyn ScoreModel> {
    Arc::new(Flip(model))
}

pub(crate) fn flipped_name(name: &str) -> String {
    alloc::format!("flip({name})")
}

#[derive(Debug, Clone)]
pub struct FlippedFit(pub Arc<dyn FittedModel>);

impl FittedModel for FlippedFit {
    fn score(&self, x: &[f64]) -> f64 {
        -self.0.score(x)
    }
}

/// Lexicographic total order on rows.
pub fn cmp_rows(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Rows sorted into the canonical order, so that fitted state depends only
/// on the multiset of rows.
pub fn canonical_rows<'a>(rows: &[&'a [f64]]) -> Vec<&'a [f64]> {
    let mut v = rows.to_vec();
    v.sort_by(|a, b| cmp_rows(a, b));
    v
}

pub(crate) fn check_rows(model: &str, rows: &[&[f64]], min: usize) -> Result<usize> {
    if rows.len() < min {
        return Err(Error::TooFewSamples {
            model: model.into(),
            needed: min,
            got: rows.len(),
        });
    }
    let d = rows[0].len();
    if d == 0 {
        return Err(Error::InvalidArgument("zero-dimensional rows".into()));
    }
    for r in rows {
        if r.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: r.len(),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(alloc::format!("training row for {model}")));
        }
    }
    Ok(d)
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Multi-class probabilistic classifier, used by TCV+ prediction sets.
pub trait Classifier: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn fit(
        &self,
        rows: &[&[f64]],
        labels: &[usize],
        n_classes: usize,
    ) -> Result<Arc<dyn FittedClassifier>>;
}

pub trait FittedClassifier: Send + Sync + fmt::Debug {
    /// Estimated class probabilities, length `n_classes`.
    fn proba(&self, x: &[f64]) -> Vec<f64>;
}

/// `(row, label)` pairs in canonical order.
pub(crate) fn canonical_labeled<'a>(rows: &[&'a [f64]], labels: &[usize]) -> Vec<(&'a [f64], usize)> {
    let mut v: Vec<(&[f64], usize)> = rows.iter().copied().zip(labels.iter().copied()).collect();
    v.sort_by(|a, b| cmp_rows(a.0, b.0).then(a.1.cmp(&b.1)));
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn flip_is_an_involution() {
        let base: Arc<dyn ScoreModel> = Arc::new(KnnOneClass::new(2));
        let twice = flip(flip(base.clone()));
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.7, (i * i) as f64 * 0.1]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let a = fit_one_class(base.as_ref(), &refs).unwrap();
        let b = fit_one_class(twice.as_ref(), &refs).unwrap();
        let once = fit_one_class(flip(base.clone()).as_ref(), &refs).unwrap();
        for x in [[0.3, 0.2], [5.0, -1.0], [2.0, 2.0]] {
            assert_eq!(a.score(&x), b.score(&x));
            assert_eq!(once.score(&x), -a.score(&x));
        }
        assert_eq!(twice.name(), "flip(flip(knn(k=2)))");
    }

    #[test]
    fn flip_reverses_ranking() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64).sin(), (i as f64).cos()]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let m: Arc<dyn ScoreModel> = Arc::new(Kde::default());
        let f = fit_one_class(m.as_ref(), &refs).unwrap();
        let g = fit_one_class(flip(m).as_ref(), &refs).unwrap();
        let probes: Vec<[f64; 2]> = (0..15).map(|i| [i as f64 * 0.13 - 1.0, 0.5 - i as f64 * 0.07]).collect();
        let mut by_f: Vec<usize> = (0..probes.len()).collect();
        by_f.sort_by(|&i, &j| f.score(&probes[i]).total_cmp(&f.score(&probes[j])));
        let mut by_g: Vec<usize> = (0..probes.len()).collect();
        by_g.sort_by(|&i, &j| g.score(&probes[i]).total_cmp(&g.score(&probes[j])));
        by_g.reverse();
        assert_eq!(by_f, by_g);
    }

    #[test]
    fn binary_fit_requires_both_classes() {
        let rows = [[0.0], [1.0]];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let err = fit_binary(&GaussianNb::default(), &refs, &[0, 0]).unwrap_err();
        assert!(matches!(err, Error::SingleClass(_)));
    }
}
