use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{
    canonical_labeled, canonical_rows, check_rows, sq_dist, Classifier, Family, FittedClassifier,
    FittedModel, ScoreModel,
};
use crate::error::{Error, Result};

/// One-class nearest neighbours: the score is minus the distance to the
/// k-th nearest training point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnOneClass {
    pub k: usize,
}

impl KnnOneClass {
    pub fn new(k: usize) -> Self {
        KnnOneClass { k: k.max(1) }
    }
}

impl Default for KnnOneClass {
    fn default() -> Self {
        KnnOneClass::new(5)
    }
}

#[derive(Debug, Clone)]
struct KnnFit {
    k: usize,
    rows: Vec<Vec<f64>>,
}

impl ScoreModel for KnnOneClass {
    fn name(&self) -> String {
        format!("knn(k={})", self.k)
    }

    fn family(&self) -> Family {
        Family::OneClass
    }

    fn min_samples(&self) -> usize {
        self.k
    }

    fn fit(&self, target: &[&[f64]], _others: &[&[f64]]) -> Result<Arc<dyn FittedModel>> {
        check_rows(&self.name(), target, self.k)?;
        Ok(Arc::new(KnnFit {
            k: self.k,
            rows: canonical_rows(target).into_iter().map(<[f64]>::to_vec).collect(),
        }))
    }
}

impl FittedModel for KnnFit {
    fn score(&self, x: &[f64]) -> f64 {
        let mut d: Vec<f64> = self.rows.iter().map(|r| sq_dist(r, x)).collect();
        let (_, kth, _) = d.select_nth_unstable_by(self.k - 1, f64::total_cmp);
        -libm::sqrt(*kth)
    }
}

/// Labeled neighbour lookup shared by the binary and multi-class variants.
/// Neighbours are ordered by (distance, label), which keeps the vote
/// independent of the training order.
#[derive(Debug, Clone)]
struct Neighbours {
    k: usize,
    n_classes: usize,
    rows: Vec<(Vec<f64>, usize)>,
}

impl Neighbours {
    fn votes(&self, x: &[f64]) -> Vec<f64> {
        let mut d: Vec<(f64, usize)> = self.rows.iter().map(|(r, y)| (sq_dist(r, x), *y)).collect();
        let k = self.k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        d.select_nth_unstable_by(k - 1, cmp);
        let mut counts = alloc::vec![0.0; self.n_classes];
        for &(_, y) in &d[..k] {
            counts[y] += 1.0;
        }
        counts.iter_mut().for_each(|c| *c /= k as f64);
        counts
    }
}

/// Binary nearest neighbours: the score is the fraction of target-class
/// points among the k nearest training points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnBinary {
    pub k: usize,
}

impl KnnBinary {
    pub fn new(k: usize) -> Self {
        KnnBinary { k: k.max(1) }
    }
}

impl Default for KnnBinary {
    fn default() -> Self {
        KnnBinary::new(5)
    }
}

#[derive(Debug, Clone)]
struct KnnBinaryFit(Neighbours);

impl FittedModel for KnnBinaryFit {
    fn score(&self, x: &[f64]) -> f64 {
        self.0.votes(x)[0]
    }
}

impl ScoreModel for KnnBinary {
    fn name(&self) -> String {
        format!("knn-binary(k={})", self.k)
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
        let rows: Vec<&[f64]> = target.iter().chain(others).copied().collect();
        check_rows(&self.name(), &rows, 1)?;
        let labels: Vec<usize> = (0..rows.len()).map(|i| usize::from(i >= target.len())).collect();
        let rows = canonical_labeled(&rows, &labels)
            .into_iter()
            .map(|(r, y)| (r.to_vec(), y))
            .collect();
        Ok(Arc::new(KnnBinaryFit(Neighbours {
            k: self.k,
            n_classes: 2,
            rows,
        })))
    }
}

/// Multi-class nearest-neighbour vote fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnClassifier {
    pub k: usize,
}

impl KnnClassifier {
    pub fn new(k: usize) -> Self {
        KnnClassifier { k: k.max(1) }
    }
}

#[derive(Debug, Clone)]
struct KnnClassifierFit(Neighbours);

impl FittedClassifier for KnnClassifierFit {
    fn proba(&self, x: &[f64]) -> Vec<f64> {
        self.0.votes(x)
    }
}

impl Classifier for KnnClassifier {
    fn name(&self) -> String {
        format!("knn-classifier(k={})", self.k)
    }

    fn fit(&self, rows: &[&[f64]], labels: &[usize], n_classes: usize) -> Result<Arc<dyn FittedClassifier>> {
        check_rows(&self.name(), rows, 1)?;
        if labels.len() != rows.len() {
            return Err(Error::LengthMismatch {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        if labels.iter().any(|&y| y >= n_classes) {
            return Err(Error::InvalidArgument("label out of range".into()));
        }
        let rows = canonical_labeled(rows, labels)
            .into_iter()
            .map(|(r, y)| (r.to_vec(), y))
            .collect();
        Ok(Arc::new(KnnClassifierFit(Neighbours {
            k: self.k,
            n_classes,
            rows,
        })))
    }
}
