//! Labeled data containers and deterministic splitting into
//! training/calibration sets and cross-validation folds.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Inlier (label 0) or outlier (label 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Inlier = 0,
    Outlier = 1,
}

impl Label {
    pub fn from_u8(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Inlier),
            1 => Some(Label::Outlier),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn is_outlier(self) -> bool {
        self == Label::Outlier
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: Label,
}

/// Row-major feature matrix with one binary label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    features: Vec<f64>,
    labels: Vec<Label>,
}

impl Dataset {
    pub fn empty(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        Ok(Dataset {
            d,
            features: Vec::new(),
            labels: Vec::new(),
        })
    }

    pub fn from_samples(samples: Vec<LabeledSample>) -> Result<Self> {
        let d = samples
            .first()
            .map(|s| s.features.len())
            .ok_or_else(|| Error::InvalidArgument("no samples".into()))?;
        let mut data = Dataset::empty(d)?;
        for s in samples {
            data.push(&s.features, s.label)?;
        }
        Ok(data)
    }

    pub fn push(&mut self, features: &[f64], label: Label) -> Result<()> {
        if features.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: features.len(),
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "feature {} of row {}",
                pos,
                self.labels.len()
            )));
        }
        self.features.extend_from_slice(features);
        self.labels.push(label);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn sample(&self, i: usize) -> LabeledSample {
        LabeledSample {
            features: self.row(i).to_vec(),
            label: self.labels[i],
        }
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.d)
    }

    /// Row slices for the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Vec<&[f64]> {
        indices.iter().map(|&i| self.row(i)).collect()
    }

    pub fn indices_of(&self, label: Label) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    /// Concatenate two datasets of the same dimension.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: other.d,
            });
        }
        let mut out = self.clone();
        out.features.extend_from_slice(&other.features);
        out.labels.extend_from_slice(&other.labels);
        Ok(out)
    }
}

/// Disjoint train/calibration index sets for inliers and outliers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPartition {
    pub d0_train: Vec<usize>,
    pub d0_cal: Vec<usize>,
    pub d1_train: Vec<usize>,
    pub d1_cal: Vec<usize>,
    pub seed: u64,
}

/// Random split of inliers and outliers into training and calibration
/// subsets. Training sizes are `floor(frac * count)`; the rest calibrates.
pub fn split(
    dataset: &Dataset,
    train_frac_inlier: f64,
    train_frac_outlier: f64,
    seed: u64,
) -> Result<SplitPartition> {
    for (name, f) in [("inlier", train_frac_inlier), ("outlier", train_frac_outlier)] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "{name} training fraction must lie in (0,1), got {f}"
            )));
        }
    }
    let inliers = dataset.indices_of(Label::Inlier);
    let outliers = dataset.indices_of(Label::Outlier);
    if inliers.len() < 2 {
        return Err(Error::InsufficientInliers(format!(
            "{} labeled inliers, need at least 2",
            inliers.len()
        )));
    }
    let mut r = rng::rng(rng::derive(seed, tag::SPLIT));
    let (d0_train, d0_cal) = shuffle_split(inliers, train_frac_inlier, &mut r);
    if d0_cal.is_empty() {
        return Err(Error::InsufficientInliers("empty inlier calibration set".into()));
    }
    let (d1_train, d1_cal) = shuffle_split(outliers, train_frac_outlier, &mut r);
    Ok(SplitPartition {
        d0_train,
        d0_cal,
        d1_train,
        d1_cal,
        seed,
    })
}

fn shuffle_split(
    mut idx: Vec<usize>,
    frac: f64,
    r: &mut rng::ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    idx.shuffle(r);
    let n_train = libm::floor(frac * idx.len() as f64) as usize;
    let cal = idx.split_off(n_train);
    (idx, cal)
}

/// Balanced random assignment of an index set to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    fold_of: BTreeMap<usize, usize>,
    members: Vec<Vec<usize>>,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn fold_of(&self, index: usize) -> Option<usize> {
        self.fold_of.get(&index).copied()
    }

    /// Members of fold `k`, in shuffled order.
    pub fn members(&self, k: usize) -> &[usize] {
        &self.members[k]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// Build an assignment from explicit fold memberships.
    pub fn from_members(members: Vec<Vec<usize>>, seed: u64) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::InvalidFolds("need at least 2 folds".into()));
        }
        let mut fold_of = BTreeMap::new();
        for (k, m) in members.iter().enumerate() {
            for &i in m {
                if fold_of.insert(i, k).is_some() {
                    return Err(Error::InvalidFolds(format!("index {i} in two folds")));
                }
            }
        }
        Ok(FoldAssignment {
            fold_of,
            members,
            seed,
        })
    }
}

pub fn assign_folds(indices: &[usize], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidFolds(format!("K must be at least 2, got {k}")));
    }
    if k > indices.len() {
        return Err(Error::InvalidFolds(format!(
            "K = {k} exceeds the number of indices ({})",
            indices.len()
        )));
    }
    let mut order = indices.to_vec();
    order.shuffle(&mut rng::rng(seed));
    let mut members = alloc::vec![Vec::new(); k];
    for (pos, i) in order.into_iter().enumerate() {
        members[pos % k].push(i);
    }
    FoldAssignment::from_members(members, seed)
}

#[cfg(test)]
mod tests {
    use alloc::string::ToString;
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn toy(n_in: usize, n_out: usize) -> Dataset {
        let mut d = Dataset::empty(2).unwrap();
        for i in 0..n_in {
            d.push(&[i as f64, 0.0], Label::Inlier).unwrap();
        }
        for i in 0..n_out {
            d.push(&[i as f64, 1.0], Label::Outlier).unwrap();
        }
        d
    }

    #[test]
    fn split_sizes() {
        let p = split(&toy(4, 2), 0.5, 0.5, 7).unwrap();
        assert_eq!(p.d0_train.len(), 2);
        assert_eq!(p.d0_cal.len(), 2);
        assert_eq!(p.d1_train.len(), 1);
        assert_eq!(p.d1_cal.len(), 1);
    }

    #[test]
    fn split_rejects_single_inlier() {
        let err = split(&toy(1, 3), 0.5, 0.5, 7).unwrap_err();
        assert!(matches!(err, Error::InsufficientInliers(_)));
        assert!(err.to_string().contains("insufficient inliers"));
    }

    #[test]
    fn split_is_deterministic() {
        let d = toy(30, 12);
        assert_eq!(split(&d, 0.5, 0.5, 99).unwrap(), split(&d, 0.5, 0.5, 99).unwrap());
        assert_ne!(split(&d, 0.5, 0.5, 99).unwrap(), split(&d, 0.5, 0.5, 100).unwrap());
    }

    #[test]
    fn split_partitions_by_label() {
        let d = toy(11, 5);
        let p = split(&d, 0.3, 0.6, 1).unwrap();
        let mut zero: Vec<usize> = p.d0_train.iter().chain(&p.d0_cal).copied().collect();
        zero.sort();
        assert_eq!(zero, d.indices_of(Label::Inlier));
        let mut one: Vec<usize> = p.d1_train.iter().chain(&p.d1_cal).copied().collect();
        one.sort();
        assert_eq!(one, d.indices_of(Label::Outlier));
        assert_eq!(p.d0_train.len(), 3);
        assert_eq!(p.d1_train.len(), 3);
    }

    #[test]
    fn fold_examples() {
        let ten: Vec<usize> = (0..10).collect();
        let f = assign_folds(&ten, 5, 3).unwrap();
        assert_eq!(f.sizes(), vec![2; 5]);
        let eleven: Vec<usize> = (0..11).collect();
        let mut sizes = assign_folds(&eleven, 5, 3).unwrap().sizes();
        sizes.sort();
        assert_eq!(sizes, vec![2, 2, 2, 2, 3]);
        assert!(assign_folds(&ten, 12, 3).is_err());
        assert!(assign_folds(&ten, 1, 3).is_err());
    }

    #[test]
    fn push_rejects_bad_rows() {
        let mut d = Dataset::empty(2).unwrap();
        assert!(d.push(&[1.0], Label::Inlier).is_err());
        assert!(d.push(&[1.0, f64::NAN], Label::Inlier).is_err());
        assert!(Dataset::empty(0).is_err());
    }

    proptest! {
        #[test]
        fn folds_are_balanced_partitions(n in 2usize..60, k_raw in 2usize..60, seed in any::<u64>()) {
            let k = 2 + k_raw % (n - 1);
            let idx: Vec<usize> = (100..100 + n).collect();
            let f = assign_folds(&idx, k, seed).unwrap();
            let sizes = f.sizes();
            prop_assert_eq!(sizes.iter().sum::<usize>(), n);
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for &i in &idx {
                let fold = f.fold_of(i).unwrap();
                prop_assert!(f.members(fold).contains(&i));
            }
            prop_assert_eq!(f, assign_folds(&idx, k, seed).unwrap());
        }
    }
}
