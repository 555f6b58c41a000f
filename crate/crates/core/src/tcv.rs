//! Transductive cross-validation+ (TCV+).
//!
//! The labeled outliers are split into `K1` folds once; the inliers together
//! with the test point are split into `K0` folds, so the test point is part
//! of the training data of `K0 - 1` inlier-side models. Only one-class models
//! take part: the outlier side is trained on outliers, the inlier side on
//! inliers.
//!
//! The module also provides TCV+ prediction sets for multi-class
//! classification, with marginal or label-conditional coverage.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::conformal::{best, MedianDifference, PValueRecord, RankParts, SelectionCriterion};
use crate::dataset::{assign_folds, FoldAssignment};
use crate::error::{Error, Result};
use crate::rng::{self, tag};
use crate::scoring::{Classifier, Family, FittedToolbox, Role, ScoreModel, Toolbox};

/// Default number of folds on both sides.
pub const DEFAULT_FOLDS: usize = 5;

fn count_le(sorted: &[f64], x: f64) -> u64 {
    sorted.partition_point(|&v| v <= x) as u64
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Fit `toolbox` once per fold on the complement of that fold, keeping only
/// the candidates that could be trained in every fold.
fn fit_folds(toolbox: &Toolbox, rows: &[&[f64]], folds: &FoldAssignment) -> Result<(Vec<FittedToolbox>, Vec<String>, Vec<Vec<usize>>)> {
    let mut fits = Vec::with_capacity(folds.k());
    for k in 0..folds.k() {
        let train: Vec<&[f64]> = (0..rows.len()).filter(|&i| folds.fold_of(i) != Some(k)).map(|i| rows[i]).collect();
        fits.push(FittedToolbox::fit(toolbox, Role::Inlier, &train, &[])?);
    }
    let names: Vec<String> = toolbox
        .entries()
        .iter()
        .map(|e| e.name.clone())
        .filter(|n| fits.iter().all(|f: &FittedToolbox| f.candidates().iter().any(|c| &c.name == n)))
        .collect();
    let index = fits
        .iter()
        .map(|f| {
            names
                .iter()
                .map(|n| f.candidates().iter().position(|c| &c.name == n).unwrap())
                .collect()
        })
        .collect();
    Ok((fits, names, index))
}

fn one_class(toolbox: &Toolbox) -> Result<Toolbox> {
    toolbox.restrict(Family::OneClass)
}

/// Scores `[candidate][row]` of the fold-`k` models.
fn fold_scores(fits: &[FittedToolbox], index: &[Vec<usize>], k: usize, rows: &[&[f64]]) -> Vec<Vec<f64>> {
    let all = fits[k].score_rows(rows);
    index[k].iter().map(|&c| all[c].clone()).collect()
}

/// Outlier-side state: fold models trained on `D1` minus each fold, with the
/// out-of-fold scores of every outlier. Independent of the test point.
#[derive(Debug, Clone)]
pub struct TcvOutlierSide {
    folds: Option<FoldAssignment>,
    fits: Vec<FittedToolbox>,
    index: Vec<Vec<usize>>,
    names: Vec<String>,
    d1: Vec<Vec<f64>>,
    /// `[candidate][fold]` sorted out-of-fold scores of the fold members.
    own_sorted: Vec<Vec<Vec<f64>>>,
}

impl TcvOutlierSide {
    /// With no outliers (or no usable model) `u1` is identically one.
    pub fn fit(d1: &[&[f64]], toolbox: &Toolbox, k1: usize, seed: u64) -> Result<Self> {
        if d1.is_empty() {
            return Ok(Self::empty());
        }
        if k1 > d1.len() {
            return Err(Error::InvalidFolds(format!("K1 = {k1} exceeds |D1| = {}", d1.len())));
        }
        let idx: Vec<usize> = (0..d1.len()).collect();
        let folds = assign_folds(&idx, k1, rng::derive(seed, tag::FOLDS_OUTLIER))?;
        Self::with_folds(d1, &one_class(toolbox)?, folds)
    }

    pub fn with_folds(d1: &[&[f64]], toolbox: &Toolbox, folds: FoldAssignment) -> Result<Self> {
        check_folds(&folds, d1.len())?;
        let (fits, names, index) = fit_folds(toolbox, d1, &folds)?;
        let mut own_sorted = vec![vec![Vec::new(); folds.k()]; names.len()];
        for k in 0..folds.k() {
            let members: Vec<&[f64]> = folds.members(k).iter().map(|&j| d1[j]).collect();
            for (c, s) in fold_scores(&fits, &index, k, &members).into_iter().enumerate() {
                own_sorted[c][k] = sorted(s);
            }
        }
        Ok(TcvOutlierSide {
            folds: Some(folds),
            fits,
            index,
            names,
            d1: d1.iter().map(|r| r.to_vec()).collect(),
            own_sorted,
        })
    }

    pub fn empty() -> Self {
        TcvOutlierSide {
            folds: None,
            fits: Vec::new(),
            index: Vec::new(),
            names: Vec::new(),
            d1: Vec::new(),
            own_sorted: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.d1.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn k(&self) -> usize {
        self.folds.as_ref().map_or(0, FoldAssignment::k)
    }

    pub fn folds(&self) -> Option<&FoldAssignment> {
        self.folds.as_ref()
    }

    /// Numerators `1 + #{j in D1 : s^{k(j)}(X_j) <= s^{k(j)}(x)}`, `[candidate][row]`.
    pub fn numerators(&self, rows: &[&[f64]]) -> Vec<Vec<u64>> {
        let mut out = vec![vec![1u64; rows.len()]; self.names.len()];
        for k in 0..self.k() {
            for (c, s) in fold_scores(&self.fits, &self.index, k, rows).into_iter().enumerate() {
                for (o, x) in out[c].iter_mut().zip(s) {
                    *o += count_le(&self.own_sorted[c][k], x);
                }
            }
        }
        out
    }

    /// `u1(x)` for candidate `c`.
    pub fn u1(&self, c: usize, x: &[f64]) -> f64 {
        self.numerators(&[x])[c][0] as f64 / (1 + self.n()) as f64
    }
}

fn check_folds(folds: &FoldAssignment, n: usize) -> Result<()> {
    let covered = (0..n).all(|i| folds.fold_of(i).is_some());
    if !covered || folds.sizes().iter().sum::<usize>() != n || folds.sizes().contains(&0) {
        return Err(Error::InvalidFolds(format!("folds do not partition {n} points")));
    }
    Ok(())
}

/// Inlier-side state for one test point.
#[derive(Debug, Clone)]
pub struct TcvState {
    /// Folds over the augmented set: index `i < n0` is inlier `i`, index
    /// `n0` is the test point.
    folds: FoldAssignment,
    fits: Vec<FittedToolbox>,
    index: Vec<Vec<usize>>,
    names: Vec<String>,
    aug: Vec<Vec<f64>>,
    /// `[candidate][i]`: out-of-fold score of augmented member `i`.
    own: Vec<Vec<f64>>,
    own_sorted: Vec<Vec<f64>>,
}

impl TcvState {
    pub fn build(d0: &[&[f64]], test: &[f64], toolbox: &Toolbox, k0: usize, seed: u64) -> Result<Self> {
        if k0 > d0.len() + 1 {
            return Err(Error::InvalidFolds(format!("K0 = {k0} exceeds |D0| + 1 = {}", d0.len() + 1)));
        }
        let idx: Vec<usize> = (0..=d0.len()).collect();
        let folds = assign_folds(&idx, k0, rng::derive(seed, tag::FOLDS_INLIER))?;
        Self::with_folds(d0, test, &one_class(toolbox)?, folds)
    }

    pub fn with_folds(d0: &[&[f64]], test: &[f64], toolbox: &Toolbox, folds: FoldAssignment) -> Result<Self> {
        if d0.is_empty() {
            return Err(Error::InsufficientInliers("TCV+ needs at least one inlier".into()));
        }
        let mut aug: Vec<&[f64]> = d0.to_vec();
        aug.push(test);
        check_folds(&folds, aug.len())?;
        let (fits, names, index) = fit_folds(toolbox, &aug, &folds)?;
        if names.is_empty() {
            return Err(Error::EmptyToolbox);
        }
        let mut own = vec![vec![0.0; aug.len()]; names.len()];
        for k in 0..folds.k() {
            let members: Vec<&[f64]> = folds.members(k).iter().map(|&j| aug[j]).collect();
            for (c, s) in fold_scores(&fits, &index, k, &members).into_iter().enumerate() {
                for (&j, v) in folds.members(k).iter().zip(s) {
                    own[c][j] = v;
                }
            }
        }
        for (c, row) in own.iter().enumerate() {
            if let Some(i) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{} score of point {i}", names[c])));
            }
        }
        let own_sorted = own.iter().map(|v| sorted(v.clone())).collect();
        Ok(TcvState {
            folds,
            fits,
            index,
            names,
            aug: aug.iter().map(|r| r.to_vec()).collect(),
            own,
            own_sorted,
        })
    }

    pub fn n0(&self) -> usize {
        self.aug.len() - 1
    }

    pub fn k(&self) -> usize {
        self.folds.k()
    }

    pub fn folds(&self) -> &FoldAssignment {
        &self.folds
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Out-of-fold scores of the augmented set for candidate `c`.
    pub fn own_scores(&self, c: usize) -> &[f64] {
        &self.own[c]
    }

    /// `u0(x; l)` for candidate `c`.
    pub fn u0(&self, c: usize, x: &[f64], l: usize) -> Result<f64> {
        if l >= self.k() {
            return Err(Error::InvalidFolds(format!("fold {l} out of range 0..{}", self.k())));
        }
        let s = fold_scores(&self.fits, &self.index, l, &[x])[c][0];
        Ok(count_le(&self.own_sorted[c], s) as f64 / (1 + self.n0()) as f64)
    }

    /// `#{j in aug : own_j <= own_i}` for every augmented member.
    fn numerators(&self, c: usize) -> Vec<u64> {
        self.own[c].iter().map(|&s| count_le(&self.own_sorted[c], s)).collect()
    }

    /// `u0(x; l)` averaged over all folds `l`, `[candidate][row]`.
    fn u0_averaged(&self, rows: &[&[f64]]) -> Vec<Vec<f64>> {
        let den = ((1 + self.n0()) * self.k()) as f64;
        let mut out = vec![vec![0.0; rows.len()]; self.names.len()];
        for l in 0..self.k() {
            for (c, s) in fold_scores(&self.fits, &self.index, l, rows).into_iter().enumerate() {
                for (o, x) in out[c].iter_mut().zip(s) {
                    *o += count_le(&self.own_sorted[c], x) as f64;
                }
            }
        }
        out.iter_mut().for_each(|r| r.iter_mut().for_each(|v| *v /= den));
        out
    }
}

/// TCV+ p-value with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct TcvRecord {
    pub parts: RankParts,
    pub record: PValueRecord,
    pub k0: usize,
    pub k1: usize,
}

/// Combine the two sides for the selected candidates.
pub fn tcv_pvalue(state: &TcvState, outlier: &TcvOutlierSide, c0: usize, c1: Option<usize>) -> Result<TcvRecord> {
    let n0 = state.n0();
    let a = state.numerators(c0);
    let b: Vec<u64> = match c1 {
        Some(c) => {
            let rows: Vec<&[f64]> = state.aug.iter().map(Vec::as_slice).collect();
            outlier.numerators(&rows).swap_remove(c)
        }
        None => vec![1; n0 + 1],
    };
    let (a_t, b_t) = (a[n0], b[n0]);
    let below = (0..n0).filter(|&i| a[i] * b_t <= a_t * b[i]).count() as u64;
    let n1 = if c1.is_some() { outlier.n() } else { 0 };
    let parts = RankParts {
        a: a_t,
        b: b_t,
        k: 1 + below,
        n0: n0 as u64,
        n1: n1 as u64,
    };
    let record = PValueRecord {
        u0: parts.u0(),
        u1: parts.u1(),
        r: parts.r(),
        u: parts.u(),
        model0: state.names[c0].clone(),
        model1: c1.map_or_else(String::new, |c| outlier.names[c].clone()),
    };
    Ok(TcvRecord {
        parts,
        record,
        k0: state.k(),
        k1: outlier.k(),
    })
}

/// Candidate selection. The inlier-side candidate maximizes the separation
/// of `u0` on `D0 ∪ {test}` above `u0` on `D1` (averaged over fold models);
/// the outlier-side candidate maximizes the separation of `u1` on `D1` above
/// `u1` on `D0 ∪ {test}`.
pub fn tcv_select(state: &TcvState, outlier: &TcvOutlierSide, criterion: &dyn SelectionCriterion) -> (usize, Option<usize>) {
    let n0 = state.n0();
    let d1: Vec<&[f64]> = outlier.d1.iter().map(Vec::as_slice).collect();
    let inv = 1.0 / (1 + n0) as f64;
    let u0_d1 = state.u0_averaged(&d1);
    let c0 = best(&state.names, |c| {
        let aug = sorted(state.numerators(c).iter().map(|&a| a as f64 * inv).collect());
        criterion.separation(&aug, &sorted(u0_d1[c].clone()))
    })
    .expect("state has candidates");
    let aug: Vec<&[f64]> = state.aug.iter().map(Vec::as_slice).collect();
    let inv1 = 1.0 / (1 + outlier.n()) as f64;
    let to_u = |v: Vec<u64>| sorted(v.into_iter().map(|b| b as f64 * inv1).collect());
    let u1_aug = outlier.numerators(&aug);
    let u1_d1 = outlier.numerators(&d1);
    let c1 = best(&outlier.names, |c| criterion.separation(&to_u(u1_d1[c].clone()), &to_u(u1_aug[c].clone())));
    (c0, c1)
}

fn single(name: &str, model: Arc<dyn ScoreModel>) -> Result<Toolbox> {
    Toolbox::named(vec![(String::from(name), model)], false)
}

/// TCV+ integrative p-value for a fixed pair of one-class models.
#[allow(clippy::too_many_arguments)]
pub fn tcv_integrative_pvalue(
    d0: &[&[f64]],
    d1: &[&[f64]],
    test: &[f64],
    model0: Arc<dyn ScoreModel>,
    model1: Arc<dyn ScoreModel>,
    k0: usize,
    k1: usize,
    seed: u64,
) -> Result<TcvRecord> {
    let name0 = model0.name();
    let name1 = model1.name();
    let out = TcvOutlierSide::fit(d1, &single(&name1, model1)?, k1, seed)?;
    let state = TcvState::build(d0, test, &single(&name0, model0)?, k0, seed)?;
    tcv_pvalue(&state, &out, 0, if out.names.is_empty() { None } else { Some(0) })
}

/// TCV+ integrative p-value with model selection over the one-class part
/// of a toolbox.
#[allow(clippy::too_many_arguments)]
pub fn tcv_with_selection(
    d0: &[&[f64]],
    d1: &[&[f64]],
    test: &[f64],
    toolbox: &Toolbox,
    k0: usize,
    k1: usize,
    seed: u64,
) -> Result<TcvRecord> {
    let out = TcvOutlierSide::fit(d1, toolbox, k1, seed)?;
    TcvPipeline { outlier: out, toolbox: one_class(toolbox)?, k0, seed }.pvalue(d0, test)
}

/// Shares the outlier-side fits across many test points.
#[derive(Debug, Clone)]
pub struct TcvPipeline {
    pub outlier: TcvOutlierSide,
    pub toolbox: Toolbox,
    pub k0: usize,
    pub seed: u64,
}

impl TcvPipeline {
    pub fn new(d1: &[&[f64]], toolbox: &Toolbox, k0: usize, k1: usize, seed: u64) -> Result<Self> {
        Ok(TcvPipeline {
            outlier: TcvOutlierSide::fit(d1, toolbox, k1, seed)?,
            toolbox: one_class(toolbox)?,
            k0,
            seed,
        })
    }

    pub fn state(&self, d0: &[&[f64]], test: &[f64]) -> Result<TcvState> {
        TcvState::build(d0, test, &self.toolbox, self.k0, self.seed)
    }

    pub fn pvalue(&self, d0: &[&[f64]], test: &[f64]) -> Result<TcvRecord> {
        let state = self.state(d0, test)?;
        let (c0, c1) = tcv_select(&state, &self.outlier, &MedianDifference);
        tcv_pvalue(&state, &self.outlier, c0, c1)
    }
}

/// Labeled multi-class data.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiClassData {
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl MultiClassData {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        if n_classes < 2 {
            return Err(Error::InvalidArgument("need at least two classes".into()));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::InvalidArgument(format!("label {y} out of range")));
        }
        if let Some(r) = rows.first() {
            let d = r.len();
            for r in &rows {
                if r.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: r.len() });
                }
                if r.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("feature".into()));
                }
            }
        }
        Ok(MultiClassData { rows, labels, n_classes })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// A prediction set with the p-value of every label.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub labels: Vec<usize>,
    pub pvalues: Vec<f64>,
    /// Folds used per label (may be reduced for small classes).
    pub folds_used: Vec<usize>,
    pub warnings: Vec<String>,
}

impl PredictionSet {
    pub fn contains(&self, y: usize) -> bool {
        self.labels.contains(&y)
    }
}

/// Out-of-fold conformity scores (fitted probability of the point's own
/// label) for the positions in `scored`, after placing `(test, y)` at the end
/// of the training pool.
fn tcv_label_scores(
    data: &MultiClassData,
    test: &[f64],
    y: usize,
    scored: &[usize],
    k: usize,
    classifier: &dyn Classifier,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = data.len();
    let label_of = |i: usize| if i == n { y } else { data.labels[i] };
    let row_of = |i: usize| if i == n { test } else { data.rows[i].as_slice() };
    let folds = assign_folds(scored, k, rng::derive_path(seed, &[tag::FOLDS_INLIER, y as u64]))?;
    let mut out = vec![0.0; scored.len()];
    let pos: alloc::collections::BTreeMap<usize, usize> = scored.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    for f in 0..k {
        let train: Vec<usize> = (0..=n).filter(|&i| folds.fold_of(i) != Some(f)).collect();
        let rows: Vec<&[f64]> = train.iter().map(|&i| row_of(i)).collect();
        let labels: Vec<usize> = train.iter().map(|&i| label_of(i)).collect();
        let fit = classifier.fit(&rows, &labels, data.n_classes)?;
        for &i in folds.members(f) {
            let p = fit.proba(row_of(i))[label_of(i)];
            if !p.is_finite() {
                return Err(Error::NonFinite(format!("class probability of point {i}")));
            }
            out[pos[&i]] = p;
        }
    }
    Ok(out)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::InvalidArgument(format!("alpha = {alpha}")));
    }
    Ok(())
}

/// Marginal-coverage TCV+ prediction set.
pub fn tcv_prediction_set(
    data: &MultiClassData,
    test: &[f64],
    classifier: &dyn Classifier,
    k: usize,
    alpha: f64,
    seed: u64,
) -> Result<PredictionSet> {
    check_alpha(alpha)?;
    let n = data.len();
    if k < 2 || k > n + 1 {
        return Err(Error::InvalidFolds(format!("K = {k} with {} labeled points", n)));
    }
    let scored: Vec<usize> = (0..=n).collect();
    let mut set = PredictionSet {
        labels: Vec::new(),
        pvalues: Vec::new(),
        folds_used: vec![k; data.n_classes],
        warnings: Vec::new(),
    };
    for y in 0..data.n_classes {
        let s = tcv_label_scores(data, test, y, &scored, k, classifier, seed)?;
        let below = s[..n].iter().filter(|&&v| v <= s[n]).count();
        set.pvalues.push((1 + below) as f64 / (1 + n) as f64);
    }
    set.labels = (0..data.n_classes).filter(|&y| set.pvalues[y] > alpha).collect();
    Ok(set)
}

/// Label-conditional TCV+ prediction set. Classes with fewer than `k`
/// members use `|D_y| + 1` folds instead, with a warning.
pub fn tcv_label_conditional_prediction_set(
    data: &MultiClassData,
    test: &[f64],
    classifier: &dyn Classifier,
    k: usize,
    alpha: f64,
    seed: u64,
) -> Result<PredictionSet> {
    check_alpha(alpha)?;
    if k < 2 {
        return Err(Error::InvalidFolds(format!("K must be at least 2, got {k}")));
    }
    let n = data.len();
    let mut set = PredictionSet {
        labels: Vec::new(),
        pvalues: Vec::new(),
        folds_used: Vec::new(),
        warnings: Vec::new(),
    };
    for y in 0..data.n_classes {
        let mut scored: Vec<usize> = (0..n).filter(|&i| data.labels[i] == y).collect();
        let n_y = scored.len();
        scored.push(n);
        let k_y = if n_y < k {
            set.warnings.push(format!("class {y} has {n_y} members; using {} folds instead of {k}", n_y + 1));
            n_y + 1
        } else {
            k
        };
        set.folds_used.push(k_y);
        if n_y == 0 {
            set.pvalues.push(1.0);
            continue;
        }
        let s = tcv_label_scores(data, test, y, &scored, k_y, classifier, seed)?;
        let below = s[..n_y].iter().filter(|&&v| v <= s[n_y]).count();
        set.pvalues.push((1 + below) as f64 / (1 + n_y) as f64);
    }
    set.labels = (0..data.n_classes).filter(|&y| set.pvalues[y] > alpha).collect();
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{FittedModel, GaussianNb, KnnOneClass};
    use crate::synth::Blobs;
    use proptest::prelude::*;

    /// Scores the first coordinate plus a per-fit offset equal to the
    /// number of training rows, so fold models are distinguishable.
    #[derive(Debug)]
    struct Shift;

    #[derive(Debug)]
    struct ShiftFit(f64);

    impl FittedModel for ShiftFit {
        fn score(&self, x: &[f64]) -> f64 {
            x[0] + self.0
        }
    }

    impl ScoreModel for Shift {
        fn name(&self) -> String {
            "shift".into()
        }
        fn family(&self) -> Family {
            Family::OneClass
        }
        fn min_samples(&self) -> usize {
            1
        }
        fn fit(&self, target: &[&[f64]], _: &[&[f64]]) -> Result<Arc<dyn FittedModel>> {
            let sum: f64 = target.iter().map(|r| r[0]).sum();
            Ok(Arc::new(ShiftFit(sum / 100.0)))
        }
    }

    fn rows(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(Vec::as_slice).collect()
    }

    fn shift_box() -> Toolbox {
        Toolbox::named(vec![("shift".into(), Arc::new(Shift) as Arc<dyn ScoreModel>)], false).unwrap()
    }

    #[test]
    fn u1_matches_enumeration() {
        let d1 = rows(&[1.0, 4.0, 2.0, 7.0]);
        let folds = FoldAssignment::from_members(vec![vec![0, 3], vec![1, 2]], 0).unwrap();
        let side = TcvOutlierSide::with_folds(&refs(&d1), &shift_box(), folds).unwrap();
        // Model k is trained on the other fold: offsets (4+2)/100 and (1+7)/100.
        let off = [0.06, 0.08];
        let fold_of = [0, 1, 1, 0];
        for x in [0.0, 1.5, 2.0, 3.0, 10.0] {
            let count = (0..4)
                .filter(|&j| d1[j][0] + off[fold_of[j]] <= x + off[fold_of[j]])
                .count();
            assert_eq!(side.u1(0, &[x]), (1 + count) as f64 / 5.0);
        }
        assert_eq!(side.u1(0, &[-5.0]), 0.2);
        assert_eq!(side.u1(0, &[50.0]), 1.0);
    }

    #[test]
    fn u0_matches_enumeration() {
        let d0 = rows(&[1.0, 3.0, 5.0]);
        let test = [2.0];
        let folds = FoldAssignment::from_members(vec![vec![0, 3], vec![1, 2]], 0).unwrap();
        let st = TcvState::with_folds(&refs(&d0), &test, &shift_box(), folds).unwrap();
        let aug = [1.0, 3.0, 5.0, 2.0];
        let off = [0.08, 0.03];
        let fold_of = [0, 1, 1, 0];
        let own: Vec<f64> = (0..4).map(|j| aug[j] + off[fold_of[j]]).collect();
        for x in [0.0, 1.0, 2.5, 4.0, 9.0] {
            for l in 0..2 {
                let count = own.iter().filter(|&&s| s <= x + off[l]).count();
                assert_eq!(st.u0(0, &[x], l).unwrap(), count as f64 / 4.0);
            }
        }
        assert_eq!(st.u0(0, &[1.0], 0).unwrap(), 0.25);
        assert!(st.u0(0, &[1.0], 2).is_err());
    }

    #[test]
    fn u0_at_own_folds_is_a_permutation_of_the_grid() {
        let d0 = rows(&[0.3, 1.7, 2.2, 5.1, 4.4]);
        let st = TcvState::build(&refs(&d0), &[3.3], &shift_box(), 3, 9).unwrap();
        let mut u: Vec<f64> = (0..6)
            .map(|i| {
                let x = if i < 5 { d0[i].clone() } else { vec![3.3] };
                st.u0(0, &x, st.folds().fold_of(i).unwrap()).unwrap()
            })
            .collect();
        u.sort_by(f64::total_cmp);
        let grid: Vec<f64> = (1..=6).map(|k| k as f64 / 6.0).collect();
        assert_eq!(u, grid);
    }

    #[test]
    fn fold_limits() {
        let d0 = rows(&[1.0, 2.0, 3.0, 4.0]);
        let d1 = rows(&[8.0, 9.0]);
        let m: Arc<dyn ScoreModel> = Arc::new(Shift);
        let p = tcv_integrative_pvalue(&refs(&d0), &refs(&d1), &[2.5], m.clone(), m.clone(), 5, 2, 1).unwrap();
        assert!(p.parts.k >= 1 && p.parts.k <= 5);
        assert!(tcv_integrative_pvalue(&refs(&d0), &refs(&d1), &[2.5], m.clone(), m.clone(), 6, 2, 1).is_err());
        assert!(tcv_integrative_pvalue(&refs(&d0), &refs(&d1), &[2.5], m.clone(), m, 2, 3, 1).is_err());
    }

    #[test]
    fn constant_u1_reduces_to_u0_rank() {
        let d0 = rows(&[1.0, 3.0, 5.0, 0.5, 2.5]);
        let m: Arc<dyn ScoreModel> = Arc::new(Shift);
        let p = tcv_integrative_pvalue(&refs(&d0), &[], &[2.0], m.clone(), m, 3, 2, 4).unwrap();
        let st = TcvState::build(&refs(&d0), &[2.0], &shift_box(), 3, 4).unwrap();
        let own = st.own_scores(0);
        let below = own[..5].iter().filter(|&&s| s <= own[5]).count();
        assert_eq!(p.record.u, (1 + below) as f64 / 6.0);
        assert_eq!(p.record.u1, 1.0);
    }

    #[test]
    fn single_model_toolbox_matches_fixed_pair() {
        let d0 = rows(&[1.0, 3.0, 5.0, 0.5, 2.5, 4.0]);
        let d1 = rows(&[7.0, 9.0, 6.5, 8.0]);
        let tb = Toolbox::named(vec![("shift".into(), Arc::new(Shift) as Arc<dyn ScoreModel>)], false).unwrap();
        let a = tcv_with_selection(&refs(&d0), &refs(&d1), &[2.0], &tb, 3, 2, 8).unwrap();
        let m: Arc<dyn ScoreModel> = Arc::new(Shift);
        let b = tcv_integrative_pvalue(&refs(&d0), &refs(&d1), &[2.0], m.clone(), m, 3, 2, 8).unwrap();
        assert_eq!(a.parts, b.parts);
    }

    #[test]
    fn flipped_twin_selected_on_inverted_data() {
        // The shift score grows with the first coordinate and the outliers
        // sit to the right of the inliers, so the raw score is inverted.
        let d0 = rows(&[1.0, 3.0, 5.0, 0.5, 2.5, 4.0, 1.2, 3.3]);
        let d1 = rows(&[9.0, 8.5, 10.0, 11.0]);
        let tb = Toolbox::new(vec![Arc::new(Shift)]).unwrap();
        let p = tcv_with_selection(&refs(&d0), &refs(&d1), &[2.0], &tb, 4, 2, 3).unwrap();
        assert_eq!(p.record.model0, "flip(shift)");
        assert_eq!(p.record.model1, "shift");
    }

    #[test]
    fn selection_is_invariant_to_inlier_permutations() {
        // Physical points 0..4 are inliers, 4 is the test point. Any
        // reordering of the augmented set (including swapping the test point
        // with an inlier) that keeps each point in its fold must give the
        // same selection.
        let pts = [[0.2, 1.0], [1.5, -0.3], [-0.7, 0.4], [0.9, 0.9], [0.1, 0.2]];
        let fold_of_point = [0, 0, 1, 1, 0];
        let d1 = vec![vec![3.0, 3.0], vec![2.5, 3.5], vec![4.0, 2.0], vec![3.3, 3.1]];
        let tb = Toolbox::new(vec![Arc::new(KnnOneClass::new(1)), Arc::new(crate::scoring::Kde::default())]).unwrap();
        let out = TcvOutlierSide::fit(&refs(&d1), &tb, 2, 5).unwrap();
        let oc = tb.restrict(Family::OneClass).unwrap();
        let mut expected = None;
        for perm in permutations(5) {
            let d0: Vec<&[f64]> = perm[..4].iter().map(|&p| pts[p].as_slice()).collect();
            let mut members = vec![Vec::new(), Vec::new()];
            for (pos, &p) in perm.iter().enumerate() {
                members[fold_of_point[p]].push(pos);
            }
            let folds = FoldAssignment::from_members(members, 0).unwrap();
            let st = TcvState::with_folds(&d0, &pts[perm[4]], &oc, folds).unwrap();
            let sel = tcv_select(&st, &out, &MedianDifference);
            match expected {
                None => expected = Some(sel),
                Some(e) => assert_eq!(e, sel),
            }
        }
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for i in 0..n {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn prediction_set_extremes() {
        let blobs = Blobs::new(3, 2, 4.0, 1.0, 2).unwrap();
        let data = blobs.sample(30, 3);
        let nb = GaussianNb::default();
        let all = tcv_prediction_set(&data, &[0.0, 0.0], &nb, 5, 0.0, 1).unwrap();
        assert_eq!(all.labels, vec![0, 1, 2]);
        let none = tcv_prediction_set(&data, &[0.0, 0.0], &nb, 5, 1.0, 1).unwrap();
        assert!(none.labels.is_empty());
        let lc = tcv_label_conditional_prediction_set(&data, &[0.0, 0.0], &nb, 5, 0.0, 1).unwrap();
        assert_eq!(lc.labels, vec![0, 1, 2]);
        assert!(tcv_prediction_set(&data, &[0.0, 0.0], &nb, 32, 0.1, 1).is_err());
    }

    #[test]
    fn single_class_label_always_included() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, 1.0]).collect();
        let data = MultiClassData::new(rows, vec![1; 12], 3).unwrap();
        for x in [[-50.0, 9.0], [5.0, 1.0]] {
            let s = tcv_label_conditional_prediction_set(&data, &x, &GaussianNb::default(), 5, 0.1, 2).unwrap();
            assert!(s.contains(1));
            assert_eq!(s.folds_used, vec![1, 5, 1]);
            assert_eq!(s.warnings.len(), 2);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn prediction_sets_are_nested(seed in 0u64..1000, a in 0.0f64..0.5, b in 0.5f64..1.0) {
            let blobs = Blobs::new(3, 2, 2.0, 1.0, seed).unwrap();
            let data = blobs.sample(20, seed + 1);
            let nb = GaussianNb::default();
            let x = [0.3, -0.2];
            let lo = tcv_prediction_set(&data, &x, &nb, 4, a, seed).unwrap();
            let hi = tcv_prediction_set(&data, &x, &nb, 4, b, seed).unwrap();
            prop_assert!(hi.labels.iter().all(|y| lo.contains(*y)));
        }
    }
}
