//! Split-conformal p-values.
//!
//! * [`standard_pvalue_inlier`] / [`standard_pvalue_outlier`]: normalized
//!   ranks of a test score among calibration scores.
//! * [`Calibration`]: integrative p-values. For every point of the augmented
//!   set `{test} ∪ D0_cal` it computes the inlier-side rank `u0`, the
//!   outlier-side rank `u1` against `D1_cal`, their ratio `r = u0 / u1`, and
//!   finally re-ranks `r(test)` among the calibration inliers.
//! * Model selection over a fitted toolbox uses only sorted (unordered)
//!   score multisets, so the selected pair is invariant to permutations of
//!   `{test} ∪ D0_cal`.
//!
//! Ranks are kept as integer numerators; ratios are compared by
//! cross-multiplication, so ties are resolved exactly as written (`<=`).

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::dataset::{Dataset, SplitPartition};
use crate::error::{Error, Result};
use crate::rng;
use crate::scoring::{FittedModel, FittedToolbox, Role, Toolbox};

fn check_finite(what: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("{what}[{i}]"))),
        None => Ok(()),
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `#{v in sorted : v <= x}`.
fn count_le(sorted: &[f64], x: f64) -> u64 {
    sorted.partition_point(|&v| v <= x) as u64
}

/// Inlier-side conformal p-value: the test score counts itself, so the
/// result lies on `{1, ..., n+1} / (n+1)`.
pub fn standard_pvalue_inlier(test_score: f64, cal_scores: &[f64]) -> Result<f64> {
    if cal_scores.is_empty() {
        return Err(Error::InvalidArgument("empty calibration set".into()));
    }
    check_finite("test score", &[test_score])?;
    check_finite("calibration score", cal_scores)?;
    let below = cal_scores.iter().filter(|&&s| s <= test_score).count();
    Ok((1 + below) as f64 / (1 + cal_scores.len()) as f64)
}

/// Outlier-side p-value `(1 + #{cal <= score}) / (1 + n)`.
pub fn standard_pvalue_outlier(score: f64, cal_scores: &[f64]) -> Result<f64> {
    if cal_scores.is_empty() {
        return Err(Error::InvalidArgument("empty calibration set".into()));
    }
    check_finite("score", &[score])?;
    check_finite("calibration score", cal_scores)?;
    let below = cal_scores.iter().filter(|&&s| s <= score).count();
    Ok((1 + below) as f64 / (1 + cal_scores.len()) as f64)
}

/// Normalized rank of every member of the augmented set `{test} ∪ D0_cal`
/// (length `n_cal + 1`) within that set.
pub fn augmented_u0(scores: &[f64], n_cal: usize) -> Result<Vec<f64>> {
    if scores.len() != n_cal + 1 {
        return Err(Error::LengthMismatch {
            expected: n_cal + 1,
            got: scores.len(),
        });
    }
    check_finite("score", scores)?;
    let s = sorted(scores);
    let den = (n_cal + 1) as f64;
    Ok(scores.iter().map(|&x| count_le(&s, x) as f64 / den).collect())
}

/// Median of an ascending slice; even lengths average the central pair.
pub fn median_sorted(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some(0.5 * (sorted[n / 2 - 1] + sorted[n / 2])),
    }
}

/// `median(inlier_side) - median(outlier_side)`.
pub fn median_diff_criterion(inlier_side: &[f64], outlier_side: &[f64]) -> Result<f64> {
    if inlier_side.is_empty() || outlier_side.is_empty() {
        return Err(Error::InvalidArgument("median of an empty set".into()));
    }
    Ok(median_sorted(&sorted(inlier_side)).unwrap() - median_sorted(&sorted(outlier_side)).unwrap())
}

/// Model-selection criterion. Receives the scores of the side a good model
/// should score high and of the side it should score low, each as an
/// ascending slice; larger return values are better.
pub trait SelectionCriterion: Send + Sync + fmt::Debug {
    fn separation(&self, high_side: &[f64], low_side: &[f64]) -> f64;
}

/// Difference of medians; zero when either side is empty.
#[derive(Debug, Clone, Copy, Default)]
pub struct MedianDifference;

impl SelectionCriterion for MedianDifference {
    fn separation(&self, high_side: &[f64], low_side: &[f64]) -> f64 {
        match (median_sorted(high_side), median_sorted(low_side)) {
            (Some(a), Some(b)) => a - b,
            _ => 0.0,
        }
    }
}

/// How `u0` and `u1` are combined into the statistic that is re-ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Combination {
    /// `r = u0 / u1`: the integrative p-value.
    #[default]
    Ratio,
    /// `r = u0`: selection without reweighting (the ensemble benchmark).
    InlierOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PValueRecord {
    pub u0: f64,
    pub u1: f64,
    pub r: f64,
    pub u: f64,
    pub model0: String,
    pub model1: String,
}

/// Exact grid representation of the p-value components of one test point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankParts {
    /// `u0 = a / (n0 + 1)`.
    pub a: u64,
    /// `u1 = b / (n1 + 1)`.
    pub b: u64,
    /// `u = k / (n0 + 1)`.
    pub k: u64,
    pub n0: u64,
    pub n1: u64,
}

impl RankParts {
    pub fn u0(&self) -> f64 {
        self.a as f64 / (self.n0 + 1) as f64
    }

    pub fn u1(&self) -> f64 {
        self.b as f64 / (self.n1 + 1) as f64
    }

    pub fn r(&self) -> f64 {
        self.u0() / self.u1()
    }

    pub fn u(&self) -> f64 {
        self.k as f64 / (self.n0 + 1) as f64
    }
}

/// Calibration state for one (`s0`, `s1`) model pair.
#[derive(Debug, Clone)]
pub struct Calibration {
    cal0_s0: Vec<f64>,
    cal0_s0_sorted: Vec<f64>,
    /// `#{j in D0_cal : s0_j <= s0_i}` for each calibration inlier `i`.
    cal0_rank: Vec<u64>,
    /// `1 + #{j in D1_cal : s1_j <= s1_i}` for each calibration inlier `i`.
    cal0_b: Vec<u64>,
    cal1_s1_sorted: Vec<f64>,
}

impl Calibration {
    /// `cal0` holds `(s0, s1)` for each calibration inlier; `cal1_s1` the
    /// outlier-side scores of the calibration outliers (possibly empty, in
    /// which case `u1 = 1` everywhere).
    pub fn new(cal0: &[(f64, f64)], cal1_s1: &[f64]) -> Result<Self> {
        let s0: Vec<f64> = cal0.iter().map(|p| p.0).collect();
        let s1: Vec<f64> = cal0.iter().map(|p| p.1).collect();
        Self::from_columns(s0, &s1, cal1_s1)
    }

    fn from_columns(cal0_s0: Vec<f64>, cal0_s1: &[f64], cal1_s1: &[f64]) -> Result<Self> {
        if cal0_s0.is_empty() {
            return Err(Error::InsufficientInliers("empty inlier calibration set".into()));
        }
        check_finite("inlier calibration score", &cal0_s0)?;
        check_finite("inlier calibration score", cal0_s1)?;
        check_finite("outlier calibration score", cal1_s1)?;
        let cal0_s0_sorted = sorted(&cal0_s0);
        let cal1_s1_sorted = sorted(cal1_s1);
        let cal0_rank = cal0_s0.iter().map(|&s| count_le(&cal0_s0_sorted, s)).collect();
        let cal0_b = cal0_s1.iter().map(|&s| 1 + count_le(&cal1_s1_sorted, s)).collect();
        Ok(Calibration {
            cal0_s0,
            cal0_s0_sorted,
            cal0_rank,
            cal0_b,
            cal1_s1_sorted,
        })
    }

    pub fn n_inlier(&self) -> usize {
        self.cal0_s0.len()
    }

    pub fn n_outlier(&self) -> usize {
        self.cal1_s1_sorted.len()
    }

    pub fn evaluate(&self, test: (f64, f64), combination: Combination) -> Result<RankParts> {
        check_finite("test score", &[test.0, test.1])?;
        let (t0, t1) = test;
        let a_t = 1 + count_le(&self.cal0_s0_sorted, t0);
        let b_t = 1 + count_le(&self.cal1_s1_sorted, t1);
        let below = (0..self.cal0_s0.len())
            .filter(|&i| {
                let a_i = self.cal0_rank[i] + u64::from(t0 <= self.cal0_s0[i]);
                match combination {
                    Combination::Ratio => a_i * b_t <= a_t * self.cal0_b[i],
                    Combination::InlierOnly => a_i <= a_t,
                }
            })
            .count() as u64;
        Ok(RankParts {
            a: a_t,
            b: b_t,
            k: 1 + below,
            n0: self.cal0_s0.len() as u64,
            n1: self.cal1_s1_sorted.len() as u64,
        })
    }
}

/// Integrative p-value for a single test point from precomputed scores.
pub fn integrative_from_scores(
    test: (f64, f64),
    cal0: &[(f64, f64)],
    cal1_s1: &[f64],
    combination: Combination,
) -> Result<RankParts> {
    Calibration::new(cal0, cal1_s1)?.evaluate(test, combination)
}

/// Integrative p-value with a fixed pair of fitted models.
pub fn integrative_pvalue(
    d0_cal: &[&[f64]],
    d1_cal: &[&[f64]],
    test: &[f64],
    model0: &dyn FittedModel,
    model1: &dyn FittedModel,
) -> Result<PValueRecord> {
    let cal0: Vec<(f64, f64)> = d0_cal.iter().map(|x| (model0.score(x), model1.score(x))).collect();
    let cal1: Vec<f64> = d1_cal.iter().map(|x| model1.score(x)).collect();
    let p = integrative_from_scores((model0.score(test), model1.score(test)), &cal0, &cal1, Combination::Ratio)?;
    Ok(record(&p, String::new(), String::new()))
}

fn record(p: &RankParts, model0: String, model1: String) -> PValueRecord {
    PValueRecord {
        u0: p.u0(),
        u1: p.u1(),
        r: p.r(),
        u: p.u(),
        model0,
        model1,
    }
}

/// Scores of every candidate of one role, `[candidate][point]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateScores {
    pub names: Vec<String>,
    pub cal0: Vec<Vec<f64>>,
    pub cal1: Vec<Vec<f64>>,
    pub test: Vec<Vec<f64>>,
}

impl CandidateScores {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// The named candidates, in the given order.
    pub fn subset(&self, names: &[&str]) -> Result<CandidateScores> {
        let mut out = CandidateScores::default();
        for &n in names {
            let c = self
                .names
                .iter()
                .position(|x| x == n)
                .ok_or_else(|| Error::UnknownModel(n.into()))?;
            out.names.push(self.names[c].clone());
            out.cal0.push(self.cal0[c].clone());
            out.cal1.push(self.cal1[c].clone());
            out.test.push(self.test[c].clone());
        }
        Ok(out)
    }

    fn check(&self, n0: usize, n1: usize, m: usize) -> Result<()> {
        let c = self.names.len();
        if self.cal0.len() != c || self.cal1.len() != c || self.test.len() != c {
            return Err(Error::LengthMismatch {
                expected: c,
                got: self.cal0.len().min(self.cal1.len()).min(self.test.len()),
            });
        }
        for (rows, want) in [(&self.cal0, n0), (&self.cal1, n1), (&self.test, m)] {
            for r in rows {
                if r.len() != want {
                    return Err(Error::LengthMismatch {
                        expected: want,
                        got: r.len(),
                    });
                }
                check_finite("score", r)?;
            }
        }
        Ok(())
    }
}

/// All conformity scores computed by a split-conformal run: the sufficient
/// statistic conditional calibration works from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTables {
    /// Candidates for the inlier-side score.
    pub inlier: CandidateScores,
    /// Candidates for the outlier-side score (may be empty).
    pub outlier: CandidateScores,
}

impl ScoreTables {
    /// Tables for a single fixed model pair.
    pub fn single(cal0: &[(f64, f64)], cal1_s1: &[f64], test: &[(f64, f64)]) -> Self {
        ScoreTables {
            inlier: CandidateScores {
                names: alloc::vec!["s0".into()],
                cal0: alloc::vec![cal0.iter().map(|p| p.0).collect()],
                cal1: alloc::vec![alloc::vec![0.0; cal1_s1.len()]],
                test: alloc::vec![test.iter().map(|p| p.0).collect()],
            },
            outlier: CandidateScores {
                names: alloc::vec!["s1".into()],
                cal0: alloc::vec![cal0.iter().map(|p| p.1).collect()],
                cal1: alloc::vec![cal1_s1.to_vec()],
                test: alloc::vec![test.iter().map(|p| p.1).collect()],
            },
        }
    }

    pub fn n_cal0(&self) -> usize {
        self.inlier.cal0.first().map_or(0, Vec::len)
    }

    pub fn n_cal1(&self) -> usize {
        self.inlier
            .cal1
            .first()
            .or(self.outlier.cal1.first())
            .map_or(0, Vec::len)
    }

    pub fn n_test(&self) -> usize {
        self.inlier.test.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inlier.is_empty() {
            return Err(Error::EmptyToolbox);
        }
        let (n0, n1, m) = (self.n_cal0(), self.n_cal1(), self.n_test());
        self.inlier.check(n0, n1, m)?;
        self.outlier.check(n0, n1, m)
    }

    /// Tables restricted to the named candidates on each side.
    pub fn subset(&self, inlier: &[&str], outlier: &[&str]) -> Result<ScoreTables> {
        Ok(ScoreTables {
            inlier: self.inlier.subset(inlier)?,
            outlier: self.outlier.subset(outlier)?,
        })
    }

    /// Break exact ties by adding independent seeded noise far below the
    /// resolution of the scores (relative size 1e-12).
    pub fn break_ties(&mut self, seed: u64) {
        use rand::Rng;
        let mut r = rng::rng(rng::derive(seed, rng::tag::JITTER));
        for side in [&mut self.inlier, &mut self.outlier] {
            for rows in [&mut side.cal0, &mut side.cal1, &mut side.test] {
                for v in rows.iter_mut().flatten() {
                    let u: f64 = r.random::<f64>() - 0.5;
                    *v += u * 1e-12 * v.abs().max(1.0);
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplitOptions {
    pub combination: Combination,
    pub criterion: Arc<dyn SelectionCriterion>,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions {
            combination: Combination::Ratio,
            criterion: Arc::new(MedianDifference),
        }
    }
}

impl SplitOptions {
    pub fn ensemble() -> Self {
        SplitOptions {
            combination: Combination::InlierOnly,
            ..Default::default()
        }
    }
}

/// Selected candidates for one test point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub model0: usize,
    pub model1: Option<usize>,
}

/// Calibration of every candidate, optionally with one test point moved
/// into the inlier calibration set (as conditional calibration requires).
#[derive(Debug, Clone)]
pub struct Calibrated<'t> {
    tables: &'t ScoreTables,
    extra: Option<usize>,
    inlier_sorted_cal0: Vec<Vec<f64>>,
    inlier_sorted_cal1: Vec<Vec<f64>>,
    outlier_sorted_cal0: Vec<Vec<f64>>,
    outlier_sorted_cal1: Vec<Vec<f64>>,
    n0: usize,
}

fn with_extra(cal: &[f64], test: &[f64], extra: Option<usize>) -> Vec<f64> {
    let mut v = cal.to_vec();
    if let Some(e) = extra {
        v.push(test[e]);
    }
    v
}

impl<'t> Calibrated<'t> {
    pub fn new(tables: &'t ScoreTables, extra: Option<usize>) -> Result<Self> {
        tables.validate()?;
        if let Some(e) = extra {
            if e >= tables.n_test() {
                return Err(Error::InvalidArgument(format!("no test point {e}")));
            }
        }
        let n0 = tables.n_cal0() + usize::from(extra.is_some());
        if n0 == 0 {
            return Err(Error::InsufficientInliers("empty inlier calibration set".into()));
        }
        let cal0 = |side: &CandidateScores| -> Vec<Vec<f64>> {
            (0..side.len()).map(|c| sorted(&with_extra(&side.cal0[c], &side.test[c], extra))).collect()
        };
        let cal1 = |side: &CandidateScores| -> Vec<Vec<f64>> { side.cal1.iter().map(|v| sorted(v)).collect() };
        Ok(Calibrated {
            tables,
            extra,
            inlier_sorted_cal0: cal0(&tables.inlier),
            inlier_sorted_cal1: cal1(&tables.inlier),
            outlier_sorted_cal0: cal0(&tables.outlier),
            outlier_sorted_cal1: cal1(&tables.outlier),
            n0,
        })
    }

    pub fn n_inlier(&self) -> usize {
        self.n0
    }

    /// Permutation-invariant selection for test point `t`: the inlier-side
    /// candidate maximizing the separation of `{t} ∪ D0_cal` above `D1_cal`,
    /// and the outlier-side candidate maximizing the separation of `D1_cal`
    /// above `{t} ∪ D0_cal`. Ties go to the lexicographically smallest name.
    pub fn select(&self, t: usize, criterion: &dyn SelectionCriterion) -> Selection {
        let inl = &self.tables.inlier;
        let model0 = best(&inl.names, |c| {
            let aug = insert_sorted(&self.inlier_sorted_cal0[c], inl.test[c][t]);
            criterion.separation(&aug, &self.inlier_sorted_cal1[c])
        })
        .expect("validated non-empty");
        let out = &self.tables.outlier;
        let model1 = best(&out.names, |c| {
            let aug = insert_sorted(&self.outlier_sorted_cal0[c], out.test[c][t]);
            criterion.separation(&self.outlier_sorted_cal1[c], &aug)
        });
        Selection { model0, model1 }
    }

    /// Rank arithmetic for test point `t` under a given selection.
    pub fn evaluate(&self, t: usize, sel: Selection, combination: Combination) -> Result<RankParts> {
        let inl = &self.tables.inlier;
        let cal0_s0 = with_extra(&inl.cal0[sel.model0], &inl.test[sel.model0], self.extra);
        let (cal0_s1, cal1_s1, t1) = match sel.model1 {
            Some(c) => {
                let out = &self.tables.outlier;
                (
                    with_extra(&out.cal0[c], &out.test[c], self.extra),
                    out.cal1[c].clone(),
                    out.test[c][t],
                )
            }
            None => (alloc::vec![0.0; cal0_s0.len()], Vec::new(), 0.0),
        };
        Calibration::from_columns(cal0_s0, &cal0_s1, &cal1_s1)?.evaluate((inl.test[sel.model0][t], t1), combination)
    }

    pub fn pvalue(&self, t: usize, options: &SplitOptions, frozen: Option<Selection>) -> Result<(RankParts, Selection)> {
        let sel = frozen.unwrap_or_else(|| self.select(t, options.criterion.as_ref()));
        Ok((self.evaluate(t, sel, options.combination)?, sel))
    }

    pub fn record(&self, parts: &RankParts, sel: Selection) -> PValueRecord {
        record(
            parts,
            self.tables.inlier.names[sel.model0].clone(),
            sel.model1.map_or_else(String::new, |c| self.tables.outlier.names[c].clone()),
        )
    }
}

fn insert_sorted(sorted: &[f64], x: f64) -> Vec<f64> {
    let pos = sorted.partition_point(|&v| v.total_cmp(&x).is_lt());
    let mut v = Vec::with_capacity(sorted.len() + 1);
    v.extend_from_slice(&sorted[..pos]);
    v.push(x);
    v.extend_from_slice(&sorted[pos..]);
    v
}

/// Index maximizing `value`, ties broken by smallest name.
pub(crate) fn best<F: FnMut(usize) -> f64>(names: &[String], mut value: F) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for c in 0..names.len() {
        let v = value(c);
        best = match best {
            None => Some((c, v)),
            Some((b, bv)) => {
                if v > bv || (v == bv && names[c] < names[b]) {
                    Some((c, v))
                } else {
                    Some((b, bv))
                }
            }
        };
    }
    best.map(|(c, _)| c)
}

/// P-values for every test point in the tables.
pub fn pvalues_from_tables(tables: &ScoreTables, options: &SplitOptions) -> Result<Vec<(PValueRecord, Selection)>> {
    let cal = Calibrated::new(tables, None)?;
    (0..tables.n_test())
        .map(|t| {
            let (p, sel) = cal.pvalue(t, options, None)?;
            Ok((cal.record(&p, sel), sel))
        })
        .collect()
}

/// A toolbox trained on the training halves of a split.
#[derive(Debug, Clone)]
pub struct SplitModel {
    inlier: FittedToolbox,
    outlier: FittedToolbox,
    cal0: Vec<Vec<f64>>,
    cal1: Vec<Vec<f64>>,
    inlier_cal0: Vec<Vec<f64>>,
    inlier_cal1: Vec<Vec<f64>>,
    outlier_cal0: Vec<Vec<f64>>,
    outlier_cal1: Vec<Vec<f64>>,
}

impl SplitModel {
    /// Train every inlier-side candidate on `D0_train` (binary models on
    /// `D0_train ∪ D1_train`) and every outlier-side one-class candidate on
    /// `D1_train`, then score the calibration sets.
    pub fn fit(dataset: &Dataset, partition: &SplitPartition, toolbox: &Toolbox) -> Result<Self> {
        let inl_train = dataset.select(&partition.d0_train);
        let out_train = dataset.select(&partition.d1_train);
        let inlier = FittedToolbox::fit(toolbox, Role::Inlier, &inl_train, &out_train)?;
        if inlier.is_empty() {
            return Err(Error::EmptyToolbox);
        }
        let outlier = FittedToolbox::fit(toolbox, Role::Outlier, &inl_train, &out_train)?;
        Self::from_fitted(inlier, outlier, &dataset.select(&partition.d0_cal), &dataset.select(&partition.d1_cal))
    }

    pub fn from_fitted(inlier: FittedToolbox, outlier: FittedToolbox, cal0: &[&[f64]], cal1: &[&[f64]]) -> Result<Self> {
        if cal0.is_empty() {
            return Err(Error::InsufficientInliers("empty inlier calibration set".into()));
        }
        Ok(SplitModel {
            inlier_cal0: inlier.score_rows(cal0),
            inlier_cal1: inlier.score_rows(cal1),
            outlier_cal0: outlier.score_rows(cal0),
            outlier_cal1: outlier.score_rows(cal1),
            cal0: cal0.iter().map(|r| r.to_vec()).collect(),
            cal1: cal1.iter().map(|r| r.to_vec()).collect(),
            inlier,
            outlier,
        })
    }

    pub fn inlier_candidates(&self) -> &FittedToolbox {
        &self.inlier
    }

    pub fn outlier_candidates(&self) -> &FittedToolbox {
        &self.outlier
    }

    pub fn n_cal0(&self) -> usize {
        self.cal0.len()
    }

    pub fn n_cal1(&self) -> usize {
        self.cal1.len()
    }

    /// Score the test rows with every candidate.
    pub fn score_tables(&self, test: &[&[f64]]) -> ScoreTables {
        let names = |t: &FittedToolbox| t.candidates().iter().map(|c| c.name.clone()).collect();
        ScoreTables {
            inlier: CandidateScores {
                names: names(&self.inlier),
                cal0: self.inlier_cal0.clone(),
                cal1: self.inlier_cal1.clone(),
                test: self.inlier.score_rows(test),
            },
            outlier: CandidateScores {
                names: names(&self.outlier),
                cal0: self.outlier_cal0.clone(),
                cal1: self.outlier_cal1.clone(),
                test: self.outlier.score_rows(test),
            },
        }
    }

    pub fn pvalues(&self, test: &[&[f64]], options: &SplitOptions) -> Result<Vec<PValueRecord>> {
        Ok(pvalues_from_tables(&self.score_tables(test), options)?
            .into_iter()
            .map(|(p, _)| p)
            .collect())
    }
}

/// Integrative p-value with automatic model selection over a toolbox.
pub fn integrative_with_selection(
    partition: &SplitPartition,
    dataset: &Dataset,
    toolbox: &Toolbox,
    test: &[f64],
) -> Result<PValueRecord> {
    let model = SplitModel::fit(dataset, partition, toolbox)?;
    Ok(model.pvalues(&[test], &SplitOptions::default())?.remove(0))
}

/// Same selection as [`integrative_with_selection`], re-ranking `u0` only.
pub fn ensemble_pvalue(
    partition: &SplitPartition,
    dataset: &Dataset,
    toolbox: &Toolbox,
    test: &[f64],
) -> Result<PValueRecord> {
    let model = SplitModel::fit(dataset, partition, toolbox)?;
    Ok(model.pvalues(&[test], &SplitOptions::ensemble())?.remove(0))
}
