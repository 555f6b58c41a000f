//! FDR procedures and evaluation metrics.
//!
//! Besides the step-up procedures (BH, Storey-BH, BY) this module implements
//! conditional calibration: every test point gets its own BH threshold,
//! computed from the p-values the other test points would receive if that
//! point were moved into the inlier calibration set. An optional seeded
//! pruning step then keeps the rejection set self-consistent.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::conformal::{Calibrated, ScoreTables, Selection, SplitOptions};
use crate::error::{Error, Result};
use crate::rng::{self, tag};
use crate::tcv::{tcv_pvalue, tcv_select, TcvPipeline};
use crate::conformal::MedianDifference;

/// Storey's default threshold.
pub const STOREY_LAMBDA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RejectionResult {
    /// Rejected test indices, ascending.
    pub rejected: Vec<usize>,
    /// Per-test thresholds `alpha * R_i / m` (conditional calibration only).
    pub thresholds: Option<Vec<f64>>,
    /// Whether the randomized pruning step ran.
    pub pruned: bool,
    /// Pruning uniforms, keyed by test index.
    pub epsilons: Option<BTreeMap<usize, f64>>,
    pub r_tilde: Option<Vec<usize>>,
}

impl RejectionResult {
    fn plain(rejected: Vec<usize>) -> Self {
        RejectionResult {
            rejected,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.rejected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rejected.is_empty()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

fn check_pvalues(p: &[f64]) -> Result<()> {
    match p.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(i) => Err(Error::InvalidArgument(format!("p-value {i} = {} outside [0, 1]", p[i]))),
        None => Ok(()),
    }
}

/// Number of step-up rejections: `max{k : p_(k) <= k alpha / m}`.
fn step_up_count(p: &[f64], alpha: f64) -> usize {
    let m = p.len();
    let mut s = p.to_vec();
    s.sort_by(f64::total_cmp);
    (1..=m).rev().find(|&k| s[k - 1] <= k as f64 * alpha / m as f64).unwrap_or(0)
}

fn step_up(p: &[f64], alpha: f64) -> Vec<usize> {
    let k = step_up_count(p, alpha);
    if k == 0 {
        return Vec::new();
    }
    let t = k as f64 * alpha / p.len() as f64;
    (0..p.len()).filter(|&i| p[i] <= t).collect()
}

/// Benjamini-Hochberg.
pub fn bh(pvalues: &[f64], alpha: f64) -> Result<RejectionResult> {
    check_alpha(alpha)?;
    check_pvalues(pvalues)?;
    Ok(RejectionResult::plain(step_up(pvalues, alpha)))
}

/// Storey's null-proportion estimate `(1 + #{p > lambda}) / (m (1 - lambda))`,
/// clipped to 1.
pub fn storey_pi0(pvalues: &[f64], lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidArgument(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    if pvalues.is_empty() {
        return Ok(1.0);
    }
    let above = pvalues.iter().filter(|&&p| p > lambda).count();
    Ok(((1 + above) as f64 / (pvalues.len() as f64 * (1.0 - lambda))).min(1.0))
}

/// BH at level `alpha / pi0` with Storey's estimate.
pub fn storey_bh(pvalues: &[f64], alpha: f64, lambda: f64) -> Result<RejectionResult> {
    check_alpha(alpha)?;
    check_pvalues(pvalues)?;
    let pi0 = storey_pi0(pvalues, lambda)?;
    Ok(RejectionResult::plain(step_up(pvalues, alpha / pi0)))
}

pub fn harmonic(m: usize) -> f64 {
    (1..=m).map(|k| 1.0 / k as f64).sum()
}

/// Benjamini-Yekutieli: BH at level `alpha / H_m`.
pub fn by(pvalues: &[f64], alpha: f64) -> Result<RejectionResult> {
    check_alpha(alpha)?;
    check_pvalues(pvalues)?;
    Ok(RejectionResult::plain(step_up(pvalues, alpha / harmonic(pvalues.len().max(1)))))
}

/// Selection over the perturbed calibration sets of conditional calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionMode {
    /// Re-select models for every perturbed calibration set.
    #[default]
    Faithful,
    /// Reuse the models selected for the unperturbed p-values.
    Frozen,
}

/// `R_i = |BH(alpha)|` on `loo` with position `i` set to zero.
pub fn r_tilde(loo: &[f64], i: usize, alpha: f64) -> usize {
    let mut v = loo.to_vec();
    v[i] = 0.0;
    step_up_count(&v, alpha)
}

/// Pruning: `R = max{r : #{i in R+ : eps_i <= r / R_i} >= r}` and the set
/// `{i in R+ : eps_i <= R / R_i}`.
pub fn prune(candidates: &[usize], r_tilde: &[usize], eps: &BTreeMap<usize, f64>) -> (usize, Vec<usize>) {
    let keep = |r: usize| -> Vec<usize> {
        candidates
            .iter()
            .copied()
            .filter(|&i| eps[&i] <= r as f64 / r_tilde[i] as f64)
            .collect()
    };
    let r = (0..=candidates.len()).rev().find(|&r| keep(r).len() >= r).unwrap_or(0);
    (r, keep(r))
}

/// Seeded pruning uniform for test `i`.
pub fn epsilon(seed: u64, i: usize) -> f64 {
    rng::rng(rng::derive_path(seed, &[tag::PRUNE, i as u64])).random::<f64>()
}

/// Conditional calibration given the p-values `u` and the matrix `loo`
/// where `loo[i][j]` is the p-value of test `j` computed with test `i`
/// added to the inlier calibration set (`loo[i][i]` is ignored).
pub fn conditional_calibration(u: &[f64], loo: &[Vec<f64>], alpha: f64, seed: u64) -> Result<RejectionResult> {
    check_alpha(alpha)?;
    check_pvalues(u)?;
    let m = u.len();
    if loo.len() != m {
        return Err(Error::LengthMismatch { expected: m, got: loo.len() });
    }
    if m == 0 {
        return Ok(RejectionResult::default());
    }
    let mut rt = Vec::with_capacity(m);
    for (i, row) in loo.iter().enumerate() {
        if row.len() != m {
            return Err(Error::LengthMismatch { expected: m, got: row.len() });
        }
        let mut v = row.clone();
        v[i] = 0.0;
        check_pvalues(&v)?;
        rt.push(step_up_count(&v, alpha));
    }
    let thresholds: Vec<f64> = rt.iter().map(|&r| alpha * r as f64 / m as f64).collect();
    let r_plus: Vec<usize> = (0..m).filter(|&i| u[i] <= thresholds[i]).collect();
    let mut out = RejectionResult {
        rejected: r_plus.clone(),
        thresholds: Some(thresholds),
        pruned: false,
        epsilons: None,
        r_tilde: Some(rt.clone()),
    };
    if r_plus.iter().all(|&i| r_plus.len() >= rt[i]) {
        return Ok(out);
    }
    let eps: BTreeMap<usize, f64> = r_plus.iter().map(|&i| (i, epsilon(seed, i))).collect();
    let (_, kept) = prune(&r_plus, &rt, &eps);
    out.rejected = kept;
    out.pruned = true;
    out.epsilons = Some(eps);
    Ok(out)
}

/// Row `i` of the leave-in matrix for split p-values: the p-values of every
/// test point when test `i` joins the inlier calibration set.
pub fn split_loo_row(
    tables: &ScoreTables,
    i: usize,
    options: &SplitOptions,
    mode: SelectionMode,
    original: &[Selection],
) -> Result<Vec<f64>> {
    let cal = Calibrated::new(tables, Some(i))?;
    (0..tables.n_test())
        .map(|j| {
            if j == i {
                return Ok(0.0);
            }
            let frozen = match mode {
                SelectionMode::Faithful => None,
                SelectionMode::Frozen => Some(original[j]),
            };
            Ok(cal.pvalue(j, options, frozen)?.0.u())
        })
        .collect()
}

/// The original p-values and selections for every test point.
pub fn split_pvalues(tables: &ScoreTables, options: &SplitOptions) -> Result<(Vec<f64>, Vec<Selection>)> {
    let cal = Calibrated::new(tables, None)?;
    let mut u = Vec::with_capacity(tables.n_test());
    let mut sel = Vec::with_capacity(tables.n_test());
    for t in 0..tables.n_test() {
        let (p, s) = cal.pvalue(t, options, None)?;
        u.push(p.u());
        sel.push(s);
    }
    Ok((u, sel))
}

/// Conditional calibration for split-conformal p-values. Works from the
/// score tables alone; no model is refitted.
pub fn conditional_calibration_split(
    tables: &ScoreTables,
    options: &SplitOptions,
    mode: SelectionMode,
    alpha: f64,
    seed: u64,
) -> Result<RejectionResult> {
    let (u, sel) = split_pvalues(tables, options)?;
    let loo = (0..u.len())
        .map(|i| split_loo_row(tables, i, options, mode, &sel))
        .collect::<Result<Vec<_>>>()?;
    conditional_calibration(&u, &loo, alpha, seed)
}

/// TCV+ p-values of every test point against `d0`, with the selections.
pub fn tcv_pvalues(
    pipeline: &TcvPipeline,
    d0: &[&[f64]],
    tests: &[&[f64]],
) -> Result<(Vec<f64>, Vec<(usize, Option<usize>)>)> {
    let mut u = Vec::with_capacity(tests.len());
    let mut sel = Vec::with_capacity(tests.len());
    for t in tests {
        let st = pipeline.state(d0, t)?;
        let s = tcv_select(&st, &pipeline.outlier, &MedianDifference);
        u.push(tcv_pvalue(&st, &pipeline.outlier, s.0, s.1)?.record.u);
        sel.push(s);
    }
    Ok((u, sel))
}

/// Row `i` of the leave-in matrix for TCV+ p-values. Each entry refits the
/// inlier-side fold models on `D0 ∪ {X_i} ∪ {X_j}`.
pub fn tcv_loo_row(
    pipeline: &TcvPipeline,
    d0: &[&[f64]],
    tests: &[&[f64]],
    i: usize,
    mode: SelectionMode,
    original: &[(usize, Option<usize>)],
) -> Result<Vec<f64>> {
    let mut aug = d0.to_vec();
    aug.push(tests[i]);
    let mut row = vec![0.0; tests.len()];
    for (j, t) in tests.iter().enumerate() {
        if j == i {
            continue;
        }
        let st = pipeline.state(&aug, t)?;
        let (c0, c1) = match mode {
            SelectionMode::Faithful => tcv_select(&st, &pipeline.outlier, &MedianDifference),
            SelectionMode::Frozen => original[j],
        };
        row[j] = tcv_pvalue(&st, &pipeline.outlier, c0, c1)?.record.u;
    }
    Ok(row)
}

/// Conditional calibration for TCV+ p-values. Expensive: `m * K0` fits for
/// the p-values plus `m (m - 1) * K0` for the leave-in matrix, per
/// inlier-side candidate.
pub fn conditional_calibration_tcv(
    pipeline: &TcvPipeline,
    d0: &[&[f64]],
    tests: &[&[f64]],
    mode: SelectionMode,
    alpha: f64,
    seed: u64,
) -> Result<RejectionResult> {
    let (u, sel) = tcv_pvalues(pipeline, d0, tests)?;
    let loo = (0..tests.len())
        .map(|i| tcv_loo_row(pipeline, d0, tests, i, mode, &sel))
        .collect::<Result<Vec<_>>>()?;
    conditional_calibration(&u, &loo, alpha, seed)
}

/// `(fdp, power)` of a rejection set.
pub fn fdp_power(rejected: &[usize], is_outlier: &[bool]) -> (f64, f64) {
    let false_rej = rejected.iter().filter(|&&i| !is_outlier[i]).count();
    let true_rej = rejected.len() - false_rej;
    let outliers = is_outlier.iter().filter(|&&o| o).count();
    (
        false_rej as f64 / rejected.len().max(1) as f64,
        true_rej as f64 / outliers.max(1) as f64,
    )
}

/// `mean(u1 on null inliers) * ln(n1 + 1)`; values below one suggest that
/// outlier-informed weighting helps.
pub fn informativeness_ratio(u1_on_inliers: &[f64], n1: usize) -> Result<f64> {
    if n1 == 0 {
        return Err(Error::InvalidArgument("n1 must be at least 1".into()));
    }
    if u1_on_inliers.is_empty() {
        return Err(Error::InvalidArgument("no u1 values".into()));
    }
    let mean = u1_on_inliers.iter().sum::<f64>() / u1_on_inliers.len() as f64;
    Ok(mean * libm::log((n1 + 1) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::CandidateScores;
    use alloc::vec;
    use proptest::prelude::*;

    /// Largest `k` such that some `k`-subset has every member `<= k alpha / m`.
    fn brute_bh(p: &[f64], alpha: f64) -> Vec<usize> {
        let m = p.len();
        for k in (1..=m).rev() {
            let t = k as f64 * alpha / m as f64;
            let set: Vec<usize> = (0..m).filter(|&i| p[i] <= t).collect();
            if set.len() >= k {
                return set;
            }
        }
        Vec::new()
    }

    #[test]
    fn bh_examples() {
        assert_eq!(bh(&[0.01, 0.02, 0.04, 0.9], 0.1).unwrap().rejected, vec![0, 1, 2]);
        assert!(bh(&[1.0; 5], 0.1).unwrap().is_empty());
        assert_eq!(bh(&[0.1], 0.1).unwrap().rejected, vec![0]);
        assert!(bh(&[], 0.1).unwrap().is_empty());
        assert!(bh(&[f64::NAN], 0.1).is_err());
        assert!(bh(&[0.5], 0.0).is_err());
        // Ties at the threshold are rejected together.
        assert_eq!(bh(&[0.05, 0.05, 0.9, 0.8], 0.1).unwrap().rejected, vec![0, 1]);
    }

    #[test]
    fn storey_examples() {
        let p = [0.01, 0.02, 0.3, 0.4];
        let pi0 = storey_pi0(&p, 0.5).unwrap();
        assert_eq!(pi0, 1.0 / (4.0 * 0.5));
        let r = storey_bh(&p, 0.1, 0.5).unwrap();
        // Level 0.2: thresholds 0.05, 0.1, 0.15, 0.2.
        assert_eq!(r.rejected, vec![0, 1]);
        let high = [0.9, 0.8, 0.7, 0.01];
        assert_eq!(storey_pi0(&high, 0.5).unwrap(), 1.0);
        assert_eq!(storey_bh(&high, 0.1, 0.5).unwrap(), bh(&high, 0.1).unwrap());
        assert!(storey_pi0(&p, 1.0).is_err());
    }

    #[test]
    fn by_examples() {
        assert!((harmonic(4) - 25.0 / 12.0).abs() < 1e-15);
        assert_eq!(by(&[0.01, 0.02, 0.04, 0.9], 0.1).unwrap().rejected, vec![0, 1]);
        assert_eq!(by(&[0.07], 0.1).unwrap(), bh(&[0.07], 0.1).unwrap());
    }

    #[test]
    fn fdp_power_examples() {
        let labels = [true, true, false, false];
        assert_eq!(fdp_power(&[], &labels), (0.0, 0.0));
        assert_eq!(fdp_power(&[0, 1], &labels), (0.0, 1.0));
        let mut lab = vec![true; 8];
        lab.extend([false; 4]);
        assert_eq!(fdp_power(&[0, 1, 8, 9], &lab), (0.5, 0.25));
    }

    #[test]
    fn informativeness_examples() {
        let r = informativeness_ratio(&[0.1, 0.3], 50).unwrap();
        assert!((r - 0.2 * libm::log(51.0)).abs() < 1e-12);
        assert!((r - 0.786).abs() < 1e-3);
        let m = 1.0 / libm::log(11.0);
        assert!((informativeness_ratio(&[m], 10).unwrap() - 1.0).abs() < 1e-12);
        assert!(informativeness_ratio(&[0.2], 1000).unwrap() > informativeness_ratio(&[0.2], 100).unwrap());
        assert!(informativeness_ratio(&[0.2], 0).is_err());
    }

    #[test]
    fn planted_zero_gives_positive_r_tilde() {
        assert_eq!(r_tilde(&[1.0, 1.0, 1.0], 1, 0.1), 1);
    }

    #[test]
    fn all_ones_reject_nothing() {
        let loo = vec![vec![1.0; 3]; 3];
        let r = conditional_calibration(&[1.0; 3], &loo, 0.1, 0).unwrap();
        assert!(r.is_empty());
        assert!(!r.pruned);
        assert!(conditional_calibration(&[], &[], 0.1, 0).unwrap().is_empty());
    }

    #[test]
    fn single_test_thresholds_at_alpha() {
        let r = conditional_calibration(&[0.1], &[vec![0.0]], 0.1, 0).unwrap();
        assert_eq!(r.rejected, vec![0]);
        assert_eq!(r.r_tilde, Some(vec![1]));
        let r = conditional_calibration(&[0.11], &[vec![0.0]], 0.1, 0).unwrap();
        assert!(r.is_empty());
    }

    /// Straight-line conditional calibration on a hand-built table.
    fn reference(u: &[f64], loo: &[Vec<f64>], alpha: f64, eps: &[f64]) -> Vec<usize> {
        let m = u.len();
        let mut rt = vec![0; m];
        for i in 0..m {
            let mut v = loo[i].clone();
            v[i] = 0.0;
            rt[i] = brute_bh(&v, alpha).len();
        }
        let rp: Vec<usize> = (0..m).filter(|&i| u[i] <= alpha * rt[i] as f64 / m as f64).collect();
        if rp.iter().all(|&i| rp.len() >= rt[i]) {
            return rp;
        }
        let mut best = 0;
        for r in 0..=rp.len() {
            let c = rp.iter().filter(|&&i| eps[i] <= r as f64 / rt[i] as f64).count();
            if c >= r {
                best = r;
            }
        }
        rp.into_iter().filter(|&i| eps[i] <= best as f64 / rt[i] as f64).collect()
    }

    #[test]
    fn four_test_trace_matches_reference() {
        let u = [0.02, 0.05, 0.06, 0.5];
        // Row i: p-values with test i in the calibration set.
        let loo = vec![
            vec![0.0, 0.05, 0.06, 0.5],
            vec![0.02, 0.0, 0.9, 0.9],
            vec![0.02, 0.9, 0.0, 0.9],
            vec![0.02, 0.05, 0.06, 0.0],
        ];
        let seed = 17;
        let eps: Vec<f64> = (0..4).map(|i| epsilon(seed, i)).collect();
        let got = conditional_calibration(&u, &loo, 0.2, seed).unwrap();
        assert_eq!(got.r_tilde, Some(vec![3, 2, 2, 4]));
        assert_eq!(got.rejected, reference(&u, &loo, 0.2, &eps));
        // 0.06 <= 0.2*2/4 so test 2 is in R+, but |R+| = 4 >= every R_i: no pruning.
        assert!(!got.pruned);
        assert_eq!(got.rejected, vec![0, 1, 2, 3].into_iter().filter(|&i| u[i] <= 0.2 * [3., 2., 2., 4.][i] / 4.0).collect::<Vec<_>>());
    }

    #[test]
    fn pruning_trace_matches_reference() {
        let u = [0.01, 0.3, 0.3, 0.3];
        let loo = vec![
            vec![0.0, 0.01, 0.01, 0.01],
            vec![0.9; 4],
            vec![0.9; 4],
            vec![0.9; 4],
        ];
        for seed in 0..50 {
            let eps: Vec<f64> = (0..4).map(|i| epsilon(seed, i)).collect();
            let got = conditional_calibration(&u, &loo, 0.1, seed).unwrap();
            assert!(got.pruned);
            assert_eq!(got.rejected, reference(&u, &loo, 0.1, &eps));
        }
    }

    #[test]
    fn split_calibration_uses_tables_only() {
        let tables = ScoreTables {
            inlier: CandidateScores {
                names: vec!["a".into()],
                cal0: vec![(0..19).map(|i| i as f64).collect()],
                cal1: vec![vec![]],
                test: vec![vec![-3.0, -2.0, -1.0, 5.5, 30.0]],
            },
            outlier: CandidateScores::default(),
        };
        let r = conditional_calibration_split(&tables, &SplitOptions::default(), SelectionMode::Faithful, 0.2, 1).unwrap();
        let b = bh(&split_pvalues(&tables, &SplitOptions::default()).unwrap().0, 0.2).unwrap();
        assert_eq!(r.rejected, vec![0, 1, 2]);
        assert_eq!(b.rejected, vec![0, 1, 2]);
    }

    fn pvec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![(1u32..=40).prop_map(|k| k as f64 / 40.0), 0.0f64..1.0], 0..9)
    }

    proptest! {
        #[test]
        fn bh_matches_brute_force(p in pvec(), alpha in 0.01f64..0.5) {
            prop_assert_eq!(bh(&p, alpha).unwrap().rejected, brute_bh(&p, alpha));
        }

        #[test]
        fn dominance(p in pvec(), alpha in 0.01f64..0.5) {
            let b = by(&p, alpha).unwrap().rejected;
            let h = bh(&p, alpha).unwrap().rejected;
            let s = storey_bh(&p, alpha, STOREY_LAMBDA).unwrap().rejected;
            prop_assert!(b.iter().all(|i| h.contains(i)));
            prop_assert!(h.iter().all(|i| s.contains(i)));
        }

        #[test]
        fn pruning_properties(
            rt in prop::collection::vec(1usize..6, 1..6),
            eps in prop::collection::vec(0.0f64..1.0, 6),
            bump in 0usize..6,
            delta in 0.0f64..0.5,
        ) {
            let cands: Vec<usize> = (0..rt.len()).collect();
            let e: BTreeMap<usize, f64> = cands.iter().map(|&i| (i, eps[i])).collect();
            let (r, set) = prune(&cands, &rt, &e);
            prop_assert!(set.len() >= r);
            for r2 in r + 1..=cands.len() {
                let c = cands.iter().filter(|&&i| e[&i] <= r2 as f64 / rt[i] as f64).count();
                prop_assert!(c < r2);
            }
            let mut e2 = e.clone();
            if let Some(v) = e2.get_mut(&(bump % rt.len())) {
                *v += delta;
            }
            let (_, set2) = prune(&cands, &rt, &e2);
            prop_assert!(set2.iter().all(|i| set.contains(i)));
        }

        #[test]
        fn no_pruning_returns_r_plus(u in prop::collection::vec(0.001f64..1.0, 1..6), seed in 0u64..100) {
            let m = u.len();
            let loo: Vec<Vec<f64>> = (0..m).map(|_| u.clone()).collect();
            let r = conditional_calibration(&u, &loo, 0.2, seed).unwrap();
            let rt = r.r_tilde.clone().unwrap();
            let th = r.thresholds.clone().unwrap();
            let rp: Vec<usize> = (0..m).filter(|&i| u[i] <= th[i]).collect();
            if rp.iter().all(|&i| rp.len() >= rt[i]) {
                prop_assert!(!r.pruned);
                prop_assert_eq!(r.rejected, rp);
            } else {
                prop_assert!(r.rejected.iter().all(|i| rp.contains(i)));
            }
        }
    }
}
