//! Experiment runners. Each returns typed rows; the binary serializes them.
//!
//! Replicates run in parallel. Every replicate draws its data, splits and
//! pruning uniforms from seeds derived from `(seed, replicate)`, so results
//! do not depend on the thread count.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use conforma_core::conformal::{pvalues_from_tables, PValueRecord, ScoreTables, SplitModel, SplitOptions};
use conforma_core::dataset::{split, Dataset, Label, SplitPartition};
use conforma_core::rng::{self, tag};
use conforma_core::scoring::{Family, IsolationForest, Kde, ScoreModel, Toolbox};
use conforma_core::synth::{Blobs, GaussianMixture, LogisticModel, LogisticModelConfig};
use conforma_core::tcv::{tcv_label_conditional_prediction_set, tcv_prediction_set, MultiClassData, TcvPipeline};
use conforma_core::testing::{self, RejectionResult};

use crate::config::{ExperimentConfig, FdrProcedure, GeneratorConfig, Method};
use crate::error::{CliError, Result};
use crate::io;
use crate::registry;
use crate::stats::{binomial_se, mean, pearson, pearson_se, std_err};

/// Source of labeled and test data.
#[derive(Debug, Clone)]
pub enum Generator {
    Mixture {
        mixture: GaussianMixture,
        a_inlier: f64,
        a_outlier: f64,
    },
    Logistic(LogisticModel),
    Csv {
        labeled: Dataset,
        test: Option<Dataset>,
    },
}

impl Generator {
    /// Frozen generator parameters (mixture centers, logistic coefficients)
    /// are drawn from `seed` once.
    pub fn new(cfg: &GeneratorConfig, seed: u64) -> Result<Self> {
        Ok(match cfg {
            GeneratorConfig::GaussianMixture {
                d,
                a_inlier,
                a_outlier,
                n_components,
                component_box,
            } => Generator::Mixture {
                mixture: GaussianMixture::new(*d, *n_components, *component_box, seed)?,
                a_inlier: *a_inlier,
                a_outlier: *a_outlier,
            },
            GeneratorConfig::Logistic {
                d,
                beta_variance,
                target_outlier_frac,
                mc_samples,
                tol,
            } => Generator::Logistic(LogisticModel::new(&LogisticModelConfig {
                n: 0,
                d: *d,
                beta_variance: *beta_variance,
                target_outlier_frac: *target_outlier_frac,
                mc_samples: *mc_samples,
                tol: *tol,
                seed,
            })?),
            GeneratorConfig::Csv { path, test_path } => Generator::Csv {
                labeled: io::load_csv(path)?,
                test: test_path.as_deref().map(io::load_csv).transpose()?,
            },
        })
    }

    /// A fresh sample with the given composition, inliers first.
    pub fn draw(&self, n_inlier: usize, n_outlier: usize, seed: u64) -> Result<Dataset> {
        Ok(match self {
            Generator::Mixture {
                mixture,
                a_inlier,
                a_outlier,
            } => mixture.sample(*a_inlier, *a_outlier, n_inlier, n_outlier, seed)?,
            Generator::Logistic(m) => m.sample_counts(n_inlier, n_outlier, seed)?,
            Generator::Csv { .. } => {
                return Err(CliError::config("this experiment needs a synthetic generator"));
            }
        })
    }

    pub fn labeled(&self, n_inlier: usize, n_outlier: usize, seed: u64) -> Result<Dataset> {
        match self {
            Generator::Csv { labeled, .. } => Ok(labeled.clone()),
            _ => self.draw(n_inlier, n_outlier, seed),
        }
    }

    pub fn test(&self, n_inlier: usize, n_outlier: usize, seed: u64) -> Result<Dataset> {
        match self {
            Generator::Csv { test: Some(t), .. } => Ok(t.clone()),
            Generator::Csv { test: None, .. } => Err(CliError::config("generator.test_path is required")),
            _ => self.draw(n_inlier, n_outlier, seed),
        }
    }
}

/// A validated configuration with its toolbox and generator.
#[derive(Debug, Clone)]
pub struct Setup {
    pub cfg: ExperimentConfig,
    pub toolbox: Toolbox,
    pub generator: Generator,
    pub methods: Vec<Method>,
}

impl Setup {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Setup {
            toolbox: registry::toolbox(&cfg.models, cfg.flips)?,
            generator: Generator::new(&cfg.generator, cfg.seed)?,
            methods: cfg.methods.iter().map(|m| Method::parse(m)).collect::<Result<_>>()?,
            cfg,
        })
    }

    fn seed(&self, t: u64, rep: usize) -> u64 {
        rng::derive_path(self.cfg.seed, &[t, rep as u64])
    }

    /// Inlier/outlier counts of a test set of size `n`.
    pub fn composition(&self, n: usize, random: bool, rep: usize) -> (usize, usize) {
        let frac = self.cfg.sizes.test_outlier_frac;
        let n_out = if random {
            let s = self.seed(tag::TEST, rep);
            (0..n).filter(|&i| uniform(rng::derive(s, i as u64)) < frac).count()
        } else {
            (n as f64 * frac).round() as usize
        };
        (n - n_out, n_out)
    }

    pub fn labeled(&self, rep: usize) -> Result<Dataset> {
        let s = &self.cfg.sizes;
        self.generator.labeled(s.n_inlier, s.n_outlier, self.seed(tag::DATA, rep))
    }

    pub fn test_set(&self, n: usize, random: bool, rep: usize) -> Result<Dataset> {
        let (i, o) = self.composition(n, random, rep);
        self.generator.test(i, o, rep_seed(self.seed(tag::TEST, rep)))
    }

    pub fn split(&self, data: &Dataset, rep: usize) -> Result<SplitPartition> {
        let s = &self.cfg.sizes;
        Ok(split(data, s.inlier_train_frac, s.outlier_train_frac, self.seed(tag::SPLIT, rep))?)
    }

    pub fn reject(&self, p: &[f64]) -> Result<RejectionResult> {
        reject(self.cfg.fdr, p, self.cfg.alpha, self.cfg.storey_lambda)
    }
}

fn rep_seed(s: u64) -> u64 {
    rng::derive(s, 0x7e57)
}

fn uniform(seed: u64) -> f64 {
    (rng::mix(seed) >> 11) as f64 / (1u64 << 53) as f64
}

pub fn reject(proc: FdrProcedure, p: &[f64], alpha: f64, lambda: f64) -> Result<RejectionResult> {
    Ok(match proc {
        FdrProcedure::Bh => testing::bh(p, alpha)?,
        FdrProcedure::Storey => testing::storey_bh(p, alpha, lambda)?,
        FdrProcedure::By => testing::by(p, alpha)?,
    })
}

fn par_reps<T: Send>(reps: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..reps).into_par_iter().map(f).collect()
}

fn outlier_flags(data: &Dataset) -> Vec<bool> {
    data.labels().iter().map(|l| l.is_outlier()).collect()
}

fn inliers_outliers(data: &Dataset) -> (Vec<&[f64]>, Vec<&[f64]>) {
    (
        data.select(&data.indices_of(Label::Inlier)),
        data.select(&data.indices_of(Label::Outlier)),
    )
}

/// P-values of one method for every test row.
#[derive(Debug, Clone)]
pub struct MethodPValues {
    pub method: String,
    pub records: Vec<PValueRecord>,
}

impl MethodPValues {
    pub fn u(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.u).collect()
    }
}

fn table_records(tables: &ScoreTables, options: &SplitOptions) -> Result<Vec<PValueRecord>> {
    Ok(pvalues_from_tables(tables, options)?.into_iter().map(|(p, _)| p).collect())
}

/// P-values from score tables for a split-based method.
pub fn split_method(tables: &ScoreTables, method: &Method) -> Result<Vec<PValueRecord>> {
    match method {
        Method::Integrative => table_records(tables, &SplitOptions::default()),
        Method::Ensemble => table_records(tables, &SplitOptions::ensemble()),
        Method::Standard(a) => table_records(&tables.subset(&[a], &[])?, &SplitOptions::default()),
        Method::Pair(a, b) => table_records(&tables.subset(&[a], &[b])?, &SplitOptions::default()),
        Method::Tcv => Err(CliError::config("tcv is not a split method")),
    }
}

pub fn tcv_records(setup: &Setup, labeled: &Dataset, test: &[&[f64]], seed: u64) -> Result<Vec<conforma_core::tcv::TcvRecord>> {
    let (d0, d1) = inliers_outliers(labeled);
    let pipe = TcvPipeline::new(&d1, &setup.toolbox, setup.cfg.tcv.k0, setup.cfg.tcv.k1, seed)?;
    test.par_iter().map(|t| Ok(pipe.pvalue(&d0, t)?)).collect()
}

/// P-values of every configured method for one replicate.
pub fn method_pvalues(setup: &Setup, labeled: &Dataset, test: &[&[f64]], rep: usize) -> Result<Vec<MethodPValues>> {
    let tables = if setup.methods.iter().any(|m| *m != Method::Tcv) {
        let part = setup.split(labeled, rep)?;
        Some(SplitModel::fit(labeled, &part, &setup.toolbox)?.score_tables(test))
    } else {
        None
    };
    setup
        .methods
        .iter()
        .zip(&setup.cfg.methods)
        .map(|(m, name)| {
            let records = match (m, &tables) {
                (Method::Tcv, _) => tcv_records(setup, labeled, test, setup.seed(tag::SPLIT, rep))?
                    .into_iter()
                    .map(|r| r.record)
                    .collect(),
                (_, Some(t)) => split_method(t, m)?,
                (_, None) => unreachable!(),
            };
            Ok(MethodPValues {
                method: name.clone(),
                records,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueRow {
    pub test_id: usize,
    pub u0: f64,
    pub u1: f64,
    pub r: f64,
    pub u: f64,
    pub model0: String,
    pub model1: String,
}

impl PValueRow {
    fn new(test_id: usize, p: &PValueRecord) -> Self {
        PValueRow {
            test_id,
            u0: p.u0,
            u1: p.u1,
            r: p.r,
            u: p.u,
            model0: p.model0.clone(),
            model1: p.model1.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcvPValueRow {
    pub test_id: usize,
    pub u0: f64,
    pub u1: f64,
    pub r: f64,
    pub u: f64,
    pub model0: String,
    pub model1: String,
    #[serde(rename = "K0")]
    pub k0: usize,
    #[serde(rename = "K1")]
    pub k1: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrRow {
    pub method: String,
    pub alpha: f64,
    pub rejections: usize,
    pub fdp: f64,
    pub power: f64,
    pub pruned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrPowerRow {
    pub method: String,
    pub rep: usize,
    pub fdp: f64,
    pub power: f64,
}

/// `gen`: the labeled set and a test set.
pub fn run_gen(setup: &Setup) -> Result<(Dataset, Dataset)> {
    let labeled = setup.labeled(0)?;
    let s = &setup.cfg.sizes;
    let test = setup.test_set(s.n_test, s.random_composition, 0)?;
    Ok((labeled, test))
}

/// `pvalues`: split-conformal p-values of one method on one data set.
pub fn run_pvalues(setup: &Setup, method: &str) -> Result<Vec<PValueRow>> {
    let m = Method::parse(method)?;
    if m == Method::Tcv {
        return Err(CliError::config("use the tcv command for TCV+ p-values"));
    }
    let (labeled, test) = run_gen(setup)?;
    let part = setup.split(&labeled, 0)?;
    let rows: Vec<&[f64]> = test.rows().collect();
    let tables = SplitModel::fit(&labeled, &part, &setup.toolbox)?.score_tables(&rows);
    Ok(split_method(&tables, &m)?
        .iter()
        .enumerate()
        .map(|(i, p)| PValueRow::new(i, p))
        .collect())
}

/// `tcv`: TCV+ p-values with model selection on one data set.
pub fn run_tcv(setup: &Setup) -> Result<Vec<TcvPValueRow>> {
    let (labeled, test) = run_gen(setup)?;
    let rows: Vec<&[f64]> = test.rows().collect();
    Ok(tcv_records(setup, &labeled, &rows, setup.seed(tag::SPLIT, 0))?
        .into_iter()
        .enumerate()
        .map(|(i, t)| TcvPValueRow {
            test_id: i,
            u0: t.record.u0,
            u1: t.record.u1,
            r: t.record.r,
            u: t.record.u,
            model0: t.record.model0,
            model1: t.record.model1,
            k0: t.k0,
            k1: t.k1,
        })
        .collect())
}

/// `fdr`: rejections of every method on one data set with the configured
/// procedure, plus conditional calibration of the integrative p-values.
pub fn run_fdr(setup: &Setup) -> Result<Vec<FdrRow>> {
    let (labeled, test) = run_gen(setup)?;
    let rows: Vec<&[f64]> = test.rows().collect();
    let flags = outlier_flags(&test);
    let alpha = setup.cfg.alpha;
    let mut out = Vec::new();
    for mp in method_pvalues(setup, &labeled, &rows, 0)? {
        let r = setup.reject(&mp.u())?;
        let (fdp, power) = testing::fdp_power(&r.rejected, &flags);
        out.push(FdrRow {
            method: mp.method,
            alpha,
            rejections: r.len(),
            fdp,
            power,
            pruned: false,
        });
    }
    if setup.methods.contains(&Method::Integrative) {
        let part = setup.split(&labeled, 0)?;
        let tables = SplitModel::fit(&labeled, &part, &setup.toolbox)?.score_tables(&rows);
        let r = testing::conditional_calibration_split(
            &tables,
            &SplitOptions::default(),
            setup.cfg.conditional.mode.into(),
            alpha,
            setup.seed(tag::PRUNE, 0),
        )?;
        let (fdp, power) = testing::fdp_power(&r.rejected, &flags);
        out.push(FdrRow {
            method: "integrative-cc".into(),
            alpha,
            rejections: r.len(),
            fdp,
            power,
            pruned: r.pruned,
        });
    }
    Ok(out)
}

/// `fdr-power`: FDP and power per method and replicate.
pub fn run_fdr_power(setup: &Setup) -> Result<Vec<FdrPowerRow>> {
    let s = &setup.cfg.sizes;
    let per_rep = par_reps(setup.cfg.reps, |rep| {
        let labeled = setup.labeled(rep)?;
        let test = setup.test_set(s.n_test, s.random_composition, rep)?;
        let rows: Vec<&[f64]> = test.rows().collect();
        let flags = outlier_flags(&test);
        method_pvalues(setup, &labeled, &rows, rep)?
            .into_iter()
            .map(|mp| {
                let r = setup.reject(&mp.u())?;
                let (fdp, power) = testing::fdp_power(&r.rejected, &flags);
                Ok(FdrPowerRow {
                    method: mp.method,
                    rep,
                    fdp,
                    power,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(per_rep.into_iter().flatten().collect())
}

/// Mean FDP and power per method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrSummary {
    pub method: String,
    pub reps: usize,
    pub fdr: f64,
    pub fdr_stderr: f64,
    pub power: f64,
    pub power_stderr: f64,
}

pub fn summarize(rows: &[FdrPowerRow]) -> Vec<FdrSummary> {
    let mut by: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !by.contains_key(r.method.as_str()) {
            order.push(&r.method);
        }
        let e = by.entry(&r.method).or_default();
        e.0.push(r.fdp);
        e.1.push(r.power);
    }
    order
        .into_iter()
        .map(|m| {
            let (f, p) = &by[m];
            FdrSummary {
                method: m.to_string(),
                reps: f.len(),
                fdr: mean(f),
                fdr_stderr: std_err(f),
                power: mean(p),
                power_stderr: std_err(p),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityRow {
    pub method: String,
    pub alpha: f64,
    pub reps: usize,
    pub rejection_rate: f64,
    pub stderr: f64,
    /// `alpha + 2.5 * sqrt(alpha (1 - alpha) / reps)`.
    pub upper_bound: f64,
}

/// `validity`: empirical `P(u <= alpha)` for one null test point per
/// replicate.
pub fn run_validity(setup: &Setup) -> Result<Vec<ValidityRow>> {
    let alpha = setup.cfg.alpha;
    let reps = setup.cfg.reps;
    let per_rep = par_reps(reps, |rep| {
        let labeled = setup.labeled(rep)?;
        let test = setup.generator.draw(1, 0, rep_seed(setup.seed(tag::TEST, rep)))?;
        let rows: Vec<&[f64]> = test.rows().collect();
        Ok(method_pvalues(setup, &labeled, &rows, rep)?
            .into_iter()
            .map(|m| m.records[0].u <= alpha)
            .collect::<Vec<bool>>())
    })?;
    Ok(setup
        .cfg
        .methods
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let hits = per_rep.iter().filter(|r| r[k]).count();
            let rate = hits as f64 / reps as f64;
            ValidityRow {
                method: name.clone(),
                alpha,
                reps,
                rejection_rate: rate,
                stderr: binomial_se(rate, reps),
                upper_bound: alpha + 2.5 * binomial_se(alpha, reps),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyRow {
    pub method: String,
    pub models: usize,
    pub reps: usize,
    pub fpr: f64,
    /// Replicate-level standard error.
    pub fpr_stderr: f64,
    /// Binomial standard error over all test inliers.
    pub fpr_binomial_stderr: f64,
    pub tpr: f64,
    pub tpr_stderr: f64,
}

fn rates(rejected: &[bool], flags: &[bool]) -> (f64, f64) {
    let count = |want: bool| {
        let total = flags.iter().filter(|&&f| f == want).count();
        let hit = rejected.iter().zip(flags).filter(|(r, f)| **r && **f == want).count();
        hit as f64 / total.max(1) as f64
    };
    (count(false), count(true))
}

/// `demo-greedy`: copies of an isolation forest that differ only in their
/// seed. The greedy benchmark picks, per replicate, the copy whose standard
/// p-values flag the most test points; the integrative method selects among
/// the same copies per test point.
pub fn run_greedy_demo(setup: &Setup) -> Result<Vec<GreedyRow>> {
    let g = &setup.cfg.greedy;
    let max = *g.model_counts.iter().max().unwrap();
    let names: Vec<String> = (0..max).map(|j| format!("iforest-{j}")).collect();
    let models = names
        .iter()
        .enumerate()
        .map(|(j, n)| {
            let m: Arc<dyn ScoreModel> = Arc::new(IsolationForest {
                trees: g.trees,
                subsample: g.subsample,
                seed: j as u64,
            });
            (n.clone(), m)
        })
        .collect();
    let toolbox = Toolbox::named(models, false)?;
    let s = &setup.cfg.sizes;
    let thr = g.threshold;
    // [rep][count][method] -> (fpr, tpr); methods: standard, greedy, integrative.
    let per_rep = par_reps(setup.cfg.reps, |rep| {
        let labeled = setup.labeled(rep)?;
        let test = setup.test_set(s.n_test, s.random_composition, rep)?;
        let rows: Vec<&[f64]> = test.rows().collect();
        let flags = outlier_flags(&test);
        let part = setup.split(&labeled, rep)?;
        let tables = SplitModel::fit(&labeled, &part, &toolbox)?.score_tables(&rows);
        let standard: Vec<Vec<bool>> = names
            .iter()
            .map(|n| {
                Ok(table_records(&tables.subset(&[n], &[])?, &SplitOptions::default())?
                    .iter()
                    .map(|p| p.u <= thr)
                    .collect())
            })
            .collect::<Result<_>>()?;
        g.model_counts
            .iter()
            .map(|&c| {
                let pick = (0..c)
                    .max_by_key(|&j| (standard[j].iter().filter(|&&r| r).count(), std::cmp::Reverse(j)))
                    .unwrap();
                let sub: Vec<&str> = names[..c].iter().map(String::as_str).collect();
                let integ: Vec<bool> = table_records(&tables.subset(&sub, &sub)?, &SplitOptions::default())?
                    .iter()
                    .map(|p| p.u <= thr)
                    .collect();
                Ok([rates(&standard[0], &flags), rates(&standard[pick], &flags), rates(&integ, &flags)])
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let n_inlier_tests: usize = (0..setup.cfg.reps)
        .map(|rep| setup.composition(s.n_test, s.random_composition, rep).0)
        .sum();
    let mut out = Vec::new();
    for (ci, &c) in g.model_counts.iter().enumerate() {
        for (mi, method) in ["standard", "greedy", "integrative"].iter().enumerate() {
            let fpr: Vec<f64> = per_rep.iter().map(|r| r[ci][mi].0).collect();
            let tpr: Vec<f64> = per_rep.iter().map(|r| r[ci][mi].1).collect();
            out.push(GreedyRow {
                method: method.to_string(),
                models: c,
                reps: setup.cfg.reps,
                fpr: mean(&fpr),
                fpr_stderr: std_err(&fpr),
                fpr_binomial_stderr: binomial_se(mean(&fpr), n_inlier_tests.max(1)),
                tpr: mean(&tpr),
                tpr_stderr: std_err(&tpr),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub method: String,
    pub n_inlier: usize,
    pub reps: usize,
    pub correlation: f64,
    pub stderr: f64,
    /// `1 / n_inlier`.
    pub reference: f64,
}

/// `corr`: correlation between the p-values of two null test points that
/// share calibration data, as a function of the calibration inlier count.
/// `standard-independent` gives the second test point its own calibration
/// set.
pub fn run_correlation(setup: &Setup) -> Result<Vec<CorrelationRow>> {
    let c = &setup.cfg.correlation;
    let split_methods: Vec<(String, Method)> = setup
        .cfg
        .methods
        .iter()
        .cloned()
        .zip(setup.methods.iter().cloned())
        .filter(|(_, m)| *m != Method::Tcv)
        .collect();
    let first_one_class = setup
        .toolbox
        .entries()
        .iter()
        .find(|e| e.family == Family::OneClass && e.twin_of.is_none())
        .map(|e| e.name.clone());
    let mut out = Vec::new();
    for (k, &n0) in c.n_inliers.iter().enumerate() {
        let per_rep = par_reps(setup.cfg.reps, |rep| {
            let base = rng::derive_path(setup.cfg.seed, &[tag::DATA, k as u64, rep as u64]);
            let train = setup.generator.draw(c.n_inlier_train, c.n_outlier_train, rng::derive(base, 1))?;
            let cal = setup.generator.draw(n0, c.n_outlier_cal, rng::derive(base, 2))?;
            let test = setup.generator.draw(2, 0, rng::derive(base, 3))?;
            let data = train.concat(&cal)?;
            let off = train.len();
            let shift = |v: Vec<usize>| v.into_iter().map(|i| i + off).collect();
            let part = SplitPartition {
                d0_train: train.indices_of(Label::Inlier),
                d1_train: train.indices_of(Label::Outlier),
                d0_cal: shift(cal.indices_of(Label::Inlier)),
                d1_cal: shift(cal.indices_of(Label::Outlier)),
                seed: base,
            };
            let model = SplitModel::fit(&data, &part, &setup.toolbox)?;
            let rows: Vec<&[f64]> = test.rows().collect();
            let tables = model.score_tables(&rows);
            let mut pairs = split_methods
                .iter()
                .map(|(_, m)| {
                    let r = split_method(&tables, m)?;
                    Ok((r[0].u, r[1].u))
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(name) = &first_one_class {
                let ci = tables.inlier.names.iter().position(|n| n == name).unwrap();
                let cal2 = setup.generator.draw(n0, 0, rng::derive(base, 4))?;
                let fit = &model.inlier_candidates().candidates()[ci].fit;
                let s2 = fit.score_batch(&cal2.rows().collect::<Vec<_>>());
                pairs.push((
                    conforma_core::conformal::standard_pvalue_inlier(tables.inlier.test[ci][0], &tables.inlier.cal0[ci])?,
                    conforma_core::conformal::standard_pvalue_inlier(tables.inlier.test[ci][1], &s2)?,
                ));
            }
            Ok(pairs)
        })?;
        let mut labels: Vec<String> = split_methods.iter().map(|(n, _)| n.clone()).collect();
        if first_one_class.is_some() {
            labels.push("standard-independent".into());
        }
        for (j, label) in labels.into_iter().enumerate() {
            let x: Vec<f64> = per_rep.iter().map(|p| p[j].0).collect();
            let y: Vec<f64> = per_rep.iter().map(|p| p[j].1).collect();
            let r = pearson(&x, &y);
            out.push(CorrelationRow {
                method: label,
                n_inlier: n0,
                reps: setup.cfg.reps,
                correlation: r,
                stderr: pearson_se(r, setup.cfg.reps),
                reference: 1.0 / n0 as f64,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub bandwidth_scale: f64,
    pub n_outlier_cal: usize,
    pub reps: usize,
    /// `mean(u1 on test inliers) * ln(n1 + 1)`.
    pub ratio: f64,
    pub power_weighted: f64,
    pub power_unweighted: f64,
    pub fdr_weighted: f64,
    pub fdr_unweighted: f64,
}

/// `power-study`: BH power of weighted (integrative) and unweighted
/// (standard) p-values from a single KDE model, sweeping its bandwidth and
/// the outlier calibration size.
pub fn run_power_analysis(setup: &Setup) -> Result<Vec<PowerRow>> {
    let p = &setup.cfg.power;
    let s = &setup.cfg.sizes;
    let alpha = setup.cfg.alpha;
    let mut out = Vec::new();
    for &scale in &p.bandwidth_scales {
        let kde: Arc<dyn ScoreModel> = Arc::new(Kde { bandwidth_scale: scale });
        let toolbox = Toolbox::named(vec![("kde".into(), kde)], false)?;
        for &n1 in &p.n_outlier_cal {
            let per_rep = par_reps(setup.cfg.reps, |rep| {
                let labeled = setup.generator.labeled(s.n_inlier, 2 * n1, setup.seed(tag::DATA, rep))?;
                let test = setup.test_set(s.n_test, s.random_composition, rep)?;
                let rows: Vec<&[f64]> = test.rows().collect();
                let flags = outlier_flags(&test);
                let part = split(&labeled, s.inlier_train_frac, 0.5, setup.seed(tag::SPLIT, rep))?;
                let tables = SplitModel::fit(&labeled, &part, &toolbox)?.score_tables(&rows);
                let weighted = split_method(&tables, &Method::Pair("kde".into(), "kde".into()))?;
                let unweighted = split_method(&tables, &Method::Standard("kde".into()))?;
                let u1: Vec<f64> = weighted.iter().zip(&flags).filter(|(_, o)| !**o).map(|(p, _)| p.u1).collect();
                let ratio = testing::informativeness_ratio(&u1, part.d1_cal.len())?;
                let eval = |recs: &[PValueRecord]| -> Result<(f64, f64)> {
                    let u: Vec<f64> = recs.iter().map(|p| p.u).collect();
                    Ok(testing::fdp_power(&testing::bh(&u, alpha)?.rejected, &flags))
                };
                Ok((ratio, eval(&weighted)?, eval(&unweighted)?))
            })?;
            let col = |f: &dyn Fn(&(f64, (f64, f64), (f64, f64))) -> f64| mean(&per_rep.iter().map(f).collect::<Vec<_>>());
            out.push(PowerRow {
                bandwidth_scale: scale,
                n_outlier_cal: n1,
                reps: setup.cfg.reps,
                ratio: col(&|r| r.0),
                power_weighted: col(&|r| r.1 .1),
                power_unweighted: col(&|r| r.2 .1),
                fdr_weighted: col(&|r| r.1 .0),
                fdr_unweighted: col(&|r| r.2 .0),
            });
        }
    }
    Ok(out)
}

/// `tcv-compare`: split integrative versus TCV+ on shared data.
pub fn run_tcv_compare(setup: &Setup) -> Result<Vec<FdrPowerRow>> {
    let mut cfg = setup.cfg.clone();
    cfg.methods = vec!["integrative".into(), "tcv".into()];
    run_fdr_power(&Setup::new(cfg)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcRow {
    pub method: String,
    pub rep: usize,
    pub fdp: f64,
    pub power: f64,
    pub m: usize,
    pub m0: usize,
}

/// `cc-compare`: BH, BY, Storey-BH and conditional calibration applied to
/// integrative p-values of a small test set with random composition;
/// optionally the TCV+ version as well.
pub fn run_cc_compare(setup: &Setup) -> Result<Vec<CcRow>> {
    let c = &setup.cfg.conditional;
    let alpha = setup.cfg.alpha;
    let lambda = setup.cfg.storey_lambda;
    let per_rep = par_reps(setup.cfg.reps, |rep| {
        let labeled = setup.labeled(rep)?;
        let mut rows_out = Vec::new();
        let mut push = |method: &str, r: &RejectionResult, flags: &[bool]| {
            let (fdp, power) = testing::fdp_power(&r.rejected, flags);
            rows_out.push(CcRow {
                method: method.into(),
                rep,
                fdp,
                power,
                m: flags.len(),
                m0: flags.iter().filter(|&&o| !o).count(),
            });
        };
        let test = setup.test_set(c.test_size, true, rep)?;
        let rows: Vec<&[f64]> = test.rows().collect();
        let flags = outlier_flags(&test);
        let part = setup.split(&labeled, rep)?;
        let tables = SplitModel::fit(&labeled, &part, &setup.toolbox)?.score_tables(&rows);
        let options = SplitOptions::default();
        let (u, _) = testing::split_pvalues(&tables, &options)?;
        push("bh", &testing::bh(&u, alpha)?, &flags);
        push("by", &testing::by(&u, alpha)?, &flags);
        push("storey", &testing::storey_bh(&u, alpha, lambda)?, &flags);
        let cc = testing::conditional_calibration_split(&tables, &options, c.mode.into(), alpha, setup.seed(tag::PRUNE, rep))?;
        push("cc", &cc, &flags);
        if c.tcv {
            let test = setup.generator.test(
                setup.composition(c.tcv_test_size, true, rep).0,
                c.tcv_test_size - setup.composition(c.tcv_test_size, true, rep).0,
                rng::derive(setup.seed(tag::TEST, rep), 0x7c)
            )?;
            let rows: Vec<&[f64]> = test.rows().collect();
            let flags = outlier_flags(&test);
            let (d0, d1) = inliers_outliers(&labeled);
            let pipe = TcvPipeline::new(&d1, &setup.toolbox, c.tcv_k0, setup.cfg.tcv.k1, setup.seed(tag::SPLIT, rep))?;
            let (u, _) = testing::tcv_pvalues(&pipe, &d0, &rows)?;
            push("tcv-bh", &testing::bh(&u, alpha)?, &flags);
            let cc = testing::conditional_calibration_tcv(&pipe, &d0, &rows, c.tcv_mode.into(), alpha, setup.seed(tag::PRUNE, rep))?;
            push("tcv-cc", &cc, &flags);
        }
        Ok(rows_out)
    })?;
    Ok(per_rep.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredsetRow {
    pub test_id: usize,
    pub labels: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub method: String,
    /// Class id, or `all` for marginal coverage.
    pub class: String,
    pub count: usize,
    pub coverage: f64,
    pub stderr: f64,
    pub mean_size: f64,
}

fn blobs(setup: &Setup) -> Result<Blobs> {
    let p = &setup.cfg.predset;
    Ok(Blobs::new(p.n_classes, p.d, p.spread, p.sd, setup.cfg.seed)?)
}

pub fn join_labels(labels: &[usize]) -> String {
    labels.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

/// `predset`: TCV+ prediction sets for synthetic blob data.
pub fn run_predset(setup: &Setup) -> Result<(MultiClassData, MultiClassData, Vec<PredsetRow>)> {
    let p = &setup.cfg.predset;
    let b = blobs(setup)?;
    let data = b.sample(p.n_labeled, setup.seed(tag::DATA, 0));
    let test = b.sample(p.n_test, setup.seed(tag::TEST, 0));
    let clf = registry::classifier(p)?;
    let seed = setup.seed(tag::SPLIT, 0);
    let rows = test
        .rows()
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let set = if p.label_conditional {
                tcv_label_conditional_prediction_set(&data, x, clf.as_ref(), p.k, setup.cfg.alpha, seed)?
            } else {
                tcv_prediction_set(&data, x, clf.as_ref(), p.k, setup.cfg.alpha, seed)?
            };
            Ok(PredsetRow {
                test_id: i,
                labels: join_labels(&set.labels),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((data, test, rows))
}

/// Coverage of marginal (`tcv`) and label-conditional (`tcv-label`) sets
/// over replicates with one test point each, overall and per true class.
pub fn run_predset_coverage(setup: &Setup) -> Result<Vec<CoverageRow>> {
    let p = &setup.cfg.predset;
    let b = blobs(setup)?;
    let clf = registry::classifier(p)?;
    let alpha = setup.cfg.alpha;
    let per_rep = par_reps(setup.cfg.reps, |rep| {
        let data = b.sample(p.n_labeled, setup.seed(tag::DATA, rep));
        let test = b.sample(1, setup.seed(tag::TEST, rep));
        let (x, y) = (&test.rows()[0], test.labels()[0]);
        let seed = setup.seed(tag::SPLIT, rep);
        let a = tcv_prediction_set(&data, x, clf.as_ref(), p.k, alpha, seed)?;
        let l = tcv_label_conditional_prediction_set(&data, x, clf.as_ref(), p.k, alpha, seed)?;
        Ok((y, [(a.contains(y), a.labels.len()), (l.contains(y), l.labels.len())]))
    })?;
    let mut out = Vec::new();
    for (mi, method) in ["tcv", "tcv-label"].iter().enumerate() {
        let classes = std::iter::once(None).chain((0..p.n_classes).map(Some));
        for class in classes {
            let sel: Vec<_> = per_rep.iter().filter(|(y, _)| class.map_or(true, |c| c == *y)).collect();
            let hits: Vec<f64> = sel.iter().map(|(_, r)| f64::from(u8::from(r[mi].0))).collect();
            let sizes: Vec<f64> = sel.iter().map(|(_, r)| r[mi].1 as f64).collect();
            let cov = mean(&hits);
            out.push(CoverageRow {
                method: method.to_string(),
                class: class.map_or_else(|| "all".into(), |c| c.to_string()),
                count: sel.len(),
                coverage: cov,
                stderr: binomial_se(cov, sel.len().max(1)),
                mean_size: mean(&sizes),
            });
        }
    }
    Ok(out)
}
