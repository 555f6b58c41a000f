//! Experiment configuration, read from TOML.
//!
//! Every field has a desk-scale default, so an empty file is a valid
//! configuration. See `configs/` in the repository root for annotated
//! samples.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::registry;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub alpha: f64,
    pub reps: usize,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    /// Register sign-flipped twins of one-class models.
    pub flips: bool,
    pub generator: GeneratorConfig,
    pub sizes: Sizes,
    pub models: Vec<ModelSpec>,
    /// `integrative`, `ensemble`, `tcv`, `standard:<model>` or
    /// `pair:<inlier model>,<outlier model>`.
    pub methods: Vec<String>,
    pub fdr: FdrProcedure,
    pub storey_lambda: f64,
    pub tcv: TcvConfig,
    pub greedy: GreedyConfig,
    pub correlation: CorrelationConfig,
    pub power: PowerConfig,
    pub conditional: ConditionalConfig,
    pub predset: PredsetConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            alpha: 0.1,
            reps: 100,
            threads: None,
            out: None,
            flips: true,
            generator: GeneratorConfig::default(),
            sizes: Sizes::default(),
            models: registry::native_specs(),
            methods: vec!["integrative".into(), "ensemble".into()],
            fdr: FdrProcedure::Storey,
            storey_lambda: conforma_core::testing::STOREY_LAMBDA,
            tcv: TcvConfig::default(),
            greedy: GreedyConfig::default(),
            correlation: CorrelationConfig::default(),
            power: PowerConfig::default(),
            conditional: ConditionalConfig::default(),
            predset: PredsetConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorConfig {
    GaussianMixture {
        #[serde(default = "default_d")]
        d: usize,
        #[serde(default = "default_a_inlier")]
        a_inlier: f64,
        #[serde(default = "one")]
        a_outlier: f64,
        #[serde(default = "default_components")]
        n_components: usize,
        #[serde(default = "default_box")]
        component_box: f64,
    },
    Logistic {
        #[serde(default = "default_d")]
        d: usize,
        #[serde(default = "default_beta_variance")]
        beta_variance: f64,
        #[serde(default = "default_target")]
        target_outlier_frac: f64,
        #[serde(default = "default_mc")]
        mc_samples: usize,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    /// Labeled data (and optionally a labeled test set) from CSV files.
    Csv {
        path: PathBuf,
        #[serde(default)]
        test_path: Option<PathBuf>,
    },
}

fn default_d() -> usize {
    20
}
fn default_a_inlier() -> f64 {
    0.7
}
fn one() -> f64 {
    1.0
}
fn default_components() -> usize {
    100
}
fn default_box() -> f64 {
    3.0
}
fn default_beta_variance() -> f64 {
    3.0
}
fn default_target() -> f64 {
    0.1
}
fn default_mc() -> usize {
    10_000
}
fn default_tol() -> f64 {
    0.005
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig::GaussianMixture {
            d: default_d(),
            a_inlier: default_a_inlier(),
            a_outlier: one(),
            n_components: default_components(),
            component_box: default_box(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Sizes {
    pub n_inlier: usize,
    pub n_outlier: usize,
    pub n_test: usize,
    pub test_outlier_frac: f64,
    /// Draw the number of test outliers from a binomial distribution
    /// instead of rounding `n_test * test_outlier_frac`.
    pub random_composition: bool,
    pub inlier_train_frac: f64,
    pub outlier_train_frac: f64,
}

impl Default for Sizes {
    fn default() -> Self {
        Sizes {
            n_inlier: 200,
            n_outlier: 50,
            n_test: 200,
            test_outlier_frac: 0.5,
            random_composition: false,
            inlier_train_frac: 0.5,
            outlier_train_frac: 0.5,
        }
    }
}

/// `{name, family, params}` with an optional display id.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub family: String,
    #[serde(default)]
    pub params: toml::Table,
    #[serde(default)]
    pub id: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum FdrProcedure {
    Bh,
    Storey,
    By,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TcvConfig {
    pub k0: usize,
    pub k1: usize,
}

impl Default for TcvConfig {
    fn default() -> Self {
        TcvConfig {
            k0: conforma_core::tcv::DEFAULT_FOLDS,
            k1: conforma_core::tcv::DEFAULT_FOLDS,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GreedyConfig {
    pub model_counts: Vec<usize>,
    pub threshold: f64,
    pub trees: usize,
    pub subsample: usize,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        GreedyConfig {
            model_counts: vec![1, 10, 50],
            threshold: 0.1,
            trees: 50,
            subsample: 64,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelationConfig {
    /// Calibration inlier counts to sweep.
    pub n_inliers: Vec<usize>,
    pub n_outlier_cal: usize,
    pub n_inlier_train: usize,
    pub n_outlier_train: usize,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        CorrelationConfig {
            n_inliers: vec![20, 50, 100],
            n_outlier_cal: 20,
            n_inlier_train: 50,
            n_outlier_train: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    pub bandwidth_scales: Vec<f64>,
    /// Outlier calibration set sizes to sweep.
    pub n_outlier_cal: Vec<usize>,
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig {
            bandwidth_scales: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            n_outlier_cal: vec![10, 30, 50],
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Faithful,
    Frozen,
}

impl From<Mode> for conforma_core::testing::SelectionMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Faithful => Self::Faithful,
            Mode::Frozen => Self::Frozen,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionalConfig {
    pub mode: Mode,
    pub test_size: usize,
    /// Also run the (expensive) TCV+ version.
    pub tcv: bool,
    pub tcv_mode: Mode,
    pub tcv_test_size: usize,
    pub tcv_k0: usize,
}

impl Default for ConditionalConfig {
    fn default() -> Self {
        ConditionalConfig {
            mode: Mode::Faithful,
            test_size: 10,
            tcv: false,
            tcv_mode: Mode::Frozen,
            tcv_test_size: 4,
            tcv_k0: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PredsetConfig {
    pub n_classes: usize,
    pub d: usize,
    pub spread: f64,
    pub sd: f64,
    pub n_labeled: usize,
    pub n_test: usize,
    pub k: usize,
    /// `naive-bayes` or `knn`.
    pub classifier: String,
    pub knn_k: usize,
    /// Build label-conditional sets in the `predset` command.
    pub label_conditional: bool,
}

impl Default for PredsetConfig {
    fn default() -> Self {
        PredsetConfig {
            n_classes: 3,
            d: 2,
            spread: 2.0,
            sd: 1.0,
            n_labeled: 60,
            n_test: 20,
            k: 5,
            classifier: "naive-bayes".into(),
            knn_k: 5,
            label_conditional: false,
        }
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(CliError::config(format!("{name} must lie in (0, 1), got {v}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(CliError::config)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("alpha", self.alpha)?;
        check_unit("storey_lambda", self.storey_lambda)?;
        check_unit("sizes.inlier_train_frac", self.sizes.inlier_train_frac)?;
        check_unit("sizes.outlier_train_frac", self.sizes.outlier_train_frac)?;
        if !(0.0..=1.0).contains(&self.sizes.test_outlier_frac) {
            return Err(CliError::config("sizes.test_outlier_frac must lie in [0, 1]"));
        }
        if self.reps == 0 {
            return Err(CliError::config("reps must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(CliError::config("threads must be at least 1"));
        }
        if self.tcv.k0 < 2 || self.tcv.k1 < 2 {
            return Err(CliError::config("tcv folds must be at least 2"));
        }
        let toolbox = registry::toolbox(&self.models, self.flips)?;
        let names: BTreeSet<&str> = toolbox.entries().iter().map(|e| e.name.as_str()).collect();
        for m in &self.methods {
            for name in Method::parse(m)?.model_names() {
                if !names.contains(name.as_str()) {
                    return Err(CliError::config(format!("method {m:?} refers to unknown model {name:?}")));
                }
            }
        }
        if self.greedy.model_counts.is_empty() || self.greedy.model_counts.contains(&0) {
            return Err(CliError::config("greedy.model_counts must be non-empty and positive"));
        }
        if self.predset.n_classes < 2 {
            return Err(CliError::config("predset.n_classes must be at least 2"));
        }
        registry::classifier(&self.predset)?;
        Ok(())
    }
}

/// A p-value method named in the config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Method {
    Integrative,
    Ensemble,
    Tcv,
    Standard(String),
    Pair(String, String),
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "integrative" => Ok(Method::Integrative),
            "ensemble" => Ok(Method::Ensemble),
            "tcv" => Ok(Method::Tcv),
            _ => {
                if let Some(name) = s.strip_prefix("standard:") {
                    Ok(Method::Standard(name.to_string()))
                } else if let Some(rest) = s.strip_prefix("pair:") {
                    match rest.split_once(',') {
                        Some((a, b)) => Ok(Method::Pair(a.trim().to_string(), b.trim().to_string())),
                        None => Err(CliError::config(format!("pair method needs two models: {s:?}"))),
                    }
                } else {
                    Err(CliError::config(format!("unknown method {s:?}")))
                }
            }
        }
    }

    pub fn model_names(&self) -> Vec<String> {
        match self {
            Method::Standard(a) => vec![a.clone()],
            Method::Pair(a, b) => vec![a.clone(), b.clone()],
            _ => Vec::new(),
        }
    }
}
