//! Model specs to score models.

use std::sync::Arc;

use conforma_core::scoring::{
    Classifier, Family, GaussianNb, IsolationForest, Kde, KnnBinary, KnnClassifier, KnnOneClass, LogisticRegression,
    Mahalanobis, ScoreModel, Toolbox,
};

use crate::config::{ModelSpec, PredsetConfig};
use crate::error::{CliError, Result};

/// Names accepted in `models[].name`.
pub const MODEL_NAMES: &[&str] = &["knn", "mahalanobis", "kde", "iforest", "logistic", "naive-bayes", "knn-binary"];

fn spec(name: &str, family: &str) -> ModelSpec {
    ModelSpec {
        name: name.into(),
        family: family.into(),
        params: toml::Table::new(),
        id: None,
    }
}

/// The native toolbox with default parameters.
pub fn native_specs() -> Vec<ModelSpec> {
    vec![
        spec("knn", "one-class"),
        spec("mahalanobis", "one-class"),
        spec("kde", "one-class"),
        spec("iforest", "one-class"),
        spec("logistic", "binary"),
        spec("naive-bayes", "binary"),
        spec("knn-binary", "binary"),
    ]
}

struct Params<'a> {
    model: &'a str,
    table: &'a toml::Table,
}

impl Params<'_> {
    fn float(&self, key: &str, default: f64) -> Result<f64> {
        match self.table.get(key) {
            None => Ok(default),
            Some(toml::Value::Float(v)) => Ok(*v),
            Some(toml::Value::Integer(v)) => Ok(*v as f64),
            Some(v) => Err(CliError::config(format!("{}: {key} must be a number, got {v}", self.model))),
        }
    }

    fn uint(&self, key: &str, default: u64) -> Result<u64> {
        match self.table.get(key) {
            None => Ok(default),
            Some(toml::Value::Integer(v)) if *v >= 0 => Ok(*v as u64),
            Some(v) => Err(CliError::config(format!("{}: {key} must be a non-negative integer, got {v}", self.model))),
        }
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.float(key, default)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::config(format!("{}: {key} must be positive", self.model)));
        }
        Ok(v)
    }

    fn count(&self, key: &str, default: usize) -> Result<usize> {
        let v = self.uint(key, default as u64)? as usize;
        if v == 0 {
            return Err(CliError::config(format!("{}: {key} must be at least 1", self.model)));
        }
        Ok(v)
    }

    fn only(&self, keys: &[&str]) -> Result<()> {
        match self.table.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => Err(CliError::config(format!("{}: unknown parameter {k:?}", self.model))),
            None => Ok(()),
        }
    }
}

pub fn build(spec: &ModelSpec) -> Result<Arc<dyn ScoreModel>> {
    let p = Params {
        model: &spec.name,
        table: &spec.params,
    };
    let model: Arc<dyn ScoreModel> = match spec.name.as_str() {
        "knn" => {
            p.only(&["k"])?;
            Arc::new(KnnOneClass::new(p.count("k", 5)?))
        }
        "mahalanobis" => {
            p.only(&["ridge"])?;
            Arc::new(Mahalanobis {
                ridge: p.positive("ridge", Mahalanobis::default().ridge)?,
            })
        }
        "kde" => {
            p.only(&["bandwidth_scale"])?;
            Arc::new(Kde {
                bandwidth_scale: p.positive("bandwidth_scale", 1.0)?,
            })
        }
        "iforest" => {
            p.only(&["trees", "subsample", "seed"])?;
            let d = IsolationForest::default();
            Arc::new(IsolationForest {
                trees: p.count("trees", d.trees)?,
                subsample: p.count("subsample", d.subsample)?,
                seed: p.uint("seed", d.seed)?,
            })
        }
        "logistic" => {
            p.only(&["l2", "iterations"])?;
            let d = LogisticRegression::default();
            Arc::new(LogisticRegression {
                l2: p.float("l2", d.l2)?,
                iterations: p.count("iterations", d.iterations)?,
            })
        }
        "naive-bayes" => {
            p.only(&["var_smoothing"])?;
            Arc::new(GaussianNb {
                var_smoothing: p.positive("var_smoothing", GaussianNb::default().var_smoothing)?,
            })
        }
        "knn-binary" => {
            p.only(&["k"])?;
            Arc::new(KnnBinary::new(p.count("k", 5)?))
        }
        other => {
            return Err(CliError::config(format!(
                "unknown model {other:?}; expected one of {}",
                MODEL_NAMES.join(", ")
            )))
        }
    };
    let family = match spec.family.as_str() {
        "one-class" => Family::OneClass,
        "binary" => Family::Binary,
        f => return Err(CliError::config(format!("{}: unknown family {f:?}", spec.name))),
    };
    if family != model.family() {
        return Err(CliError::config(format!("{}: declared family {} does not match", spec.name, spec.family)));
    }
    Ok(model)
}

/// Toolbox of the configured models, keyed by `id` or the model's own name.
pub fn toolbox(specs: &[ModelSpec], flips: bool) -> Result<Toolbox> {
    let models = specs
        .iter()
        .map(|s| {
            let m = build(s)?;
            Ok((s.id.clone().unwrap_or_else(|| m.name()), m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Toolbox::named(models, flips)?)
}

pub fn classifier(cfg: &PredsetConfig) -> Result<Arc<dyn Classifier>> {
    match cfg.classifier.as_str() {
        "naive-bayes" => Ok(Arc::new(GaussianNb::default())),
        "knn" if cfg.knn_k > 0 => Ok(Arc::new(KnnClassifier::new(cfg.knn_k))),
        c => Err(CliError::config(format!("unknown classifier {c:?} (naive-bayes or knn with knn_k >= 1)"))),
    }
}
