use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{flipped_name, Family, FittedModel, FlippedFit, ScoreModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ToolboxEntry {
    pub name: String,
    pub family: Family,
    pub model: Arc<dyn ScoreModel>,
    /// For an auto-registered sign-flipped twin, the entry it negates.
    pub twin_of: Option<usize>,
}

/// Named collection of candidate score models. One-class models get a
/// sign-flipped twin registered automatically unless built with
/// [`Toolbox::without_flips`].
#[derive(Debug, Clone)]
pub struct Toolbox {
    entries: Vec<ToolboxEntry>,
}

impl Toolbox {
    /// Models named by their own `name()`.
    pub fn new(models: Vec<Arc<dyn ScoreModel>>) -> Result<Self> {
        Self::named(models.into_iter().map(|m| (m.name(), m)).collect(), true)
    }

    pub fn without_flips(models: Vec<Arc<dyn ScoreModel>>) -> Result<Self> {
        Self::named(models.into_iter().map(|m| (m.name(), m)).collect(), false)
    }

    /// Models under explicit names; `flips` controls the one-class twins.
    pub fn named(models: Vec<(String, Arc<dyn ScoreModel>)>, flips: bool) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::EmptyToolbox);
        }
        let mut entries = Vec::new();
        for (name, model) in models {
            let family = model.family();
            let base = entries.len();
            entries.push(ToolboxEntry {
                name: name.clone(),
                family,
                model: model.clone(),
                twin_of: None,
            });
            if flips && family == Family::OneClass {
                entries.push(ToolboxEntry {
                    name: flipped_name(&name),
                    family,
                    model: Arc::new(super::Flip(model)),
                    twin_of: Some(base),
                });
            }
        }
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert(e.name.as_str()) {
                return Err(Error::InvalidArgument(alloc::format!("duplicate model name {}", e.name)));
            }
        }
        Ok(Toolbox { entries })
    }

    pub fn entries(&self) -> &[ToolboxEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn has_family(&self, family: Family) -> bool {
        self.entries.iter().any(|e| e.family == family)
    }

    /// Entries of one family (twins re-indexed).
    pub fn restrict(&self, family: Family) -> Result<Toolbox> {
        let mut map = alloc::vec![None; self.entries.len()];
        let mut entries = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            if e.family == family {
                map[i] = Some(entries.len());
                let mut e = e.clone();
                e.twin_of = e.twin_of.and_then(|b| map[b]);
                entries.push(e);
            }
        }
        if entries.is_empty() {
            return Err(Error::EmptyToolbox);
        }
        Ok(Toolbox { entries })
    }
}

/// Which side of the problem a fitted toolbox scores for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Inlier-side scores: one-class models on inliers, binary models on
    /// inliers versus outliers.
    Inlier,
    /// Outlier-side scores: one-class models on outliers only.
    Outlier,
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub name: String,
    pub family: Family,
    pub fit: Arc<dyn FittedModel>,
    twin_of: Option<usize>,
}

/// A toolbox trained for one role. Flipped twins share the fitted state of
/// their base model instead of being refitted.
#[derive(Debug, Clone, Default)]
pub struct FittedToolbox {
    candidates: Vec<Candidate>,
}

impl FittedToolbox {
    /// Fit every entry usable for `role`. Entries that cannot be trained on
    /// the data at hand (too few rows, or a binary model without outliers)
    /// are skipped; the result may therefore be empty.
    pub fn fit(toolbox: &Toolbox, role: Role, inliers: &[&[f64]], outliers: &[&[f64]]) -> Result<Self> {
        let mut candidates: Vec<Candidate> = Vec::new();
        let mut slot = alloc::vec![None; toolbox.entries.len()];
        for (i, e) in toolbox.entries.iter().enumerate() {
            let fit = match (e.twin_of, role, e.family) {
                (_, Role::Outlier, Family::Binary) => continue,
                (Some(base), _, _) => match slot[base] {
                    Some(j) => {
                        let base_fit: &Candidate = &candidates[j];
                        Ok(Arc::new(FlippedFit(base_fit.fit.clone())) as Arc<dyn FittedModel>)
                    }
                    None => continue,
                },
                (None, Role::Inlier, _) => e.model.fit(inliers, outliers),
                (None, Role::Outlier, Family::OneClass) => e.model.fit(outliers, &[]),
            };
            match fit {
                Ok(fit) => {
                    let twin_of = e.twin_of.and_then(|b| slot[b]);
                    slot[i] = Some(candidates.len());
                    candidates.push(Candidate {
                        name: e.name.clone(),
                        family: e.family,
                        fit,
                        twin_of,
                    });
                }
                Err(Error::TooFewSamples { .. }) | Err(Error::SingleClass(_)) => continue,
                Err(err) => return Err(err),
            }
        }
        Ok(FittedToolbox { candidates })
    }

    pub fn from_candidates(fits: Vec<(String, Family, Arc<dyn FittedModel>)>) -> Self {
        FittedToolbox {
            candidates: fits
                .into_iter()
                .map(|(name, family, fit)| Candidate {
                    name,
                    family,
                    fit,
                    twin_of: None,
                })
                .collect(),
        }
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Scores `[candidate][row]`; twins are obtained by negation.
    pub fn score_rows(&self, rows: &[&[f64]]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(self.candidates.len());
        for c in &self.candidates {
            let s = match c.twin_of {
                Some(b) => out[b].iter().map(|v| -v).collect(),
                None => c.fit.score_batch(rows),
            };
            out.push(s);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{GaussianNb, KnnOneClass, Kde};
    use alloc::vec;

    fn models() -> Vec<Arc<dyn ScoreModel>> {
        vec![Arc::new(KnnOneClass::new(2)), Arc::new(GaussianNb::default()), Arc::new(Kde::default())]
    }

    #[test]
    fn twins_are_registered_for_one_class_only() {
        let t = Toolbox::new(models()).unwrap();
        let names: Vec<&str> = t.entries().iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, ["knn(k=2)", "flip(knn(k=2))", "naive-bayes", "kde", "flip(kde)"]);
        assert!(Toolbox::new(vec![]).is_err());
        let dup: Vec<Arc<dyn ScoreModel>> = vec![Arc::new(Kde::default()), Arc::new(Kde::default())];
        assert!(Toolbox::new(dup).is_err());
    }

    #[test]
    fn outlier_role_skips_binary_and_missing_data() {
        let t = Toolbox::new(models()).unwrap();
        let rows = [[0.0, 1.0], [1.0, 0.5], [0.3, 0.3]];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let out = FittedToolbox::fit(&t, Role::Outlier, &[], &refs).unwrap();
        assert_eq!(out.len(), 4);
        let none = FittedToolbox::fit(&t, Role::Outlier, &refs, &[]).unwrap();
        assert!(none.is_empty());
        let inl = FittedToolbox::fit(&t, Role::Inlier, &refs, &[]).unwrap();
        assert_eq!(inl.len(), 4, "binary model needs outliers");
        let both = FittedToolbox::fit(&t, Role::Inlier, &refs, &refs[..1]).unwrap();
        assert_eq!(both.len(), 5);
        let s = both.score_rows(&refs);
        assert_eq!(s[1], s[0].iter().map(|v| -v).collect::<Vec<_>>());
    }
}
