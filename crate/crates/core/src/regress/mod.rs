//! The 19 regression variants behind one fit/predict interface, plus
//! standardization and k-fold cross-validation.

mod cv;
mod ensemble;
mod gpr;
mod linalg;
mod linear;
mod optimize;
mod svr;
mod tree;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cv::{cross_validate, fold_assignment, CvReport};
pub use ensemble::{Ensemble, EnsembleKind};
pub use gpr::{GprHyper, GprKernel, GprModel};
pub use linear::{LinearModel, Term};
pub use optimize::{nelder_mead, Minimum};
pub use svr::{SvrKernel, SvrModel};
pub use tree::{Node, Tree, TreeParams};

/// Feature matrix with targets and scenario labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub ids: Vec<String>,
}

impl Dataset {
    /// Checks shape and finiteness. Targets may be any finite value here;
    /// see [`Dataset::check_normalized_targets`] for the pipeline's (0, 1] rule.
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>, ids: Vec<String>) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::Domain(format!(
                "dataset needs at least 2 rows, got {n}"
            )));
        }
        if x.len() != n || ids.len() != n {
            return Err(Error::Domain(format!(
                "dataset has {} rows, {} targets and {} ids",
                x.len(),
                n,
                ids.len()
            )));
        }
        let p = x[0].len();
        if p == 0 {
            return Err(Error::Domain("dataset has no features".into()));
        }
        for (i, row) in x.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Domain(format!(
                    "row {i} has {} features, expected {p}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Domain(format!(
                    "non-finite feature at row {i}, column {j}"
                )));
            }
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite target at row {i}")));
        }
        Ok(Self { x, y, ids })
    }

    /// Unlabelled convenience constructor for tests and benches.
    pub fn from_xy(x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let ids = (0..y.len()).map(|i| i.to_string()).collect();
        Self::new(x, y, ids)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x[0].len()
    }

    pub fn check_normalized_targets(&self) -> Result<()> {
        match self.y.iter().position(|&v| !(v > 0.0 && v <= 1.0)) {
            Some(i) => Err(Error::Domain(format!(
                "target {} of {} outside (0, 1]",
                self.y[i], self.ids[i]
            ))),
            None => Ok(()),
        }
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: rows.iter().map(|&i| self.x[i].clone()).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Linear,
    Tree,
    Svm,
    Ensemble,
    Gpr,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::Linear => "Linear Regression",
            Family::Tree => "Tree",
            Family::Svm => "SVM",
            Family::Ensemble => "Ensemble Trees",
            Family::Gpr => "Gaussian Process Regression",
        }
    }
}

/// One of the 19 model configurations, in results-table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    Linear,
    InteractionsLinear,
    RobustLinear,
    StepwiseLinear,
    FineTree,
    MediumTree,
    CoarseTree,
    LinearSvm,
    QuadraticSvm,
    CubicSvm,
    FineGaussianSvm,
    MediumGaussianSvm,
    CoarseGaussianSvm,
    BoostedTrees,
    BaggedTrees,
    SquaredExponentialGpr,
    Matern52Gpr,
    ExponentialGpr,
    RationalQuadraticGpr,
}

impl Variant {
    pub const ALL: [Variant; 19] = [
        Variant::Linear,
        Variant::InteractionsLinear,
        Variant::RobustLinear,
        Variant::StepwiseLinear,
        Variant::FineTree,
        Variant::MediumTree,
        Variant::CoarseTree,
        Variant::LinearSvm,
        Variant::QuadraticSvm,
        Variant::CubicSvm,
        Variant::FineGaussianSvm,
        Variant::MediumGaussianSvm,
        Variant::CoarseGaussianSvm,
        Variant::BoostedTrees,
        Variant::BaggedTrees,
        Variant::SquaredExponentialGpr,
        Variant::Matern52Gpr,
        Variant::ExponentialGpr,
        Variant::RationalQuadraticGpr,
    ];

    pub fn family(self) -> Family {
        use Variant::*;
        match self {
            Linear | InteractionsLinear | RobustLinear | StepwiseLinear => Family::Linear,
            FineTree | MediumTree | CoarseTree => Family::Tree,
            LinearSvm | QuadraticSvm | CubicSvm | FineGaussianSvm | MediumGaussianSvm
            | CoarseGaussianSvm => Family::Svm,
            BoostedTrees | BaggedTrees => Family::Ensemble,
            SquaredExponentialGpr | Matern52Gpr | ExponentialGpr | RationalQuadraticGpr => {
                Family::Gpr
            }
        }
    }

    pub fn name(self) -> &'static str {
        use Variant::*;
        match self {
            Linear => "Linear",
            InteractionsLinear => "Interactions Linear",
            RobustLinear => "Robust Linear",
            StepwiseLinear => "Stepwise Linear",
            FineTree => "Fine Tree",
            MediumTree => "Medium Tree",
            CoarseTree => "Coarse Tree",
            LinearSvm => "Linear SVM",
            QuadraticSvm => "Quadratic SVM",
            CubicSvm => "Cubic SVM",
            FineGaussianSvm => "Fine Gaussian SVM",
            MediumGaussianSvm => "Medium Gaussian SVM",
            CoarseGaussianSvm => "Coarse Gaussian SVM",
            BoostedTrees => "Boosted Trees",
            BaggedTrees => "Bagged Trees",
            SquaredExponentialGpr => "Squared Exponential GPR",
            Matern52Gpr => "Matern 5/2 GPR",
            ExponentialGpr => "Exponential GPR",
            RationalQuadraticGpr => "Rational Quadratic GPR",
        }
    }

    pub fn from_name(name: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.name() == name)
    }

    /// Position in the results table.
    pub fn table_index(self) -> usize {
        self as usize
    }

    fn allowed_hyperparameters(self) -> &'static [&'static str] {
        match self.family() {
            Family::Linear => &[],
            Family::Tree => &["min_leaf"],
            Family::Svm => &["epsilon", "box_c", "kernel_scale", "tolerance", "max_iter"],
            Family::Ensemble => &["n_trees", "learn_rate", "min_leaf"],
            Family::Gpr => &["sigma_n", "max_evals"],
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub family: Family,
    pub variant: Variant,
    /// Overrides of the variant defaults.
    #[serde(default)]
    pub hyperparameters: BTreeMap<String, f64>,
}

impl RegressorSpec {
    pub fn new(variant: Variant) -> Self {
        Self {
            family: variant.family(),
            variant,
            hyperparameters: BTreeMap::new(),
        }
    }

    /// Builds a spec from family and variant names; only the 19 table
    /// combinations are accepted.
    pub fn from_names(family: Family, variant: &str) -> Result<Self> {
        let v = Variant::from_name(variant)
            .ok_or_else(|| Error::Config(format!("unknown variant {variant:?}")))?;
        if v.family() != family {
            return Err(Error::Config(format!(
                "{variant} is not a {} model",
                family.label()
            )));
        }
        Ok(Self::new(v))
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.hyperparameters.insert(key.to_string(), value);
        self
    }

    pub fn all() -> Vec<RegressorSpec> {
        Variant::ALL.into_iter().map(RegressorSpec::new).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.family != self.variant.family() {
            return Err(Error::Config(format!(
                "{} is not a {} model",
                self.variant,
                self.family.label()
            )));
        }
        let allowed = self.variant.allowed_hyperparameters();
        for (k, v) in &self.hyperparameters {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::Config(format!(
                    "{} has no hyperparameter {k:?}",
                    self.variant
                )));
            }
            if !v.is_finite() {
                return Err(Error::Config(format!("hyperparameter {k} must be finite")));
            }
        }
        Ok(())
    }

    pub(crate) fn get(&self, key: &str) -> Option<f64> {
        self.hyperparameters.get(key).copied()
    }
}

/// Per-feature centering and scaling learned from training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Scales at or below this are replaced by 1 (constant features).
pub const SCALE_FLOOR: f64 = 1e-12;

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let n = x.len() as f64;
        let p = x[0].len();
        let mut mean = vec![0.0; p];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let scale = (0..p)
            .map(|j| {
                let ss: f64 = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum();
                let sd = (ss / (n - 1.0).max(1.0)).sqrt();
                if sd > SCALE_FLOOR * (1.0 + mean[j].abs()) {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn transform_all(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.transform(r)).collect()
    }
}

/// Family-specific learned state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Learned {
    Linear(LinearModel),
    Tree(Tree),
    Svr(SvrModel),
    Ensemble(Ensemble),
    Gpr(GprModel),
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub format_version: u32,
    pub spec: RegressorSpec,
    pub standardizer: Standardizer,
    pub learned: Learned,
    /// False when an iterative solver stopped at its iteration cap.
    pub converged: bool,
}

impl FittedModel {
    pub fn n_features(&self) -> usize {
        self.standardizer.mean.len()
    }

    /// Versioned JSON dump; reloading reproduces predictions bitwise.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: FittedModel =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("model dump: {e}")))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "model format version {} (expected {MODEL_FORMAT_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }
}

/// Fits one spec on a dataset. `seed` drives the randomized ensembles.
pub fn fit(ds: &Dataset, spec: &RegressorSpec, seed: u64) -> Result<FittedModel> {
    spec.validate()?;
    let standardizer = Standardizer::fit(&ds.x);
    let z = standardizer.transform_all(&ds.x);
    let y = &ds.y;
    let (learned, converged) = match spec.family {
        Family::Linear => (
            Learned::Linear(linear::fit_linear(&z, y, spec.variant)?),
            true,
        ),
        Family::Tree => (Learned::Tree(tree::fit_tree_variant(&z, y, spec)?), true),
        Family::Svm => {
            let m = svr::fit_svr(&z, y, spec)?;
            let ok = m.converged;
            (Learned::Svr(m), ok)
        }
        Family::Ensemble => (
            Learned::Ensemble(ensemble::fit_ensemble(&z, y, spec, seed)?),
            true,
        ),
        Family::Gpr => (Learned::Gpr(gpr::fit_gpr(&z, y, spec)?), true),
    };
    Ok(FittedModel {
        format_version: MODEL_FORMAT_VERSION,
        spec: spec.clone(),
        standardizer,
        learned,
        converged,
    })
}

/// Normalized location estimate for one feature row; not clamped.
pub fn predict(model: &FittedModel, x_row: &[f64]) -> Result<f64> {
    if x_row.len() != model.n_features() {
        return Err(Error::Domain(format!(
            "query has {} features, model expects {}",
            x_row.len(),
            model.n_features()
        )));
    }
    if x_row.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite query feature".into()));
    }
    let z = model.standardizer.transform(x_row);
    Ok(match &model.learned {
        Learned::Linear(m) => m.predict(&z),
        Learned::Tree(t) => t.predict(&z),
        Learned::Svr(m) => m.predict(&z),
        Learned::Ensemble(e) => e.predict(&z),
        Learned::Gpr(g) => g.predict(&z),
    })
}

pub fn predict_all(model: &FittedModel, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    x.iter().map(|r| predict(model, r)).collect()
}
