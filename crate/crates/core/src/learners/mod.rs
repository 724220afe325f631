//! Outcome-regression learners, discrete super learner, and cross-fitting.
//!
//! A [`Learner`] maps a feature matrix and response to a [`FittedModel`].
//! Trial models use features `[a, w1..wp]`; historical prognostic models use
//! `[w1..wp]`. [`RegressionFn`] hides that layout and evaluates μ̂(a, w).

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::Arm;
use crate::numerics::{Matrix, NumericsError};

mod crossfit;
mod folds;
mod gbt;
mod knn;
mod linear;
mod super_learner;

pub use crossfit::{cross_fit_predict, CrossFitPlan, CrossFitPredictions, CrossFitScheme};
pub use folds::fold_assignment;
pub use gbt::GbtStumps;
pub use knn::Knn;
pub use linear::{MeanLearner, Ols, Ridge};
pub use super_learner::{discrete_super_learner, CvRisk, SuperLearnerFit};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearnerError {
    #[error("cannot fit on zero rows")]
    Empty,
    #[error("{learner} needs at least {need} rows, got {got}")]
    TooFewRows {
        learner: String,
        need: usize,
        got: usize,
    },
    #[error("unknown learner `{0}`")]
    Unknown(String),
    #[error("learner `{learner}`: invalid hyperparameter `{name}` = {value}")]
    Hyperparameter {
        learner: String,
        name: String,
        value: f64,
    },
    #[error("invalid cross-validation setup: {0}")]
    Folds(String),
    #[error("stratification error: {0}")]
    Stratification(String),
    #[error("every candidate failed to fit")]
    AllCandidatesFailed,
    #[error("non-finite prediction for row {row}")]
    NonFinitePrediction { row: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// A fitted regression on raw feature rows.
pub trait FittedModel: Send + Sync {
    fn predict_row(&self, row: &[f64]) -> f64;

    fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|i| self.predict_row(x.row(i))).collect()
    }
}

/// A regression algorithm.
pub trait Learner: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn min_rows(&self) -> usize {
        1
    }

    fn fit(&self, x: &Matrix, y: &[f64]) -> Result<Box<dyn FittedModel>, LearnerError>;

    /// Held-out predictions for each setting along a tuning path, fitted once
    /// on `(x, y)`. Learners without a path return a single entry.
    fn validation_path(
        &self,
        x: &Matrix,
        y: &[f64],
        x_val: &Matrix,
    ) -> Result<Vec<Vec<f64>>, LearnerError> {
        Ok(vec![self.fit(x, y)?.predict(x_val)])
    }

    /// This learner pinned to path position `idx`; `None` when it has no path.
    fn at_path(&self, _idx: usize) -> Option<Arc<dyn Learner>> {
        None
    }
}

pub(crate) fn check_rows(learner: &dyn Learner, x: &Matrix, y: &[f64]) -> Result<(), LearnerError> {
    if y.is_empty() {
        return Err(LearnerError::Empty);
    }
    if x.rows() != y.len() {
        return Err(NumericsError::Shape {
            expected: y.len(),
            found: x.rows(),
        }
        .into());
    }
    if y.len() < learner.min_rows() {
        return Err(LearnerError::TooFewRows {
            learner: learner.name(),
            need: learner.min_rows(),
            got: y.len(),
        });
    }
    Ok(())
}

/// A learner by name with numeric hyperparameters, e.g.
/// `{"name": "gbt-stumps", "hyperparameters": {"rounds": 200}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub name: String,
    #[serde(default)]
    pub hyperparameters: BTreeMap<String, f64>,
}

impl LearnerSpec {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            hyperparameters: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.hyperparameters.insert(key.to_string(), value);
        self
    }

    /// Registered names: `mean`, `ols`, `ridge`, `knn`, `gbt-stumps`.
    pub fn build(&self) -> Result<Arc<dyn Learner>, LearnerError> {
        let hp = Hyper {
            learner: &self.name,
            map: &self.hyperparameters,
        };
        let learner: Arc<dyn Learner> = match self.name.as_str() {
            "mean" => {
                hp.only(&[])?;
                Arc::new(MeanLearner)
            }
            "ols" => {
                hp.only(&[])?;
                Arc::new(Ols)
            }
            "ridge" => {
                hp.only(&["folds", "seed"])?;
                Arc::new(Ridge {
                    inner_folds: hp.count("folds", 5, 2)?,
                    seed: hp.count("seed", 0, 0)? as u64,
                    ..Ridge::default()
                })
            }
            "knn" => {
                hp.only(&["k"])?;
                Arc::new(Knn {
                    k: hp.count("k", 5, 1)?,
                })
            }
            "gbt-stumps" => {
                hp.only(&["rounds", "shrinkage", "min_leaf", "folds", "seed", "max_bins"])?;
                let shrinkage = hp.real("shrinkage", 0.1)?;
                if !(shrinkage > 0.0 && shrinkage <= 1.0) {
                    return Err(hp.bad("shrinkage", shrinkage));
                }
                Arc::new(GbtStumps {
                    rounds: hp.count("rounds", 200, 1)?,
                    shrinkage,
                    min_leaf: hp.count("min_leaf", 5, 1)?,
                    inner_folds: hp.count("folds", 5, 0)?,
                    seed: hp.count("seed", 0, 0)? as u64,
                    max_bins: hp.count("max_bins", 256, 2)?.min(256),
                })
            }
            other => return Err(LearnerError::Unknown(other.to_string())),
        };
        Ok(learner)
    }

    /// mean, OLS, ridge, kNN (k = 5, 10), boosted stumps.
    pub fn default_library() -> Vec<LearnerSpec> {
        vec![
            LearnerSpec::new("mean"),
            LearnerSpec::new("ols"),
            LearnerSpec::new("ridge"),
            LearnerSpec::new("knn").with("k", 5.0),
            LearnerSpec::new("knn").with("k", 10.0),
            LearnerSpec::new("gbt-stumps").with("rounds", 200.0),
        ]
    }
}

struct Hyper<'a> {
    learner: &'a str,
    map: &'a BTreeMap<String, f64>,
}

impl Hyper<'_> {
    fn bad(&self, name: &str, value: f64) -> LearnerError {
        LearnerError::Hyperparameter {
            learner: self.learner.to_string(),
            name: name.to_string(),
            value,
        }
    }

    fn only(&self, allowed: &[&str]) -> Result<(), LearnerError> {
        match self.map.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            Some((k, v)) => Err(self.bad(k, *v)),
            None => Ok(()),
        }
    }

    fn count(&self, name: &str, default: usize, min: usize) -> Result<usize, LearnerError> {
        match self.map.get(name) {
            None => Ok(default),
            Some(&v) if v.fract() == 0.0 && v >= min as f64 && v < 1e9 => Ok(v as usize),
            Some(&v) => Err(self.bad(name, v)),
        }
    }

    fn real(&self, name: &str, default: f64) -> Result<f64, LearnerError> {
        match self.map.get(name) {
            None => Ok(default),
            Some(&v) if v.is_finite() => Ok(v),
            Some(&v) => Err(self.bad(name, v)),
        }
    }
}

/// Candidate learners for a discrete super learner and its CV fold count.
#[derive(Debug, Clone)]
pub struct LearnerLibrary {
    pub candidates: Vec<Arc<dyn Learner>>,
    pub folds: usize,
}

impl LearnerLibrary {
    pub fn new(candidates: Vec<Arc<dyn Learner>>, folds: usize) -> Self {
        Self { candidates, folds }
    }

    pub fn from_specs(specs: &[LearnerSpec], folds: usize) -> Result<Self, LearnerError> {
        let candidates = specs
            .iter()
            .map(LearnerSpec::build)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(candidates, folds))
    }

    /// The default library with 10-fold selection.
    pub fn default_library() -> Self {
        Self::from_specs(&LearnerSpec::default_library(), 10).expect("default library is valid")
    }

    /// Fits the library: one candidate is fitted directly, several go through
    /// the discrete super learner. Returns the model and a label.
    pub fn fit(
        &self,
        x: &Matrix,
        y: &[f64],
        seed: u64,
        strata: Option<&[u8]>,
    ) -> Result<(Arc<dyn FittedModel>, String), LearnerError> {
        match self.candidates.as_slice() {
            [] => Err(LearnerError::Folds("empty learner library".into())),
            [only] => Ok((Arc::from(only.fit(x, y)?), only.name())),
            _ => {
                let sl = discrete_super_learner(&self.candidates, x, y, self.folds, seed, strata)?;
                let label = sl.selected_name();
                Ok((Arc::from(sl.model), label))
            }
        }
    }
}

/// How a [`RegressionFn`] turns (a, w) into a feature row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureLayout {
    /// `[a, w1..wp]`
    ArmAndCovariates,
    /// `[w1..wp]`; the arm is ignored.
    CovariatesOnly,
}

struct FnModel<F>(F);

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FittedModel for FnModel<F> {
    fn predict_row(&self, row: &[f64]) -> f64 {
        (self.0)(row)
    }
}

/// Evaluable conditional mean μ̂(a, w).
#[derive(Clone)]
pub struct RegressionFn {
    model: Arc<dyn FittedModel>,
    layout: FeatureLayout,
    provenance: String,
}

impl fmt::Debug for RegressionFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegressionFn")
            .field("layout", &self.layout)
            .field("provenance", &self.provenance)
            .finish()
    }
}

impl RegressionFn {
    pub fn new(model: Arc<dyn FittedModel>, layout: FeatureLayout, provenance: impl Into<String>) -> Self {
        Self {
            model,
            layout,
            provenance: provenance.into(),
        }
    }

    /// Wraps a closure of (arm, covariates).
    pub fn from_fn<F>(provenance: &str, f: F) -> Self
    where
        F: Fn(Arm, &[f64]) -> f64 + Send + Sync + 'static,
    {
        let model = FnModel(move |row: &[f64]| f(Arm::from_indicator(row[0] as u8), &row[1..]));
        Self::new(Arc::new(model), FeatureLayout::ArmAndCovariates, provenance)
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn predict(&self, arm: Arm, w: &[f64]) -> f64 {
        match self.layout {
            FeatureLayout::CovariatesOnly => self.model.predict_row(w),
            FeatureLayout::ArmAndCovariates => {
                let mut row = Vec::with_capacity(w.len() + 1);
                row.push(arm.indicator() as f64);
                row.extend_from_slice(w);
                self.model.predict_row(&row)
            }
        }
    }
}

/// Fits a single learner spec on trial features `[a, w]` or historical `[w]`.
pub fn fit_learner(spec: &LearnerSpec, x: &Matrix, y: &[f64]) -> Result<Box<dyn FittedModel>, LearnerError> {
    spec.build()?.fit(x, y)
}
