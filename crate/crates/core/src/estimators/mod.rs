//! ATE estimators sharing one plug-in and influence-function chassis.
//!
//! Every estimator produces arm-wise predictions μ̂(1, Wᵢ), μ̂(0, Wᵢ) for all
//! rows, averages them into Ψ̂₁, Ψ̂₀, and takes its standard error from the
//! empirical variance of the influence function
//! φ̂ₐ = 1(A = a)/πₐ · (Y − μ̂(a, W)) + μ̂(a, W) − Ψ̂ₐ.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{DataError, TrialDataset};
use crate::learners::{
    cross_fit_predict, CrossFitPlan, CrossFitPredictions, CrossFitScheme, LearnerError,
    LearnerLibrary,
};
use crate::numerics::{normal_quantile, two_sided_p, NumericsError};

mod linear;
mod plugin;
mod tmle;

pub use linear::{
    ancova_estimate, fit_prognostic_model, oracle_adjust_estimate, prognostic_adjust_estimate,
    prognostic_adjust_with_scores, unadjusted_estimate, within_trial_estimate,
    within_trial_from_predictions, PrognosticConfig, WithinTrialConfig,
};
pub use plugin::{
    empirical_score, if_variance, plugin_ate, plugin_from_predictions, ArmPredictions,
    IfVariance, InfluenceCurve, PlugIn,
};
pub use tmle::{tmle_epsilon, tmle_estimate, tmle_from_predictions, TmleConfig, TmleSubmodel};

/// Two-sided level used unless a caller asks otherwise.
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum EstimateError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("non-finite prediction for row {row}")]
    NonFinite { row: usize },
    #[error("schema error: {0}")]
    Schema(String),
}

/// Library plus the fold scheme used to cross-fit trial predictions.
#[derive(Debug, Clone)]
pub struct CrossFitConfig {
    pub library: LearnerLibrary,
    pub scheme: CrossFitScheme,
    /// Number of folds for [`CrossFitScheme::VFold`].
    pub folds: usize,
    pub seed: u64,
}

impl CrossFitConfig {
    pub fn v_fold(library: LearnerLibrary, folds: usize, seed: u64) -> Self {
        Self {
            library,
            scheme: CrossFitScheme::VFold,
            folds,
            seed,
        }
    }

    pub fn plan(&self, data: &TrialDataset) -> Result<CrossFitPlan, LearnerError> {
        match self.scheme {
            CrossFitScheme::VFold => CrossFitPlan::v_fold(data, self.folds, self.seed),
            CrossFitScheme::LeaveOneOut => CrossFitPlan::leave_one_out(data, self.seed),
        }
    }

    pub fn predict(&self, data: &TrialDataset) -> Result<CrossFitPredictions, EstimateError> {
        let plan = self.plan(data)?;
        Ok(cross_fit_predict(&self.library, data, &plan)?)
    }
}

/// Diagnostic value: a number or a label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Diagnostic {
    Number(f64),
    Text(String),
}

impl Diagnostic {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Diagnostic::Number(v) => Some(*v),
            Diagnostic::Text(_) => None,
        }
    }
}

impl From<f64> for Diagnostic {
    fn from(v: f64) -> Self {
        Diagnostic::Number(v)
    }
}

impl From<String> for Diagnostic {
    fn from(v: String) -> Self {
        Diagnostic::Text(v)
    }
}

impl From<&str> for Diagnostic {
    fn from(v: &str) -> Self {
        Diagnostic::Text(v.to_string())
    }
}

/// Point estimate with IF-based inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub estimator: String,
    pub psi_hat: f64,
    pub psi1_hat: f64,
    pub psi0_hat: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub p_value: f64,
    pub diagnostics: BTreeMap<String, Diagnostic>,
    /// Final arm-wise predictions the estimate was plugged in from.
    #[serde(skip)]
    pub predictions: Option<ArmPredictions>,
}

impl EstimateResult {
    pub fn new(estimator: &str, plug: PlugIn, se: f64, alpha: f64) -> Self {
        let mut out = Self {
            estimator: estimator.to_string(),
            psi_hat: plug.psi,
            psi1_hat: plug.psi1,
            psi0_hat: plug.psi0,
            se,
            ci_lower: f64::NAN,
            ci_upper: f64::NAN,
            p_value: f64::NAN,
            diagnostics: BTreeMap::new(),
            predictions: None,
        };
        out.set_alpha(alpha);
        out
    }

    /// Recomputes the interval at level `alpha` (two-sided, normal quantile).
    pub fn set_alpha(&mut self, alpha: f64) {
        let z = normal_quantile(1.0 - alpha / 2.0).expect("alpha in (0, 1)");
        self.ci_lower = self.psi_hat - z * self.se;
        self.ci_upper = self.psi_hat + z * self.se;
        if self.se > 0.0 {
            self.p_value = two_sided_p(self.psi_hat / self.se);
            self.diagnostics.remove("degenerate_ci");
        } else {
            self.p_value = if self.psi_hat == 0.0 { 1.0 } else { 0.0 };
            self.diagnostics.insert("degenerate_ci".into(), 1.0.into());
        }
    }

    pub fn with_diagnostic(mut self, key: &str, value: impl Into<Diagnostic>) -> Self {
        self.diagnostics.insert(key.to_string(), value.into());
        self
    }

    pub fn covers(&self, truth: f64) -> bool {
        self.ci_lower <= truth && truth <= self.ci_upper
    }

    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}
