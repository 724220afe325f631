//! Targeted maximum likelihood with a one-step fluctuation of a cross-fitted
//! initial estimate μ̂(a, w).

use super::plugin::{empirical_score, if_variance, plugin_from_predictions, ArmPredictions};
use super::{CrossFitConfig, EstimateError, EstimateResult, DEFAULT_ALPHA};
use crate::data::TrialDataset;
use crate::learners::CrossFitPredictions;
use crate::numerics::{least_squares_dropping, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TmleSubmodel {
    /// μ̂*(a, w) = μ̂(a, w) + ε·a±, with ε solving the score equation.
    AdditiveEps,
    /// μ̂*(a, w) = β₀ + β₁a± + β₂μ̂(a, w) + wᵀβ₃ fitted by least squares.
    LinearFluctuation,
}

impl TmleSubmodel {
    /// Additive fluctuation for 1:1 designs, the linear one otherwise.
    pub fn for_design(pi1: f64) -> Self {
        if pi1 == 0.5 {
            TmleSubmodel::AdditiveEps
        } else {
            TmleSubmodel::LinearFluctuation
        }
    }

    pub fn estimator_name(self) -> &'static str {
        match self {
            TmleSubmodel::AdditiveEps => "tmle",
            TmleSubmodel::LinearFluctuation => "tmle-linear",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TmleConfig {
    pub cross_fit: CrossFitConfig,
    pub submodel: TmleSubmodel,
    /// Include the covariates in the linear fluctuation.
    pub fluctuate_covariates: bool,
}

/// ε* = (1/n) Σ A±ᵢ (Yᵢ − μ̂(Aᵢ, Wᵢ)).
pub fn tmle_epsilon(preds: &ArmPredictions, data: &TrialDataset) -> f64 {
    empirical_score(preds, data)
}

/// Updated predictions and the diagnostics of the update.
type Update = (ArmPredictions, Vec<(&'static str, f64)>);

fn additive(preds: &ArmPredictions, data: &TrialDataset) -> Result<Update, EstimateError> {
    if data.pi1() != 0.5 {
        return Err(EstimateError::Schema(format!(
            "additive fluctuation needs a 1:1 design, got pi1 = {}",
            data.pi1()
        )));
    }
    let eps = tmle_epsilon(preds, data);
    Ok((shift(preds, eps)?, vec![("epsilon", eps)]))
}

/// μ̂(a, w) + ε·a±
fn shift(preds: &ArmPredictions, eps: f64) -> Result<ArmPredictions, EstimateError> {
    ArmPredictions::new(
        preds.treated.iter().map(|m| m + eps).collect(),
        preds.control.iter().map(|m| m - eps).collect(),
    )
}

/// β₀ + β₁a± + β₂μ̂(a, w) + w[..q]ᵀβ₃
fn fluctuate(b: &[f64], preds: &ArmPredictions, data: &TrialDataset, q: usize) -> Result<ArmPredictions, EstimateError> {
    let n = data.n();
    let cov_part: Vec<f64> = (0..n)
        .map(|i| data.w().row(i)[..q].iter().zip(&b[3..]).map(|(w, c)| w * c).sum())
        .collect();
    ArmPredictions::new(
        (0..n).map(|i| b[0] + b[1] + b[2] * preds.treated[i] + cov_part[i]).collect(),
        (0..n).map(|i| b[0] - b[1] + b[2] * preds.control[i] + cov_part[i]).collect(),
    )
}

fn linear(
    preds: &ArmPredictions,
    data: &TrialDataset,
    covariates: bool,
) -> Result<Update, EstimateError> {
    let n = data.n();
    let q = if covariates { data.p() } else { 0 };
    let mut rows = Vec::with_capacity(n * (3 + q));
    for i in 0..n {
        let arm = data.arm(i);
        rows.push(1.0);
        rows.push(arm.signed());
        rows.push(preds.at(arm, i));
        rows.extend_from_slice(&data.w().row(i)[..q]);
    }
    let x = Matrix::new(n, 3 + q, rows)?;
    let fit = least_squares_dropping(&x, data.y())?;
    let b = &fit.coefficients;
    let updated = fluctuate(b, preds, data, q)?;
    Ok((
        updated,
        vec![
            ("fluctuation_intercept", b[0]),
            ("fluctuation_treatment", b[1]),
            ("fluctuation_initial", b[2]),
            ("fluctuation_dropped", fit.dropped.len() as f64),
        ],
    ))
}

/// Updates the initial predictions along `submodel` and plugs in.
pub fn tmle_from_predictions(
    data: &TrialDataset,
    initial: &CrossFitPredictions,
    submodel: TmleSubmodel,
    fluctuate_covariates: bool,
) -> Result<EstimateResult, EstimateError> {
    let preds = ArmPredictions::new(initial.treated.clone(), initial.control.clone())?;
    let (updated, extra) = match submodel {
        TmleSubmodel::AdditiveEps => additive(&preds, data)?,
        TmleSubmodel::LinearFluctuation => linear(&preds, data, fluctuate_covariates)?,
    };
    let plug = plugin_from_predictions(&updated);
    let var = if_variance(&updated, data, plug.psi1, plug.psi0);
    let mut out = EstimateResult::new(submodel.estimator_name(), plug, var.se, DEFAULT_ALPHA)
        .with_diagnostic("score", empirical_score(&updated, data))
        .with_diagnostic("fold_learners", initial.fold_learners.join(";"));
    for (k, v) in extra {
        out = out.with_diagnostic(k, v);
    }
    out.predictions = Some(updated);
    Ok(out)
}

pub fn tmle_estimate(data: &TrialDataset, config: &TmleConfig) -> Result<EstimateResult, EstimateError> {
    let initial = config.cross_fit.predict(data)?;
    tmle_from_predictions(data, &initial, config.submodel, config.fluctuate_covariates)
}
