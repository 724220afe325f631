//! Estimators built on a linear working model fitted by least squares.

use super::plugin::{if_variance, plugin_from_predictions, ArmPredictions};
use super::{CrossFitConfig, EstimateError, EstimateResult, DEFAULT_ALPHA};
use crate::data::{
    build_design, counterfactual_designs, AugmentedTrialDataset, DesignSpec, HistoricalDataset,
    ScoreColumn, TrialDataset,
};
use crate::learners::{CrossFitPredictions, FeatureLayout, LearnerLibrary, RegressionFn};
use crate::numerics::{least_squares_dropping, Matrix};

fn linear_fit(name: &str, data: &TrialDataset, spec: &DesignSpec) -> Result<EstimateResult, EstimateError> {
    let x = build_design(data, spec)?;
    let fit = least_squares_dropping(&x, data.y())?;
    let t = spec.treatment_column();
    if fit.dropped.contains(&t) {
        return Err(EstimateError::Schema("treatment column is collinear with the intercept".into()));
    }
    let (x1, x0) = counterfactual_designs(data, spec)?;
    let preds = ArmPredictions::new(x1.mul_vec(&fit.coefficients), x0.mul_vec(&fit.coefficients))?;
    let plug = plugin_from_predictions(&preds);
    let var = if_variance(&preds, data, plug.psi1, plug.psi0);
    let mut out = EstimateResult::new(name, plug, var.se, DEFAULT_ALPHA)
        .with_diagnostic("coef_treatment", fit.coefficients[t])
        .with_diagnostic("rank", fit.rank() as f64);
    if !fit.dropped.is_empty() {
        let cols: Vec<String> = fit.dropped.iter().map(|c| c.to_string()).collect();
        out = out.with_diagnostic("dropped_columns", cols.join(","));
    }
    out.predictions = Some(preds);
    Ok(out)
}

/// Difference in arm means.
pub fn unadjusted_estimate(data: &TrialDataset) -> Result<EstimateResult, EstimateError> {
    let (m1, m0) = data.arm_means();
    let preds = ArmPredictions::constant(data.n(), m1, m0);
    let plug = plugin_from_predictions(&preds);
    let var = if_variance(&preds, data, plug.psi1, plug.psi0);
    let (n1, n0) = data.arm_sizes();
    let mut out = EstimateResult::new("unadjusted", plug, var.se, DEFAULT_ALPHA)
        .with_diagnostic("n_treated", n1 as f64)
        .with_diagnostic("n_control", n0 as f64);
    out.predictions = Some(preds);
    Ok(out)
}

/// Plug-in from the least-squares fit of `spec`. Collinear columns are
/// dropped (later column first) and listed under `dropped_columns`.
pub fn ancova_estimate(data: &TrialDataset, spec: &DesignSpec) -> Result<EstimateResult, EstimateError> {
    linear_fit("ancova", data, spec)
}

#[derive(Debug, Clone)]
pub struct PrognosticConfig {
    pub library: LearnerLibrary,
    pub seed: u64,
    /// Keep the trial covariates as main effects next to the score.
    pub adjust_covariates: bool,
}

/// Fits the library on historical `W → Y`; the result ignores the arm.
pub fn fit_prognostic_model(
    historical: &HistoricalDataset,
    library: &LearnerLibrary,
    seed: u64,
) -> Result<RegressionFn, EstimateError> {
    let (model, label) = library.fit(historical.w(), historical.y(), seed, None)?;
    Ok(RegressionFn::new(model, FeatureLayout::CovariatesOnly, label))
}

/// Linear adjustment with a precomputed prognostic score column.
pub fn prognostic_adjust_with_scores(
    data: &TrialDataset,
    scores: Vec<f64>,
    adjust_covariates: bool,
) -> Result<EstimateResult, EstimateError> {
    let base = if adjust_covariates {
        DesignSpec::main_effects(data.p())
    } else {
        DesignSpec::unadjusted()
    };
    linear_fit("prog-historical", data, &base.with_score(ScoreColumn::Fixed(scores)))
}

/// Learns a prognostic score on historical controls, then adjusts for it.
pub fn prognostic_adjust_estimate(
    trial: &TrialDataset,
    historical: &HistoricalDataset,
    config: &PrognosticConfig,
) -> Result<EstimateResult, EstimateError> {
    if trial.p() != historical.p() {
        return Err(crate::data::DataError::DimensionMismatch {
            trial: trial.p(),
            historical: historical.p(),
        }
        .into());
    }
    let mu = fit_prognostic_model(historical, &config.library, config.seed)?;
    let scores: Vec<f64> = (0..trial.n())
        .map(|i| mu.predict(crate::data::Arm::Control, trial.w().row(i)))
        .collect();
    if let Some(row) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EstimateError::NonFinite { row });
    }
    Ok(prognostic_adjust_with_scores(trial, scores, config.adjust_covariates)?
        .with_diagnostic("prognostic_learner", mu.provenance()))
}

#[derive(Debug, Clone)]
pub struct WithinTrialConfig {
    pub cross_fit: CrossFitConfig,
    /// Keep the trial covariates as main effects next to the score.
    pub adjust_covariates: bool,
}

/// Linear adjustment for cross-fitted trial predictions ρ̂(a, w). The score
/// column takes ρ̂(Aᵢ, Wᵢ) in the observed design and ρ̂(a, Wᵢ) when the arm
/// is forced to `a`.
pub fn within_trial_from_predictions(
    data: &TrialDataset,
    preds: &CrossFitPredictions,
    adjust_covariates: bool,
) -> Result<EstimateResult, EstimateError> {
    let base = if adjust_covariates {
        DesignSpec::main_effects(data.p())
    } else {
        DesignSpec::unadjusted()
    };
    let spec = base.with_score(ScoreColumn::ByArm {
        treated: preds.treated.clone(),
        control: preds.control.clone(),
    });
    let mut out = linear_fit("within-trial", data, &spec)?;
    out.diagnostics
        .insert("fold_learners".into(), preds.fold_learners.join(";").into());
    Ok(out)
}

pub fn within_trial_estimate(
    data: &TrialDataset,
    config: &WithinTrialConfig,
) -> Result<EstimateResult, EstimateError> {
    let preds = config.cross_fit.predict(data)?;
    within_trial_from_predictions(data, &preds, config.adjust_covariates)
}

/// Adjusts for the true conditional means m₁(W, U), m₀(W, U) as covariates.
pub fn oracle_adjust_estimate(data: &AugmentedTrialDataset) -> Result<EstimateResult, EstimateError> {
    let n = data.trial.n();
    let w = Matrix::from_columns(n, &[data.m1.clone(), data.m0.clone()])?;
    let trial = data.trial.with_covariates(w)?;
    linear_fit("oracle", &trial, &DesignSpec::main_effects(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::read_trial;
    use crate::estimators::{if_variance, Diagnostic};
    use crate::learners::MeanLearner;
    use crate::numerics::{Dist, Rng};
    use std::sync::Arc;

    fn fixture() -> TrialDataset {
        read_trial("y,a,w1\n3,1,0\n1,1,1\n2,0,2\n0,0,3\n".as_bytes()).unwrap()
    }

    fn synthetic(n: usize, seed: u64) -> TrialDataset {
        let mut rng = Rng::new(seed);
        let normal = Dist::Normal { mean: 0.0, sd: 1.0 };
        let mut w1 = Vec::new();
        let mut w2 = Vec::new();
        let mut a = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let x1 = rng.sample(&normal).unwrap();
            let x2 = rng.uniform() * 3.0;
            let t = (i % 2) as u8;
            y.push(1.0 + 0.7 * t as f64 + 2.0 * x1 - x2 * x2 + t as f64 * x1 + rng.sample(&normal).unwrap());
            w1.push(x1);
            w2.push(x2);
            a.push(t);
        }
        TrialDataset::new(Matrix::from_columns(n, &[w1, w2]).unwrap(), a, y, 0.5).unwrap()
    }

    fn number(r: &EstimateResult, key: &str) -> f64 {
        match &r.diagnostics[key] {
            Diagnostic::Number(v) => *v,
            other => panic!("{key}: {other:?}"),
        }
    }

    #[test]
    fn unadjusted_fixture() {
        let r = unadjusted_estimate(&fixture()).unwrap();
        assert_eq!((r.psi_hat, r.se), (1.0, 1.0));
    }

    #[test]
    fn constant_outcome_is_degenerate() {
        let d = fixture().with_outcome(vec![2.0; 4]).unwrap();
        let r = unadjusted_estimate(&d).unwrap();
        assert_eq!((r.psi_hat, r.se), (0.0, 0.0));
        assert!(r.diagnostics.contains_key("degenerate_ci"));
    }

    #[test]
    fn location_invariance() {
        let d = synthetic(40, 1);
        let shifted = d.with_outcome(d.y().iter().map(|y| y + 17.0).collect()).unwrap();
        let (a, b) = (unadjusted_estimate(&d).unwrap(), unadjusted_estimate(&shifted).unwrap());
        assert!((a.psi_hat - b.psi_hat).abs() < 1e-12);
        assert!((a.se - b.se).abs() < 1e-12);
    }

    #[test]
    fn ancova_without_covariates_is_unadjusted() {
        let d = synthetic(50, 2);
        let a = ancova_estimate(&d, &DesignSpec::unadjusted()).unwrap();
        let u = unadjusted_estimate(&d).unwrap();
        assert!((a.psi_hat - u.psi_hat).abs() < 1e-12);
        assert!((a.se - u.se).abs() < 1e-12);
    }

    #[test]
    fn plug_in_equals_treatment_coefficient() {
        let d = synthetic(60, 3);
        let r = ancova_estimate(&d, &DesignSpec::main_effects(2)).unwrap();
        assert!((r.psi_hat - number(&r, "coef_treatment")).abs() < 1e-10);
    }

    #[test]
    fn centered_interactions_keep_coefficient_identity() {
        let d = synthetic(60, 4);
        let spec = DesignSpec {
            interactions: true,
            center_covariates: true,
            ..DesignSpec::main_effects(2)
        };
        let r = ancova_estimate(&d, &spec).unwrap();
        // explicit plug-in: β_A + Σ_j β_{A×j} · mean(centered w_j) = β_A
        let x = build_design(&d, &spec).unwrap();
        let beta = least_squares_dropping(&x, d.y()).unwrap().coefficients;
        let (x1, x0) = counterfactual_designs(&d, &spec).unwrap();
        let n = d.n() as f64;
        let explicit = x1.mul_vec(&beta).iter().sum::<f64>() / n - x0.mul_vec(&beta).iter().sum::<f64>() / n;
        assert!((r.psi_hat - explicit).abs() < 1e-12);
        assert!((r.psi_hat - beta[1]).abs() < 1e-10);
        let uncentered = DesignSpec {
            center_covariates: false,
            ..spec
        };
        let u = ancova_estimate(&d, &uncentered).unwrap();
        assert!((u.psi_hat - r.psi_hat).abs() < 1e-10);
        assert!((u.psi_hat - number(&u, "coef_treatment")).abs() > 1e-3);
    }

    #[test]
    fn ols_influence_values_average_to_zero() {
        let d = synthetic(40, 5);
        let r = ancova_estimate(&d, &DesignSpec::main_effects(2)).unwrap();
        let v = if_variance(r.predictions.as_ref().unwrap(), &d, r.psi1_hat, r.psi0_hat);
        let mean = v.curve.0.iter().sum::<f64>() / d.n() as f64;
        assert!(mean.abs() < 1e-10);
    }

    #[test]
    fn constant_prognostic_score_is_dropped() {
        let d = synthetic(40, 6);
        let r = prognostic_adjust_with_scores(&d, vec![3.0; 40], true).unwrap();
        let a = ancova_estimate(&d, &DesignSpec::main_effects(2)).unwrap();
        assert!((r.psi_hat - a.psi_hat).abs() < 1e-10);
        assert!((r.se - a.se).abs() < 1e-10);
        assert_eq!(r.diagnostics["dropped_columns"], Diagnostic::Text("4".into()));
    }

    #[test]
    fn constant_historical_outcome_reduces_to_ancova() {
        let d = synthetic(40, 7);
        let hw = Matrix::from_columns(30, &[vec![0.5; 30], (0..30).map(|i| i as f64).collect()]).unwrap();
        let hist = HistoricalDataset::new(hw, vec![4.0; 30]).unwrap();
        let cfg = PrognosticConfig {
            library: LearnerLibrary::new(vec![Arc::new(MeanLearner)], 5),
            seed: 1,
            adjust_covariates: true,
        };
        let r = prognostic_adjust_estimate(&d, &hist, &cfg).unwrap();
        let a = ancova_estimate(&d, &DesignSpec::main_effects(2)).unwrap();
        assert!((r.psi_hat - a.psi_hat).abs() < 1e-10);
        assert!((r.psi_hat - number(&r, "coef_treatment")).abs() < 1e-10);
    }

    #[test]
    fn historical_dimension_mismatch() {
        let d = synthetic(20, 8);
        let hist = HistoricalDataset::new(Matrix::from_columns(10, &[vec![1.0; 10]]).unwrap(), vec![0.0; 10]).unwrap();
        let cfg = PrognosticConfig {
            library: LearnerLibrary::new(vec![Arc::new(MeanLearner)], 5),
            seed: 1,
            adjust_covariates: false,
        };
        assert!(matches!(
            prognostic_adjust_estimate(&d, &hist, &cfg),
            Err(EstimateError::Data(crate::data::DataError::DimensionMismatch { .. }))
        ));
    }

    #[test]
    fn constant_within_trial_score_is_ancova() {
        let d = synthetic(40, 9);
        let preds = CrossFitPredictions {
            treated: vec![1.5; 40],
            control: vec![1.5; 40],
            fold_learners: vec!["mean".into()],
        };
        let r = within_trial_from_predictions(&d, &preds, true).unwrap();
        let a = ancova_estimate(&d, &DesignSpec::main_effects(2)).unwrap();
        assert!((r.psi_hat - a.psi_hat).abs() < 1e-10);
        assert!((r.se - a.se).abs() < 1e-10);
        let r0 = within_trial_from_predictions(&d, &preds, false).unwrap();
        let u = unadjusted_estimate(&d).unwrap();
        assert!((r0.psi_hat - u.psi_hat).abs() < 1e-10);
    }

    #[test]
    fn oracle_drops_collinear_column() {
        let trial = fixture();
        let m0 = vec![0.1, -0.4, 0.9, 0.2];
        let m1: Vec<f64> = m0.iter().map(|m| m + 0.84).collect();
        let y0 = vec![0.0, 0.0, 2.0, 0.0];
        let y1 = vec![3.0, 1.0, 0.0, 0.0];
        let aug = AugmentedTrialDataset::new(trial, vec![0.0; 4], y0, y1, m0, m1).unwrap();
        let r = oracle_adjust_estimate(&aug).unwrap();
        assert_eq!(r.estimator, "oracle");
        assert_eq!(r.diagnostics["dropped_columns"], Diagnostic::Text("3".into()));
        assert!(r.psi_hat.is_finite());
    }
}
