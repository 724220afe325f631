use proptest::prelude::*;

use prognostic_tmle::data::{DesignSpec, TrialDataset};
use prognostic_tmle::estimators::{
    ancova_estimate, empirical_score, if_variance, tmle_from_predictions, unadjusted_estimate,
    within_trial_from_predictions, ArmPredictions, EstimateResult, PlugIn, TmleSubmodel,
};
use prognostic_tmle::learners::{discrete_super_learner, CrossFitPredictions, LearnerSpec};
use prognostic_tmle::numerics::Matrix;
use prognostic_tmle::sim::aggregate;

/// Trial with p covariates, both arms present, plus arbitrary initial predictions.
fn trial_and_preds() -> impl Strategy<Value = (TrialDataset, CrossFitPredictions)> {
    (8usize..40, 1usize..4).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(-5.0f64..5.0, n * p),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(-10.0f64..10.0, n),
            prop::collection::vec(-10.0f64..10.0, n),
            prop::collection::vec(-10.0f64..10.0, n),
        )
            .prop_map(move |(w, a, y, t, c)| {
                let mut a: Vec<u8> = a.into_iter().map(u8::from).collect();
                a[0] = 1;
                a[1] = 0;
                let d = TrialDataset::new(Matrix::new(n, p, w).unwrap(), a, y, 0.5).unwrap();
                let cf = CrossFitPredictions {
                    treated: t,
                    control: c,
                    fold_learners: vec![],
                };
                (d, cf)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn within_trial_matches_linear_tmle((d, cf) in trial_and_preds(), cov in any::<bool>()) {
        let w = within_trial_from_predictions(&d, &cf, cov);
        let t = tmle_from_predictions(&d, &cf, TmleSubmodel::LinearFluctuation, cov);
        if let (Ok(w), Ok(t)) = (w, t) {
            let scale = 1.0 + w.psi_hat.abs();
            prop_assert!((w.psi_hat - t.psi_hat).abs() < 1e-10 * scale);
            prop_assert!((w.se - t.se).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn updates_solve_score((d, cf) in trial_and_preds()) {
        for sub in [TmleSubmodel::AdditiveEps, TmleSubmodel::LinearFluctuation] {
            let r = tmle_from_predictions(&d, &cf, sub, false).unwrap();
            prop_assert!(empirical_score(r.predictions.as_ref().unwrap(), &d).abs() < 1e-8);
        }
    }

    #[test]
    fn se_is_nonnegative_and_homogeneous((d, cf) in trial_and_preds(), c in -5.0f64..5.0) {
        let preds = ArmPredictions::new(cf.treated.clone(), cf.control.clone()).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (p1, p0) = (mean(&preds.treated), mean(&preds.control));
        let base = if_variance(&preds, &d, p1, p0);
        prop_assert!(base.se >= 0.0);
        let scaled_d = d.with_outcome(d.y().iter().map(|y| c * y).collect()).unwrap();
        let scaled = ArmPredictions::new(
            preds.treated.iter().map(|m| c * m).collect(),
            preds.control.iter().map(|m| c * m).collect(),
        ).unwrap();
        let s = if_variance(&scaled, &scaled_d, c * p1, c * p0);
        prop_assert!((s.se - c.abs() * base.se).abs() < 1e-9 * (1.0 + base.se));
    }

    #[test]
    fn plug_in_is_treatment_coefficient((d, _) in trial_and_preds()) {
        if let Ok(r) = ancova_estimate(&d, &DesignSpec::main_effects(d.p())) {
            let coef = r.diagnostics["coef_treatment"].as_f64().unwrap();
            prop_assert!((r.psi_hat - coef).abs() < 1e-10 * (1.0 + coef.abs()));
        }
        let a = ancova_estimate(&d, &DesignSpec::unadjusted()).unwrap();
        let u = unadjusted_estimate(&d).unwrap();
        prop_assert!((a.psi_hat - u.psi_hat).abs() < 1e-10);
        prop_assert!((a.se - u.se).abs() < 1e-10);
    }

    #[test]
    fn aggregate_rates_are_probabilities(
        est in prop::collection::vec((-3.0f64..3.0, 0.0f64..2.0, any::<bool>()), 0..30),
        truth in -3.0f64..3.0,
        alpha in 0.001f64..0.5,
    ) {
        let results: Vec<Result<EstimateResult, String>> = est
            .iter()
            .map(|&(psi, se, ok)| {
                if ok {
                    Ok(EstimateResult::new("x", PlugIn { psi1: psi, psi0: 0.0, psi }, se, 0.05))
                } else {
                    Err("failed".into())
                }
            })
            .collect();
        let m = aggregate("x", "s", 1, truth, alpha, &results);
        prop_assert_eq!(m.reps_used + m.failures, results.len());
        for v in [m.power, m.coverage].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        if let Some(s) = m.empirical_se {
            prop_assert!(s >= 0.0);
        }
    }

    #[test]
    fn super_learner_selects_minimum_risk(
        y in prop::collection::vec(-5.0f64..5.0, 30..60),
        seed in any::<u64>(),
    ) {
        let n = y.len();
        let x = Matrix::from_columns(n, &[(0..n).map(|i| (i as f64).sin()).collect()]).unwrap();
        let cands: Vec<_> = [LearnerSpec::new("mean"), LearnerSpec::new("ols"), LearnerSpec::new("knn").with("k", 3.0)]
            .iter()
            .map(|s| s.build().unwrap())
            .collect();
        let fit = discrete_super_learner(&cands, &x, &y, 5, seed, None).unwrap();
        let best = fit.table[fit.selected].mse;
        prop_assert!(fit.table.iter().all(|r| best <= r.mse));
    }
}
