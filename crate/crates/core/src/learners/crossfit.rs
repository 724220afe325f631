//! Cross-fitted trial predictions: each row is predicted by a model that never
//! saw that row's fold.

use super::folds::{fold_assignment, split};
use super::{LearnerError, LearnerLibrary};
use crate::data::TrialDataset;
use crate::numerics::{Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossFitScheme {
    VFold,
    LeaveOneOut,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossFitPlan {
    pub scheme: CrossFitScheme,
    pub v: usize,
    /// Fold label per row.
    pub folds: Vec<usize>,
    /// Seeds the learners fitted inside each fold.
    pub seed: u64,
}

impl CrossFitPlan {
    /// Arm-stratified seeded `v`-fold plan.
    pub fn v_fold(data: &TrialDataset, v: usize, seed: u64) -> Result<Self, LearnerError> {
        let (n1, n0) = data.arm_sizes();
        if n1.min(n0) < v {
            return Err(LearnerError::Stratification(format!(
                "arms of size {n1} and {n0} cannot place both arms in each of {v} folds"
            )));
        }
        let folds = fold_assignment(data.n(), v, Some(data.a()), &mut Rng::new(seed))?;
        let plan = Self {
            scheme: CrossFitScheme::VFold,
            v,
            folds,
            seed,
        };
        plan.validate(data)?;
        Ok(plan)
    }

    pub fn leave_one_out(data: &TrialDataset, seed: u64) -> Result<Self, LearnerError> {
        let plan = Self {
            scheme: CrossFitScheme::LeaveOneOut,
            v: data.n(),
            folds: (0..data.n()).collect(),
            seed,
        };
        plan.validate(data)?;
        Ok(plan)
    }

    pub fn validate(&self, data: &TrialDataset) -> Result<(), LearnerError> {
        if self.folds.len() != data.n() {
            return Err(LearnerError::Folds(format!(
                "plan covers {} rows, data has {}",
                self.folds.len(),
                data.n()
            )));
        }
        if self.v < 2 {
            return Err(LearnerError::Folds("need at least 2 folds".into()));
        }
        let mut sizes = vec![0usize; self.v];
        for &f in &self.folds {
            if f >= self.v {
                return Err(LearnerError::Folds(format!("fold label {f} out of range")));
            }
            sizes[f] += 1;
        }
        if let Some(k) = sizes.iter().position(|&s| s == 0) {
            return Err(LearnerError::Folds(format!("fold {k} is empty")));
        }
        let (n1, n0) = data.arm_sizes();
        for k in 0..self.v {
            let (mut h1, mut h0) = (0, 0);
            for (i, &f) in self.folds.iter().enumerate() {
                if f == k {
                    if data.a()[i] == 1 {
                        h1 += 1;
                    } else {
                        h0 += 1;
                    }
                }
            }
            if h1 == n1 || h0 == n0 {
                return Err(LearnerError::Stratification(format!(
                    "training set for fold {k} lacks an arm"
                )));
            }
        }
        Ok(())
    }
}

/// Out-of-fold predictions at both arms for every row.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossFitPredictions {
    /// μ̂(1, Wᵢ)
    pub treated: Vec<f64>,
    /// μ̂(0, Wᵢ)
    pub control: Vec<f64>,
    /// Learner chosen in each fold.
    pub fold_learners: Vec<String>,
}

impl CrossFitPredictions {
    /// μ̂(Aᵢ, Wᵢ)
    pub fn observed(&self, data: &TrialDataset) -> Vec<f64> {
        data.a()
            .iter()
            .enumerate()
            .map(|(i, &a)| if a == 1 { self.treated[i] } else { self.control[i] })
            .collect()
    }
}

/// Fits `library` on `[a, w]` once per fold (excluding the fold) and predicts
/// the fold's rows at a = 1 and a = 0.
pub fn cross_fit_predict(
    library: &LearnerLibrary,
    data: &TrialDataset,
    plan: &CrossFitPlan,
) -> Result<CrossFitPredictions, LearnerError> {
    plan.validate(data)?;
    let features = data.arm_features();
    let n = data.n();
    let mut treated = vec![f64::NAN; n];
    let mut control = vec![f64::NAN; n];
    let mut fold_learners = Vec::with_capacity(plan.v);
    let mut probe = vec![0.0; features.cols()];
    for k in 0..plan.v {
        let (train, held) = split(&plan.folds, k);
        let x: Matrix = features.select_rows(&train);
        let y: Vec<f64> = train.iter().map(|&i| data.y()[i]).collect();
        let strata: Vec<u8> = train.iter().map(|&i| data.a()[i]).collect();
        let seed = plan.seed ^ (k as u64 + 1).wrapping_mul(0xd1b5_4a32_d192_ed03);
        let (model, label) = library.fit(&x, &y, seed, Some(&strata))?;
        for &i in &held {
            probe.copy_from_slice(features.row(i));
            probe[0] = 1.0;
            treated[i] = model.predict_row(&probe);
            probe[0] = 0.0;
            control[i] = model.predict_row(&probe);
            if !treated[i].is_finite() || !control[i].is_finite() {
                return Err(LearnerError::NonFinitePrediction { row: i });
            }
        }
        fold_learners.push(label);
    }
    Ok(CrossFitPredictions {
        treated,
        control,
        fold_learners,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::super::MeanLearner;
    use super::*;

    fn data(y: Vec<f64>, a: Vec<u8>) -> TrialDataset {
        let n = y.len();
        let w = Matrix::from_columns(n, &[(0..n).map(|i| i as f64).collect()]).unwrap();
        TrialDataset::new(w, a, y, 0.5).unwrap()
    }

    fn mean_library() -> LearnerLibrary {
        LearnerLibrary::new(vec![Arc::new(MeanLearner)], 5)
    }

    #[test]
    fn leave_one_out_mean() {
        let d = data(vec![1.0, 2.0, 3.0, 6.0], vec![1, 0, 1, 0]);
        let plan = CrossFitPlan::leave_one_out(&d, 0).unwrap();
        let p = cross_fit_predict(&mean_library(), &d, &plan).unwrap();
        assert!((p.treated[0] - 11.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.treated, p.control);
    }

    #[test]
    fn two_folds_use_opposite_mean() {
        let d = data(vec![1.0, 2.0, 3.0, 4.0, 5.0, 9.0], vec![1, 0, 1, 0, 1, 0]);
        let plan = CrossFitPlan {
            scheme: CrossFitScheme::VFold,
            v: 2,
            folds: vec![0, 0, 0, 1, 1, 1],
            seed: 0,
        };
        let p = cross_fit_predict(&mean_library(), &d, &plan).unwrap();
        assert_eq!(p.observed(&d), vec![6.0, 6.0, 6.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn training_set_must_hold_both_arms() {
        let d = data(vec![1.0, 2.0, 3.0, 4.0], vec![1, 0, 0, 0]);
        let plan = CrossFitPlan {
            scheme: CrossFitScheme::VFold,
            v: 2,
            folds: vec![0, 1, 1, 1],
            seed: 0,
        };
        assert!(matches!(plan.validate(&d), Err(LearnerError::Stratification(_))));
        assert!(matches!(
            CrossFitPlan::v_fold(&d, 2, 0),
            Err(LearnerError::Stratification(_))
        ));
    }

    #[test]
    fn v_fold_plan_is_stratified_and_seeded() {
        let a: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        let d = data((0..40).map(|i| i as f64).collect(), a);
        let p1 = CrossFitPlan::v_fold(&d, 10, 5).unwrap();
        let p2 = CrossFitPlan::v_fold(&d, 10, 5).unwrap();
        assert_eq!(p1, p2);
        for k in 0..10 {
            let arms: Vec<u8> = (0..40).filter(|&i| p1.folds[i] == k).map(|i| d.a()[i]).collect();
            assert!(arms.contains(&0) && arms.contains(&1));
        }
    }
}
