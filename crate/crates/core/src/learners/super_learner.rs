//! Discrete super learner: pick the candidate with the lowest v-fold CV MSE.
//!
//! Candidates exposing a tuning path (boosted stumps over round counts) are
//! scored at every path position from one fit per fold; their CV risk is the
//! best position and the refit is pinned there.

use std::sync::Arc;

use super::folds::{fold_assignment, split};
use super::{FittedModel, Learner, LearnerError};
use crate::numerics::{Matrix, Rng};

/// Cross-validated risk of one candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct CvRisk {
    pub name: String,
    /// `f64::INFINITY` when any fold failed.
    pub mse: f64,
    /// Position on the candidate's tuning path that achieved `mse`.
    pub path_index: usize,
    pub error: Option<String>,
}

pub struct SuperLearnerFit {
    pub selected: usize,
    pub table: Vec<CvRisk>,
    pub model: Box<dyn FittedModel>,
    pub learner: Arc<dyn Learner>,
}

impl SuperLearnerFit {
    pub fn selected_name(&self) -> String {
        self.learner.name()
    }
}

impl std::fmt::Debug for SuperLearnerFit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SuperLearnerFit")
            .field("selected", &self.selected)
            .field("table", &self.table)
            .finish()
    }
}

fn candidate_risk(
    learner: &dyn Learner,
    x: &Matrix,
    y: &[f64],
    folds: &[usize],
    v: usize,
) -> Result<(f64, usize), LearnerError> {
    let mut sse: Vec<f64> = Vec::new();
    for k in 0..v {
        let (train, held) = split(folds, k);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let path = learner.validation_path(&x.select_rows(&train), &yt, &x.select_rows(&held))?;
        if sse.is_empty() {
            sse = vec![0.0; path.len()];
        }
        for (s, preds) in sse.iter_mut().zip(&path) {
            for (p, &i) in preds.iter().zip(&held) {
                if !p.is_finite() {
                    return Err(LearnerError::NonFinitePrediction { row: i });
                }
                *s += (y[i] - p).powi(2);
            }
        }
    }
    let n = y.len() as f64;
    Ok(sse
        .iter()
        .enumerate()
        .fold((f64::INFINITY, 0), |acc, (r, &s)| if s / n < acc.0 { (s / n, r) } else { acc }))
}

/// Scores every candidate by `v`-fold CV MSE, refits the best on all rows.
/// Ties go to the earlier candidate. Folds are stratified by `strata` when given.
pub fn discrete_super_learner(
    candidates: &[Arc<dyn Learner>],
    x: &Matrix,
    y: &[f64],
    v: usize,
    seed: u64,
    strata: Option<&[u8]>,
) -> Result<SuperLearnerFit, LearnerError> {
    if candidates.is_empty() {
        return Err(LearnerError::Folds("no candidates".into()));
    }
    if v < 2 {
        return Err(LearnerError::Folds(format!("need at least 2 folds, got {v}")));
    }
    if y.len() < 2 * v {
        return Err(LearnerError::TooFewRows {
            learner: "super learner".into(),
            need: 2 * v,
            got: y.len(),
        });
    }
    let folds = fold_assignment(y.len(), v, strata, &mut Rng::new(seed))?;
    let table: Vec<CvRisk> = candidates
        .iter()
        .map(|c| match candidate_risk(c.as_ref(), x, y, &folds, v) {
            Ok((mse, path_index)) => CvRisk {
                name: c.name(),
                mse,
                path_index,
                error: None,
            },
            Err(e) => CvRisk {
                name: c.name(),
                mse: f64::INFINITY,
                path_index: 0,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let mut selected = None;
    for (j, row) in table.iter().enumerate() {
        if row.mse.is_finite() && selected.is_none_or(|s: usize| row.mse < table[s].mse) {
            selected = Some(j);
        }
    }
    let selected = selected.ok_or(LearnerError::AllCandidatesFailed)?;
    let base = &candidates[selected];
    let learner = base
        .at_path(table[selected].path_index)
        .unwrap_or_else(|| Arc::clone(base));
    let model = learner.fit(x, y)?;
    Ok(SuperLearnerFit {
        selected,
        table,
        model,
        learner,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{GbtStumps, Knn, MeanLearner, Ols};
    use super::*;

    fn as_dyn<L: Learner + 'static>(l: L) -> Arc<dyn Learner> {
        Arc::new(l)
    }

    #[derive(Debug)]
    struct Broken;

    impl Learner for Broken {
        fn name(&self) -> String {
            "broken".into()
        }
        fn fit(&self, _x: &Matrix, _y: &[f64]) -> Result<Box<dyn FittedModel>, LearnerError> {
            Err(LearnerError::Empty)
        }
    }

    fn linear(n: usize) -> (Matrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![(i % 2) as f64, ((i * 13) % 17) as f64 / 4.0])
            .collect();
        let y = rows.iter().map(|r| 2.0 * r[0] + r[1]).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn single_candidate_selected() {
        let (x, y) = linear(20);
        let sl = discrete_super_learner(&[as_dyn(MeanLearner)], &x, &y, 5, 1, None).unwrap();
        assert_eq!(sl.selected, 0);
        let ybar = y.iter().sum::<f64>() / 20.0;
        assert!((sl.model.predict_row(&[0.0, 0.0]) - ybar).abs() < 1e-12);
    }

    #[test]
    fn ols_wins_on_noiseless_linear_data() {
        let (x, y) = linear(40);
        let sl = discrete_super_learner(&[as_dyn(MeanLearner), as_dyn(Ols)], &x, &y, 5, 1, None).unwrap();
        assert_eq!(sl.selected, 1);
        assert!(sl.table[1].mse < 1e-20);
        assert!(sl.table[0].mse > 1.0);
    }

    #[test]
    fn failing_candidate_gets_infinite_risk() {
        let (x, y) = linear(20);
        let sl = discrete_super_learner(&[as_dyn(Broken), as_dyn(MeanLearner)], &x, &y, 5, 1, None).unwrap();
        assert_eq!(sl.selected, 1);
        assert!(sl.table[0].mse.is_infinite());
        assert!(sl.table[0].error.is_some());
        assert!(matches!(
            discrete_super_learner(&[as_dyn(Broken)], &x, &y, 5, 1, None),
            Err(LearnerError::AllCandidatesFailed)
        ));
    }

    #[test]
    fn ties_go_to_first_candidate() {
        let (x, y) = linear(20);
        let sl = discrete_super_learner(&[as_dyn(MeanLearner), as_dyn(MeanLearner)], &x, &y, 5, 1, None).unwrap();
        assert_eq!(sl.selected, 0);
    }

    #[test]
    fn boosting_path_is_pinned() {
        let (x, y) = linear(60);
        let sl = discrete_super_learner(&[as_dyn(GbtStumps::default())], &x, &y, 5, 1, None).unwrap();
        assert!(sl.selected_name().starts_with("gbt-stumps(rounds="));
        assert_eq!(sl.selected_name(), format!("gbt-stumps(rounds={})", sl.table[0].path_index + 1));
    }

    #[test]
    fn requires_enough_rows() {
        let (x, y) = linear(9);
        assert!(discrete_super_learner(&[as_dyn(MeanLearner)], &x, &y, 5, 1, None).is_err());
        assert!(discrete_super_learner(&[as_dyn(MeanLearner)], &x, &y, 1, 1, None).is_err());
    }

    #[test]
    fn selected_risk_dominates() {
        let (x, mut y) = linear(50);
        y.iter_mut().enumerate().for_each(|(i, v)| *v += ((i * 31) % 7) as f64 - 3.0);
        let c = [as_dyn(MeanLearner), as_dyn(Ols), as_dyn(Knn { k: 5 }), as_dyn(GbtStumps::default())];
        let sl = discrete_super_learner(&c, &x, &y, 5, 3, None).unwrap();
        for row in &sl.table {
            assert!(sl.table[sl.selected].mse <= row.mse);
        }
    }
}
