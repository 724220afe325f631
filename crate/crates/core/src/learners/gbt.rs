//! Least-squares gradient boosting with depth-1 trees.

use std::sync::Arc;

use super::folds::{fold_assignment, split};
use super::linear::mean;
use super::{check_rows, FittedModel, Learner, LearnerError};
use crate::numerics::{Matrix, Rng};

/// Boosted regression stumps.
///
/// Each feature is cut into at most `max_bins` bins: every distinct value gets
/// its own bin when there are few enough, otherwise bins hold roughly equal
/// counts. Split thresholds sit midway between neighbouring bins.
///
/// With `inner_folds >= 2` each fit picks its round count (1..=`rounds`) by
/// internal cross-validation; with `inner_folds == 0` all `rounds` are used.
#[derive(Debug, Clone)]
pub struct GbtStumps {
    pub rounds: usize,
    pub shrinkage: f64,
    pub min_leaf: usize,
    pub inner_folds: usize,
    pub seed: u64,
    pub max_bins: usize,
}

impl Default for GbtStumps {
    fn default() -> Self {
        Self {
            rounds: 200,
            shrinkage: 0.1,
            min_leaf: 5,
            inner_folds: 5,
            seed: 0,
            max_bins: 256,
        }
    }
}

/// Binned copy of one feature column.
struct BinnedFeature {
    /// Bin of each row.
    bins: Vec<u8>,
    /// `thresholds[b]` separates bin b from bin b + 1.
    thresholds: Vec<f64>,
    counts: Vec<usize>,
}

/// Split candidates of one feature for a fixed sample and leaf size.
struct SplitGrid {
    /// Last left bin of each admissible split.
    last_bin: Vec<usize>,
    left_count: Vec<usize>,
    inv_left: Vec<f64>,
    inv_right: Vec<f64>,
}

impl SplitGrid {
    fn new(f: &BinnedFeature, n: usize, min_leaf: usize) -> Self {
        let mut grid = Self {
            last_bin: vec![],
            left_count: vec![],
            inv_left: vec![],
            inv_right: vec![],
        };
        let mut nl = 0;
        for b in 0..f.counts.len().saturating_sub(1) {
            nl += f.counts[b];
            if nl >= min_leaf && n - nl >= min_leaf {
                grid.last_bin.push(b);
                grid.left_count.push(nl);
                grid.inv_left.push(1.0 / nl as f64);
                grid.inv_right.push(1.0 / (n - nl) as f64);
            }
        }
        grid
    }
}

impl BinnedFeature {
    fn new(col: &[f64], max_bins: usize) -> Self {
        let n = col.len();
        let mut sorted = col.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut distinct = sorted.clone();
        distinct.dedup();
        // upper value of each bin
        let uppers: Vec<f64> = if distinct.len() <= max_bins {
            distinct
        } else {
            let mut u: Vec<f64> = (1..=max_bins).map(|b| sorted[(b * n).div_ceil(max_bins) - 1]).collect();
            u.dedup();
            u
        };
        let thresholds: Vec<f64> = uppers
            .windows(2)
            .map(|w| {
                // smallest value above the bin
                let next = sorted[sorted.partition_point(|&v| v <= w[0])];
                let mid = w[0] + (next - w[0]) / 2.0;
                if mid >= next {
                    w[0]
                } else {
                    mid
                }
            })
            .collect();
        let bins: Vec<u8> = col
            .iter()
            .map(|&v| thresholds.partition_point(|&t| t < v) as u8)
            .collect();
        let mut counts = vec![0; uppers.len()];
        for &b in &bins {
            counts[b as usize] += 1;
        }
        Self {
            bins,
            thresholds,
            counts,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Stump {
    feature: usize,
    threshold: f64,
    left: f64,
    right: f64,
}

impl Stump {
    fn eval(&self, row: &[f64]) -> f64 {
        if row[self.feature] <= self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

struct GbtModel {
    base: f64,
    stumps: Vec<Stump>,
}

impl FittedModel for GbtModel {
    fn predict_row(&self, row: &[f64]) -> f64 {
        self.base + self.stumps.iter().map(|s| s.eval(row)).sum::<f64>()
    }
}

impl GbtStumps {
    fn boost(&self, x: &Matrix, y: &[f64], rounds: usize) -> GbtModel {
        let n = y.len();
        let base = mean(y);
        let features: Vec<BinnedFeature> = (0..x.cols())
            .map(|j| BinnedFeature::new(&x.column(j), self.max_bins))
            .collect();
        let min_leaf = self.min_leaf.max(1);
        let grids: Vec<SplitGrid> = features.iter().map(|f| SplitGrid::new(f, n, min_leaf)).collect();
        let mut fitted = vec![base; n];
        let mut resid = vec![0.0; n];
        let mut sums = vec![0.0; 256];
        let mut stumps = Vec::with_capacity(rounds);
        for _ in 0..rounds {
            for i in 0..n {
                resid[i] = y[i] - fitted[i];
            }
            let total: f64 = resid.iter().sum();
            // (gain, feature, last left bin, left count, left sum)
            let mut best: Option<(f64, usize, usize, usize, f64)> = None;
            for (j, (f, g)) in features.iter().zip(&grids).enumerate() {
                if g.last_bin.is_empty() {
                    continue;
                }
                let nb = f.counts.len();
                sums[..nb].iter_mut().for_each(|s| *s = 0.0);
                for (&b, r) in f.bins.iter().zip(&resid) {
                    sums[b as usize] += r;
                }
                let (mut cum, mut next) = (0.0, 0usize);
                for (s, &b) in g.last_bin.iter().enumerate() {
                    while next <= b {
                        cum += sums[next];
                        next += 1;
                    }
                    let right = total - cum;
                    let gain = cum * cum * g.inv_left[s] + right * right * g.inv_right[s];
                    if best.is_none_or(|t| gain > t.0) {
                        best = Some((gain, j, b, g.left_count[s], cum));
                    }
                }
            }
            let Some((_, j, b, nl, cum)) = best else { break };
            let f = &features[j];
            let stump = Stump {
                feature: j,
                threshold: f.thresholds[b],
                left: self.shrinkage * cum / nl as f64,
                right: self.shrinkage * (total - cum) / (n - nl) as f64,
            };
            for (fi, &bi) in fitted.iter_mut().zip(&f.bins) {
                *fi += if bi as usize <= b { stump.left } else { stump.right };
            }
            stumps.push(stump);
        }
        GbtModel { base, stumps }
    }

    fn staged(&self, model: &GbtModel, x_val: &Matrix) -> Vec<Vec<f64>> {
        let mut current = vec![model.base; x_val.rows()];
        let mut path = Vec::with_capacity(self.rounds);
        for s in &model.stumps {
            for (i, c) in current.iter_mut().enumerate() {
                *c += s.eval(x_val.row(i));
            }
            path.push(current.clone());
        }
        // boosting stopped early: later rounds repeat the last fit
        while path.len() < self.rounds {
            path.push(current.clone());
        }
        path
    }

    fn choose_rounds(&self, x: &Matrix, y: &[f64]) -> Result<usize, LearnerError> {
        let n = y.len();
        let mut rng = Rng::new(self.seed ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let folds = fold_assignment(n, self.inner_folds, None, &mut rng)?;
        let mut sse = vec![0.0; self.rounds];
        for k in 0..self.inner_folds {
            let (train, held) = split(&folds, k);
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let path = self.validation_path(&x.select_rows(&train), &yt, &x.select_rows(&held))?;
            for (r, preds) in path.iter().enumerate() {
                sse[r] += preds
                    .iter()
                    .zip(&held)
                    .map(|(p, &i)| (y[i] - p).powi(2))
                    .sum::<f64>();
            }
        }
        let best = sse
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (r, &s)| if s < acc.1 { (r, s) } else { acc })
            .0;
        Ok(best + 1)
    }
}

impl Learner for GbtStumps {
    fn name(&self) -> String {
        if self.inner_folds >= 2 {
            "gbt-stumps".into()
        } else {
            format!("gbt-stumps(rounds={})", self.rounds)
        }
    }

    fn fit(&self, x: &Matrix, y: &[f64]) -> Result<Box<dyn FittedModel>, LearnerError> {
        check_rows(self, x, y)?;
        let rounds = if self.inner_folds >= 2 && y.len() >= 2 * self.inner_folds {
            self.choose_rounds(x, y)?
        } else {
            self.rounds
        };
        Ok(Box::new(self.boost(x, y, rounds)))
    }

    fn validation_path(
        &self,
        x: &Matrix,
        y: &[f64],
        x_val: &Matrix,
    ) -> Result<Vec<Vec<f64>>, LearnerError> {
        check_rows(self, x, y)?;
        let model = self.boost(x, y, self.rounds);
        Ok(self.staged(&model, x_val))
    }

    fn at_path(&self, idx: usize) -> Option<Arc<dyn Learner>> {
        Some(Arc::new(GbtStumps {
            rounds: idx + 1,
            inner_folds: 0,
            ..self.clone()
        }))
    }
}
