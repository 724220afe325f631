use super::folds::{fold_assignment, split};
use super::{check_rows, FittedModel, Learner, LearnerError};
use crate::numerics::{least_squares_dropping, Matrix, Rng};

/// Predicts the training mean everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanLearner;

struct Constant(f64);

impl FittedModel for Constant {
    fn predict_row(&self, _row: &[f64]) -> f64 {
        self.0
    }
}

impl Learner for MeanLearner {
    fn name(&self) -> String {
        "mean".into()
    }

    fn fit(&self, x: &Matrix, y: &[f64]) -> Result<Box<dyn FittedModel>, LearnerError> {
        check_rows(self, x, y)?;
        Ok(Box::new(Constant(mean(y))))
    }
}

pub(crate) fn mean(y: &[f64]) -> f64 {
    y.iter().sum::<f64>() / y.len() as f64
}

/// Intercept plus all features as main effects; dependent features are dropped.
#[derive(Debug, Clone, Copy, Default)]
pub struct Ols;

struct Linear {
    intercept: f64,
    coef: Vec<f64>,
}

impl FittedModel for Linear {
    fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coef).map(|(x, b)| x * b).sum::<f64>()
    }
}

impl Learner for Ols {
    fn name(&self) -> String {
        "ols".into()
    }

    fn fit(&self, x: &Matrix, y: &[f64]) -> Result<Box<dyn FittedModel>, LearnerError> {
        check_rows(self, x, y)?;
        let fit = least_squares_dropping(&x.with_intercept(), y)?;
        Ok(Box::new(Linear {
            intercept: fit.coefficients[0],
            coef: fit.coefficients[1..].to_vec(),
        }))
    }
}

/// Column means and standard deviations of a training matrix. Constant
/// columns get scale 1.
#[derive(Debug, Clone)]
pub(crate) struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows() as f64;
        let p = x.cols();
        let mut means = vec![0.0; p];
        for i in 0..x.rows() {
            for (m, v) in means.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut scales = vec![0.0; p];
        for i in 0..x.rows() {
            for ((s, v), m) in scales.iter_mut().zip(x.row(i)).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        for s in scales.iter_mut() {
            let sd = (*s / n).sqrt();
            *s = if sd > 1e-12 { sd } else { 1.0 };
        }
        Self { means, scales }
    }

    pub fn row_into(&self, row: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = (row[j] - self.means[j]) / self.scales[j];
        }
    }

    pub fn transform(&self, x: &Matrix) -> Vec<f64> {
        let p = x.cols();
        let mut out = vec![0.0; x.rows() * p];
        for i in 0..x.rows() {
            self.row_into(x.row(i), &mut out[i * p..(i + 1) * p]);
        }
        out
    }
}

/// Ridge regression on standardized features with an unpenalized intercept.
/// The penalty is picked from `grid` (multiples of the training size) by
/// `inner_folds`-fold cross-validation inside every fit.
#[derive(Debug, Clone)]
pub struct Ridge {
    pub grid: Vec<f64>,
    pub inner_folds: usize,
    pub seed: u64,
}

impl Default for Ridge {
    fn default() -> Self {
        Self {
            grid: vec![1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0],
            inner_folds: 5,
            seed: 0,
        }
    }
}

struct RidgeModel {
    intercept: f64,
    coef: Vec<f64>,
    std: Standardizer,
}

impl FittedModel for RidgeModel {
    fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept
            + row
                .iter()
                .zip(&self.coef)
                .zip(self.std.means.iter().zip(&self.std.scales))
                .map(|((x, b), (m, s))| b * (x - m) / s)
                .sum::<f64>()
    }
}

/// Standardized training data reduced to its Gram matrix.
struct RidgeProblem {
    std: Standardizer,
    ybar: f64,
    n: usize,
    gram: Vec<f64>,
    zty: Vec<f64>,
}

impl RidgeProblem {
    fn new(x: &Matrix, y: &[f64]) -> Self {
        let (n, p) = (x.rows(), x.cols());
        let std = Standardizer::fit(x);
        let z = std.transform(x);
        let ybar = mean(y);
        let mut gram = vec![0.0; p * p];
        let mut zty = vec![0.0; p];
        for (zi, yi) in z.chunks_exact(p.max(1)).zip(y) {
            for a in 0..p {
                zty[a] += zi[a] * (yi - ybar);
                for b in a..p {
                    gram[a * p + b] += zi[a] * zi[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                gram[a * p + b] = gram[b * p + a];
            }
        }
        Self {
            std,
            ybar,
            n,
            gram,
            zty,
        }
    }

    /// Solves (ZᵀZ + λI)β = Zᵀ(y − ȳ) by Cholesky, λ = relative · n.
    fn solve(&self, relative: f64) -> RidgeModel {
        let p = self.zty.len();
        let lambda = relative * self.n as f64;
        let mut l = self.gram.clone();
        for a in 0..p {
            l[a * p + a] += lambda;
        }
        for j in 0..p {
            let mut d = l[j * p + j];
            for k in 0..j {
                d -= l[j * p + k] * l[j * p + k];
            }
            let d = d.sqrt();
            l[j * p + j] = d;
            for i in j + 1..p {
                let mut v = l[i * p + j];
                for k in 0..j {
                    v -= l[i * p + k] * l[j * p + k];
                }
                l[i * p + j] = v / d;
            }
        }
        let mut coef = self.zty.clone();
        for i in 0..p {
            for k in 0..i {
                coef[i] -= l[i * p + k] * coef[k];
            }
            coef[i] /= l[i * p + i];
        }
        for i in (0..p).rev() {
            for k in i + 1..p {
                coef[i] -= l[k * p + i] * coef[k];
            }
            coef[i] /= l[i * p + i];
        }
        RidgeModel {
            intercept: self.ybar,
            coef,
            std: self.std.clone(),
        }
    }
}

impl Ridge {
    fn choose_penalty(&self, x: &Matrix, y: &[f64]) -> Result<f64, LearnerError> {
        let n = y.len();
        let mut rng = Rng::new(self.seed ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let folds = fold_assignment(n, self.inner_folds, None, &mut rng)?;
        let mut sse = vec![0.0; self.grid.len()];
        for k in 0..self.inner_folds {
            let (train, held) = split(&folds, k);
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let problem = RidgeProblem::new(&x.select_rows(&train), &yt);
            for (g, &rel) in self.grid.iter().enumerate() {
                let m = problem.solve(rel);
                sse[g] += held
                    .iter()
                    .map(|&i| (y[i] - m.predict_row(x.row(i))).powi(2))
                    .sum::<f64>();
            }
        }
        let best = sse
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (g, &s)| if s < acc.1 { (g, s) } else { acc })
            .0;
        Ok(self.grid[best])
    }
}

impl Learner for Ridge {
    fn name(&self) -> String {
        "ridge".into()
    }

    fn min_rows(&self) -> usize {
        2 * self.inner_folds
    }

    fn fit(&self, x: &Matrix, y: &[f64]) -> Result<Box<dyn FittedModel>, LearnerError> {
        check_rows(self, x, y)?;
        if self.grid.is_empty() {
            return Err(LearnerError::Folds("empty ridge penalty grid".into()));
        }
        let rel = if self.grid.len() == 1 {
            self.grid[0]
        } else {
            self.choose_penalty(x, y)?
        };
        Ok(Box::new(RidgeProblem::new(x, y).solve(rel)))
    }
}
