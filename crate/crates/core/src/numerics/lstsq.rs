//! Householder QR least squares.
//!
//! Columns are processed in their given order. A column whose pivot (the
//! norm of its component orthogonal to the columns already accepted) falls
//! below `RANK_TOLERANCE` times the largest accepted pivot is dependent.
//! [`solve_least_squares`] reports it; [`least_squares_dropping`] drops it
//! and continues, so later duplicates of earlier columns are the ones removed.

use super::{Matrix, NumericsError};

/// Relative pivot threshold for declaring a column dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Least-squares fit where dependent columns were removed.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresFit {
    /// One entry per input column; dropped columns carry 0.
    pub coefficients: Vec<f64>,
    /// Indices of dropped columns, ascending.
    pub dropped: Vec<usize>,
}

impl LeastSquaresFit {
    pub fn rank(&self) -> usize {
        self.coefficients.len() - self.dropped.len()
    }
}

/// Returns β minimizing ‖y − Xβ‖². Fails on the first dependent column.
pub fn solve_least_squares(x: &Matrix, y: &[f64]) -> Result<Vec<f64>, NumericsError> {
    check_shapes(x, y)?;
    let mut excluded = vec![false; x.cols()];
    match decompose(x, y, &mut excluded, false)? {
        Ok(beta) => Ok(beta),
        Err(column) => Err(NumericsError::SingularDesign { column }),
    }
}

/// Like [`solve_least_squares`] but drops dependent columns instead of failing.
pub fn least_squares_dropping(x: &Matrix, y: &[f64]) -> Result<LeastSquaresFit, NumericsError> {
    check_shapes(x, y)?;
    let mut excluded = vec![false; x.cols()];
    loop {
        match decompose(x, y, &mut excluded, true)? {
            Ok(coefficients) => {
                let dropped = excluded
                    .iter()
                    .enumerate()
                    .filter_map(|(j, &e)| e.then_some(j))
                    .collect();
                return Ok(LeastSquaresFit {
                    coefficients,
                    dropped,
                });
            }
            // a pivot accepted early turned out small relative to a later one
            Err(column) => excluded[column] = true,
        }
    }
}

fn check_shapes(x: &Matrix, y: &[f64]) -> Result<(), NumericsError> {
    if x.rows() != y.len() {
        return Err(NumericsError::Shape {
            expected: x.rows(),
            found: y.len(),
        });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(NumericsError::NonFinite { row: i, col: 0 });
    }
    Ok(())
}

struct Reflector {
    offset: usize,
    v: Vec<f64>,
    beta: f64,
}

impl Reflector {
    fn apply(&self, z: &mut [f64]) {
        let tail = &mut z[self.offset..];
        let dot: f64 = self.v.iter().zip(tail.iter()).map(|(a, b)| a * b).sum();
        let s = self.beta * dot;
        for (t, v) in tail.iter_mut().zip(&self.v) {
            *t -= s * v;
        }
    }
}

/// Inner `Ok(beta)` on success; inner `Err(col)` names a dependent column
/// that was not excluded yet. With `dropping`, dependent columns met during the
/// sweep are excluded in place and only the final relative check can return `Err`.
fn decompose(
    x: &Matrix,
    y: &[f64],
    excluded: &mut [bool],
    dropping: bool,
) -> Result<Result<Vec<f64>, usize>, NumericsError> {
    let n = x.rows();
    let k = x.cols();
    let mut reflectors: Vec<Reflector> = Vec::new();
    // columns of R, top `accepted.len()` entries each
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let mut accepted: Vec<usize> = Vec::new();
    let mut max_pivot = 0.0_f64;

    #[allow(clippy::needless_range_loop)]
    for j in 0..k {
        if excluded[j] {
            continue;
        }
        let mut col = x.column(j);
        for h in &reflectors {
            h.apply(&mut col);
        }
        let r = accepted.len();
        let norm = if r < n {
            col[r..].iter().map(|v| v * v).sum::<f64>().sqrt()
        } else {
            0.0
        };
        if norm == 0.0 || norm <= RANK_TOLERANCE * max_pivot {
            if dropping {
                excluded[j] = true;
                continue;
            }
            return Ok(Err(j));
        }
        let alpha = if col[r] >= 0.0 { -norm } else { norm };
        let mut v = col[r..].to_vec();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|a| a * a).sum();
        reflectors.push(Reflector {
            offset: r,
            v,
            beta: 2.0 / vv,
        });
        let mut rc = col[..r].to_vec();
        rc.push(alpha);
        r_cols.push(rc);
        accepted.push(j);
        max_pivot = max_pivot.max(norm);
    }

    for (t, rc) in r_cols.iter().enumerate() {
        if rc[t].abs() <= RANK_TOLERANCE * max_pivot {
            return Ok(Err(accepted[t]));
        }
    }

    let mut qty = y.to_vec();
    for h in &reflectors {
        h.apply(&mut qty);
    }
    let r = accepted.len();
    let mut b = vec![0.0; r];
    for t in (0..r).rev() {
        let mut s = qty[t];
        for u in t + 1..r {
            s -= r_cols[u][t] * b[u];
        }
        b[t] = s / r_cols[t][t];
    }
    let mut beta = vec![0.0; k];
    for (t, &j) in accepted.iter().enumerate() {
        beta[j] = b[t];
    }
    Ok(Ok(beta))
}
