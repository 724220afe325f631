//! Numerical kernel: dense matrices, QR least squares, the normal
//! distribution, and seeded sampling.

mod lstsq;
mod matrix;
mod normal;
mod rng;

pub use lstsq::{least_squares_dropping, solve_least_squares, LeastSquaresFit, RANK_TOLERANCE};
pub use matrix::Matrix;
pub use normal::{normal_cdf, normal_quantile, normal_sf, two_sided_p};
pub use rng::{Dist, Rng, Sampler};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("singular design: column {column} is linearly dependent on earlier columns")]
    SingularDesign { column: usize },
    #[error("domain error: {0}")]
    Domain(String),
}
