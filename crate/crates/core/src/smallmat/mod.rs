//! Dense linear algebra for small matrices (dimension at most 16).

mod eig;
mod expm;
mod lyapunov;
mod mat;

use thiserror::Error;

pub use eig::{min_sym_eig, sym_eigenvalues};
pub use expm::mat_exp;
pub use lyapunov::{
    finite_gramian_quadrature, has_stable_spectrum, lyapunov_residual, solve_lyapunov_direct,
    solve_lyapunov_quadrature, LyapunovMethod, LyapunovSolution, DIRECT_TOLERANCE,
    QUADRATURE_TOLERANCE, TRUNCATION,
};
pub use mat::Mat;

pub(crate) use mat::gauss_solve;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("singular system (pivot {pivot:e} in column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("Lyapunov residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },
    #[error("symmetric part is not positive definite (smallest eigenvalue {min_sym_eig:e})")]
    EigenvalueFloor { min_sym_eig: f64 },
    #[error("quadrature did not converge: subinterval width fell below {floor:e} near y = {at}")]
    QuadratureNonConvergence { at: f64, floor: f64 },
    #[error("matrix is not positive semidefinite (pivot {pivot:e} at index {index})")]
    NotPositiveSemidefinite { index: usize, pivot: f64 },
    #[error("symmetric eigenvalue iteration did not converge")]
    EigenNonConvergence,
}
