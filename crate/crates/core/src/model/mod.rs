//! Coefficient models `(F, gamma, sigma)` on a domain box, the assumption
//! check, and the model builders (colored-noise lift, magnetic augmentation,
//! fluctuation-dissipation models).

mod assumptions;
mod fdr;
mod field;
mod lift;
mod magnetic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::smallmat::{LinalgError, Mat};

pub use assumptions::{
    check_assumptions, check_assumptions_with_floor, AssumptionReport, DEFAULT_FLOOR,
};
pub use fdr::{fdr_model, FdrConvention, ForceSpec, FDR_CHECK_GRID};
pub use field::{fd_step, ExprMatrix, MatrixField, NumericFn};
pub use lift::{lift_colored_noise, ColoredNoiseSpec, LIFTED_AXIS_BOUND};
pub use magnetic::{augment_magnetic, magnetic_matrix, MagneticSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{coefficient}[{row},{col}] = `{source_text}`: {source}")]
    Coefficient {
        coefficient: &'static str,
        row: usize,
        col: usize,
        source_text: String,
        source: ExprError,
    },
    #[error("{coefficient} is not finite at {point:?}")]
    NonFinite {
        coefficient: &'static str,
        point: Vec<f64>,
    },
    #[error("point has {got} coordinates, model dimension is {expected}")]
    PointDimension { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid domain box: {0}")]
    Domain(String),
    #[error("diffusion is not positive ({value:e}) at {point:?}")]
    NonPositiveDiffusion { point: Vec<f64>, value: f64 },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Axis-aligned box `[lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, ModelError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(ModelError::Domain(format!(
                "{} lower and {} upper bounds",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (&a, &b)) in lo.iter().zip(&hi).enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(ModelError::Domain(format!("axis {}: [{a}, {b}]", i + 1)));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The same interval on every axis.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self, ModelError> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    pub fn product(&self, other: &DomainBox) -> DomainBox {
        let mut lo = self.lo.clone();
        let mut hi = self.hi.clone();
        lo.extend_from_slice(&other.lo);
        hi.extend_from_slice(&other.hi);
        DomainBox { lo, hi }
    }

    /// `n` equispaced values on axis `i`, endpoints included.
    pub fn axis_grid(&self, i: usize, n: usize) -> Vec<f64> {
        let (a, b) = (self.lo[i], self.hi[i]);
        if n == 1 {
            return vec![0.5 * (a + b)];
        }
        (0..n)
            .map(|k| {
                if k + 1 == n {
                    b
                } else {
                    a + (b - a) * k as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

/// The triple `(F, gamma, sigma)` with `F: R^d -> R^d`, `gamma: R^d -> d x d`
/// and `sigma: R^d -> d x k`. Immutable once built.
#[derive(Debug, Clone)]
pub struct CoefficientModel {
    dim: usize,
    noise_dim: usize,
    domain: DomainBox,
    force: MatrixField,
    gamma: MatrixField,
    sigma: MatrixField,
    potential: Option<(Expr, f64)>,
}

impl CoefficientModel {
    pub fn new(
        domain: DomainBox,
        force: MatrixField,
        gamma: MatrixField,
        sigma: MatrixField,
    ) -> Result<Self, ModelError> {
        let dim = domain.dim();
        let (fr, fc) = force.shape();
        if (fr, fc) != (dim, 1) {
            return Err(ModelError::Shape(format!(
                "force is {fr}x{fc}, expected {dim}x1"
            )));
        }
        let (gr, gc) = gamma.shape();
        if (gr, gc) != (dim, dim) {
            return Err(ModelError::Shape(format!(
                "gamma is {gr}x{gc}, expected {dim}x{dim}"
            )));
        }
        let (sr, noise_dim) = sigma.shape();
        if sr != dim || noise_dim == 0 {
            return Err(ModelError::Shape(format!(
                "sigma is {sr}x{noise_dim}, expected {dim} rows and at least one column"
            )));
        }
        for (name, field) in [("F", &force), ("gamma", &gamma), ("sigma", &sigma)] {
            if let Some(m) = field.symbolic() {
                if m.dim() != dim {
                    return Err(ModelError::Shape(format!(
                        "{name} is differentiated in {} axes, model dimension is {dim}",
                        m.dim()
                    )));
                }
            }
        }
        Ok(Self {
            dim,
            noise_dim,
            domain,
            force,
            gamma,
            sigma,
            potential: None,
        })
    }

    /// Expression-backed model; `force` is a `d x 1` column.
    pub fn symbolic(
        domain: DomainBox,
        force: ExprMatrix,
        gamma: ExprMatrix,
        sigma: ExprMatrix,
    ) -> Result<Self, ModelError> {
        Self::new(
            domain,
            MatrixField::Symbolic(force),
            MatrixField::Symbolic(gamma),
            MatrixField::Symbolic(sigma),
        )
    }

    /// Records `F = -grad U` at temperature `kbt` for the stationarity checks.
    pub fn with_potential(mut self, potential: Expr, kbt: f64) -> Self {
        self.potential = Some((potential, kbt));
        self
    }

    /// Replaces the force field, keeping everything else.
    pub fn with_force(&self, force: MatrixField) -> Result<Self, ModelError> {
        Self::new(
            self.domain.clone(),
            force,
            self.gamma.clone(),
            self.sigma.clone(),
        )
    }

    /// Replaces the noise matrix, keeping everything else.
    pub fn with_sigma(&self, sigma: MatrixField) -> Result<Self, ModelError> {
        let mut m = Self::new(
            self.domain.clone(),
            self.force.clone(),
            self.gamma.clone(),
            sigma,
        )?;
        m.potential = self.potential.clone();
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn force_field(&self) -> &MatrixField {
        &self.force
    }

    pub fn gamma_field(&self) -> &MatrixField {
        &self.gamma
    }

    pub fn sigma_field(&self) -> &MatrixField {
        &self.sigma
    }

    pub fn potential(&self) -> Option<(&Expr, f64)> {
        self.potential.as_ref().map(|(u, t)| (u, *t))
    }

    pub fn is_constant_gamma(&self) -> bool {
        self.gamma.is_constant()
    }

    pub fn is_constant_sigma(&self) -> bool {
        self.sigma.is_constant()
    }

    /// All three coefficients are position independent.
    pub fn is_constant(&self) -> bool {
        self.force.is_constant() && self.gamma.is_constant() && self.sigma.is_constant()
    }

    fn check_point(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.dim {
            return Err(ModelError::PointDimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn check_axis(&self, axis: usize) -> Result<(), ModelError> {
        if axis >= self.dim {
            return Err(ModelError::Shape(format!(
                "axis {axis} out of range for dimension {}",
                self.dim
            )));
        }
        Ok(())
    }

    pub fn force(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_point(x)?;
        Ok(self.force.eval("F", x)?.as_slice().to_vec())
    }

    pub fn gamma(&self, x: &[f64]) -> Result<Mat, ModelError> {
        self.check_point(x)?;
        self.gamma.eval("gamma", x)
    }

    pub fn sigma(&self, x: &[f64]) -> Result<Mat, ModelError> {
        self.check_point(x)?;
        self.sigma.eval("sigma", x)
    }

    /// `d gamma / d x_axis` (zero-based axis).
    pub fn dgamma(&self, x: &[f64], axis: usize) -> Result<Mat, ModelError> {
        self.check_point(x)?;
        self.check_axis(axis)?;
        self.gamma.eval_deriv("dgamma", x, axis)
    }

    pub fn dsigma(&self, x: &[f64], axis: usize) -> Result<Mat, ModelError> {
        self.check_point(x)?;
        self.check_axis(axis)?;
        self.sigma.eval_deriv("dsigma", x, axis)
    }

    pub fn dforce(&self, x: &[f64], axis: usize) -> Result<Vec<f64>, ModelError> {
        self.check_point(x)?;
        self.check_axis(axis)?;
        Ok(self.force.eval_deriv("dF", x, axis)?.as_slice().to_vec())
    }

    /// Whether any coefficient can vary along `axis`.
    pub(crate) fn uses_axis(&self, axis: usize) -> bool {
        [&self.force, &self.gamma, &self.sigma]
            .iter()
            .any(|f| match f.symbolic() {
                Some(m) => {
                    (0..m.rows()).any(|i| (0..m.cols()).any(|j| m.entry(i, j).depends_on(axis)))
                }
                None => true,
            })
    }
}
