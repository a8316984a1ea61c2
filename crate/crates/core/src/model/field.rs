use std::fmt;
use std::sync::Arc;

use crate::expr::{parse, Expr, ExprError};
use crate::smallmat::Mat;

use super::ModelError;

/// Matrix of expressions with its partial derivatives along every axis.
#[derive(Clone)]
pub struct ExprMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Expr>,
    derivs: Vec<Vec<Expr>>,
}

impl ExprMatrix {
    /// `entries` are row-major. Derivatives are taken for axes `0..dim`.
    pub fn new(rows: usize, cols: usize, entries: Vec<Expr>, dim: usize) -> Self {
        assert_eq!(
            entries.len(),
            rows * cols,
            "entry count does not match shape"
        );
        let derivs = (0..dim)
            .map(|axis| entries.iter().map(|e| e.deriv(axis)).collect())
            .collect();
        Self {
            rows,
            cols,
            entries,
            derivs,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, dim: usize, f: impl Fn(usize, usize) -> Expr) -> Self {
        let entries = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect();
        Self::new(rows, cols, entries, dim)
    }

    pub fn constant(m: &Mat, dim: usize) -> Self {
        Self::from_fn(m.rows(), m.cols(), dim, |i, j| Expr::num(m[(i, j)]))
    }

    pub fn column(entries: Vec<Expr>, dim: usize) -> Self {
        let n = entries.len();
        Self::new(n, 1, entries, dim)
    }

    /// Parses a row-major table of expression strings.
    ///
    /// On failure returns the `(row, col)` of the offending entry.
    pub fn parse<R: AsRef<[S]>, S: AsRef<str>>(
        table: &[R],
        dim: usize,
    ) -> Result<Self, (usize, usize, ExprError)> {
        let rows = table.len();
        let cols = table.first().map_or(0, |r| r.as_ref().len());
        let mut entries = Vec::with_capacity(rows * cols);
        for (i, row) in table.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err((
                    i,
                    row.len().min(cols),
                    ExprError::Syntax {
                        offset: 0,
                        message: format!(
                            "row {} has {} entries, expected {cols}",
                            i + 1,
                            row.len()
                        ),
                    },
                ));
            }
            for (j, src) in row.iter().enumerate() {
                entries.push(parse(src.as_ref(), dim).map_err(|e| (i, j, e))?);
            }
        }
        Ok(Self::new(rows, cols, entries, dim))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.derivs.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.cols + j]
    }

    pub fn deriv_entry(&self, i: usize, j: usize, axis: usize) -> &Expr {
        &self.derivs[axis][i * self.cols + j]
    }

    pub fn is_constant(&self) -> bool {
        self.entries.iter().all(Expr::is_constant)
    }

    fn eval_entries(&self, entries: &[Expr], x: &[f64]) -> Result<Mat, (usize, usize, ExprError)> {
        let mut out = Mat::zeros(self.rows, self.cols);
        let data = out.as_mut_slice();
        for (k, e) in entries.iter().enumerate() {
            data[k] = e
                .eval(x)
                .map_err(|err| (k / self.cols, k % self.cols, err))?;
        }
        Ok(out)
    }

    pub fn eval(&self, x: &[f64]) -> Result<Mat, (usize, usize, ExprError)> {
        self.eval_entries(&self.entries, x)
    }

    pub fn eval_deriv(&self, x: &[f64], axis: usize) -> Result<Mat, (usize, usize, ExprError)> {
        self.eval_entries(&self.derivs[axis], x)
    }

    /// Re-targets the expressions to a larger ambient dimension (extra axes
    /// get zero derivatives).
    pub fn with_dim(&self, dim: usize) -> Self {
        assert!(dim >= self.dim(), "cannot shrink the ambient dimension");
        Self::new(self.rows, self.cols, self.entries.clone(), dim)
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        (0..self.rows)
            .map(|i| {
                (0..self.cols)
                    .map(|j| self.entry(i, j).to_string())
                    .collect()
            })
            .collect()
    }
}

impl fmt::Debug for ExprMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExprMatrix{:?}", self.to_strings())
    }
}

pub type NumericFn = dyn Fn(&[f64]) -> Result<Mat, ModelError> + Send + Sync;

/// A matrix-valued coefficient: either symbolic (exact derivatives) or an
/// arbitrary function (central finite-difference derivatives).
#[derive(Clone)]
pub enum MatrixField {
    Symbolic(ExprMatrix),
    Numeric {
        rows: usize,
        cols: usize,
        f: Arc<NumericFn>,
    },
}

impl fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixField::Symbolic(m) => m.fmt(f),
            MatrixField::Numeric { rows, cols, .. } => write!(f, "Numeric({rows}x{cols})"),
        }
    }
}

/// Finite-difference step for axis value `x`: `eps^(1/3) * max(1, |x|)`.
pub fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

impl MatrixField {
    pub fn numeric(
        rows: usize,
        cols: usize,
        f: impl Fn(&[f64]) -> Result<Mat, ModelError> + Send + Sync + 'static,
    ) -> Self {
        MatrixField::Numeric {
            rows,
            cols,
            f: Arc::new(f),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            MatrixField::Symbolic(m) => (m.rows(), m.cols()),
            MatrixField::Numeric { rows, cols, .. } => (*rows, *cols),
        }
    }

    pub fn symbolic(&self) -> Option<&ExprMatrix> {
        match self {
            MatrixField::Symbolic(m) => Some(m),
            MatrixField::Numeric { .. } => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.symbolic().is_some_and(ExprMatrix::is_constant)
    }

    pub(crate) fn eval(&self, name: &'static str, x: &[f64]) -> Result<Mat, ModelError> {
        let m = match self {
            MatrixField::Symbolic(m) => {
                m.eval(x)
                    .map_err(|(row, col, source)| ModelError::Coefficient {
                        coefficient: name,
                        row,
                        col,
                        source_text: m.entry(row, col).to_string(),
                        source,
                    })?
            }
            MatrixField::Numeric { f, .. } => f(x)?,
        };
        if !m.is_finite() {
            return Err(ModelError::NonFinite {
                coefficient: name,
                point: x.to_vec(),
            });
        }
        Ok(m)
    }

    pub(crate) fn eval_deriv(
        &self,
        name: &'static str,
        x: &[f64],
        axis: usize,
    ) -> Result<Mat, ModelError> {
        match self {
            MatrixField::Symbolic(m) => {
                m.eval_deriv(x, axis)
                    .map_err(|(row, col, source)| ModelError::Coefficient {
                        coefficient: name,
                        row,
                        col,
                        source_text: m.deriv_entry(row, col, axis).to_string(),
                        source,
                    })
            }
            MatrixField::Numeric { .. } => {
                let h = fd_step(x[axis]);
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[axis] += h;
                xm[axis] -= h;
                let fp = self.eval(name, &xp)?;
                let fm = self.eval(name, &xm)?;
                Ok((&fp - &fm).scale(0.5 / h))
            }
        }
    }
}
