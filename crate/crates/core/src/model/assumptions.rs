use serde::Serialize;

use super::{CoefficientModel, ModelError};
use crate::smallmat::min_sym_eig;

/// Default lower bound required of the sampled `c_lambda`.
pub const DEFAULT_FLOOR: f64 = 1e-6;

const MAX_SAMPLES: usize = 5_000_000;

/// Outcome of sampling a model on a tensor grid of its domain box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// Smallest eigenvalue of the symmetric part of gamma over the grid.
    pub c_lambda_est: f64,
    /// Grid point where `c_lambda_est` was attained.
    pub c_lambda_point: Vec<f64>,
    /// Largest of `|F|`, `|gamma|`, `|sigma|` (Euclidean and spectral norms).
    pub c_t_est: f64,
    /// Largest spectral norm of gamma.
    pub gamma_norm_max: f64,
    pub samples: usize,
    pub floor: f64,
    /// `c_lambda_est > floor`.
    pub eigenvalue_floor: bool,
    /// All sampled coefficients finite (always true in a returned report).
    pub bounded: bool,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.eigenvalue_floor && self.bounded
    }
}

pub fn check_assumptions(
    model: &CoefficientModel,
    points_per_axis: usize,
) -> Result<AssumptionReport, ModelError> {
    check_assumptions_with_floor(model, points_per_axis, DEFAULT_FLOOR)
}

/// Samples the domain box with `points_per_axis` points per axis (endpoints
/// included). Axes on which no coefficient depends are sampled once.
pub fn check_assumptions_with_floor(
    model: &CoefficientModel,
    points_per_axis: usize,
    floor: f64,
) -> Result<AssumptionReport, ModelError> {
    if points_per_axis < 2 {
        return Err(ModelError::Invalid(
            "assumption grid needs at least 2 points per axis".into(),
        ));
    }
    let d = model.dim();
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let n = if model.uses_axis(i) {
                points_per_axis
            } else {
                1
            };
            model.domain().axis_grid(i, n)
        })
        .collect();
    let total = axes
        .iter()
        .try_fold(1usize, |acc, a| acc.checked_mul(a.len()))
        .filter(|&n| n <= MAX_SAMPLES)
        .ok_or_else(|| {
            ModelError::Invalid(format!(
                "assumption grid of {points_per_axis}^{d} points is too large"
            ))
        })?;

    let mut report = AssumptionReport {
        c_lambda_est: f64::INFINITY,
        c_lambda_point: Vec::new(),
        c_t_est: 0.0,
        gamma_norm_max: 0.0,
        samples: total,
        floor,
        eigenvalue_floor: false,
        bounded: true,
    };
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    for _ in 0..total {
        for i in 0..d {
            x[i] = axes[i][idx[i]];
        }
        let f = model.force(&x)?;
        let g = model.gamma(&x)?;
        let s = model.sigma(&x)?;
        let lambda = min_sym_eig(&g)?;
        if lambda < report.c_lambda_est {
            report.c_lambda_est = lambda;
            report.c_lambda_point = x.clone();
        }
        let gn = g.norm_two();
        let fnorm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        report.gamma_norm_max = report.gamma_norm_max.max(gn);
        report.c_t_est = report.c_t_est.max(gn).max(fnorm).max(s.norm_two());

        for i in (0..d).rev() {
            idx[i] += 1;
            if idx[i] < axes[i].len() {
                break;
            }
            idx[i] = 0;
        }
    }
    report.eigenvalue_floor = report.c_lambda_est > floor;
    Ok(report)
}
