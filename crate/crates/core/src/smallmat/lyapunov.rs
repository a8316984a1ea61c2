use serde::Serialize;

use super::{gauss_solve, mat_exp, min_sym_eig, LinalgError, Mat};
use crate::quad;

/// Residual bound for the vectorized solver, relative to the problem scale.
pub const DIRECT_TOLERANCE: f64 = 1e-10;
/// Residual bound for the quadrature solver, relative to the problem scale.
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;
/// The integral is truncated at `TRUNCATION / c_lambda`.
pub const TRUNCATION: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LyapunovMethod {
    Direct,
    Quadrature,
}

/// Solution `J` of `J g^T + g J = c` together with its max-abs residual.
#[derive(Debug, Clone)]
pub struct LyapunovSolution {
    pub j: Mat,
    pub residual: f64,
    pub method: LyapunovMethod,
}

/// Max-abs entry of `J g^T + g J - c`.
pub fn lyapunov_residual(g: &Mat, c: &Mat, j: &Mat) -> f64 {
    let lhs = &(j * &g.transpose()) + &(g * j);
    lhs.max_abs_diff(c)
}

/// Scale used to make the fixed residual tolerances meaningful for
/// coefficients far from unit size. Equals 1 for unit-scale problems.
fn residual_scale(g: &Mat, c: &Mat, j: &Mat) -> f64 {
    1f64.max(c.max_abs()).max(g.max_abs() * j.max_abs())
}

fn check_pair(g: &Mat, c: &Mat) -> Result<usize, LinalgError> {
    let d = g.ensure_square()?;
    if c.shape() != (d, d) {
        return Err(LinalgError::DimensionMismatch(format!(
            "friction is {d}x{d} but right-hand side is {}x{}",
            c.rows(),
            c.cols()
        )));
    }
    g.ensure_finite()?;
    c.ensure_finite()?;
    Ok(d)
}

/// Solves `J g^T + g J = c` through the `d^2 x d^2` Kronecker system
/// `(g (x) I + I (x) g) vec(J) = vec(c)` (row-major `vec`).
pub fn solve_lyapunov_direct(g: &Mat, c: &Mat) -> Result<LyapunovSolution, LinalgError> {
    let d = check_pair(g, c)?;
    let j = if d == 1 {
        let g0 = g[(0, 0)];
        if g0 == 0.0 {
            return Err(LinalgError::Singular {
                column: 0,
                pivot: 0.0,
            });
        }
        Mat::from_rows(&[[c[(0, 0)] / (2.0 * g0)]])
    } else {
        let n = d * d;
        let mut k = vec![0.0; n * n];
        for i in 0..d {
            for jj in 0..d {
                let row = i * d + jj;
                // (g J)_{i jj} = sum_m g_{i m} J_{m jj}
                for m in 0..d {
                    k[row * n + m * d + jj] += g[(i, m)];
                }
                // (J g^T)_{i jj} = sum_m J_{i m} g_{jj m}
                for m in 0..d {
                    k[row * n + i * d + m] += g[(jj, m)];
                }
            }
        }
        let mut rhs = c.as_slice().to_vec();
        gauss_solve(&mut k, n, &mut rhs, 1)?;
        Mat::from_vec(d, d, rhs)
    };
    let residual = lyapunov_residual(g, c, &j);
    let tolerance = DIRECT_TOLERANCE * residual_scale(g, c, &j);
    if !(residual <= tolerance) {
        return Err(LinalgError::Residual {
            residual,
            tolerance,
        });
    }
    Ok(LyapunovSolution {
        j,
        residual,
        method: LyapunovMethod::Direct,
    })
}

/// Whether every eigenvalue of `g` has positive real part, certified by a
/// positive definite solution of `X g^T + g X = I`.
pub fn has_stable_spectrum(g: &Mat) -> bool {
    let Ok(d) = g.ensure_square() else {
        return false;
    };
    match solve_lyapunov_direct(g, &Mat::identity(d)) {
        Ok(sol) => min_sym_eig(&sol.j).is_ok_and(|l| l > 0.0),
        Err(_) => false,
    }
}

fn gramian_integrand<'a>(g: &'a Mat, c: &'a Mat) -> impl FnMut(f64, &mut [f64]) + 'a {
    let neg = -g;
    move |y, out| {
        let e = mat_exp(&neg.scale(y)).expect("finite square input checked");
        let v = &(&e * c) * &e.transpose();
        out.copy_from_slice(v.as_slice());
    }
}

/// Solves `J g^T + g J = c` as `J = int_0^inf e^{-g y} c e^{-g^T y} dy`,
/// truncated at `y_max = 40 / c_lambda`.
///
/// Independent of [`solve_lyapunov_direct`]; kept as a numerical oracle.
pub fn solve_lyapunov_quadrature(g: &Mat, c: &Mat) -> Result<LyapunovSolution, LinalgError> {
    let d = check_pair(g, c)?;
    let c_lambda = min_sym_eig(g)?;
    if !(c_lambda > 0.0) {
        return Err(LinalgError::EigenvalueFloor {
            min_sym_eig: c_lambda,
        });
    }
    let y_max = TRUNCATION / c_lambda;
    let tol = 1e-11 * 1f64.max(c.max_abs() / c_lambda);
    let v = quad::integrate(gramian_integrand(g, c), 0.0, y_max, d * d, tol).map_err(|e| {
        LinalgError::QuadratureNonConvergence {
            at: e.at,
            floor: e.floor,
        }
    })?;
    let j = Mat::from_vec(d, d, v);
    let residual = lyapunov_residual(g, c, &j);
    let tolerance = QUADRATURE_TOLERANCE * residual_scale(g, c, &j);
    if !(residual <= tolerance) {
        return Err(LinalgError::Residual {
            residual,
            tolerance,
        });
    }
    Ok(LyapunovSolution {
        j,
        residual,
        method: LyapunovMethod::Quadrature,
    })
}

/// Finite-horizon Gramian `int_0^h e^{-g y} c e^{-g^T y} dy` by quadrature.
pub fn finite_gramian_quadrature(g: &Mat, c: &Mat, horizon: f64) -> Result<Mat, LinalgError> {
    let d = check_pair(g, c)?;
    let tol = 1e-13 * 1f64.max(c.max_abs() * horizon);
    let v = quad::integrate(gramian_integrand(g, c), 0.0, horizon, d * d, tol).map_err(|e| {
        LinalgError::QuadratureNonConvergence {
            at: e.at,
            floor: e.floor,
        }
    })?;
    Ok(Mat::from_vec(d, d, v))
}
