use super::{LinalgError, Mat};

const MAX_SWEEPS: usize = 64;

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
///
/// Only the upper triangle is read; callers pass symmetric input.
pub fn sym_eigenvalues(s: &Mat) -> Result<Vec<f64>, LinalgError> {
    let n = s.ensure_square()?;
    s.ensure_finite()?;
    let mut a = s.clone();
    for i in 0..n {
        for j in 0..i {
            a[(i, j)] = a[(j, i)];
        }
    }
    let total: f64 = a.as_slice().iter().map(|x| x * x).sum();
    let tol = n as f64 * f64::EPSILON;
    let target = tol * tol * total.max(f64::MIN_POSITIVE);
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off <= target {
            let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
            ev.sort_by(|x, y| x.total_cmp(y));
            return Ok(ev);
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
            }
        }
    }
    Err(LinalgError::EigenNonConvergence)
}

/// Smallest eigenvalue of the symmetric part `(g + g^T)/2`.
pub fn min_sym_eig(g: &Mat) -> Result<f64, LinalgError> {
    let n = g.ensure_square()?;
    g.ensure_finite()?;
    let s = g.sym_part();
    match n {
        0 => Ok(f64::INFINITY),
        1 => Ok(s[(0, 0)]),
        2 => {
            let (a, b, d) = (s[(0, 0)], s[(0, 1)], s[(1, 1)]);
            let mean = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            Ok(mean - rad)
        }
        _ => Ok(sym_eigenvalues(&s)?[0]),
    }
}
