use super::{LinalgError, Mat};

/// Degree of the diagonal Pade approximant applied after scaling.
const PADE_DEGREE: usize = 8;
/// Scaling target for the 1-norm before the Pade step.
const SCALED_NORM: f64 = 0.5;

/// Matrix exponential by scaling and squaring with a diagonal Pade core.
pub fn mat_exp(a: &Mat) -> Result<Mat, LinalgError> {
    let n = a.ensure_square()?;
    a.ensure_finite()?;
    if n == 1 {
        return Ok(Mat::from_rows(&[[a[(0, 0)].exp()]]));
    }
    let norm = a.norm_one();
    if norm == 0.0 {
        return Ok(Mat::identity(n));
    }
    let squarings = if norm > SCALED_NORM {
        (norm / SCALED_NORM).log2().ceil() as i32
    } else {
        0
    };
    let x = a.scale(0.5f64.powi(squarings));

    let mut coeffs = [0.0; PADE_DEGREE + 1];
    coeffs[0] = 1.0;
    let q = PADE_DEGREE as f64;
    for k in 1..=PADE_DEGREE {
        let kf = k as f64;
        coeffs[k] = coeffs[k - 1] * (q - kf + 1.0) / (kf * (2.0 * q - kf + 1.0));
    }

    let mut num = Mat::identity(n);
    let mut den = Mat::identity(n);
    let mut power = Mat::identity(n);
    for (k, c) in coeffs.iter().enumerate().skip(1) {
        power = &power * &x;
        let term = power.scale(*c);
        num += &term;
        if k % 2 == 0 {
            den += &term;
        } else {
            den = &den - &term;
        }
    }
    let mut r = den.solve(&num)?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}
