//! Adaptive Gauss-Kronrod (7/15) quadrature for vector-valued integrands.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("quadrature did not converge: subinterval width fell below {floor:e} near {at}")]
pub struct QuadError {
    pub at: f64,
    pub floor: f64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Smallest admissible subinterval, relative to the full range.
const WIDTH_FLOOR: f64 = 1.0 / (1u64 << 40) as f64;

/// One Gauss-Kronrod panel. Adds the Kronrod estimate to `acc` and returns
/// the max-abs difference to the embedded Gauss rule.
fn panel<F>(f: &mut F, a: f64, b: f64, acc: &mut [f64], buf: &mut [f64], gauss: &mut [f64]) -> f64
where
    F: FnMut(f64, &mut [f64]),
{
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let width = acc.len();
    let mut kron = vec![0.0; width];
    gauss.iter_mut().for_each(|g| *g = 0.0);
    for (k, (&x, &w)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let nodes: &[f64] = if x == 0.0 { &[0.0] } else { &[-1.0, 1.0] };
        for s in nodes {
            f(centre + s * x * half, buf);
            for i in 0..width {
                kron[i] += w * buf[i];
                if k % 2 == 1 {
                    gauss[i] += WG[k / 2] * buf[i];
                }
            }
        }
    }
    let mut err = 0.0f64;
    for i in 0..width {
        let k = kron[i] * half;
        let g = gauss[i] * half;
        let diff = (k - g).abs();
        err = if diff.is_nan() {
            f64::INFINITY
        } else {
            err.max(diff)
        };
        acc[i] += k;
    }
    err
}

/// Integrates a `width`-component integrand over `[a, b]` to absolute
/// tolerance `tol` (max-abs over components) by recursive bisection.
pub fn integrate<F>(mut f: F, a: f64, b: f64, width: usize, tol: f64) -> Result<Vec<f64>, QuadError>
where
    F: FnMut(f64, &mut [f64]),
{
    let mut total = vec![0.0; width];
    if a == b {
        return Ok(total);
    }
    let range = (b - a).abs();
    let floor = range * WIDTH_FLOOR;
    let mut buf = vec![0.0; width];
    let mut gauss = vec![0.0; width];
    let mut local = vec![0.0; width];
    // Depth-first with the left half processed first: fixed summation order.
    let mut stack = vec![(a, b)];
    while let Some((lo, hi)) = stack.pop() {
        local.iter_mut().for_each(|x| *x = 0.0);
        let err = panel(&mut f, lo, hi, &mut local, &mut buf, &mut gauss);
        let allowed = tol * (hi - lo).abs() / range;
        if err <= allowed {
            for (t, l) in total.iter_mut().zip(local.iter()) {
                *t += l;
            }
            continue;
        }
        if (hi - lo).abs() < floor {
            return Err(QuadError { at: lo, floor });
        }
        let mid = 0.5 * (lo + hi);
        stack.push((mid, hi));
        stack.push((lo, mid));
    }
    Ok(total)
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64, QuadError>
where
    F: FnMut(f64) -> f64,
{
    integrate(|x, out| out[0] = f(x), a, b, 1, tol).map(|v| v[0])
}

/// Single fixed 15-point Kronrod panel; used for many short subintervals.
pub fn kronrod15<F>(mut f: F, a: f64, b: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = WGK[7] * f(centre);
    for k in 0..7 {
        let dx = XGK[k] * half;
        sum += WGK[k] * (f(centre - dx) + f(centre + dx));
    }
    sum * half
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate_scalar(|x| 3.0 * x * x, 0.0, 2.0, 1e-14).unwrap();
        assert!((v - 8.0).abs() < 1e-13);
    }

    #[test]
    fn exponential_tail() {
        let v = integrate_scalar(|y| 2.0 * (-2.0 * y).exp(), 0.0, 40.0, 1e-13).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vector_valued() {
        let v = integrate(
            |x, out| {
                out[0] = x.sin();
                out[1] = x.cos();
            },
            0.0,
            std::f64::consts::PI,
            2,
            1e-13,
        )
        .unwrap();
        assert!((v[0] - 2.0).abs() < 1e-12);
        assert!(v[1].abs() < 1e-12);
    }

    #[test]
    fn fixed_panel_gaussian() {
        let v = kronrod15(|x| (-x * x).exp(), -0.1, 0.1);
        let exact = 0.199_335_328_580_672_68; // sqrt(pi) erf(0.1)
        assert!((v - exact).abs() < 1e-15);
    }

    #[test]
    fn non_finite_integrand_hits_floor() {
        let r = integrate_scalar(
            |x| if (x - 0.5).abs() < 0.1 { f64::NAN } else { 1.0 },
            0.0,
            1.0,
            1e-12,
        );
        assert!(r.is_err());
    }
}
