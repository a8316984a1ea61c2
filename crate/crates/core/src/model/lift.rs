use crate::expr::Expr;
use crate::smallmat::{has_stable_spectrum, Mat};

use super::{CoefficientModel, DomainBox, ExprMatrix, ModelError};

/// Bound used for the box of the lifted noise coordinates, which the
/// coefficients never depend on.
pub const LIFTED_AXIS_BOUND: f64 = 1e6;

/// Ornstein-Uhlenbeck forcing `d eta = -(A/tau) eta dt + (lambda/tau) dW`
/// with `tau = tau0 * m`, entering the force through `coupling(x) eta`.
#[derive(Debug, Clone)]
pub struct ColoredNoiseSpec {
    /// `A`, `k x k`.
    pub drift: Mat,
    /// `lambda`, `k x l`.
    pub noise: Mat,
    pub tau0: f64,
    /// `f(x)`, `d x k`, over the base coordinates.
    pub coupling: ExprMatrix,
    /// Scalar factor multiplying the base force, friction and coupling.
    pub scale: Expr,
}

fn check_stable(a: &Mat) -> Result<(), ModelError> {
    if has_stable_spectrum(a) {
        Ok(())
    } else {
        Err(ModelError::Invalid(
            "colored-noise drift A must have eigenvalues with positive real part".into(),
        ))
    }
}

/// Lifts a colored-noise driven system to white noise on `(x, zeta)` with
/// velocity `(v, eta)`:
///
/// ```text
/// gamma = [[gamma_b s, -f s], [0, A/tau0]]
/// sigma = [[0], [lambda/tau0]]
/// F     = (F_b s, 0)
/// ```
///
/// The lifted model has dimension `d + k` and noise dimension `l`.
pub fn lift_colored_noise(
    force: &ExprMatrix,
    friction: &ExprMatrix,
    domain: &DomainBox,
    spec: &ColoredNoiseSpec,
) -> Result<CoefficientModel, ModelError> {
    let d = domain.dim();
    let k = spec.drift.rows();
    let l = spec.noise.cols();
    if force.rows() != d || force.cols() != 1 {
        return Err(ModelError::Shape(format!("base force must be {d}x1")));
    }
    if friction.rows() != d || friction.cols() != d {
        return Err(ModelError::Shape(format!("base friction must be {d}x{d}")));
    }
    if !spec.drift.is_square() || k == 0 {
        return Err(ModelError::Shape(
            "colored-noise drift A must be square".into(),
        ));
    }
    if spec.noise.rows() != k || l == 0 {
        return Err(ModelError::Shape(format!(
            "colored-noise lambda must have {k} rows"
        )));
    }
    if spec.coupling.rows() != d || spec.coupling.cols() != k {
        return Err(ModelError::Shape(format!(
            "coupling f is {}x{}, expected {d}x{k} to match A",
            spec.coupling.rows(),
            spec.coupling.cols()
        )));
    }
    if spec.scale.max_axis().is_some_and(|a| a >= d) {
        return Err(ModelError::Shape(
            "scale depends on a non-base coordinate".into(),
        ));
    }
    if !(spec.tau0 > 0.0 && spec.tau0.is_finite()) {
        return Err(ModelError::Invalid(format!(
            "tau0 must be positive, got {}",
            spec.tau0
        )));
    }
    if !spec.drift.is_finite() || !spec.noise.is_finite() {
        return Err(ModelError::Invalid(
            "colored-noise matrices must be finite".into(),
        ));
    }
    check_stable(&spec.drift)?;

    let n = d + k;
    let s = &spec.scale;
    let inv_tau = 1.0 / spec.tau0;
    let gamma = ExprMatrix::from_fn(n, n, n, |i, j| match (i < d, j < d) {
        (true, true) => friction.entry(i, j) * s,
        (true, false) => -(spec.coupling.entry(i, j - d) * s),
        (false, true) => Expr::num(0.0),
        (false, false) => Expr::num(spec.drift[(i - d, j - d)] * inv_tau),
    });
    let sigma = ExprMatrix::from_fn(n, l, n, |i, j| {
        if i < d {
            Expr::num(0.0)
        } else {
            Expr::num(spec.noise[(i - d, j)] * inv_tau)
        }
    });
    let f = ExprMatrix::from_fn(n, 1, n, |i, _| {
        if i < d {
            force.entry(i, 0) * s
        } else {
            Expr::num(0.0)
        }
    });
    let lifted = DomainBox::cube(k, -LIFTED_AXIS_BOUND, LIFTED_AXIS_BOUND)?;
    CoefficientModel::symbolic(domain.product(&lifted), f, gamma, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn e(s: &str, dim: usize) -> Expr {
        parse(s, dim).unwrap()
    }

    fn ou_spec(k: f64, a: f64, lambda: f64, f: &str) -> ColoredNoiseSpec {
        ColoredNoiseSpec {
            drift: Mat::from_rows(&[[a]]),
            noise: Mat::from_rows(&[[(2.0 * lambda).sqrt()]]),
            tau0: 1.0,
            coupling: ExprMatrix::new(1, 1, vec![e(f, 1)], 1),
            scale: Expr::num(1.0 / k),
        }
    }

    fn base() -> (ExprMatrix, ExprMatrix, DomainBox) {
        (
            ExprMatrix::new(1, 1, vec![e("-x1", 1)], 1),
            ExprMatrix::new(1, 1, vec![Expr::num(1.0)], 1),
            DomainBox::cube(1, -2.0, 2.0).unwrap(),
        )
    }

    #[test]
    fn constant_friction_example_blocks() {
        let (k, a, lambda) = (2.0, 3.0, 0.5);
        let (force, friction, domain) = base();
        let m = lift_colored_noise(
            &force,
            &friction,
            &domain,
            &ou_spec(k, a, lambda, "sin(x1)"),
        )
        .unwrap();
        let x = [0.7, 11.0];
        let g = m.gamma(&x).unwrap();
        let fx = 0.7f64.sin();
        let expect = Mat::from_rows(&[[1.0 / k, -fx / k], [0.0, a]]);
        assert!(g.max_abs_diff(&expect) < 1e-15, "{g}");
        assert_eq!(m.sigma(&x).unwrap(), Mat::from_rows(&[[0.0], [1.0]]));
        assert_eq!(m.force(&x).unwrap(), vec![-0.7 / k, 0.0]);
        assert_eq!(m.dim(), 2);
        assert_eq!(m.noise_dim(), 1);
        // d gamma / d x1 = [[0, -cos(x)/k], [0, 0]]
        let dg = m.dgamma(&x, 0).unwrap();
        assert!((dg[(0, 1)] + 0.7f64.cos() / k).abs() < 1e-15);
        assert!(m.dgamma(&x, 1).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn thermophoresis_blocks() {
        // theta(x) = 1 + x^2 / 2, D(x) = 1 + x^2, A = 2, noise 2
        let spec = ColoredNoiseSpec {
            drift: Mat::from_rows(&[[2.0]]),
            noise: Mat::from_rows(&[[2.0]]),
            tau0: 1.0,
            coupling: ExprMatrix::new(1, 1, vec![e("sqrt(2*(1 + x1^2))", 1)], 1),
            scale: e("1/(1 + x1^2/2)", 1),
        };
        let (force, friction, domain) = base();
        let m = lift_colored_noise(&force, &friction, &domain, &spec).unwrap();
        let x = 0.4f64;
        let theta = 1.0 + x * x / 2.0;
        let dd = 1.0 + x * x;
        let g = m.gamma(&[x, 0.0]).unwrap();
        let expect = Mat::from_rows(&[[1.0 / theta, -(2.0 * dd).sqrt() / theta], [0.0, 2.0]]);
        assert!(g.max_abs_diff(&expect) < 1e-15);
        assert_eq!(m.sigma(&[x, 0.0]).unwrap(), Mat::from_rows(&[[0.0], [2.0]]));
    }

    #[test]
    fn zero_coupling_decouples() {
        let (force, friction, domain) = base();
        let m =
            lift_colored_noise(&force, &friction, &domain, &ou_spec(1.0, 1.0, 1.0, "0")).unwrap();
        let g = m.gamma(&[0.3, 5.0]).unwrap();
        assert_eq!(g[(0, 1)], 0.0);
        // x-drift gamma^{-1} F is the deterministic flow
        let gi = g.inverse().unwrap();
        let b = gi.mul_vec(&m.force(&[0.3, 5.0]).unwrap());
        assert!((b[0] + 0.3).abs() < 1e-15);
        assert_eq!(b[1], 0.0);
    }

    #[test]
    fn tau0_scales_the_noise_block() {
        let (force, friction, domain) = base();
        let mut spec = ou_spec(1.0, 2.0, 0.5, "1");
        spec.tau0 = 0.5;
        let m = lift_colored_noise(&force, &friction, &domain, &spec).unwrap();
        assert_eq!(m.gamma(&[0.0, 0.0]).unwrap()[(1, 1)], 4.0);
        assert_eq!(m.sigma(&[0.0, 0.0]).unwrap()[(1, 0)], 2.0);
    }

    #[test]
    fn rejects_mismatched_coupling_and_unstable_drift() {
        let (force, friction, domain) = base();
        let mut spec = ou_spec(1.0, 1.0, 1.0, "x1");
        spec.coupling = ExprMatrix::new(1, 2, vec![e("1", 1), e("1", 1)], 1);
        assert!(matches!(
            lift_colored_noise(&force, &friction, &domain, &spec),
            Err(ModelError::Shape(_))
        ));
        let spec = ou_spec(1.0, -1.0, 1.0, "x1");
        assert!(matches!(
            lift_colored_noise(&force, &friction, &domain, &spec),
            Err(ModelError::Invalid(_))
        ));
    }
}
