use crate::expr::Expr;
use crate::smallmat::{min_sym_eig, Mat};

use super::{CoefficientModel, DomainBox, ExprMatrix, MatrixField, ModelError};

/// Points per axis used to check positivity of the FDR inputs.
pub const FDR_CHECK_GRID: usize = 33;

/// How `gamma` and `sigma` are tied together through `k_B T`.
#[derive(Debug, Clone)]
pub enum FdrConvention {
    /// One dimension from a diffusivity: `gamma = kT/D`, `sigma = kT sqrt(2/D)`.
    Diffusion1d { diffusion: Expr },
    /// `gamma = sigma sigma^T / kT`.
    SigmaOverKt { sigma: ExprMatrix },
    /// `sigma sigma^T = 2 kT gamma` with `sigma` the Cholesky factor of
    /// `2 kT gamma`; `gamma` must be symmetric positive definite.
    Einstein { gamma: ExprMatrix },
}

impl FdrConvention {
    pub fn name(&self) -> &'static str {
        match self {
            FdrConvention::Diffusion1d { .. } => "diffusion-1d",
            FdrConvention::SigmaOverKt { .. } => "sigma-over-kt",
            FdrConvention::Einstein { .. } => "einstein",
        }
    }
}

#[derive(Debug, Clone)]
pub enum ForceSpec {
    Explicit(ExprMatrix),
    /// `F = -grad U`.
    Potential(Expr),
}

fn grid_points(domain: &DomainBox, used: impl Fn(usize) -> bool) -> Vec<Vec<f64>> {
    let d = domain.dim();
    let mut pts = vec![Vec::new()];
    for i in 0..d {
        let axis = domain.axis_grid(i, if used(i) { FDR_CHECK_GRID } else { 1 });
        pts = pts
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    pts
}

fn matrix_uses(m: &ExprMatrix, axis: usize) -> bool {
    (0..m.rows()).any(|i| (0..m.cols()).any(|j| m.entry(i, j).depends_on(axis)))
}

/// Symbolic lower Cholesky factor of a symmetric matrix of expressions.
fn symbolic_cholesky(a: &ExprMatrix) -> ExprMatrix {
    let n = a.rows();
    let mut l: Vec<Vec<Expr>> = vec![vec![Expr::num(0.0); n]; n];
    for j in 0..n {
        let mut diag = a.entry(j, j).clone();
        for k in 0..j {
            diag = &diag - &(&l[j][k] * &l[j][k]);
        }
        l[j][j] = diag.sqrt();
        for i in j + 1..n {
            let mut s = a.entry(i, j).clone();
            for k in 0..j {
                s = &s - &(&l[i][k] * &l[j][k]);
            }
            l[i][j] = &s / &l[j][j];
        }
    }
    ExprMatrix::from_fn(n, n, a.dim(), |i, j| l[i][j].clone())
}

fn check_positive_definite(
    m: &ExprMatrix,
    domain: &DomainBox,
    what: &str,
) -> Result<(), ModelError> {
    let field = MatrixField::Symbolic(m.clone());
    for x in grid_points(domain, |i| matrix_uses(m, i)) {
        let v = field.eval("gamma", &x)?;
        let asym = v.antisym_part().max_abs();
        if asym > 1e-12 * v.max_abs().max(1.0) {
            return Err(ModelError::Invalid(format!(
                "{what} is not symmetric at {x:?}"
            )));
        }
        let lambda = min_sym_eig(&v)?;
        if !(lambda > 0.0) {
            return Err(ModelError::Invalid(format!(
                "{what} is not positive definite at {x:?} (smallest eigenvalue {lambda:e})"
            )));
        }
    }
    Ok(())
}

/// Builds a model whose friction and noise satisfy a fluctuation-dissipation
/// relation at temperature `kbt`. The convention is always explicit.
pub fn fdr_model(
    convention: &FdrConvention,
    force: &ForceSpec,
    kbt: f64,
    domain: DomainBox,
) -> Result<CoefficientModel, ModelError> {
    if !(kbt > 0.0 && kbt.is_finite()) {
        return Err(ModelError::Invalid(format!(
            "kBT must be positive, got {kbt}"
        )));
    }
    let d = domain.dim();
    let (gamma, sigma) = match convention {
        FdrConvention::Diffusion1d { diffusion } => {
            if d != 1 {
                return Err(ModelError::Shape(format!(
                    "diffusion-1d needs dimension 1, got {d}"
                )));
            }
            let dm = ExprMatrix::new(1, 1, vec![diffusion.clone()], 1);
            let field = MatrixField::Symbolic(dm);
            for x in grid_points(&domain, |_| diffusion.depends_on(0)) {
                let value = field.eval("D", &x)?[(0, 0)];
                if !(value > 0.0) {
                    return Err(ModelError::NonPositiveDiffusion { point: x, value });
                }
            }
            let kt = Expr::num(kbt);
            let gamma = &kt / diffusion;
            let sigma = &Expr::num(kbt * std::f64::consts::SQRT_2) / &diffusion.sqrt();
            (
                ExprMatrix::new(1, 1, vec![gamma], 1),
                ExprMatrix::new(1, 1, vec![sigma], 1),
            )
        }
        FdrConvention::SigmaOverKt { sigma } => {
            if sigma.rows() != d || sigma.dim() != d {
                return Err(ModelError::Shape(format!(
                    "sigma must have {d} rows over {d} coordinates"
                )));
            }
            let inv_kt = Expr::num(1.0 / kbt);
            let gamma = ExprMatrix::from_fn(d, d, d, |i, j| {
                let mut acc = Expr::num(0.0);
                for k in 0..sigma.cols() {
                    acc = &acc + &(sigma.entry(i, k) * sigma.entry(j, k));
                }
                &acc * &inv_kt
            });
            check_positive_definite(&gamma, &domain, "sigma sigma^T")?;
            (gamma, sigma.clone())
        }
        FdrConvention::Einstein { gamma } => {
            if gamma.rows() != d || gamma.cols() != d || gamma.dim() != d {
                return Err(ModelError::Shape(format!(
                    "gamma must be {d}x{d} over {d} coordinates"
                )));
            }
            check_positive_definite(gamma, &domain, "gamma")?;
            let two_kt = Expr::num(2.0 * kbt);
            let scaled = ExprMatrix::from_fn(d, d, d, |i, j| &two_kt * gamma.entry(i, j));
            (gamma.clone(), symbolic_cholesky(&scaled))
        }
    };
    let (force, potential) = match force {
        ForceSpec::Explicit(f) => (f.clone(), None),
        ForceSpec::Potential(u) => {
            let f = ExprMatrix::column((0..d).map(|i| -&u.deriv(i)).collect(), d);
            (f, Some(u.clone()))
        }
    };
    let model = CoefficientModel::symbolic(domain, force, gamma, sigma)?;
    Ok(match potential {
        Some(u) => model.with_potential(u, kbt),
        None => model,
    })
}

impl CoefficientModel {
    /// `sigma sigma^T` at `x`.
    pub fn noise_covariance(&self, x: &[f64]) -> Result<Mat, ModelError> {
        let s = self.sigma(x)?;
        Ok(&s * &s.transpose())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn zero_force(d: usize) -> ForceSpec {
        ForceSpec::Explicit(ExprMatrix::constant(&Mat::zeros(d, 1), d))
    }

    #[test]
    fn unit_diffusion() {
        let conv = FdrConvention::Diffusion1d {
            diffusion: Expr::num(1.0),
        };
        let m = fdr_model(
            &conv,
            &zero_force(1),
            1.0,
            DomainBox::cube(1, -1.0, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(m.gamma(&[0.3]).unwrap()[(0, 0)], 1.0);
        assert_eq!(m.sigma(&[0.3]).unwrap()[(0, 0)], std::f64::consts::SQRT_2);
    }

    #[test]
    fn diffusion_relation_holds_pointwise() {
        let kbt = 0.7;
        let conv = FdrConvention::Diffusion1d {
            diffusion: parse("2 + sin(x1)", 1).unwrap(),
        };
        let m = fdr_model(
            &conv,
            &zero_force(1),
            kbt,
            DomainBox::cube(1, -3.0, 3.0).unwrap(),
        )
        .unwrap();
        for &x in &[-2.0, 0.0, 1.3] {
            let g = m.gamma(&[x]).unwrap()[(0, 0)];
            let s = m.sigma(&[x]).unwrap()[(0, 0)];
            let dd: f64 = 2.0 + f64::sin(x);
            assert!((g - kbt / dd).abs() < 1e-15);
            assert!((s * s - 2.0 * kbt * g).abs() < 1e-14);
        }
    }

    #[test]
    fn sigma_over_kt_convention() {
        let kbt = 1.5;
        let s = (2.0f64 * kbt).sqrt();
        let sigma = ExprMatrix::constant(&Mat::identity(3).scale(s), 3);
        let m = fdr_model(
            &FdrConvention::SigmaOverKt { sigma },
            &zero_force(3),
            kbt,
            DomainBox::cube(3, -1.0, 1.0).unwrap(),
        )
        .unwrap();
        assert!(
            m.gamma(&[0.0; 3])
                .unwrap()
                .max_abs_diff(&Mat::identity(3).scale(2.0))
                < 1e-15
        );
    }

    #[test]
    fn einstein_convention_factorizes() {
        let kbt = 0.8;
        let gamma = ExprMatrix::parse(&[["2 + x1^2", "0.5"], ["0.5", "1 + cos(x2)^2"]], 2).unwrap();
        let m = fdr_model(
            &FdrConvention::Einstein { gamma },
            &zero_force(2),
            kbt,
            DomainBox::cube(2, -1.0, 1.0).unwrap(),
        )
        .unwrap();
        let x = [0.4, -0.9];
        let cov = m.noise_covariance(&x).unwrap();
        let g = m.gamma(&x).unwrap();
        assert!(cov.max_abs_diff(&g.scale(2.0 * kbt)) < 1e-14);
        assert_eq!(m.sigma(&x).unwrap()[(0, 1)], 0.0);
    }

    #[test]
    fn einstein_rejects_asymmetric_gamma() {
        let gamma = ExprMatrix::parse(&[["2", "1"], ["0", "2"]], 2).unwrap();
        let r = fdr_model(
            &FdrConvention::Einstein { gamma },
            &zero_force(2),
            1.0,
            DomainBox::cube(2, -1.0, 1.0).unwrap(),
        );
        assert!(matches!(r, Err(ModelError::Invalid(_))));
    }

    #[test]
    fn non_positive_diffusion_is_rejected() {
        let conv = FdrConvention::Diffusion1d {
            diffusion: parse("x1", 1).unwrap(),
        };
        let r = fdr_model(
            &conv,
            &zero_force(1),
            1.0,
            DomainBox::cube(1, -1.0, 1.0).unwrap(),
        );
        assert!(matches!(r, Err(ModelError::NonPositiveDiffusion { .. })));
    }

    #[test]
    fn potential_gives_gradient_force() {
        let conv = FdrConvention::Diffusion1d {
            diffusion: Expr::num(1.0),
        };
        let u = parse("x1^2/2", 1).unwrap();
        let m = fdr_model(
            &conv,
            &ForceSpec::Potential(u),
            1.0,
            DomainBox::cube(1, -5.0, 5.0).unwrap(),
        )
        .unwrap();
        assert_eq!(m.force(&[1.5]).unwrap(), vec![-1.5]);
        assert_eq!(m.potential().unwrap().1, 1.0);
    }
}
