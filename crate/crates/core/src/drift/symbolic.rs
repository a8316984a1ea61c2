use crate::expr::Expr;
use crate::model::CoefficientModel;

use super::DriftError;

/// Closed-form limit coefficients of a one-dimensional expression-backed
/// model, kept symbolic for display.
#[derive(Debug, Clone)]
pub struct SymbolicLimit1d {
    /// `-gamma' sigma^2 / (2 gamma^3)`.
    pub noise_drift: Expr,
    /// `F/gamma + S`.
    pub ito_drift: Expr,
    /// `sigma/gamma`.
    pub diffusion: Expr,
    /// `F/gamma - sigma sigma' / (2 gamma^2)`.
    pub stratonovich_drift: Expr,
}

pub fn symbolic_limit_1d(model: &CoefficientModel) -> Result<SymbolicLimit1d, DriftError> {
    if model.dim() != 1 || model.noise_dim() != 1 {
        return Err(DriftError::NotSymbolic1d);
    }
    let (Some(f), Some(g), Some(s)) = (
        model.force_field().symbolic(),
        model.gamma_field().symbolic(),
        model.sigma_field().symbolic(),
    ) else {
        return Err(DriftError::NotSymbolic1d);
    };
    let (f, g, s) = (f.entry(0, 0), g.entry(0, 0), s.entry(0, 0));
    let dg = g.deriv(0);
    let ds = s.deriv(0);
    let two = Expr::num(2.0);
    let three = Expr::num(3.0);
    let det = f / g;
    let noise_drift = -&(&(&dg * &(s * s)) / &(&two * &g.pow(&three)));
    let ito_drift = &det + &noise_drift;
    let stratonovich_drift = &det - &(&(s * &ds) / &(&two * &g.pow(&two)));
    Ok(SymbolicLimit1d {
        noise_drift,
        ito_drift,
        diffusion: s / g,
        stratonovich_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{noise_induced_drift, LimitSde};
    use crate::expr::parse;
    use crate::model::{DomainBox, ExprMatrix};

    #[test]
    fn matches_numeric_pipeline() {
        let p = |s: &str| ExprMatrix::new(1, 1, vec![parse(s, 1).unwrap()], 1);
        let m = CoefficientModel::symbolic(
            DomainBox::cube(1, -2.0, 2.0).unwrap(),
            p("-x1"),
            p("1 + x1^2"),
            p("1 + x1/4"),
        )
        .unwrap();
        let sym = symbolic_limit_1d(&m).unwrap();
        let sde = LimitSde::ito(&m);
        for &x in &[-1.5, 0.0, 1.0] {
            let s = noise_induced_drift(&m, &[x]).unwrap()[0];
            assert!((sym.noise_drift.eval(&[x]).unwrap() - s).abs() < 1e-14);
            assert!(
                (sym.ito_drift.eval(&[x]).unwrap() - sde.ito_drift(&[x]).unwrap()[0]).abs() < 1e-14
            );
            assert!(
                (sym.diffusion.eval(&[x]).unwrap() - sde.diffusion(&[x]).unwrap()[(0, 0)]).abs()
                    < 1e-15
            );
        }
        assert_eq!(
            sym.noise_drift.eval(&[1.0]).unwrap(),
            -2.0 * 1.25f64.powi(2) / 16.0
        );
    }
}
