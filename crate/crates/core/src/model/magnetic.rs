use crate::expr::Expr;
use crate::smallmat::Mat;

use super::{CoefficientModel, ExprMatrix, MatrixField, ModelError};

/// Lorentz force `q v x B(x)` in three dimensions.
#[derive(Debug, Clone)]
pub struct MagneticSpec {
    pub charge: f64,
    pub field: [Expr; 3],
}

/// Antisymmetric `H(x)` with `H v = -q v x B(x)`.
pub fn magnetic_matrix(spec: &MagneticSpec) -> ExprMatrix {
    let q = Expr::num(spec.charge);
    let b = |i: usize| &q * &spec.field[i];
    let zero = || Expr::num(0.0);
    let entries = vec![
        zero(),
        -&b(2),
        b(1),
        b(2),
        zero(),
        -&b(0),
        -&b(1),
        b(0),
        zero(),
    ];
    ExprMatrix::new(3, 3, entries, 3)
}

/// Replaces `gamma` by `gamma + H`; force and noise are untouched.
pub fn augment_magnetic(
    model: &CoefficientModel,
    spec: &MagneticSpec,
) -> Result<CoefficientModel, ModelError> {
    if model.dim() != 3 {
        return Err(ModelError::Shape(format!(
            "magnetic augmentation needs dimension 3, model has {}",
            model.dim()
        )));
    }
    if !spec.charge.is_finite() {
        return Err(ModelError::Invalid("charge must be finite".into()));
    }
    if spec
        .field
        .iter()
        .any(|b| b.max_axis().is_some_and(|a| a >= 3))
    {
        return Err(ModelError::Shape(
            "magnetic field uses coordinates beyond x3".into(),
        ));
    }
    let h = magnetic_matrix(spec);
    let gamma = match model.gamma_field() {
        MatrixField::Symbolic(g) => MatrixField::Symbolic(ExprMatrix::from_fn(3, 3, 3, |i, j| {
            g.entry(i, j) + h.entry(i, j)
        })),
        numeric => {
            let base = numeric.clone();
            let h = MatrixField::Symbolic(h);
            MatrixField::numeric(3, 3, move |x| {
                let g = base.eval("gamma", x)?;
                Ok(&g + &h.eval("H", x)?)
            })
        }
    };
    let mut out = CoefficientModel::new(
        model.domain().clone(),
        model.force_field().clone(),
        gamma,
        model.sigma_field().clone(),
    )?;
    out.potential = model.potential.clone();
    Ok(out)
}

impl MagneticSpec {
    /// `H(x)` evaluated at a point.
    pub fn eval(&self, x: &[f64]) -> Result<Mat, ModelError> {
        MatrixField::Symbolic(magnetic_matrix(self)).eval("H", x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::model::DomainBox;

    fn base() -> CoefficientModel {
        let g = ExprMatrix::parse(
            &[
                ["2 + sin(x1)", "0.5", "0"],
                ["0.5", "3", "x3/10"],
                ["0", "x3/10", "2"],
            ],
            3,
        )
        .unwrap();
        CoefficientModel::symbolic(
            DomainBox::cube(3, -1.0, 1.0).unwrap(),
            ExprMatrix::constant(&Mat::zeros(3, 1), 3),
            g,
            ExprMatrix::constant(&Mat::identity(3), 3),
        )
        .unwrap()
    }

    fn uniform(b: f64) -> MagneticSpec {
        MagneticSpec {
            charge: 1.0,
            field: [Expr::num(0.0), Expr::num(0.0), Expr::num(b)],
        }
    }

    fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    }

    #[test]
    fn uniform_field_matrix() {
        let b = 1.5;
        let h = uniform(b).eval(&[0.0; 3]).unwrap();
        assert_eq!(
            h,
            Mat::from_rows(&[[0.0, -b, 0.0], [b, 0.0, 0.0], [0.0, 0.0, 0.0]])
        );
    }

    #[test]
    fn matrix_reproduces_cross_product() {
        let spec = MagneticSpec {
            charge: -0.7,
            field: [
                parse("x2", 3).unwrap(),
                parse("cos(x1)", 3).unwrap(),
                parse("1 + x3^2", 3).unwrap(),
            ],
        };
        let x = [0.3, -0.2, 0.9];
        let h = spec.eval(&x).unwrap();
        let bx = [x[1], x[0].cos(), 1.0 + x[2] * x[2]];
        let v = [1.0, 2.0, -0.5];
        let hv = h.mul_vec(&v);
        let c = cross(&v, &bx);
        for i in 0..3 {
            assert!((hv[i] + spec.charge * c[i]).abs() < 1e-14);
        }
        assert_eq!(h.sym_part().max_abs(), 0.0);
    }

    #[test]
    fn zero_field_leaves_model_unchanged() {
        let m = base();
        let out = augment_magnetic(&m, &uniform(0.0)).unwrap();
        let x = [0.1, 0.2, 0.3];
        assert_eq!(out.gamma(&x).unwrap(), m.gamma(&x).unwrap());
    }

    #[test]
    fn symmetric_part_is_preserved() {
        let m = base();
        let out = augment_magnetic(&m, &uniform(2.5)).unwrap();
        let x = [0.1, -0.4, 0.6];
        let g = m.gamma(&x).unwrap();
        let gt = out.gamma(&x).unwrap();
        assert!(gt.sym_part().max_abs_diff(&g.sym_part()) < 1e-15);
        assert_eq!(out.sigma(&x).unwrap(), m.sigma(&x).unwrap());
    }

    #[test]
    fn numeric_friction_is_supported() {
        let m = base();
        let g = m.gamma_field().clone();
        let numeric = CoefficientModel::new(
            m.domain().clone(),
            m.force_field().clone(),
            MatrixField::numeric(3, 3, move |x| g.eval("gamma", x)),
            m.sigma_field().clone(),
        )
        .unwrap();
        let out = augment_magnetic(&numeric, &uniform(1.0)).unwrap();
        assert_eq!(out.gamma(&[0.0; 3]).unwrap()[(1, 0)], 1.5);
    }

    #[test]
    fn requires_three_dimensions() {
        let m = CoefficientModel::symbolic(
            DomainBox::cube(1, 0.0, 1.0).unwrap(),
            ExprMatrix::constant(&Mat::zeros(1, 1), 1),
            ExprMatrix::constant(&Mat::identity(1), 1),
            ExprMatrix::constant(&Mat::identity(1), 1),
        )
        .unwrap();
        assert!(augment_magnetic(&m, &uniform(1.0)).is_err());
    }
}
