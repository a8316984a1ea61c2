//! The limiting first-order SDE: noise-induced drift, Itô and Stratonovich
//! drifts, and a stationarity check against the Gibbs density.

mod gibbs;
mod symbolic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CoefficientModel, ModelError, DEFAULT_FLOOR};
use crate::smallmat::{has_stable_spectrum, min_sym_eig, solve_lyapunov_direct, LinalgError, Mat};

pub use gibbs::gibbs_drift_check;
pub use symbolic::{symbolic_limit_1d, SymbolicLimit1d};

/// Absolute tolerance on the asymmetry of gamma and on `[gamma, sigma]`.
pub const COMMUTATOR_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DriftError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("friction eigenvalue floor violated at {point:?}: smallest symmetric eigenvalue {min_sym_eig:e} <= {floor:e}")]
    EigenvalueFloor {
        point: Vec<f64>,
        min_sym_eig: f64,
        floor: f64,
    },
    #[error("commuting Stratonovich shortcut requested but gamma and sigma do not commute at {point:?} (defect {defect:e})")]
    NotCommuting { point: Vec<f64>, defect: f64 },
    #[error("force is not -grad U at {point:?} (mismatch {mismatch:e})")]
    NonConservative { point: Vec<f64>, mismatch: f64 },
    #[error("model carries no potential; build it from a potential to check stationarity")]
    MissingPotential,
    #[error("symbolic formulas need a one-dimensional expression-backed model")]
    NotSymbolic1d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    #[default]
    Ito,
    Stratonovich,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StratonovichRoute {
    /// Shortcut when gamma is symmetric and commutes with sigma on the
    /// sampled box, the general conversion otherwise.
    #[default]
    Auto,
    Commuting,
    General,
}

/// Everything the limit SDE needs at one point.
#[derive(Debug, Clone)]
pub struct LimitPoint {
    pub gamma_inv: Mat,
    /// `gamma^{-1} F`.
    pub deterministic: Vec<f64>,
    /// Noise-induced drift.
    pub noise_drift: Vec<f64>,
    /// `gamma^{-1} sigma`.
    pub diffusion: Mat,
}

impl LimitPoint {
    pub fn ito_drift(&self) -> Vec<f64> {
        self.deterministic
            .iter()
            .zip(&self.noise_drift)
            .map(|(a, b)| a + b)
            .collect()
    }
}

/// Accepts `gamma` when its symmetric part clears the floor or, failing that,
/// when its whole spectrum lies in the right half plane.
fn checked_inverse(x: &[f64], gamma: &Mat) -> Result<Mat, DriftError> {
    let lambda = min_sym_eig(gamma)?;
    if !(lambda > DEFAULT_FLOOR) && !has_stable_spectrum(gamma) {
        return Err(DriftError::EigenvalueFloor {
            point: x.to_vec(),
            min_sym_eig: lambda,
            floor: DEFAULT_FLOOR,
        });
    }
    Ok(gamma.inverse()?)
}

/// `d(gamma^{-1})/dx_l = -gamma^{-1} (d gamma/dx_l) gamma^{-1}`.
fn dgamma_inv(
    model: &CoefficientModel,
    x: &[f64],
    gamma_inv: &Mat,
    axis: usize,
) -> Result<Mat, DriftError> {
    let dg = model.dgamma(x, axis)?;
    Ok(-&(&(gamma_inv * &dg) * gamma_inv))
}

fn contract_noise_drift(
    model: &CoefficientModel,
    x: &[f64],
    gamma: &Mat,
    gamma_inv: &Mat,
    sigma: &Mat,
) -> Result<Vec<f64>, DriftError> {
    let d = model.dim();
    let mut s = vec![0.0; d];
    if model.is_constant_gamma() {
        return Ok(s);
    }
    let c = sigma * &sigma.transpose();
    let j = solve_lyapunov_direct(gamma, &c)?.j;
    for l in 0..d {
        let di = dgamma_inv(model, x, gamma_inv, l)?;
        for (i, si) in s.iter_mut().enumerate() {
            for jj in 0..d {
                *si += di[(i, jj)] * j[(jj, l)];
            }
        }
    }
    Ok(s)
}

/// `S_i(x) = d/dx_l [(gamma^{-1})_{ij}] J_{jl}` with `J gamma^T + gamma J = sigma sigma^T`.
pub fn noise_induced_drift(model: &CoefficientModel, x: &[f64]) -> Result<Vec<f64>, DriftError> {
    let gamma = model.gamma(x)?;
    let gamma_inv = checked_inverse(x, &gamma)?;
    let sigma = model.sigma(x)?;
    contract_noise_drift(model, x, &gamma, &gamma_inv, &sigma)
}

/// The limit `dx = (gamma^{-1} F + S) dt + gamma^{-1} sigma dW` of a model.
#[derive(Debug, Clone)]
pub struct LimitSde {
    model: CoefficientModel,
    form: Form,
    route: StratonovichRoute,
    include_noise_drift: bool,
    commuting: bool,
}

/// Builds the limit SDE in the requested form. For the Stratonovich form the
/// commuting shortcut is used when it applies on the sampled box.
pub fn limit_sde(model: &CoefficientModel, form: Form) -> Result<LimitSde, DriftError> {
    LimitSde::new(model.clone(), form, StratonovichRoute::Auto)
}

const COMMUTE_GRID: usize = 9;

fn commuting_defect(model: &CoefficientModel, x: &[f64]) -> Result<f64, DriftError> {
    let g = model.gamma(x)?;
    let s = model.sigma(x)?;
    if s.rows() != s.cols() {
        return Ok(f64::INFINITY);
    }
    let asym = g.max_abs_diff(&g.transpose());
    let comm = (&g * &s).max_abs_diff(&(&s * &g));
    Ok(asym.max(comm))
}

/// Worst defect and where it occurs, over a tensor grid of the box.
fn sampled_commuting_defect(model: &CoefficientModel) -> Result<(f64, Vec<f64>), DriftError> {
    let domain = model.domain();
    let d = model.dim();
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|i| domain.axis_grid(i, if model.uses_axis(i) { COMMUTE_GRID } else { 1 }))
        .collect();
    let mut idx = vec![0usize; d];
    let mut worst = (0.0, Vec::new());
    loop {
        let x: Vec<f64> = (0..d).map(|i| axes[i][idx[i]]).collect();
        let defect = commuting_defect(model, &x)?;
        if defect > worst.0 || worst.1.is_empty() {
            worst = (defect, x);
        }
        let mut i = d;
        loop {
            if i == 0 {
                return Ok(worst);
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < axes[i].len() {
                break;
            }
            idx[i] = 0;
        }
    }
}

impl LimitSde {
    pub fn new(
        model: CoefficientModel,
        form: Form,
        route: StratonovichRoute,
    ) -> Result<Self, DriftError> {
        let commuting = match (form, route) {
            (Form::Ito, _) | (_, StratonovichRoute::General) => false,
            (Form::Stratonovich, StratonovichRoute::Commuting) => {
                let (defect, point) = sampled_commuting_defect(&model)?;
                if defect > COMMUTATOR_TOLERANCE {
                    return Err(DriftError::NotCommuting { point, defect });
                }
                true
            }
            (Form::Stratonovich, StratonovichRoute::Auto) => {
                sampled_commuting_defect(&model)?.0 <= COMMUTATOR_TOLERANCE
            }
        };
        Ok(Self {
            model,
            form,
            route,
            include_noise_drift: true,
            commuting,
        })
    }

    /// Itô limit with the noise-induced drift.
    pub fn ito(model: &CoefficientModel) -> Self {
        Self {
            model: model.clone(),
            form: Form::Ito,
            route: StratonovichRoute::Auto,
            include_noise_drift: true,
            commuting: false,
        }
    }

    /// The same SDE with the noise-induced drift dropped, i.e. the naive
    /// limit `dx = gamma^{-1} F dt + gamma^{-1} sigma dW`.
    pub fn without_noise_induced_drift(mut self) -> Self {
        self.include_noise_drift = false;
        self
    }

    pub fn model(&self) -> &CoefficientModel {
        &self.model
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn route(&self) -> StratonovichRoute {
        self.route
    }

    /// Whether the Stratonovich drift uses the commuting shortcut.
    pub fn uses_commuting_shortcut(&self) -> bool {
        self.commuting
    }

    pub fn includes_noise_drift(&self) -> bool {
        self.include_noise_drift
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.model.noise_dim()
    }

    pub fn point(&self, x: &[f64]) -> Result<LimitPoint, DriftError> {
        let gamma = self.model.gamma(x)?;
        let gamma_inv = checked_inverse(x, &gamma)?;
        let sigma = self.model.sigma(x)?;
        let f = self.model.force(x)?;
        let noise_drift = if self.include_noise_drift {
            contract_noise_drift(&self.model, x, &gamma, &gamma_inv, &sigma)?
        } else {
            vec![0.0; self.model.dim()]
        };
        Ok(LimitPoint {
            deterministic: gamma_inv.mul_vec(&f),
            diffusion: &gamma_inv * &sigma,
            gamma_inv,
            noise_drift,
        })
    }

    /// Itô drift `gamma^{-1} F + S`.
    pub fn ito_drift(&self, x: &[f64]) -> Result<Vec<f64>, DriftError> {
        Ok(self.point(x)?.ito_drift())
    }

    /// Diffusion matrix `h = gamma^{-1} sigma`.
    pub fn diffusion(&self, x: &[f64]) -> Result<Mat, DriftError> {
        let gamma = self.model.gamma(x)?;
        let gamma_inv = checked_inverse(x, &gamma)?;
        Ok(&gamma_inv * &self.model.sigma(x)?)
    }

    /// Drift in this SDE's own form.
    pub fn drift(&self, x: &[f64]) -> Result<Vec<f64>, DriftError> {
        match self.form {
            Form::Ito => self.ito_drift(x),
            Form::Stratonovich => self.stratonovich_drift(x),
        }
    }

    /// `d h / d x_k` with `h = gamma^{-1} sigma`.
    fn dh(&self, x: &[f64], p: &LimitPoint, k: usize) -> Result<Mat, DriftError> {
        let sigma = self.model.sigma(x)?;
        let dsigma = self.model.dsigma(x, k)?;
        let mut out = &p.gamma_inv * &dsigma;
        if !self.model.is_constant_gamma() {
            let di = dgamma_inv(&self.model, x, &p.gamma_inv, k)?;
            out += &(&di * &sigma);
        }
        Ok(out)
    }

    /// `c_i = -1/2 sum_{k,j} (d_k h_ij) h_kj`, the Itô to Stratonovich
    /// drift correction.
    pub fn stratonovich_correction(&self, x: &[f64]) -> Result<Vec<f64>, DriftError> {
        let p = self.point(x)?;
        self.correction_at(x, &p)
    }

    fn correction_at(&self, x: &[f64], p: &LimitPoint) -> Result<Vec<f64>, DriftError> {
        let d = self.model.dim();
        let kdim = self.model.noise_dim();
        let h = &p.diffusion;
        let mut c = vec![0.0; d];
        for k in 0..d {
            let dh = self.dh(x, p, k)?;
            for (i, ci) in c.iter_mut().enumerate() {
                for j in 0..kdim {
                    *ci -= 0.5 * dh[(i, j)] * h[(k, j)];
                }
            }
        }
        Ok(c)
    }

    /// `S-bar_i = -1/2 (gamma^{-1})_{il} (d_k sigma_{lj}) (gamma^{-1})_{km} sigma_{mj}`.
    fn commuting_noise_drift(&self, x: &[f64], p: &LimitPoint) -> Result<Vec<f64>, DriftError> {
        let d = self.model.dim();
        let kdim = self.model.noise_dim();
        let h = &p.diffusion;
        let mut inner = vec![0.0; d];
        for k in 0..d {
            let ds = self.model.dsigma(x, k)?;
            for (l, v) in inner.iter_mut().enumerate() {
                for j in 0..kdim {
                    *v += ds[(l, j)] * h[(k, j)];
                }
            }
        }
        Ok(p.gamma_inv
            .mul_vec(&inner)
            .into_iter()
            .map(|v| -0.5 * v)
            .collect())
    }

    /// Stratonovich drift of the same limit process.
    pub fn stratonovich_drift(&self, x: &[f64]) -> Result<Vec<f64>, DriftError> {
        let p = self.point(x)?;
        if self.commuting && self.include_noise_drift {
            let sbar = self.commuting_noise_drift(x, &p)?;
            return Ok(p
                .deterministic
                .iter()
                .zip(&sbar)
                .map(|(a, b)| a + b)
                .collect());
        }
        let c = self.correction_at(x, &p)?;
        Ok(p.ito_drift().iter().zip(&c).map(|(a, b)| a + b).collect())
    }

    /// Itô drift recovered from a Stratonovich drift at `x`.
    pub fn stratonovich_to_ito(&self, x: &[f64], strat: &[f64]) -> Result<Vec<f64>, DriftError> {
        let c = self.stratonovich_correction(x)?;
        Ok(strat.iter().zip(&c).map(|(a, b)| a - b).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::model::{fdr_model, DomainBox, ExprMatrix, FdrConvention, ForceSpec};

    fn model_1d(gamma: &str, sigma: &str, force: &str) -> CoefficientModel {
        let p = |s: &str| ExprMatrix::new(1, 1, vec![parse(s, 1).unwrap()], 1);
        CoefficientModel::symbolic(
            DomainBox::cube(1, -3.0, 3.0).unwrap(),
            p(force),
            p(gamma),
            p(sigma),
        )
        .unwrap()
    }

    #[test]
    fn quadratic_friction_closed_form() {
        let m = model_1d("1 + x1^2", "1", "0");
        let s = noise_induced_drift(&m, &[1.0]).unwrap();
        assert!((s[0] + 0.125).abs() < 1e-15);
    }

    #[test]
    fn constant_friction_has_no_noise_drift() {
        let m = model_1d("3", "1 + x1^2", "-x1");
        assert_eq!(noise_induced_drift(&m, &[0.7]).unwrap(), vec![0.0]);
    }

    #[test]
    fn diffusion_gradient_gives_derivative_of_d() {
        let d = parse("1 + tanh(x1)/2", 1).unwrap();
        let m = fdr_model(
            &FdrConvention::Diffusion1d {
                diffusion: d.clone(),
            },
            &ForceSpec::Explicit(ExprMatrix::constant(&Mat::zeros(1, 1), 1)),
            1.0,
            DomainBox::cube(1, 0.0, 4.0).unwrap(),
        )
        .unwrap();
        for &x in &[0.1, 1.0, 2.5] {
            let s = noise_induced_drift(&m, &[x]).unwrap()[0];
            let dd = d.deriv(0).eval(&[x]).unwrap();
            assert!((s - dd).abs() < 1e-12, "{s} vs {dd}");
        }
    }

    #[test]
    fn colored_noise_first_component() {
        // k = a = lambda = 1, f = x1, at x1 = 2: S_1 = lambda f' f / (a^2 (1 + k a)) = 1
        let g = ExprMatrix::parse(&[["1", "-x1"], ["0", "1"]], 2).unwrap();
        let s = ExprMatrix::parse(&[["0"], ["sqrt(2)"]], 2).unwrap();
        let f = ExprMatrix::parse(&[["0"], ["0"]], 2).unwrap();
        let m =
            CoefficientModel::symbolic(DomainBox::cube(2, -3.0, 3.0).unwrap(), f, g, s).unwrap();
        let sd = noise_induced_drift(&m, &[2.0, 0.0]).unwrap();
        assert!((sd[0] - 1.0).abs() < 1e-13, "{sd:?}");
    }

    #[test]
    fn eigenvalue_floor_is_reported() {
        let m = model_1d("x1", "1", "0");
        assert!(matches!(
            noise_induced_drift(&m, &[-1.0]),
            Err(DriftError::EigenvalueFloor { .. })
        ));
    }

    #[test]
    fn stratonovich_1d_formula() {
        let m = model_1d("2 + sin(x1)", "1 + x1^2/4", "-x1");
        let sde = limit_sde(&m, Form::Stratonovich).unwrap();
        assert!(sde.uses_commuting_shortcut());
        let general =
            LimitSde::new(m.clone(), Form::Stratonovich, StratonovichRoute::General).unwrap();
        for &x in &[-1.0, 0.3, 2.0] {
            let g: f64 = 2.0 + f64::sin(x);
            let s = 1.0 + x * x / 4.0;
            let ds = x / 2.0;
            let expect = -x / g - s * ds / (2.0 * g * g);
            assert!((sde.drift(&[x]).unwrap()[0] - expect).abs() < 1e-14);
            assert!((general.drift(&[x]).unwrap()[0] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_sigma_commuting_drift_vanishes() {
        let m = model_1d("2 + sin(x1)", "0.7", "0");
        let sde = limit_sde(&m, Form::Stratonovich).unwrap();
        assert_eq!(sde.drift(&[0.4]).unwrap(), vec![0.0]);
    }

    #[test]
    fn commuting_route_rejects_non_commuting_models() {
        let g = ExprMatrix::parse(&[["2", "0"], ["0", "1"]], 2).unwrap();
        let s = ExprMatrix::parse(&[["1", "x1"], ["0", "1"]], 2).unwrap();
        let f = ExprMatrix::parse(&[["0"], ["0"]], 2).unwrap();
        let m =
            CoefficientModel::symbolic(DomainBox::cube(2, -1.0, 1.0).unwrap(), f, g, s).unwrap();
        let r = LimitSde::new(m.clone(), Form::Stratonovich, StratonovichRoute::Commuting);
        assert!(matches!(r, Err(DriftError::NotCommuting { .. })));
        assert!(!limit_sde(&m, Form::Stratonovich)
            .unwrap()
            .uses_commuting_shortcut());
    }

    #[test]
    fn round_trip_conversion() {
        let g =
            ExprMatrix::parse(&[["2 + sin(x1)", "x2/4"], ["-x2/4", "3 + cos(x1*x2)"]], 2).unwrap();
        let s = ExprMatrix::parse(&[["1 + x2^2/3", "0.2"], ["x1/5", "1"]], 2).unwrap();
        let f = ExprMatrix::parse(&[["-x1"], ["-x2^3"]], 2).unwrap();
        let m =
            CoefficientModel::symbolic(DomainBox::cube(2, -1.0, 1.0).unwrap(), f, g, s).unwrap();
        let sde = limit_sde(&m, Form::Stratonovich).unwrap();
        let x = [0.3, -0.6];
        let strat = sde.drift(&x).unwrap();
        let back = sde.stratonovich_to_ito(&x, &strat).unwrap();
        let ito = sde.ito_drift(&x).unwrap();
        for i in 0..2 {
            assert!((back[i] - ito[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn dropping_the_noise_drift() {
        let m = model_1d("1 + x1^2", "1", "0");
        let sde = LimitSde::ito(&m).without_noise_induced_drift();
        assert_eq!(sde.ito_drift(&[1.0]).unwrap(), vec![0.0]);
    }
}
