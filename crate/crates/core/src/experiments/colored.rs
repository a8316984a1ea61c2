use serde::Serialize;

use crate::drift::{noise_induced_drift, LimitSde};
use crate::expr::Expr;
use crate::model::{lift_colored_noise, CoefficientModel, ColoredNoiseSpec, DomainBox, ExprMatrix};
use crate::sde::SolverConfig;
use crate::smallmat::Mat;

use super::{sweep, ConvergenceReport, ExperimentError, SweepOptions};

/// Base coefficients and the colored noise driving them.
#[derive(Debug, Clone)]
pub struct ColoredNoiseProblem {
    pub force: ExprMatrix,
    pub friction: ExprMatrix,
    pub domain: DomainBox,
    pub spec: ColoredNoiseSpec,
}

impl ColoredNoiseProblem {
    pub fn lifted(&self) -> Result<CoefficientModel, ExperimentError> {
        Ok(lift_colored_noise(
            &self.force,
            &self.friction,
            &self.domain,
            &self.spec,
        )?)
    }
}

/// Sweeps the lifted system against its limit, comparing the base
/// coordinates only. The noise coordinates start at zero.
pub fn colored_noise_sweep(
    problem: &ColoredNoiseProblem,
    masses: &[f64],
    cfg: &SolverConfig,
    opts: &SweepOptions,
) -> Result<ConvergenceReport, ExperimentError> {
    let lifted = problem.lifted()?;
    let d = problem.domain.dim();
    let pad = |v: &[f64]| {
        let mut out = v.to_vec();
        out.resize(lifted.dim(), 0.0);
        out
    };
    if cfg.x0.len() != d {
        return Err(ExperimentError::Invalid(format!(
            "x0 has {} entries, base dimension is {d}",
            cfg.x0.len()
        )));
    }
    let mut lifted_cfg = cfg.clone();
    lifted_cfg.x0 = pad(&cfg.x0);
    lifted_cfg.v0 = cfg.v0.as_deref().map(pad);
    let mut opts = opts.clone();
    opts.axes = Some((0..d).collect());
    sweep(
        "colored-noise-sweep",
        &lifted,
        &LimitSde::ito(&lifted),
        masses,
        &lifted_cfg,
        &opts,
    )
}

/// The thermophoresis system with `theta = c / gamma(x)` and mass parameter
/// `tau`: friction `1/theta`, coupling `sqrt(2 D) / theta`, noise
/// `d eta = -2 eta / tau dt + 2 / tau dW`.
pub fn thermophoresis_problem(
    force: Expr,
    gamma: Expr,
    diffusion: Expr,
    c: f64,
    domain: DomainBox,
) -> ColoredNoiseProblem {
    let inv_theta = &gamma / &Expr::num(c);
    ColoredNoiseProblem {
        force: ExprMatrix::column(vec![force], 1),
        friction: ExprMatrix::new(1, 1, vec![Expr::num(1.0)], 1),
        domain,
        spec: ColoredNoiseSpec {
            drift: Mat::from_rows(&[[2.0]]),
            noise: Mat::from_rows(&[[2.0]]),
            tau0: 1.0,
            coupling: ExprMatrix::new(1, 1, vec![(&Expr::num(2.0) * &diffusion).sqrt()], 1),
            scale: inv_theta,
        },
    }
}

/// Lifted-limit coefficients against the closed-form thermophoresis drift.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermophoresisCheck {
    pub points: usize,
    /// Max `|S_1 - (gamma D' - 4 theta gamma' D) / (2 gamma (1 + 2 theta))|`.
    pub noise_drift_error: f64,
    /// Max `|(gamma^{-1} F)_1 - F|`.
    pub deterministic_error: f64,
    /// Max `|F - F/theta|`: the gap to a deterministic part written as `F/theta`.
    pub f_over_theta_gap: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Evaluates both sides on an `n`-point grid of the base box.
pub fn thermophoresis_check(
    force: &Expr,
    gamma: &Expr,
    diffusion: &Expr,
    c: f64,
    domain: &DomainBox,
    n: usize,
) -> Result<ThermophoresisCheck, ExperimentError> {
    const TOLERANCE: f64 = 1e-8;
    if domain.dim() != 1 {
        return Err(ExperimentError::Invalid(
            "thermophoresis is one-dimensional".into(),
        ));
    }
    let problem = thermophoresis_problem(
        force.clone(),
        gamma.clone(),
        diffusion.clone(),
        c,
        domain.clone(),
    );
    let lifted = problem.lifted()?;
    let sde = LimitSde::ito(&lifted);
    let (dg, dd) = (gamma.deriv(0), diffusion.deriv(0));
    let ev = |e: &Expr, x: f64| {
        e.eval(&[x])
            .map_err(|err| ExperimentError::Invalid(format!("{err}")))
    };
    let mut out = ThermophoresisCheck {
        points: 0,
        noise_drift_error: 0.0,
        deterministic_error: 0.0,
        f_over_theta_gap: 0.0,
        tolerance: TOLERANCE,
        passed: false,
    };
    for x in domain.axis_grid(0, n) {
        let (g, gp, d, dp, f) = (
            ev(gamma, x)?,
            ev(&dg, x)?,
            ev(diffusion, x)?,
            ev(&dd, x)?,
            ev(force, x)?,
        );
        let theta = c / g;
        let displayed = (g * dp - 4.0 * theta * gp * d) / (2.0 * g * (1.0 + 2.0 * theta));
        let s = noise_induced_drift(&lifted, &[x, 0.0])?;
        let det = sde.point(&[x, 0.0])?.deterministic[0];
        out.noise_drift_error = out.noise_drift_error.max((s[0] - displayed).abs());
        out.deterministic_error = out.deterministic_error.max((det - f).abs());
        out.f_over_theta_gap = out.f_over_theta_gap.max((f - f / theta).abs());
        out.points += 1;
    }
    out.passed = out.noise_drift_error <= TOLERANCE && out.deterministic_error <= TOLERANCE;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn thermophoresis_noise_drift_matches_the_display() {
        let dom = DomainBox::cube(1, -1.0, 1.0).unwrap();
        let (f, g, d) = (
            parse("-x1", 1).unwrap(),
            parse("1 + x1^2/2", 1).unwrap(),
            parse("1 + 0.5*sin(x1)", 1).unwrap(),
        );
        let chk = thermophoresis_check(&f, &g, &d, 0.7, &dom, 21).unwrap();
        assert!(chk.passed, "{chk:?}");
        assert!(chk.f_over_theta_gap > 0.1);
    }
}
