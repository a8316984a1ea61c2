use serde::{Deserialize, Serialize};

use crate::drift::{DriftError, LimitSde};
use crate::expr::Expr;
use crate::model::DomainBox;
use crate::quad::{integrate_scalar, kronrod15};
use crate::sde::{simulate_limit, SolverConfig};

use super::{ks_distance, ExperimentError, EXIT_THRESHOLD};

const GRID_1D: usize = 4096;
const GRID_ND: usize = 256;
const INNER_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StationaryOptions {
    /// Fraction of the horizon discarded before pooling.
    pub burn_in: f64,
    /// Pool every `thin`-th recorded time.
    pub thin: usize,
    /// Dyadic refinement of the recording grid used for integration.
    pub level: u8,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self {
            burn_in: 0.5,
            thin: 1,
            level: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryReport {
    pub samples: usize,
    pub paths: usize,
    pub exited: usize,
    pub includes_noise_drift: bool,
    /// KS distance per axis against the Gibbs marginal.
    pub ks: Vec<f64>,
    pub max_ks: f64,
    pub valid: bool,
}

/// Tabulated CDF of one marginal of `exp(-U/kT)` restricted to the box,
/// interpolated by cubic Hermite segments using the density at the nodes.
#[derive(Debug, Clone)]
pub struct GibbsMarginal {
    grid: Vec<f64>,
    cdf: Vec<f64>,
    density: Vec<f64>,
}

impl GibbsMarginal {
    pub fn cdf(&self, y: f64) -> f64 {
        let n = self.grid.len();
        if y <= self.grid[0] {
            return 0.0;
        }
        if y >= self.grid[n - 1] {
            return 1.0;
        }
        let i = self.grid.partition_point(|&g| g <= y) - 1;
        let h = self.grid[i + 1] - self.grid[i];
        let t = (y - self.grid[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * self.cdf[i]
            + (t3 - 2.0 * t2 + t) * h * self.density[i]
            + (-2.0 * t3 + 3.0 * t2) * self.cdf[i + 1]
            + (t3 - t2) * h * self.density[i + 1];
        v.clamp(0.0, 1.0)
    }
}

fn eval_u(u: &Expr, x: &[f64]) -> Result<f64, ExperimentError> {
    u.eval(x)
        .map_err(|e| ExperimentError::Invalid(format!("potential at {x:?}: {e}")))
}

/// Integrates `exp(-(U - shift)/kT)` over the axes in `free`, with the other
/// coordinates fixed in `x`.
fn integrate_out(
    u: &Expr,
    kbt: f64,
    shift: f64,
    domain: &DomainBox,
    x: &mut Vec<f64>,
    free: &[usize],
) -> Result<f64, ExperimentError> {
    let Some((&axis, rest)) = free.split_first() else {
        return Ok((-(eval_u(u, x)? - shift) / kbt).exp());
    };
    let mut err = None;
    let val = integrate_scalar(
        |t| {
            x[axis] = t;
            match integrate_out(u, kbt, shift, domain, &mut x.clone(), rest) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        },
        domain.lo()[axis],
        domain.hi()[axis],
        INNER_TOLERANCE,
    )?;
    err.map_or(Ok(val), Err)
}

/// CDF of the `axis` marginal of the Gibbs density `exp(-U/kT)` on `domain`.
pub fn gibbs_marginal(
    u: &Expr,
    kbt: f64,
    domain: &DomainBox,
    axis: usize,
) -> Result<GibbsMarginal, ExperimentError> {
    let d = domain.dim();
    if axis >= d || !(kbt > 0.0) {
        return Err(ExperimentError::Invalid(format!(
            "bad marginal request: axis {axis}, kT {kbt}"
        )));
    }
    let coarse: Vec<Vec<f64>> = (0..d)
        .map(|i| domain.axis_grid(i, if d == 1 { 1025 } else { 33 }))
        .collect();
    let mut shift = f64::INFINITY;
    let mut idx = vec![0usize; d];
    loop {
        let x: Vec<f64> = idx.iter().enumerate().map(|(i, &k)| coarse[i][k]).collect();
        shift = shift.min(eval_u(u, &x)?);
        let mut i = 0;
        while i < d {
            idx[i] += 1;
            if idx[i] < coarse[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
        if i == d {
            break;
        }
    }
    let free: Vec<usize> = (0..d).filter(|&i| i != axis).collect();
    let mid: Vec<f64> = (0..d)
        .map(|i| 0.5 * (domain.lo()[i] + domain.hi()[i]))
        .collect();
    let density = |y: f64| -> Result<f64, ExperimentError> {
        let mut x = mid.clone();
        x[axis] = y;
        integrate_out(u, kbt, shift, domain, &mut x, &free)
    };
    let n = if d == 1 { GRID_1D } else { GRID_ND };
    let grid = domain.axis_grid(axis, n + 1);
    let mut cdf = Vec::with_capacity(n + 1);
    cdf.push(0.0);
    let mut err = None;
    for w in grid.windows(2) {
        let piece = kronrod15(
            |y| match density(y) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            w[0],
            w[1],
        );
        if let Some(e) = err {
            return Err(e);
        }
        cdf.push(cdf.last().unwrap() + piece);
    }
    let total = *cdf.last().unwrap();
    if !(total > 0.0 && total.is_finite()) {
        return Err(ExperimentError::Invalid(
            "Gibbs density does not normalize on the box".into(),
        ));
    }
    cdf.iter_mut().for_each(|c| *c /= total);
    let density = grid
        .iter()
        .map(|&y| density(y).map(|v| v / total))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GibbsMarginal { grid, cdf, density })
}

/// Long-run samples of the limit SDE against the Gibbs marginals of the
/// model's potential.
pub fn stationary_check(
    sde: &LimitSde,
    cfg: &SolverConfig,
    opts: &StationaryOptions,
) -> Result<StationaryReport, ExperimentError> {
    let model = sde.model();
    let (u, kbt) = model.potential().ok_or(DriftError::MissingPotential)?;
    if !(0.0..1.0).contains(&opts.burn_in) || opts.thin == 0 {
        return Err(ExperimentError::Invalid(
            "burn_in must lie in [0, 1) and thin be positive".into(),
        ));
    }
    let noise = cfg.noise(opts.level, model.noise_dim())?;
    let ens = simulate_limit(sde, cfg, &noise)?;
    let start = ens
        .times
        .iter()
        .position(|&t| t >= opts.burn_in * cfg.t_end)
        .unwrap_or(0);
    let complete: Vec<usize> = (0..ens.paths.len())
        .filter(|&p| ens.paths[p].is_complete())
        .collect();
    let exited = ens.paths.len() - complete.len();
    let mut ks = Vec::with_capacity(model.dim());
    let mut samples = 0;
    for axis in 0..model.dim() {
        let mut pool: Vec<f64> = complete
            .iter()
            .flat_map(|&p| {
                (start..ens.times.len())
                    .step_by(opts.thin)
                    .map(move |k| (p, k))
            })
            .map(|(p, k)| ens.x(p, k)[axis])
            .collect();
        samples = pool.len();
        let marginal = gibbs_marginal(u, kbt, model.domain(), axis)?;
        ks.push(ks_distance(&mut pool, |y| marginal.cdf(y)));
    }
    Ok(StationaryReport {
        samples,
        paths: ens.paths.len(),
        exited,
        includes_noise_drift: sde.includes_noise_drift(),
        max_ks: ks.iter().copied().fold(0.0, f64::max),
        ks,
        valid: exited as f64 <= EXIT_THRESHOLD * ens.paths.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn gaussian_marginal_cdf() {
        let dom = DomainBox::cube(1, -8.0, 8.0).unwrap();
        let m = gibbs_marginal(&parse("x1^2/2", 1).unwrap(), 1.0, &dom, 0).unwrap();
        assert!((m.cdf(0.0) - 0.5).abs() < 1e-9);
        // Phi(1) = 0.841344746...
        assert!((m.cdf(1.0) - 0.841_344_746_068_543).abs() < 1e-9);
        assert!((m.cdf(1.2345) - 0.891_491_676_637_330).abs() < 1e-9);
        assert_eq!(m.cdf(-9.0), 0.0);
        assert_eq!(m.cdf(9.0), 1.0);
    }

    #[test]
    fn two_dimensional_marginal_integrates_out_the_other_axis() {
        let dom = DomainBox::cube(2, -6.0, 6.0).unwrap();
        // independent Gaussians with variances 1 and 1/4
        let m = gibbs_marginal(&parse("x1^2/2 + 2*x2^2", 2).unwrap(), 1.0, &dom, 1).unwrap();
        assert!((m.cdf(0.5) - 0.841_344_746_068_543).abs() < 1e-6);
        assert!((m.cdf(0.4) - 0.788_144_601_416_603).abs() < 1e-6);
    }
}
