use crate::drift::{Form, LimitSde};
use crate::model::{check_assumptions, CoefficientModel};
use crate::smallmat::{mat_exp, solve_lyapunov_direct, Mat};

use super::{
    map_indexed, EnsembleKind, NoiseSet, PathEnsemble, PathRecord, PathStatus, Scheme, SdeError,
    SolverConfig,
};

/// Stream of the auxiliary normals used by the full-system velocity update.
const VELOCITY_STREAM: u8 = 1;

const STIFFNESS_GRID: usize = 17;

/// Largest spectral norm of gamma over a grid of the domain box.
pub fn stiffness_bound(model: &CoefficientModel) -> Result<f64, SdeError> {
    Ok(check_assumptions(model, STIFFNESS_GRID)?.gamma_norm_max)
}

fn check_noise(
    cfg: &SolverConfig,
    noise: &NoiseSet,
    base_steps: usize,
    noise_dim: usize,
) -> Result<(), SdeError> {
    if noise.base_steps != base_steps || noise.base_dt != cfg.dt {
        return Err(SdeError::NoiseMismatch(format!(
            "noise grid has {} steps of {}, solver expects {base_steps} of {}",
            noise.base_steps, noise.base_dt, cfg.dt
        )));
    }
    if noise.noise_dim != noise_dim {
        return Err(SdeError::NoiseMismatch(format!(
            "noise has {} components, model needs {noise_dim}",
            noise.noise_dim
        )));
    }
    Ok(())
}

fn times(noise: &NoiseSet) -> Vec<f64> {
    (0..=noise.base_steps)
        .map(|k| k as f64 * noise.base_dt)
        .collect()
}

fn collect(
    kind: EnsembleKind,
    dim: usize,
    noise: &NoiseSet,
    results: Vec<Result<PathRecord, SdeError>>,
) -> Result<PathEnsemble, SdeError> {
    let paths = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(PathEnsemble {
        kind,
        dim,
        times: times(noise),
        paths,
        noise: *noise,
    })
}

/// Euler-Maruyama for the Itô limit `dx = b dt + h dW` on the fine grid of
/// `noise`, recording on the base grid.
pub fn simulate_limit(
    sde: &LimitSde,
    cfg: &SolverConfig,
    noise: &NoiseSet,
) -> Result<PathEnsemble, SdeError> {
    if sde.form() != Form::Ito {
        return Err(SdeError::WrongForm);
    }
    let model = sde.model();
    let d = model.dim();
    let base_steps = cfg.validate(d)?;
    check_noise(cfg, noise, base_steps, model.noise_dim())?;
    if !model.domain().contains(&cfg.x0) {
        return Err(SdeError::Config(format!(
            "x0 = {:?} is outside the domain box",
            cfg.x0
        )));
    }
    let cached = if model.is_constant_gamma() && model.is_constant_sigma() {
        Some(sde.point(&cfg.x0).map_err(|e| SdeError::drift(0, 0.0, e))?)
    } else {
        None
    };
    let h = noise.fine_dt();
    let stride = noise.stride();
    let results = map_indexed(cfg.paths, cfg.exec, |p| {
        let grid = noise.grid(p as u64);
        let mut x = cfg.x0.clone();
        let mut rec = Vec::with_capacity((base_steps + 1) * d);
        rec.extend_from_slice(&x);
        let mut status = PathStatus::Complete;
        for n in 0..noise.fine_steps() {
            let t = (n + 1) as f64 * h;
            let fresh;
            let (pt, b) = match &cached {
                Some(c) if model.force_field().is_constant() => (c, c.ito_drift()),
                Some(c) => {
                    let f = model
                        .force(&x)
                        .map_err(|e| SdeError::from(e).at(p, n as f64 * h))?;
                    (c, c.gamma_inv.mul_vec(&f))
                }
                None => {
                    fresh = sde
                        .point(&x)
                        .map_err(|e| SdeError::drift(p, n as f64 * h, e))?;
                    (&fresh, fresh.ito_drift())
                }
            };
            let dw = grid.increment(n);
            for i in 0..d {
                let mut dx = b[i] * h;
                for (j, w) in dw.iter().enumerate() {
                    dx += pt.diffusion[(i, j)] * w;
                }
                x[i] += dx;
            }
            if !x.iter().all(|v| v.is_finite()) {
                status = PathStatus::NonFinite { time: t };
                break;
            }
            if !model.domain().contains(&x) {
                status = PathStatus::Exited { time: t };
                break;
            }
            if (n + 1) % stride == 0 {
                rec.extend_from_slice(&x);
            }
        }
        Ok(PathRecord {
            x: rec,
            v: Vec::new(),
            ke_max: 0.0,
            status,
        })
    });
    collect(EnsembleKind::Limit, d, noise, results)
}

/// Frozen friction and noise data for one splitting step of length `h`.
struct FullStep {
    /// `e^{-gamma h / m}`.
    decay: Mat,
    /// `gamma^{-1} (I - E)`.
    relax: Mat,
    /// `Cov(v_h, W_h) / h = gamma^{-1} (I - E) sigma / h`.
    coupling: Mat,
    /// Cholesky factor of the velocity covariance left after conditioning on `W_h`.
    residual: Mat,
    /// `gamma^{-1} h`.
    gamma_inv_h: Mat,
    /// `gamma^{-1} sigma`.
    diffusion: Mat,
    /// `m gamma^{-1}`.
    inertia: Mat,
}

fn full_step(model: &CoefficientModel, x: &[f64], mass: f64, h: f64) -> Result<FullStep, SdeError> {
    let d = model.dim();
    let gamma = model.gamma(x)?;
    let sigma = model.sigma(x)?;
    let gi = gamma.inverse()?;
    let decay = mat_exp(&gamma.scale(-h / mass))?;
    let relax = &gi * &(&Mat::identity(d) - &decay);
    let cov = &sigma * &sigma.transpose();
    let stationary = solve_lyapunov_direct(&gamma, &cov)?.j.scale(1.0 / mass);
    let q = &stationary - &(&(&decay * &stationary) * &decay.transpose());
    let c = &relax * &sigma;
    let cond = (&q - &(&c * &c.transpose()).scale(1.0 / h)).sym_part();
    let tol = 1e-10 * q.max_abs().max(f64::MIN_POSITIVE);
    let residual = cond.cholesky_psd(tol)?;
    Ok(FullStep {
        relax,
        coupling: c.scale(1.0 / h),
        residual,
        gamma_inv_h: gi.scale(h),
        diffusion: &gi * &sigma,
        inertia: gi.scale(mass),
        decay,
    })
}

/// Simulates `dx = v dt`, `m dv = (F - gamma v) dt + sigma dW` on the fine
/// grid of `noise`, recording `x` and `v` on the base grid.
///
/// The splitting scheme samples the velocity exactly for coefficients frozen
/// over a step, jointly with the shared Brownian increment, and advances `x`
/// by the exact integral of that velocity.
pub fn simulate_full(
    model: &CoefficientModel,
    mass: f64,
    cfg: &SolverConfig,
    noise: &NoiseSet,
) -> Result<PathEnsemble, SdeError> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(SdeError::Config(format!(
            "mass must be positive, got {mass}"
        )));
    }
    let d = model.dim();
    let base_steps = cfg.validate(d)?;
    check_noise(cfg, noise, base_steps, model.noise_dim())?;
    if !model.domain().contains(&cfg.x0) {
        return Err(SdeError::Config(format!(
            "x0 = {:?} is outside the domain box",
            cfg.x0
        )));
    }
    let h = noise.fine_dt();
    if cfg.scheme == Scheme::Euler {
        let limit = 0.1 * mass / stiffness_bound(model)?;
        if h > limit {
            return Err(SdeError::DtGuard { dt: h, limit });
        }
    }
    let v0 = cfg.v0.clone().unwrap_or_else(|| vec![0.0; d]);
    let cached = if model.is_constant_gamma()
        && model.is_constant_sigma()
        && cfg.scheme == Scheme::Splitting
    {
        Some(full_step(model, &cfg.x0, mass, h).map_err(|e| e.at(0, 0.0))?)
    } else {
        None
    };
    let stride = noise.stride();
    let results = map_indexed(cfg.paths, cfg.exec, |p| {
        let grid = noise.grid(p as u64);
        let mut x = cfg.x0.clone();
        let mut v = v0.clone();
        let mut rx = Vec::with_capacity((base_steps + 1) * d);
        let mut rv = Vec::with_capacity((base_steps + 1) * d);
        rx.extend_from_slice(&x);
        rv.extend_from_slice(&v);
        let ke = |v: &[f64]| mass * v.iter().map(|c| c * c).sum::<f64>();
        let mut ke_max = ke(&v);
        let mut status = PathStatus::Complete;
        let mut z = vec![0.0; d];
        let mut vn = vec![0.0; d];
        for n in 0..noise.fine_steps() {
            let t0 = n as f64 * h;
            let dw = grid.increment(n);
            match cfg.scheme {
                Scheme::Splitting => {
                    let fresh;
                    let st = match &cached {
                        Some(c) => c,
                        None => {
                            fresh = full_step(model, &x, mass, h).map_err(|e| e.at(p, t0))?;
                            &fresh
                        }
                    };
                    let f = model.force(&x).map_err(|e| SdeError::from(e).at(p, t0))?;
                    for (j, zj) in z.iter_mut().enumerate() {
                        *zj = noise.auxiliary_normal(p as u64, n, j, VELOCITY_STREAM);
                    }
                    for i in 0..d {
                        let mut s = 0.0;
                        for j in 0..d {
                            s += st.relax[(i, j)] * f[j]
                                + st.decay[(i, j)] * v[j]
                                + st.residual[(i, j)] * z[j];
                        }
                        for (j, w) in dw.iter().enumerate() {
                            s += st.coupling[(i, j)] * w;
                        }
                        vn[i] = s;
                    }
                    for i in 0..d {
                        let mut dx = 0.0;
                        for j in 0..d {
                            dx += st.gamma_inv_h[(i, j)] * f[j];
                        }
                        for (j, w) in dw.iter().enumerate() {
                            dx += st.diffusion[(i, j)] * w;
                        }
                        for j in 0..d {
                            dx -= st.inertia[(i, j)] * (vn[j] - v[j]);
                        }
                        x[i] += dx;
                    }
                }
                Scheme::Euler => {
                    let g = model.gamma(&x).map_err(|e| SdeError::from(e).at(p, t0))?;
                    let s = model.sigma(&x).map_err(|e| SdeError::from(e).at(p, t0))?;
                    let f = model.force(&x).map_err(|e| SdeError::from(e).at(p, t0))?;
                    let gv = g.mul_vec(&v);
                    let sw = s.mul_vec(dw);
                    for i in 0..d {
                        vn[i] = v[i] + ((f[i] - gv[i]) * h + sw[i]) / mass;
                        x[i] += v[i] * h;
                    }
                }
            }
            std::mem::swap(&mut v, &mut vn);
            let t = t0 + h;
            if !(x.iter().chain(&v).all(|c| c.is_finite())) {
                status = PathStatus::NonFinite { time: t };
                break;
            }
            ke_max = ke_max.max(ke(&v));
            if !model.domain().contains(&x) {
                status = PathStatus::Exited { time: t };
                break;
            }
            if (n + 1) % stride == 0 {
                rx.extend_from_slice(&x);
                rv.extend_from_slice(&v);
            }
        }
        Ok(PathRecord {
            x: rx,
            v: rv,
            ke_max,
            status,
        })
    });
    collect(EnsembleKind::Full { mass }, d, noise, results)
}
