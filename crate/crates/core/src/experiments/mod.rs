//! Mass sweeps on coupled noise, colored-noise sweeps and long-run
//! stationarity checks.

mod colored;
mod stationary;
mod stats;

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drift::{DriftError, LimitSde};
use crate::model::{CoefficientModel, ModelError};
use crate::quad::QuadError;
use crate::sde::{
    kinetic_energy_stats, resolution_level, simulate_full, simulate_limit, stiffness_bound,
    NoiseSet, PathEnsemble, SdeError, SolverConfig,
};

pub use colored::{
    colored_noise_sweep, thermophoresis_check, thermophoresis_problem, ColoredNoiseProblem,
    ThermophoresisCheck,
};
pub use stationary::{
    gibbs_marginal, stationary_check, GibbsMarginal, StationaryOptions, StationaryReport,
};
pub use stats::{batch_estimate, fit_log_slope, ks_distance, Estimate, SlopeFit};

/// Largest admissible fraction of exited paths.
pub const EXIT_THRESHOLD: f64 = 0.01;
pub const DEFAULT_BATCHES: usize = 20;

/// Seed offset for the limit ensemble in the independent-noise control.
const INDEPENDENT_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Sde(#[from] SdeError),
    #[error(transparent)]
    Drift(#[from] DriftError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("masses must be positive and strictly decreasing, got {0:?}")]
    Masses(Vec<f64>),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseCoupling {
    /// Full and limit ensembles use the same Wiener paths.
    #[default]
    Shared,
    /// The limit ensemble uses an unrelated seed (negative control).
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    pub coupling: NoiseCoupling,
    pub batches: usize,
    /// Also compare against the limit with the noise-induced drift removed.
    pub compare_without_noise_drift: bool,
    /// Coordinates entering `|x^m - x|^2`; all when `None`.
    pub axes: Option<Vec<usize>>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            coupling: NoiseCoupling::Shared,
            batches: DEFAULT_BATCHES,
            compare_without_noise_drift: false,
            axes: None,
        }
    }
}

/// One mass of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassCell {
    pub mass: f64,
    pub level: u8,
    pub fine_dt: f64,
    /// Paths entering the estimate (complete in both ensembles).
    pub paths_used: usize,
    pub exited: usize,
    pub non_finite: usize,
    /// `E[sup_t |x^m_t - x_t|^2]` over the recording grid.
    pub estimate: Estimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub without_noise_drift: Option<Estimate>,
    /// Mean of `m |v|^2` over the second half of the horizon.
    pub ke_plateau: f64,
    /// Mean over used paths of the running maximum of `m |v|^2`.
    pub ke_max_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub experiment: String,
    pub seed: u64,
    pub paths: usize,
    pub t_end: f64,
    /// Spacing of the grid the supremum is taken over.
    pub sup_grid_dt: f64,
    pub coupling: NoiseCoupling,
    pub axes: Vec<usize>,
    pub cells: Vec<MassCell>,
    pub strictly_decreasing: bool,
    /// Informational log-log fit of the estimates against the mass.
    pub slope: Option<SlopeFit>,
    /// Estimate without the noise-induced drift over the correct estimate,
    /// at the smallest mass.
    pub discrimination: Option<f64>,
    pub exit_threshold: f64,
    /// False when some mass lost more than `exit_threshold` of its paths.
    pub valid: bool,
}

impl ConvergenceReport {
    pub fn estimates(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.estimate.mean).collect()
    }

    /// Fails when the exit threshold was exceeded.
    pub fn ensure_valid(&self) -> Result<(), ExperimentError> {
        match self
            .cells
            .iter()
            .find(|c| exit_fraction(c) > self.exit_threshold)
        {
            Some(c) => Err(ExperimentError::Invalid(format!(
                "{} of {} paths left the domain or blew up at mass {:e} (threshold {})",
                c.exited + c.non_finite,
                self.paths,
                c.mass,
                self.exit_threshold
            ))),
            None => Ok(()),
        }
    }

    /// One row per mass.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "mass,level,fine_dt,paths_used,exited,non_finite,estimate,stderr,estimate_without_s,stderr_without_s,ke_plateau,ke_max_mean"
        )?;
        for c in &self.cells {
            let (a, b) = c
                .without_noise_drift
                .map_or((String::new(), String::new()), |e| {
                    (e.mean.to_string(), e.stderr.to_string())
                });
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{a},{b},{},{}",
                c.mass,
                c.level,
                c.fine_dt,
                c.paths_used,
                c.exited,
                c.non_finite,
                c.estimate.mean,
                c.estimate.stderr,
                c.ke_plateau,
                c.ke_max_mean
            )?;
        }
        Ok(())
    }
}

fn exit_fraction(c: &MassCell) -> f64 {
    (c.exited + c.non_finite) as f64 / (c.paths_used + c.exited + c.non_finite).max(1) as f64
}

fn check_masses(masses: &[f64]) -> Result<(), ExperimentError> {
    let ok = !masses.is_empty()
        && masses.iter().all(|m| *m > 0.0 && m.is_finite())
        && masses.windows(2).all(|w| w[1] < w[0]);
    if ok {
        Ok(())
    } else {
        Err(ExperimentError::Masses(masses.to_vec()))
    }
}

/// Per-path `sup_k sum_{i in axes} (x_i - y_i)^2` over paths complete in
/// both ensembles, in path order.
fn sup_errors(full: &PathEnsemble, limit: &PathEnsemble, axes: &[usize]) -> Vec<f64> {
    (0..full.paths.len())
        .filter(|&p| full.paths[p].is_complete() && limit.paths[p].is_complete())
        .map(|p| {
            (0..full.times.len())
                .map(|k| {
                    let (a, b) = (full.x(p, k), limit.x(p, k));
                    axes.iter().map(|&i| (a[i] - b[i]).powi(2)).sum::<f64>()
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

fn incomplete(ens: &PathEnsemble, p: usize) -> bool {
    !ens.paths[p].is_complete()
}

/// Runs the full system at each mass against `limit` and estimates
/// `E[sup_t |x^m_t - x_t|^2]`.
pub fn sweep(
    experiment: &str,
    full: &CoefficientModel,
    limit: &LimitSde,
    masses: &[f64],
    cfg: &SolverConfig,
    opts: &SweepOptions,
) -> Result<ConvergenceReport, ExperimentError> {
    check_masses(masses)?;
    if limit.dim() != full.dim() || limit.noise_dim() != full.noise_dim() {
        return Err(ExperimentError::Invalid(
            "full and limit models differ in shape".into(),
        ));
    }
    let axes = opts
        .axes
        .clone()
        .unwrap_or_else(|| (0..full.dim()).collect());
    if axes.is_empty() || axes.iter().any(|&a| a >= full.dim()) {
        return Err(ExperimentError::Invalid(format!(
            "axes {axes:?} out of range"
        )));
    }
    let gamma_max = stiffness_bound(full)?;
    let drift_free = opts
        .compare_without_noise_drift
        .then(|| limit.clone().without_noise_induced_drift());
    let mut limits: BTreeMap<u8, (PathEnsemble, Option<PathEnsemble>)> = BTreeMap::new();
    let mut cells = Vec::with_capacity(masses.len());
    for &mass in masses {
        let level = resolution_level(cfg, mass, gamma_max)?;
        let noise = cfg.noise(level, full.noise_dim())?;
        let full_ens = simulate_full(full, mass, cfg, &noise)?;
        if !limits.contains_key(&level) {
            let limit_noise = match opts.coupling {
                NoiseCoupling::Shared => noise,
                NoiseCoupling::Independent => NoiseSet {
                    seed: cfg.seed.wrapping_add(INDEPENDENT_SEED_OFFSET),
                    ..noise
                },
            };
            let a = simulate_limit(limit, cfg, &limit_noise)?;
            let b = drift_free
                .as_ref()
                .map(|s| simulate_limit(s, cfg, &limit_noise))
                .transpose()?;
            limits.insert(level, (a, b));
        }
        let (limit_ens, free_ens) = &limits[&level];
        let errors = sup_errors(&full_ens, limit_ens, &axes);
        let bad = |p: usize| incomplete(&full_ens, p) || incomplete(limit_ens, p);
        let non_finite = (0..cfg.paths)
            .filter(|&p| {
                use crate::sde::PathStatus::NonFinite;
                matches!(full_ens.paths[p].status, NonFinite { .. })
                    || matches!(limit_ens.paths[p].status, NonFinite { .. })
            })
            .count();
        let failed = (0..cfg.paths).filter(|&p| bad(p)).count();
        let ke = kinetic_energy_stats(&full_ens)?;
        let used: Vec<usize> = (0..cfg.paths).filter(|&p| !bad(p)).collect();
        let ke_max_mean =
            used.iter().map(|&p| full_ens.paths[p].ke_max).sum::<f64>() / used.len().max(1) as f64;
        let without = free_ens.as_ref().map(|f| {
            let e: Vec<f64> = sup_errors(&full_ens, f, &axes);
            batch_estimate(&e, opts.batches)
        });
        cells.push(MassCell {
            mass,
            level,
            fine_dt: noise.fine_dt(),
            paths_used: errors.len(),
            exited: failed - non_finite,
            non_finite,
            estimate: batch_estimate(&errors, opts.batches),
            without_noise_drift: without,
            ke_plateau: ke.plateau(),
            ke_max_mean,
        });
    }
    let means: Vec<f64> = cells.iter().map(|c| c.estimate.mean).collect();
    let strictly_decreasing = means.windows(2).all(|w| w[1] < w[0]);
    let slope = fit_log_slope(masses, &means);
    let discrimination = cells
        .last()
        .and_then(|c| c.without_noise_drift.map(|w| w.mean / c.estimate.mean));
    let valid = cells.iter().all(|c| exit_fraction(c) <= EXIT_THRESHOLD);
    Ok(ConvergenceReport {
        experiment: experiment.to_string(),
        seed: cfg.seed,
        paths: cfg.paths,
        t_end: cfg.t_end,
        sup_grid_dt: cfg.dt,
        coupling: opts.coupling,
        axes,
        cells,
        strictly_decreasing,
        slope,
        discrimination,
        exit_threshold: EXIT_THRESHOLD,
        valid,
    })
}

/// [`sweep`] against the Itô limit of the same model.
pub fn mass_sweep(
    model: &CoefficientModel,
    masses: &[f64],
    cfg: &SolverConfig,
    opts: &SweepOptions,
) -> Result<ConvergenceReport, ExperimentError> {
    sweep(
        "mass-sweep",
        model,
        &LimitSde::ito(model),
        masses,
        cfg,
        opts,
    )
}
