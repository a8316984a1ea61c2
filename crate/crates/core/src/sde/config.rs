use serde::{Deserialize, Serialize};

use super::{ExecPolicy, NoiseSet, SdeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Exact frozen-coefficient velocity update.
    #[default]
    Splitting,
    /// Explicit Euler, only allowed when the step resolves `m / |gamma|`.
    Euler,
}

fn default_ratio() -> f64 {
    4.0
}

fn default_max_level() -> u8 {
    16
}

/// Time grid, initial state and ensemble size.
///
/// `dt` is the recording grid. The full system and its limit are integrated
/// on a dyadic refinement of it chosen per mass (see [`resolution_level`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub paths: usize,
    pub seed: u64,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub v0: Option<Vec<f64>>,
    #[serde(default)]
    pub scheme: Scheme,
    /// Fine step is at most `m / (resolve_ratio * |gamma|max)`.
    #[serde(default = "default_ratio")]
    pub resolve_ratio: f64,
    #[serde(default = "default_max_level")]
    pub max_level: u8,
    #[serde(default)]
    pub exec: ExecPolicy,
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64, paths: usize, seed: u64, x0: Vec<f64>) -> Self {
        Self {
            dt,
            t_end,
            paths,
            seed,
            x0,
            v0: None,
            scheme: Scheme::default(),
            resolve_ratio: default_ratio(),
            max_level: default_max_level(),
            exec: ExecPolicy::default(),
        }
    }

    /// Number of recording steps; `t_end` must be a multiple of `dt`.
    pub fn base_steps(&self) -> Result<usize, SdeError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SdeError::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(SdeError::Config(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        let n = (self.t_end / self.dt).round();
        if n < 1.0 || (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(SdeError::Config(format!(
                "t_end = {} is not a multiple of dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self, dim: usize) -> Result<usize, SdeError> {
        let n = self.base_steps()?;
        if self.paths == 0 {
            return Err(SdeError::Config("paths must be at least 1".into()));
        }
        if self.x0.len() != dim {
            return Err(SdeError::Config(format!(
                "x0 has {} entries, dimension is {dim}",
                self.x0.len()
            )));
        }
        if let Some(v0) = &self.v0 {
            if v0.len() != dim {
                return Err(SdeError::Config(format!(
                    "v0 has {} entries, dimension is {dim}",
                    v0.len()
                )));
            }
        }
        if !(self.resolve_ratio > 0.0 && self.resolve_ratio.is_finite()) {
            return Err(SdeError::Config("resolve_ratio must be positive".into()));
        }
        if self.max_level > 24 {
            return Err(SdeError::Config("max_level must be at most 24".into()));
        }
        Ok(n)
    }

    /// Wiener grids for this configuration refined `level` times.
    pub fn noise(&self, level: u8, noise_dim: usize) -> Result<NoiseSet, SdeError> {
        Ok(NoiseSet {
            seed: self.seed,
            base_steps: self.base_steps()?,
            base_dt: self.dt,
            level,
            noise_dim,
        })
    }
}

/// Smallest dyadic level `L` with `dt / 2^L <= m / (ratio * gamma_max)`.
pub fn resolution_level(cfg: &SolverConfig, mass: f64, gamma_max: f64) -> Result<u8, SdeError> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(SdeError::Config(format!(
            "mass must be positive, got {mass}"
        )));
    }
    let target = mass / (cfg.resolve_ratio * gamma_max.max(f64::MIN_POSITIVE));
    let mut level = 0u8;
    while cfg.dt / f64::from(1u32 << level) > target {
        if level >= cfg.max_level {
            return Err(SdeError::LevelCap {
                mass,
                max_level: cfg.max_level,
            });
        }
        level += 1;
    }
    Ok(level)
}
