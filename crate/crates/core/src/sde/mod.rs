//! Ensemble integration of the full second-order system and of its limit on
//! shared, reproducible Wiener paths.

mod config;
mod ensemble;
mod integrate;
mod par;
mod rng;
mod wiener;

use thiserror::Error;

use crate::drift::DriftError;
use crate::model::ModelError;
use crate::smallmat::LinalgError;

pub use config::{resolution_level, Scheme, SolverConfig};
pub use ensemble::{
    kinetic_energy_stats, EnsembleKind, EnsembleSummary, KineticEnergyStats, PathEnsemble,
    PathRecord, PathStatus, SliceMoments,
};
pub use integrate::{simulate_full, simulate_limit, stiffness_bound};
pub use par::{map_indexed, with_thread_cap, ExecPolicy};
pub use rng::{normal, philox4x32_10, NormalKey};
pub use wiener::{NoiseSet, WienerGrid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SdeError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Drift(#[from] DriftError),
    #[error("path {path} at t = {time}: {source}")]
    At {
        path: usize,
        time: f64,
        source: Box<SdeError>,
    },
    #[error("Euler step {dt:e} exceeds the stability limit {limit:e}; use the splitting scheme")]
    DtGuard { dt: f64, limit: f64 },
    #[error("resolving mass {mass:e} needs more than {max_level} dyadic refinements")]
    LevelCap { mass: f64, max_level: u8 },
    #[error("the limit integrator needs the Itô form")]
    WrongForm,
    #[error("{0}")]
    WrongKind(String),
    #[error("noise does not match the solver: {0}")]
    NoiseMismatch(String),
}

impl SdeError {
    /// Tags the error with the path and time where it happened.
    pub fn at(self, path: usize, time: f64) -> Self {
        Self::At {
            path,
            time,
            source: Box::new(self),
        }
    }

    pub(crate) fn drift(path: usize, time: f64, e: DriftError) -> Self {
        Self::Drift(e).at(path, time)
    }
}
