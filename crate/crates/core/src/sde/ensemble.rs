use std::io::{self, Write};

use serde::Serialize;

use super::{NoiseSet, SdeError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EnsembleKind {
    Full { mass: f64 },
    Limit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PathStatus {
    Complete,
    /// Left the domain box; states after the last grid time before `time`
    /// are not recorded.
    Exited {
        time: f64,
    },
    NonFinite {
        time: f64,
    },
}

/// One trajectory sampled on the recording grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    /// `recorded x dim`, row-major.
    pub x: Vec<f64>,
    /// Same layout as `x`; empty for limit paths.
    pub v: Vec<f64>,
    /// Running maximum of `m |v|^2` over every integrator step.
    pub ke_max: f64,
    pub status: PathStatus,
}

impl PathRecord {
    pub fn is_complete(&self) -> bool {
        self.status == PathStatus::Complete
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub kind: EnsembleKind,
    pub dim: usize,
    pub times: Vec<f64>,
    pub paths: Vec<PathRecord>,
    pub noise: NoiseSet,
}

impl PathEnsemble {
    pub fn recorded(&self, path: usize) -> usize {
        self.paths[path].x.len() / self.dim
    }

    pub fn x(&self, path: usize, k: usize) -> &[f64] {
        &self.paths[path].x[k * self.dim..(k + 1) * self.dim]
    }

    pub fn v(&self, path: usize, k: usize) -> Option<&[f64]> {
        let v = &self.paths[path].v;
        (!v.is_empty()).then(|| &v[k * self.dim..(k + 1) * self.dim])
    }

    pub fn exited(&self) -> usize {
        self.paths
            .iter()
            .filter(|p| matches!(p.status, PathStatus::Exited { .. }))
            .count()
    }

    pub fn non_finite(&self) -> usize {
        self.paths
            .iter()
            .filter(|p| matches!(p.status, PathStatus::NonFinite { .. }))
            .count()
    }

    /// CSV with one row per `(path, t)`: `path,t,x1..,v1..,exit`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let full = matches!(self.kind, EnsembleKind::Full { .. });
        write!(w, "path,t")?;
        for i in 1..=self.dim {
            write!(w, ",x{i}")?;
        }
        if full {
            for i in 1..=self.dim {
                write!(w, ",v{i}")?;
            }
        }
        writeln!(w, ",exit")?;
        for (p, rec) in self.paths.iter().enumerate() {
            let flag = u8::from(!rec.is_complete());
            for k in 0..self.recorded(p) {
                write!(w, "{p},{}", self.times[k])?;
                for v in self.x(p, k) {
                    write!(w, ",{v}")?;
                }
                if let Some(vel) = self.v(p, k) {
                    for v in vel {
                        write!(w, ",{v}")?;
                    }
                }
                writeln!(w, ",{flag}")?;
            }
        }
        Ok(())
    }

    /// Per-time moments over the paths that have a state at that time.
    pub fn summary(&self) -> EnsembleSummary {
        let full = matches!(self.kind, EnsembleKind::Full { .. });
        let slices = (0..self.times.len())
            .map(|k| {
                let rows: Vec<usize> = (0..self.paths.len())
                    .filter(|&p| self.recorded(p) > k)
                    .collect();
                let (mean_x, var_x) = moments(rows.iter().map(|&p| self.x(p, k)), self.dim);
                let (mean_v, var_v) = if full {
                    let (a, b) = moments(rows.iter().filter_map(|&p| self.v(p, k)), self.dim);
                    (Some(a), Some(b))
                } else {
                    (None, None)
                };
                SliceMoments {
                    t: self.times[k],
                    paths: rows.len(),
                    mean_x,
                    var_x,
                    mean_v,
                    var_v,
                }
            })
            .collect();
        EnsembleSummary {
            kind: self.kind,
            dim: self.dim,
            paths: self.paths.len(),
            exited: self.exited(),
            non_finite: self.non_finite(),
            fine_dt: self.noise.fine_dt(),
            level: self.noise.level,
            slices,
        }
    }
}

/// Population mean and variance per coordinate.
fn moments<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.clone().count().max(1) as f64;
    let mut mean = vec![0.0; dim];
    for r in rows.clone() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; dim];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    (mean, var)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceMoments {
    pub t: f64,
    pub paths: usize,
    pub mean_x: Vec<f64>,
    pub var_x: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_v: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub var_v: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    #[serde(flatten)]
    pub kind: EnsembleKind,
    pub dim: usize,
    pub paths: usize,
    pub exited: usize,
    pub non_finite: usize,
    pub fine_dt: f64,
    pub level: u8,
    pub slices: Vec<SliceMoments>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KineticEnergyStats {
    pub times: Vec<f64>,
    /// Ensemble mean of `m |v|^2` at each recorded time.
    pub mean: Vec<f64>,
    pub paths: Vec<usize>,
}

impl KineticEnergyStats {
    /// Average of `mean` over times in the second half of the horizon.
    pub fn plateau(&self) -> f64 {
        let t_end = self.times.last().copied().unwrap_or(0.0);
        let tail: Vec<f64> = self
            .times
            .iter()
            .zip(&self.mean)
            .filter(|(t, _)| **t >= 0.5 * t_end)
            .map(|(_, m)| *m)
            .collect();
        tail.iter().sum::<f64>() / tail.len().max(1) as f64
    }
}

/// Per-time ensemble mean of `m |v_t|^2` for a full-system ensemble.
pub fn kinetic_energy_stats(ens: &PathEnsemble) -> Result<KineticEnergyStats, SdeError> {
    let EnsembleKind::Full { mass } = ens.kind else {
        return Err(SdeError::WrongKind(
            "kinetic energy needs a full-system ensemble".into(),
        ));
    };
    let mut mean = Vec::with_capacity(ens.times.len());
    let mut counts = Vec::with_capacity(ens.times.len());
    for k in 0..ens.times.len() {
        let (mut sum, mut n) = (0.0, 0usize);
        for p in 0..ens.paths.len() {
            if ens.recorded(p) <= k {
                continue;
            }
            if let Some(v) = ens.v(p, k) {
                sum += mass * v.iter().map(|c| c * c).sum::<f64>();
                n += 1;
            }
        }
        mean.push(if n > 0 { sum / n as f64 } else { f64::NAN });
        counts.push(n);
    }
    Ok(KineticEnergyStats {
        times: ens.times.clone(),
        mean,
        paths: counts,
    })
}
