use super::rng::{normal, NormalKey};

/// Stream used for Brownian increments; other streams carry auxiliary draws.
pub(crate) const INCREMENT_STREAM: u8 = 0;

/// Brownian increments of one path on a uniform grid, `steps x noise_dim`
/// row-major. Level `L` halves the base step `L` times by Brownian-bridge
/// refinement, so every level samples the same Brownian path.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerGrid {
    pub seed: u64,
    pub path: u64,
    pub level: u8,
    pub dt: f64,
    pub noise_dim: usize,
    increments: Vec<f64>,
}

impl WienerGrid {
    /// Level-zero increments `sqrt(dt) Z`.
    pub fn base(seed: u64, path: u64, steps: usize, dt: f64, noise_dim: usize) -> Self {
        let sq = dt.sqrt();
        let mut increments = Vec::with_capacity(steps * noise_dim);
        for n in 0..steps {
            for c in 0..noise_dim {
                increments.push(
                    sq * normal(NormalKey {
                        seed,
                        path,
                        level: 0,
                        step: n as u64,
                        component: c as u16,
                        stream: INCREMENT_STREAM,
                    }),
                );
            }
        }
        Self {
            seed,
            path,
            level: 0,
            dt,
            noise_dim,
            increments,
        }
    }

    /// Base grid refined `level` times.
    pub fn generate(
        seed: u64,
        path: u64,
        base_steps: usize,
        base_dt: f64,
        level: u8,
        noise_dim: usize,
    ) -> Self {
        let mut g = Self::base(seed, path, base_steps, base_dt, noise_dim);
        for _ in 0..level {
            g = g.refine();
        }
        g
    }

    /// Splits every increment `dW` over `[t, t + dt]` into
    /// `dW/2 + sqrt(dt)/2 Z` and `dW/2 - sqrt(dt)/2 Z`.
    pub fn refine(&self) -> Self {
        let level = self.level + 1;
        let half = 0.5 * self.dt.sqrt();
        let k = self.noise_dim;
        let mut increments = Vec::with_capacity(2 * self.increments.len());
        for n in 0..self.steps() {
            let start = increments.len();
            increments.resize(start + 2 * k, 0.0);
            for c in 0..k {
                let p = 0.5 * self.increments[n * k + c];
                let z = half
                    * normal(NormalKey {
                        seed: self.seed,
                        path: self.path,
                        level,
                        step: n as u64,
                        component: c as u16,
                        stream: INCREMENT_STREAM,
                    });
                increments[start + c] = p + z;
                increments[start + k + c] = p - z;
            }
        }
        Self {
            seed: self.seed,
            path: self.path,
            level,
            dt: 0.5 * self.dt,
            noise_dim: k,
            increments,
        }
    }

    pub fn steps(&self) -> usize {
        self.increments.len() / self.noise_dim
    }

    /// Increment over step `n`.
    pub fn increment(&self, n: usize) -> &[f64] {
        &self.increments[n * self.noise_dim..(n + 1) * self.noise_dim]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }
}

/// The Wiener grids shared by every path of an ensemble: one seed, one base
/// grid and one refinement level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSet {
    pub seed: u64,
    pub base_steps: usize,
    pub base_dt: f64,
    pub level: u8,
    pub noise_dim: usize,
}

impl NoiseSet {
    pub fn fine_steps(&self) -> usize {
        self.base_steps << self.level
    }

    pub fn fine_dt(&self) -> f64 {
        self.base_dt / f64::from(1u32 << self.level)
    }

    /// Fine steps per base step.
    pub fn stride(&self) -> usize {
        1 << self.level
    }

    pub fn grid(&self, path: u64) -> WienerGrid {
        WienerGrid::generate(
            self.seed,
            path,
            self.base_steps,
            self.base_dt,
            self.level,
            self.noise_dim,
        )
    }

    /// Auxiliary normal on the fine grid, independent of the increments.
    pub fn auxiliary_normal(&self, path: u64, step: usize, component: usize, stream: u8) -> f64 {
        debug_assert!(stream != INCREMENT_STREAM);
        normal(NormalKey {
            seed: self.seed,
            path,
            level: self.level,
            step: step as u64,
            component: component as u16,
            stream,
        })
    }
}
