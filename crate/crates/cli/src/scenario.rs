//! TOML scenario files: coefficients or a builder block, a solver block and
//! the experiment to run.

use serde::Deserialize;
use sklimit::experiments::{
    thermophoresis_problem, ColoredNoiseProblem, StationaryOptions, SweepOptions,
};
use sklimit::expr::{parse, Expr};
use sklimit::model::{
    augment_magnetic, fdr_model, CoefficientModel, ColoredNoiseSpec, DomainBox, ExprMatrix,
    FdrConvention, ForceSpec, MagneticSpec,
};
use sklimit::sde::SolverConfig;
use sklimit::smallmat::Mat;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    pub dimension: usize,
    pub domain: DomainBlock,
    #[serde(default)]
    pub coefficients: Option<CoefficientsBlock>,
    #[serde(default)]
    pub fdr: Option<FdrBlock>,
    #[serde(default)]
    pub colored_noise: Option<ColoredNoiseBlock>,
    #[serde(default)]
    pub thermophoresis: Option<ThermophoresisBlock>,
    #[serde(default)]
    pub magnetic: Option<MagneticBlock>,
    pub solver: SolverConfig,
    #[serde(default)]
    pub experiment: ExperimentBlock,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBlock {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsBlock {
    pub force: Vec<String>,
    pub gamma: Vec<Vec<String>>,
    pub sigma: Vec<Vec<String>>,
    /// Recorded for stationarity checks; `force` must equal `-grad U`.
    #[serde(default)]
    pub potential: Option<String>,
    #[serde(default)]
    pub kbt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdrKind {
    Diffusion1d,
    SigmaOverKt,
    Einstein,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdrBlock {
    pub convention: FdrKind,
    pub kbt: f64,
    #[serde(default)]
    pub diffusion: Option<String>,
    #[serde(default)]
    pub sigma: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub gamma: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub potential: Option<String>,
    #[serde(default)]
    pub force: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColoredNoiseBlock {
    pub force: Vec<String>,
    pub friction: Vec<Vec<String>>,
    /// `A`.
    pub drift: Vec<Vec<f64>>,
    /// `lambda`.
    pub noise: Vec<Vec<f64>>,
    #[serde(default = "one")]
    pub tau0: f64,
    pub coupling: Vec<Vec<String>>,
    #[serde(default = "one_str")]
    pub scale: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermophoresisBlock {
    pub force: String,
    pub gamma: String,
    pub diffusion: String,
    /// `theta = c / gamma`.
    pub c: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagneticBlock {
    pub charge: f64,
    pub field: [String; 3],
}

fn one() -> f64 {
    1.0
}

fn one_str() -> String {
    "1".into()
}

fn default_grid() -> usize {
    33
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    #[serde(default)]
    pub masses: Vec<f64>,
    #[serde(default)]
    pub sweep: SweepOptions,
    #[serde(default)]
    pub stationary: Option<StationaryOptions>,
    /// Points for the drift table; the box centre when empty.
    #[serde(default)]
    pub drift_points: Vec<Vec<f64>>,
    #[serde(default = "default_grid")]
    pub assumption_grid: usize,
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        Self {
            masses: Vec::new(),
            sweep: SweepOptions::default(),
            stationary: None,
            drift_points: Vec::new(),
            assumption_grid: default_grid(),
        }
    }
}

/// A parsed scenario with its model built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    /// The simulated model; lifted for colored noise.
    pub model: CoefficientModel,
    pub colored: Option<ColoredNoiseProblem>,
}

impl Scenario {
    /// Dimension of the physical coordinates.
    pub fn base_dim(&self) -> usize {
        self.config.dimension
    }

    /// Solver settings in the simulated model's coordinates.
    pub fn model_solver(&self) -> SolverConfig {
        let mut cfg = self.config.solver.clone();
        let n = self.model.dim();
        cfg.x0.resize(n, 0.0);
        if let Some(v) = cfg.v0.as_mut() {
            v.resize(n, 0.0);
        }
        cfg
    }

    pub fn drift_points(&self) -> Vec<Vec<f64>> {
        let pad = |p: &[f64]| {
            let mut p = p.to_vec();
            p.resize(self.model.dim(), 0.0);
            p
        };
        if self.config.experiment.drift_points.is_empty() {
            let d = self.model.domain();
            let centre: Vec<f64> = (0..self.base_dim())
                .map(|i| 0.5 * (d.lo()[i] + d.hi()[i]))
                .collect();
            vec![pad(&centre)]
        } else {
            self.config
                .experiment
                .drift_points
                .iter()
                .map(|p| pad(p))
                .collect()
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn expr(field: &str, src: &str, dim: usize) -> Result<Expr, CliError> {
    parse(src, dim).map_err(|e| config_err(format!("{field}: `{src}`: {e}")))
}

fn matrix(field: &str, table: &[Vec<String>], dim: usize) -> Result<ExprMatrix, CliError> {
    ExprMatrix::parse(table, dim).map_err(|(i, j, e)| config_err(format!("{field}[{i}][{j}]: {e}")))
}

fn column(field: &str, entries: &[String], dim: usize) -> Result<ExprMatrix, CliError> {
    let parsed = entries
        .iter()
        .enumerate()
        .map(|(i, s)| expr(&format!("{field}[{i}]"), s, dim))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExprMatrix::column(parsed, dim))
}

fn numeric(field: &str, rows: &[Vec<f64>]) -> Result<Mat, CliError> {
    let cols = rows.first().map_or(0, Vec::len);
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(config_err(format!(
            "{field}: rows must be non-empty and of equal length"
        )));
    }
    Ok(Mat::from_rows(rows))
}

impl ScenarioConfig {
    /// Parses TOML; errors carry the line and column.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    /// Validates the blocks and assembles the model.
    pub fn build(self) -> Result<Scenario, CliError> {
        let d = self.dimension;
        if d == 0 {
            return Err(config_err("dimension must be at least 1"));
        }
        if self.domain.lo.len() != d || self.domain.hi.len() != d {
            return Err(config_err(format!("domain bounds must have {d} entries")));
        }
        let domain = DomainBox::new(self.domain.lo.clone(), self.domain.hi.clone())
            .map_err(|e| config_err(format!("domain: {e}")))?;
        let builders = [
            self.coefficients.is_some(),
            self.fdr.is_some(),
            self.colored_noise.is_some(),
            self.thermophoresis.is_some(),
        ];
        if builders.iter().filter(|b| **b).count() != 1 {
            return Err(config_err(
                "exactly one of [coefficients], [fdr], [colored_noise], [thermophoresis] is required",
            ));
        }
        if self.solver.x0.len() != d {
            return Err(config_err(format!("solver.x0 must have {d} entries")));
        }
        if self.solver.v0.as_ref().is_some_and(|v| v.len() != d) {
            return Err(config_err(format!("solver.v0 must have {d} entries")));
        }
        for (i, p) in self.experiment.drift_points.iter().enumerate() {
            if p.len() != d {
                return Err(config_err(format!(
                    "experiment.drift_points[{i}] must have {d} entries"
                )));
            }
        }
        let model_err = |e: sklimit::model::ModelError| config_err(e.to_string());
        let mut colored = None;
        let mut model = if let Some(c) = &self.coefficients {
            let m = CoefficientModel::symbolic(
                domain.clone(),
                column("coefficients.force", &c.force, d)?,
                matrix("coefficients.gamma", &c.gamma, d)?,
                matrix("coefficients.sigma", &c.sigma, d)?,
            )
            .map_err(model_err)?;
            match (&c.potential, c.kbt) {
                (Some(u), Some(kbt)) => {
                    m.with_potential(expr("coefficients.potential", u, d)?, kbt)
                }
                (None, None) => m,
                _ => {
                    return Err(config_err(
                        "coefficients.potential and coefficients.kbt go together",
                    ))
                }
            }
        } else if let Some(f) = &self.fdr {
            let convention = match f.convention {
                FdrKind::Diffusion1d => FdrConvention::Diffusion1d {
                    diffusion: expr(
                        "fdr.diffusion",
                        f.diffusion
                            .as_deref()
                            .ok_or_else(|| config_err("fdr.diffusion is required"))?,
                        d,
                    )?,
                },
                FdrKind::SigmaOverKt => FdrConvention::SigmaOverKt {
                    sigma: matrix(
                        "fdr.sigma",
                        f.sigma
                            .as_deref()
                            .ok_or_else(|| config_err("fdr.sigma is required"))?,
                        d,
                    )?,
                },
                FdrKind::Einstein => FdrConvention::Einstein {
                    gamma: matrix(
                        "fdr.gamma",
                        f.gamma
                            .as_deref()
                            .ok_or_else(|| config_err("fdr.gamma is required"))?,
                        d,
                    )?,
                },
            };
            let force = match (&f.potential, &f.force) {
                (Some(u), None) => ForceSpec::Potential(expr("fdr.potential", u, d)?),
                (None, Some(v)) => ForceSpec::Explicit(column("fdr.force", v, d)?),
                _ => {
                    return Err(config_err(
                        "exactly one of fdr.potential and fdr.force is required",
                    ))
                }
            };
            fdr_model(&convention, &force, f.kbt, domain.clone()).map_err(model_err)?
        } else if let Some(c) = &self.colored_noise {
            let problem = ColoredNoiseProblem {
                force: column("colored_noise.force", &c.force, d)?,
                friction: matrix("colored_noise.friction", &c.friction, d)?,
                domain: domain.clone(),
                spec: ColoredNoiseSpec {
                    drift: numeric("colored_noise.drift", &c.drift)?,
                    noise: numeric("colored_noise.noise", &c.noise)?,
                    tau0: c.tau0,
                    coupling: matrix("colored_noise.coupling", &c.coupling, d)?,
                    scale: expr("colored_noise.scale", &c.scale, d)?,
                },
            };
            let m = problem.lifted().map_err(|e| config_err(e.to_string()))?;
            colored = Some(problem);
            m
        } else {
            let t = self
                .thermophoresis
                .as_ref()
                .expect("one builder is present");
            if d != 1 {
                return Err(config_err("thermophoresis is one-dimensional"));
            }
            let problem = thermophoresis_problem(
                expr("thermophoresis.force", &t.force, 1)?,
                expr("thermophoresis.gamma", &t.gamma, 1)?,
                expr("thermophoresis.diffusion", &t.diffusion, 1)?,
                t.c,
                domain.clone(),
            );
            let m = problem.lifted().map_err(|e| config_err(e.to_string()))?;
            colored = Some(problem);
            m
        };
        if let Some(b) = &self.magnetic {
            if colored.is_some() {
                return Err(config_err(
                    "[magnetic] cannot be combined with colored noise",
                ));
            }
            let field = [
                expr("magnetic.field[0]", &b.field[0], d)?,
                expr("magnetic.field[1]", &b.field[1], d)?,
                expr("magnetic.field[2]", &b.field[2], d)?,
            ];
            model = augment_magnetic(
                &model,
                &MagneticSpec {
                    charge: b.charge,
                    field,
                },
            )
            .map_err(model_err)?;
        }
        Ok(Scenario {
            config: self,
            model,
            colored,
        })
    }
}
