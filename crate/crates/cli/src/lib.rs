//! Command-line driver: scenario files, the built-in catalog and the
//! `drift`, `lyapunov`, `simulate`, `converge` and `scenario` subcommands.
//!
//! Exit codes: 0 success, 2 configuration error, 3 assumption failure,
//! 4 numerical failure, 1 I/O error.

pub mod catalog;
pub mod output;
pub mod scenario;

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sklimit::drift::{symbolic_limit_1d, DriftError, LimitSde};
use sklimit::experiments::{
    colored_noise_sweep, mass_sweep, stationary_check, thermophoresis_check, ConvergenceReport,
    ExperimentError, StationaryReport, ThermophoresisCheck,
};
use sklimit::expr::parse;
use sklimit::model::{check_assumptions, AssumptionReport, DomainBox, ModelError};
use sklimit::sde::{
    resolution_level, simulate_full, simulate_limit, stiffness_bound, with_thread_cap, SdeError,
    SolverConfig,
};
use sklimit::smallmat::{solve_lyapunov_direct, solve_lyapunov_quadrature, LinalgError, Mat};
use thiserror::Error;

use output::{fmt_vec, write_atomic, write_json, OutDir};
use scenario::{Scenario, ScenarioConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("assumption check failed on the domain box")]
    Assumption(Box<AssumptionReport>),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Assumption(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<SdeError> for CliError {
    fn from(e: SdeError) -> Self {
        match e {
            SdeError::Config(_) | SdeError::DtGuard { .. } | SdeError::LevelCap { .. } => {
                CliError::Config(e.to_string())
            }
            e => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Sde(e) => e.into(),
            ExperimentError::Masses(_) => CliError::Config(e.to_string()),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<DriftError> for CliError {
    fn from(e: DriftError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<LinalgError> for CliError {
    fn from(e: LinalgError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sklimit",
    version,
    about = "Small-mass limits of Langevin equations with state-dependent friction"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Override the solver seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the number of paths.
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// Directory for emitted files.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Cap on worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print S(x), b(x) = gamma^-1 F + S and h(x) = gamma^-1 sigma at points.
    Drift {
        config: PathBuf,
        /// Comma-separated coordinates; repeatable. Defaults to the
        /// scenario's drift points.
        #[arg(long = "point", value_delimiter = ';', allow_hyphen_values = true)]
        points: Vec<String>,
    },
    /// Solve J g^T + g J = C and print J and the residual.
    Lyapunov {
        /// Friction matrix as JSON rows, e.g. '[[1,-1],[0,1]]'.
        #[arg(long)]
        gamma: String,
        /// Noise covariance sigma sigma^T as JSON rows.
        #[arg(long = "noise-cov")]
        noise_cov: String,
        #[arg(long, value_enum, default_value_t = Method::Direct)]
        method: Method,
    },
    /// Simulate one ensemble; writes <name>-ensemble.csv and <name>-summary.json.
    Simulate {
        config: PathBuf,
        /// Mass of the full system (default: the first experiment mass).
        #[arg(long, conflicts_with = "limit")]
        mass: Option<f64>,
        /// Simulate the limiting SDE instead.
        #[arg(long)]
        limit: bool,
    },
    /// Coupled mass sweep; writes <name>-converge.json and <name>-converge.csv.
    ///
    /// JSON fields: experiment, seed, paths, t_end, sup_grid_dt, coupling,
    /// axes, cells[] {mass, level, fine_dt, paths_used, exited, non_finite,
    /// estimate {mean, stderr, batches}, without_noise_drift?, ke_plateau,
    /// ke_max_mean}, strictly_decreasing, slope {slope, intercept, ci?,
    /// points}, discrimination, exit_threshold, valid.
    ///
    /// CSV columns: mass, level, fine_dt, paths_used, exited, non_finite,
    /// estimate, stderr, estimate_without_s, stderr_without_s, ke_plateau,
    /// ke_max_mean.
    ///
    /// Thermophoresis scenarios also write <name>-thermophoresis.json.
    /// An invalid report (too many exits) is written and exits with code 4.
    Converge { config: PathBuf },
    /// Built-in scenarios.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Direct,
    Quadrature,
}

#[derive(Debug, Subcommand)]
pub enum ScenarioAction {
    /// List the built-in scenarios.
    List,
    /// Print a scenario's TOML.
    Show { name: String },
    /// Run a scenario's bundled experiment: drift table, then the mass
    /// sweep and/or stationarity check it declares.
    Run { name: String },
}

/// Parses `argv`, runs, and reports errors on stderr.
pub fn main_with_args<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Assumption(report) = &e {
                eprintln!(
                    "{}",
                    serde_json::to_string_pretty(report).unwrap_or_default()
                );
            }
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let threads = cli.global.threads;
    with_thread_cap(threads, move || dispatch(cli))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let g = cli.global;
    match cli.command {
        Command::Drift { config, points } => {
            let s = load(&config, &g)?;
            let pts = if points.is_empty() {
                s.drift_points()
            } else {
                points
                    .iter()
                    .map(|p| parse_point(p, &s))
                    .collect::<Result<_, _>>()?
            };
            print!("{}", drift_table(&s, &pts)?);
            Ok(())
        }
        Command::Lyapunov {
            gamma,
            noise_cov,
            method,
        } => lyapunov(&gamma, &noise_cov, method),
        Command::Simulate {
            config,
            mass,
            limit,
        } => {
            let s = load(&config, &g)?;
            simulate(&s, &g, mass, limit)
        }
        Command::Converge { config } => {
            let s = load(&config, &g)?;
            let report = converge(&s, &g)?;
            report.ensure_valid()?;
            Ok(())
        }
        Command::Scenario { action } => match action {
            ScenarioAction::List => {
                for (name, text) in catalog::CATALOG {
                    let desc = ScenarioConfig::from_toml(text)?
                        .description
                        .unwrap_or_default();
                    println!("{name:<20} {desc}");
                }
                Ok(())
            }
            ScenarioAction::Show { name } => {
                print!("{}", catalog::get(&name)?);
                Ok(())
            }
            ScenarioAction::Run { name } => run_scenario(&name, &g),
        },
    }
}

fn load(path: &PathBuf, g: &Global) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let cfg = ScenarioConfig::from_toml(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        e => e,
    })?;
    prepare(cfg, g)
}

/// Applies overrides, builds the model and runs the assumption check.
pub fn prepare(mut cfg: ScenarioConfig, g: &Global) -> Result<Scenario, CliError> {
    if let Some(seed) = g.seed {
        cfg.solver.seed = seed;
    }
    if let Some(paths) = g.paths {
        cfg.solver.paths = paths;
    }
    let grid = cfg.experiment.assumption_grid;
    let s = cfg.build()?;
    let report = check_assumptions(&s.model, grid).map_err(|e| CliError::Config(e.to_string()))?;
    if !report.passed() {
        return Err(CliError::Assumption(Box::new(report)));
    }
    Ok(s)
}

fn parse_point(text: &str, s: &Scenario) -> Result<Vec<f64>, CliError> {
    let mut p = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Config(format!("--point `{text}`: {e}")))?;
    if p.len() != s.base_dim() {
        return Err(CliError::Config(format!(
            "--point `{text}` has {} coordinates, scenario dimension is {}",
            p.len(),
            s.base_dim()
        )));
    }
    p.resize(s.model.dim(), 0.0);
    Ok(p)
}

/// Rows `x`, `S(x)`, `b(x)`, `h(x)`, preceded by symbolic formulas for
/// one-dimensional expression models.
pub fn drift_table(s: &Scenario, points: &[Vec<f64>]) -> Result<String, CliError> {
    let sde = LimitSde::ito(&s.model);
    let mut out = String::new();
    if let Ok(sym) = symbolic_limit_1d(&s.model) {
        let _ = writeln!(out, "# S(x) = {}", sym.noise_drift);
        let _ = writeln!(out, "# b(x) = {}", sym.ito_drift);
        let _ = writeln!(out, "# h(x) = {}", sym.diffusion);
    }
    for x in points {
        let p = sde.point(x)?;
        let _ = writeln!(out, "x = {}", fmt_vec(x));
        let _ = writeln!(out, "  S = {}", fmt_vec(&p.noise_drift));
        let _ = writeln!(out, "  b = {}", fmt_vec(&p.ito_drift()));
        let rows: Vec<String> = p.diffusion.to_rows().iter().map(|r| fmt_vec(r)).collect();
        let _ = writeln!(out, "  h = [{}]", rows.join(", "));
    }
    Ok(out)
}

fn drift_csv(s: &Scenario, points: &[Vec<f64>]) -> Result<String, CliError> {
    let sde = LimitSde::ito(&s.model);
    let d = s.model.dim();
    let mut out = String::new();
    let cols: Vec<String> = (1..=d)
        .map(|i| format!("x{i}"))
        .chain((1..=d).map(|i| format!("s{i}")))
        .chain((1..=d).map(|i| format!("b{i}")))
        .collect();
    let _ = writeln!(out, "{}", cols.join(","));
    for x in points {
        let p = sde.point(x)?;
        let vals: Vec<String> = x
            .iter()
            .chain(&p.noise_drift)
            .chain(&p.ito_drift())
            .map(|v| format!("{v:e}"))
            .collect();
        let _ = writeln!(out, "{}", vals.join(","));
    }
    Ok(out)
}

fn parse_matrix(flag: &str, text: &str) -> Result<Mat, CliError> {
    let rows: Vec<Vec<f64>> =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("{flag}: {e}")))?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Config(format!(
            "{flag}: expected a non-empty square matrix"
        )));
    }
    Ok(Mat::from_rows(&rows))
}

fn lyapunov(gamma: &str, cov: &str, method: Method) -> Result<(), CliError> {
    let g = parse_matrix("--gamma", gamma)?;
    let c = parse_matrix("--noise-cov", cov)?;
    if g.shape() != c.shape() {
        return Err(CliError::Config(
            "--gamma and --noise-cov differ in size".into(),
        ));
    }
    let sol = match method {
        Method::Direct => solve_lyapunov_direct(&g, &c)?,
        Method::Quadrature => solve_lyapunov_quadrature(&g, &c)?,
    };
    let rows: Vec<Vec<f64>> = sol
        .j
        .to_rows()
        .into_iter()
        .map(|r| r.into_iter().map(|v| (v * 1e12).round() / 1e12).collect())
        .collect();
    println!(
        "J = {}",
        serde_json::to_string(&rows).expect("finite entries")
    );
    println!("residual = {:e}", sol.residual);
    Ok(())
}

fn out_dir(s: &Scenario, g: &Global) -> OutDir {
    OutDir {
        dir: g.out_dir.clone(),
        prefix: s.config.name.clone(),
    }
}

fn simulate(s: &Scenario, g: &Global, mass: Option<f64>, limit: bool) -> Result<(), CliError> {
    let cfg: SolverConfig = s.model_solver();
    let out = out_dir(s, g);
    let ens = if limit {
        simulate_limit(
            &LimitSde::ito(&s.model),
            &cfg,
            &cfg.noise(0, s.model.noise_dim())?,
        )?
    } else {
        let mass = mass
            .or_else(|| s.config.experiment.masses.first().copied())
            .ok_or_else(|| {
                CliError::Config("simulate needs --mass, --limit, or experiment.masses".into())
            })?;
        let level = resolution_level(&cfg, mass, stiffness_bound(&s.model)?)?;
        simulate_full(
            &s.model,
            mass,
            &cfg,
            &cfg.noise(level, s.model.noise_dim())?,
        )?
    };
    write_atomic(&out.file("-ensemble.csv"), |w| ens.write_csv(w))?;
    let summary = ens.summary();
    write_json(&out.file("-summary.json"), &summary)?;
    println!(
        "{} paths, {} exited, {} non-finite -> {}",
        summary.paths,
        summary.exited,
        summary.non_finite,
        out.file("-ensemble.csv").display()
    );
    Ok(())
}

fn converge(s: &Scenario, g: &Global) -> Result<ConvergenceReport, CliError> {
    let e = &s.config.experiment;
    if e.masses.is_empty() {
        return Err(CliError::Config("converge needs experiment.masses".into()));
    }
    let out = out_dir(s, g);
    if let Some(t) = &s.config.thermophoresis {
        let chk: ThermophoresisCheck = thermophoresis_check(
            &parse(&t.force, 1).map_err(|e| CliError::Config(e.to_string()))?,
            &parse(&t.gamma, 1).map_err(|e| CliError::Config(e.to_string()))?,
            &parse(&t.diffusion, 1).map_err(|e| CliError::Config(e.to_string()))?,
            t.c,
            &DomainBox::new(s.config.domain.lo.clone(), s.config.domain.hi.clone())?,
            e.assumption_grid,
        )?;
        write_json(&out.file("-thermophoresis.json"), &chk)?;
        if !chk.passed {
            return Err(CliError::Numerical(format!(
                "thermophoresis pre-check failed: {chk:?}"
            )));
        }
    }
    let report = match &s.colored {
        Some(problem) => colored_noise_sweep(problem, &e.masses, &s.config.solver, &e.sweep)?,
        None => mass_sweep(&s.model, &e.masses, &s.config.solver, &e.sweep)?,
    };
    write_json(&out.file("-converge.json"), &report)?;
    write_atomic(&out.file("-converge.csv"), |w| report.write_csv(w))?;
    print_report(&report);
    Ok(report)
}

fn print_report(r: &ConvergenceReport) {
    println!("mass        estimate     stderr       paths  exited");
    for c in &r.cells {
        println!(
            "{:<11.3e} {:<12.5e} {:<12.5e} {:<6} {}",
            c.mass, c.estimate.mean, c.estimate.stderr, c.paths_used, c.exited
        );
    }
    println!("strictly decreasing: {}", r.strictly_decreasing);
    if let Some(d) = r.discrimination {
        println!("without-S / with-S at smallest mass: {d:.3}");
    }
    if !r.valid {
        println!(
            "report invalid: exits above {:.0}% of paths",
            100.0 * r.exit_threshold
        );
    }
}

#[derive(Serialize)]
struct StationaryOutput<'a> {
    with_noise_drift: &'a StationaryReport,
    without_noise_drift: &'a StationaryReport,
}

fn run_scenario(name: &str, g: &Global) -> Result<(), CliError> {
    let cfg = ScenarioConfig::from_toml(catalog::get(name)?)?;
    let s = prepare(cfg, g)?;
    let out = out_dir(&s, g);
    let points = s.drift_points();
    let table = drift_table(&s, &points)?;
    print!("{table}");
    let csv = drift_csv(&s, &points)?;
    write_atomic(&out.file("-drift.csv"), |w| w.write_all(csv.as_bytes()))?;
    let mut invalid = None;
    if !s.config.experiment.masses.is_empty() {
        let report = converge(&s, g)?;
        invalid = report.ensure_valid().err();
    }
    if let Some(opts) = &s.config.experiment.stationary {
        let cfg = s.model_solver();
        let sde = LimitSde::ito(&s.model);
        let with = stationary_check(&sde, &cfg, opts)?;
        let without = stationary_check(&sde.without_noise_induced_drift(), &cfg, opts)?;
        write_json(
            &out.file("-stationary.json"),
            &StationaryOutput {
                with_noise_drift: &with,
                without_noise_drift: &without,
            },
        )?;
        println!(
            "stationary KS: {:.4} with S, {:.4} without ({} samples)",
            with.max_ks, without.max_ks, with.samples
        );
        if !with.valid {
            invalid.get_or_insert(ExperimentError::Invalid(
                "stationary run lost too many paths".into(),
            ));
        }
    }
    invalid.map_or(Ok(()), |e| Err(e.into()))
}
