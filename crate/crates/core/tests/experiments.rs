use sklimit::drift::{noise_induced_drift, LimitSde};
use sklimit::experiments::{
    colored_noise_sweep, mass_sweep, stationary_check, thermophoresis_check, ColoredNoiseProblem,
    ExperimentError, NoiseCoupling, StationaryOptions, SweepOptions,
};
use sklimit::expr::{parse, Expr};
use sklimit::model::{
    fdr_model, CoefficientModel, ColoredNoiseSpec, DomainBox, ExprMatrix, FdrConvention, ForceSpec,
};
use sklimit::sde::{simulate_limit, SolverConfig};
use sklimit::smallmat::Mat;

fn scalar(s: &str) -> ExprMatrix {
    ExprMatrix::new(1, 1, vec![parse(s, 1).unwrap()], 1)
}

fn model_1d(gamma: &str, sigma: &str, force: &str, half_width: f64) -> CoefficientModel {
    CoefficientModel::symbolic(
        DomainBox::cube(1, -half_width, half_width).unwrap(),
        scalar(force),
        scalar(gamma),
        scalar(sigma),
    )
    .unwrap()
}

const MASSES: [f64; 3] = [1e-1, 1e-2, 1e-3];

#[test]
fn constant_friction_sweep_converges_without_noise_drift() {
    let model = model_1d("1.5", "1", "-x1", 50.0);
    assert_eq!(noise_induced_drift(&model, &[0.3]).unwrap(), vec![0.0]);
    let cfg = SolverConfig::new(0.02, 1.0, 200, 4, vec![0.5]);
    let report = mass_sweep(&model, &MASSES, &cfg, &SweepOptions::default()).unwrap();
    assert!(report.valid);
    assert!(report.strictly_decreasing, "{:?}", report.estimates());
    assert!(report.estimates()[2] < 0.01);
    assert!(report
        .cells
        .iter()
        .all(|c| c.estimate.mean >= 0.0 && c.paths_used == 200));
}

#[test]
fn reports_are_reproducible() {
    let model = model_1d("2 + sin(x1)", "1", "-x1", 50.0);
    let cfg = SolverConfig::new(0.05, 0.5, 40, 99, vec![0.1]);
    let opts = SweepOptions {
        compare_without_noise_drift: true,
        ..SweepOptions::default()
    };
    let a = mass_sweep(&model, &[1e-1, 1e-2], &cfg, &opts).unwrap();
    let b = mass_sweep(&model, &[1e-1, 1e-2], &cfg, &opts).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    let mut csv = Vec::new();
    a.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);
}

#[test]
fn doubling_paths_shrinks_the_standard_error() {
    let model = model_1d("1", "1", "0", 1e3);
    let opts = SweepOptions {
        batches: 400,
        ..SweepOptions::default()
    };
    let stderr = |paths| {
        let cfg = SolverConfig::new(0.05, 1.0, paths, 8, vec![0.0]);
        mass_sweep(&model, &[0.2], &cfg, &opts).unwrap().cells[0]
            .estimate
            .stderr
    };
    let ratio = stderr(3200) / stderr(1600);
    assert!((ratio * 2f64.sqrt() - 1.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn independent_noise_is_a_negative_control() {
    let model = model_1d("2 + sin(x1)", "1", "-x1", 50.0);
    let cfg = SolverConfig::new(0.02, 1.0, 200, 12, vec![-0.5]);
    let opts = SweepOptions {
        coupling: NoiseCoupling::Independent,
        ..SweepOptions::default()
    };
    let report = mass_sweep(&model, &MASSES, &cfg, &opts).unwrap();
    let est = report.estimates();
    assert!(est.iter().all(|&e| e > 0.3), "{est:?}");
    assert!(est[2] > 0.5 * est[0]);
    assert!(!report.strictly_decreasing);
}

#[test]
fn exits_invalidate_the_report() {
    let model = model_1d("1", "2", "0", 0.3);
    let cfg = SolverConfig::new(0.01, 1.0, 50, 1, vec![0.0]);
    let report = mass_sweep(&model, &[0.1], &cfg, &SweepOptions::default()).unwrap();
    assert!(!report.valid);
    assert!(report.cells[0].exited > 0);
    assert_eq!(report.cells[0].paths_used + report.cells[0].exited, 50);
    assert!(matches!(
        report.ensure_valid(),
        Err(ExperimentError::Invalid(_))
    ));
}

#[test]
fn masses_must_be_strictly_decreasing() {
    let model = model_1d("1", "1", "0", 10.0);
    let cfg = SolverConfig::new(0.1, 1.0, 2, 1, vec![0.0]);
    let err = mass_sweep(&model, &[1e-2, 1e-1], &cfg, &SweepOptions::default()).unwrap_err();
    assert!(matches!(err, ExperimentError::Masses(_)));
}

fn ou_problem(f: &str) -> ColoredNoiseProblem {
    ColoredNoiseProblem {
        force: scalar("-x1"),
        friction: scalar("1"),
        domain: DomainBox::cube(1, -20.0, 20.0).unwrap(),
        spec: ColoredNoiseSpec {
            drift: Mat::from_rows(&[[1.0]]),
            noise: Mat::from_rows(&[[2f64.sqrt()]]),
            tau0: 1.0,
            coupling: scalar(f),
            scale: Expr::num(1.0),
        },
    }
}

#[test]
fn constant_coupling_has_no_noise_drift() {
    let lifted = ou_problem("0.8").lifted().unwrap();
    for x in [-1.0, 0.0, 2.5] {
        assert!(noise_induced_drift(&lifted, &[x, 0.3]).unwrap()[0].abs() < 1e-14);
        let b = LimitSde::ito(&lifted).ito_drift(&[x, 0.3]).unwrap();
        assert!((b[0] + x).abs() < 1e-12);
    }
    let cfg = SolverConfig::new(0.02, 0.5, 100, 3, vec![0.5]);
    let report = colored_noise_sweep(
        &ou_problem("0.8"),
        &[1e-1, 1e-2],
        &cfg,
        &SweepOptions::default(),
    )
    .unwrap();
    assert_eq!(report.axes, vec![0]);
    assert!(report.strictly_decreasing, "{:?}", report.estimates());
}

#[test]
fn thermophoresis_pre_check() {
    let chk = thermophoresis_check(
        &parse("-x1", 1).unwrap(),
        &parse("2 + cos(x1)", 1).unwrap(),
        &parse("1 + x1^2/4", 1).unwrap(),
        0.5,
        &DomainBox::cube(1, -2.0, 2.0).unwrap(),
        41,
    )
    .unwrap();
    assert!(chk.passed, "{chk:?}");
    assert_eq!(chk.points, 41);
}

#[test]
fn gaussian_stationary_law() {
    let model = fdr_model(
        &FdrConvention::Diffusion1d {
            diffusion: parse("1", 1).unwrap(),
        },
        &ForceSpec::Potential(parse("x1^2/2", 1).unwrap()),
        1.0,
        DomainBox::cube(1, -20.0, 20.0).unwrap(),
    )
    .unwrap();
    let cfg = SolverConfig::new(0.05, 60.0, 2000, 31, vec![0.0]);
    let opts = StationaryOptions {
        burn_in: 0.5,
        thin: 12,
        level: 2,
    };
    let report = stationary_check(&LimitSde::ito(&model), &cfg, &opts).unwrap();
    assert!(report.samples >= 100_000, "{}", report.samples);
    assert!(report.max_ks <= 0.02, "{report:?}");
}

#[test]
fn zero_temperature_collapses_to_the_minimizer() {
    let model = model_1d("2 + sin(x1)", "0", "-(x1 - 1)", 10.0);
    let cfg = SolverConfig::new(0.01, 60.0, 5, 2, vec![-3.0]);
    let ens = simulate_limit(&LimitSde::ito(&model), &cfg, &cfg.noise(0, 1).unwrap()).unwrap();
    let k = ens.times.len() - 1;
    for p in 0..5 {
        assert!((ens.x(p, k)[0] - 1.0).abs() < 1e-6);
    }
}

#[test]
fn stationary_check_needs_a_potential() {
    let model = model_1d("1", "1", "-x1", 10.0);
    let cfg = SolverConfig::new(0.1, 1.0, 2, 1, vec![0.0]);
    assert!(stationary_check(&LimitSde::ito(&model), &cfg, &StationaryOptions::default()).is_err());
}
