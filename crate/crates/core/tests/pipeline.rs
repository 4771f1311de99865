use std::path::Path;

use qclock::observables::BaselineMode;
use qclock::runner::{run_single, run_with_control, RunConfig, RunControl, RunOutcome, CHECKPOINT_FILE};
use qclock::Error;

/// Small, fast configuration: 64^2 on [-8, 8], coarse step.
fn small(dir: &Path) -> RunConfig {
    let text = format!(
        r#"
grid.nx = 64
grid.ny = 64
grid.x_min = -8.0
grid.x_max = 8.0
grid.y_min = -8.0
grid.y_max = 8.0
ground.tol = 1e-5
propagation.dt = 0.05
propagation.krylov_dim = 16
absorber.width = 2.0
observers.sample_stride = 2
output.dir = "{}"
"#,
        dir.display()
    );
    RunConfig::from_toml_str(&text).unwrap()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

const OUTPUTS: [&str; 9] = [
    "times.csv",
    "series.csv",
    "run_log.csv",
    "detector.csv",
    "tunneling.csv",
    "barrier.csv",
    "ground_log.csv",
    "config.toml",
    "derived.toml",
];

#[test]
fn repeated_runs_are_byte_identical_across_worker_counts() {
    let root = tempfile::tempdir().unwrap();
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    one.install(|| run_single(&small(&a))).unwrap();
    three.install(|| run_single(&small(&b))).unwrap();
    for name in OUTPUTS {
        if name == "config.toml" {
            continue; // echoes the differing output directory
        }
        assert!(read(&a, name) == read(&b, name), "{name} differs");
    }
}

#[test]
fn resumed_run_matches_straight_run() {
    let root = tempfile::tempdir().unwrap();
    let (a, b) = (root.path().join("straight"), root.path().join("resumed"));
    let straight = run_single(&small(&a)).unwrap();
    let n = straight.derived.n_steps;
    let cfg = small(&b);
    let stop = RunControl {
        stop_after_step: Some(n / 2 + 1),
        ..Default::default()
    };
    let checkpoint = match run_with_control(&cfg, &stop).unwrap() {
        RunOutcome::Stopped { step, checkpoint } => {
            assert_eq!(step, n / 2 + 1);
            checkpoint
        }
        RunOutcome::Completed(_) => panic!("run should have stopped"),
    };
    assert_eq!(checkpoint, b.join(CHECKPOINT_FILE));
    let resume = RunControl {
        resume_from: Some(checkpoint),
        ..Default::default()
    };
    let resumed = match run_with_control(&cfg, &resume).unwrap() {
        RunOutcome::Completed(r) => r,
        RunOutcome::Stopped { .. } => panic!("resume should finish"),
    };
    let (x, y) = (&straight.report, &resumed.report);
    for (u, v) in [
        (x.tau_d, y.tau_d),
        (x.tau_t, y.tau_t),
        (x.tau_r, y.tau_r),
        (x.tau_d_prime, y.tau_d_prime),
        (x.t_weight, y.t_weight),
    ] {
        assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0), "{u} vs {v}");
    }
    for name in ["times.csv", "series.csv", "detector.csv", "tunneling.csv"] {
        assert!(read(&a, name) == read(&b, name), "{name} differs after resume");
    }
}

#[test]
fn field_free_run_has_no_ionization_and_no_excess_dwell() {
    let root = tempfile::tempdir().unwrap();
    let mut cfg = small(root.path());
    cfg.pulse.e0 = 0.0;
    cfg.pulse.gamma = None;
    cfg.pulse.omega_e = Some(0.1375);
    cfg.barrier.reference_e0 = Some(1.1);
    cfg.baseline.mode = BaselineMode::PerPart;
    let r = run_single(&cfg).unwrap();
    assert!(r.report.t_weight < 1e-3, "T = {}", r.report.t_weight);
    // Static dwell P0 W of the unperturbed state.
    let static_dwell = r.derived.static_occupancy * (r.derived.window_end - r.derived.window_start);
    assert!(static_dwell > 1.0);
    assert!(r.report.tau_d_prime.abs() < 1e-3 * static_dwell, "{}", r.report.tau_d_prime);
    assert!(r.report.tau_d.abs() < 1e-2 * static_dwell, "{}", r.report.tau_d);
    assert!(r.detector.is_none() || r.report.tau_tsub.is_some());
}

#[test]
fn resolved_config_round_trips() {
    let root = tempfile::tempdir().unwrap();
    let cfg = small(root.path());
    let r = run_single(&cfg).unwrap();
    let echoed = RunConfig::from_file(&root.path().join("config.toml")).unwrap();
    let (e1, e2) = (cfg.experiment().unwrap(), echoed.experiment().unwrap());
    assert_eq!(e1.pulse, e2.pulse);
    assert_eq!(echoed.barrier.eta0, Some(r.derived.eta0));
    assert_eq!(echoed.clock.delta_t, Some(200.0));
    assert!((e2.gamma - e2.pulse.omega_e * e2.tau_k).abs() < 1e-15);
    let times = String::from_utf8(read(root.path(), "times.csv")).unwrap();
    assert!(times.starts_with("e0,gamma,z,T,R,tau_d_prime,"));
    assert_eq!(times.lines().count(), 2);
}

#[test]
fn field_free_without_reference_is_a_config_error() {
    let root = tempfile::tempdir().unwrap();
    let mut cfg = small(root.path());
    cfg.pulse.e0 = 0.0;
    cfg.pulse.gamma = None;
    cfg.pulse.omega_e = Some(0.1375);
    let err = run_single(&cfg).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "config", .. }), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn failing_stage_is_named() {
    let root = tempfile::tempdir().unwrap();
    let mut cfg = small(root.path());
    // Field too strong for a barrier at the shifted level.
    cfg.pulse.e0 = 2.5;
    let err = run_single(&cfg).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "barrier", .. }), "{err}");
    assert!(matches!(err.root(), Error::NoBarrier { .. }));
    assert_eq!(err.exit_code(), 3);
    // Ground stage output was already flushed.
    assert!(root.path().join("ground_log.csv").exists());
}
