//! Experiment orchestration: single runs, field sweeps, the time-of-flight
//! clock check, checkpoints and CSV output.

pub mod checkpoint;
pub mod config;
mod sweep;
mod tof;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::barrier::{compute_barrier, stark_shifted_energy, BarrierRegion};
use crate::detector::{build_distributions, tunneling_distribution, DetectorRecord, LineProbe, TunnelingDistribution};
use crate::error::{Result, StageExt};
use crate::fieldgrid::{absorber_mask, coulomb_potential, pulse_amplitude, Grid2D, ScalarField};
use crate::groundstate::{solve_ground_state, GroundStateResult};
use crate::observables::{
    assemble_times, clock_expectation_on, dwell_time_integral, split_bound_free, total_clock_reading, Baseline,
    BaselineMode, DwellIntegral, RawTimes, TimesReport,
};
use crate::propagator::{propagate_field, ClockedWaveFunction, PropagatorConfig, Propagator, SplitScheme};

pub use checkpoint::{checkpoint_read, checkpoint_write, snapshot_read, snapshot_write, SeriesSamples};
pub use config::{RunConfig, SweepSpec};
pub use sweep::{fit_power_law, run_sweep, PowerLawFit, SweepResult};
pub use tof::{run_time_of_flight_validation, TofConfig, TofReport};

/// Allowed difference between the final barrier occupancy and its static
/// level before the dwell integral is flagged.
pub const END_LEVEL_THRESHOLD: f64 = 1e-3;

/// Checkpoint file name inside the output directory.
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

/// Resume and early-stop controls for the clocked run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunControl {
    pub resume_from: Option<PathBuf>,
    /// Stop after this step and leave a checkpoint behind.
    pub stop_after_step: Option<u64>,
}

/// Values derived while resolving and running a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Derived {
    pub omega_e: f64,
    pub tau_e: f64,
    pub t0: f64,
    pub window_start: f64,
    pub window_end: f64,
    pub gamma: f64,
    pub tau_k: f64,
    pub dt_effective: f64,
    pub n_steps: u64,
    pub ground_energy: f64,
    pub ground_residual: f64,
    pub e_shift: f64,
    pub reference_e0: f64,
    pub xi_in: f64,
    pub xi_exit: f64,
    pub eta0: f64,
    pub r_sep: f64,
    pub static_occupancy: f64,
    pub baseline_reading: f64,
    pub free_bound_time: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub report: TimesReport,
    /// `None` when a detector signal never turns positive (no ionization).
    pub detector: Option<DetectorRecord>,
    pub tunneling: Option<TunnelingDistribution>,
    pub series: SeriesSamples,
    pub dwell: DwellIntegral,
    pub baseline: Baseline,
    pub derived: Derived,
    /// Bound and free parts overlap at `r_sep`.
    pub overlap_warning: bool,
}

#[derive(Debug, Clone)]
pub enum RunOutcome {
    Completed(Box<RunResult>),
    Stopped { step: u64, checkpoint: PathBuf },
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

fn absorber_for(config: &RunConfig, grid: &Grid2D) -> Result<ScalarField> {
    if config.absorber.enabled {
        absorber_mask(grid, config.absorber.width, config.absorber.strength)
    } else {
        Ok(ScalarField::constant(*grid, 1.0))
    }
}

/// Ground state on the configured grid; writes `ground_log.csv` and the
/// `ground.bin` snapshot.
pub fn run_ground(config: &RunConfig) -> Result<GroundStateResult> {
    let atom = config.atom().stage("config")?;
    let grid = Grid2D::new(config.grid).stage("config")?;
    let out = &config.output.dir;
    std::fs::create_dir_all(out)?;
    let ground = solve_ground_state(&grid, &atom, &config.ground).stage("ground")?;
    write_file(&out.join("ground_log.csv"), |w| ground.write_log(w)).stage("output")?;
    snapshot_write(&ground.psi0, 0.0, &out.join("ground.bin")).stage("output")?;
    Ok(ground)
}

/// `t,f_t` of the configured clock.
pub fn write_calibration_curve(config: &RunConfig, path: &Path) -> Result<()> {
    let curve = config.calibration_curve().stage("config")?;
    write_file(path, |w| curve.write_csv(w)).stage("output")
}

/// Full pipeline with default controls.
pub fn run_single(config: &RunConfig) -> Result<RunResult> {
    match run_with_control(config, &RunControl::default())? {
        RunOutcome::Completed(r) => Ok(*r),
        RunOutcome::Stopped { .. } => unreachable!("no stop requested"),
    }
}

/// Ground state, pre-evolution to `t0`, barrier, zero-field baseline,
/// clocked run, observables and detector analysis. Outputs go to
/// `config.output.dir`; files already written stay when a later stage fails.
pub fn run_with_control(config: &RunConfig, control: &RunControl) -> Result<RunOutcome> {
    config.validate().stage("config")?;
    let exp = config.experiment().stage("config")?;
    let clock = config.clock_params().stage("config")?;
    let curve = config.calibration_curve().stage("config")?;
    let grid = Grid2D::new(config.grid).stage("config")?;
    let absorber = absorber_for(config, &grid).stage("config")?;
    let (atom, pulse) = (exp.atom, exp.pulse);
    let window = pulse.window();
    let width = window.1 - window.0;
    let main_config = config.propagator(window);
    let out = config.output.dir.clone();
    std::fs::create_dir_all(&out)?;

    let ground = solve_ground_state(&grid, &atom, &config.ground).stage("ground")?;
    write_file(&out.join("ground_log.csv"), |w| ground.write_log(w)).stage("output")?;
    let potential = coulomb_potential(&grid, &atom);

    // E_shift needs the state at t0; that evolution runs without the clock.
    let mut psi_t0 = ground.psi0.clone();
    let pre = PropagatorConfig {
        t_end: pulse.t0,
        ..main_config
    };
    propagate_field(&mut psi_t0, &potential, &pulse, &absorber, &pre).stage("pre-evolution")?;

    let reference_e0 = config.barrier.reference_e0.unwrap_or(pulse.e0);
    let (_, provisional_exit) = compute_barrier(&atom, reference_e0, atom.ground_energy).stage("barrier")?;
    let e_shift = stark_shifted_energy(&psi_t0, &atom, &pulse, provisional_exit).stage("barrier")?;
    drop(psi_t0);
    let (xi_in, xi_exit) = compute_barrier(&atom, reference_e0, e_shift).stage("barrier")?;
    let eta0 = config.barrier.eta0.unwrap_or(xi_exit - xi_in);
    let r_sep = config.barrier.r_sep.unwrap_or(xi_exit);
    let absorber_width = if config.absorber.enabled { config.absorber.width } else { 0.0 };
    let region = BarrierRegion::rasterize(&grid, xi_in, xi_exit, eta0, absorber_width).stage("barrier")?;
    write_file(&out.join("barrier.csv"), |w| region.write_csv(w)).stage("output")?;
    log::info!("barrier xi in [{xi_in:.4}, {xi_exit:.4}], eta0 {eta0:.4}, E_shift {e_shift:.5}");

    let static_occupancy = region.occupancy(&ground.psi0);
    let mode = config.baseline.mode;
    let baseline_reading = if mode == BaselineMode::Off {
        0.0
    } else {
        let cfg = PropagatorConfig {
            dt: config.baseline.dt,
            krylov_dim: config.baseline.krylov_dim,
            scheme: SplitScheme::Unsplit,
            ..main_config
        };
        let mut prop = Propagator::new(&potential, pulse.with_field(0.0), clock, cfg, &region.mask, &absorber)
            .stage("baseline")?;
        let mut st = ClockedWaveFunction::init_state(&ground.psi0, &clock, window.0);
        prop.evolve(&mut st, u64::MAX, |_, _| Ok(())).stage("baseline")?;
        total_clock_reading(&st)
    };

    let mut prop =
        Propagator::new(&potential, pulse, clock, main_config, &region.mask, &absorber).stage("propagation")?;
    let probe_in = LineProbe::new(&grid, &region.entry_line).stage("detector")?;
    let probe_exit = LineProbe::new(&grid, &region.exit_line).stage("detector")?;
    let (mut state, mut series) = match &control.resume_from {
        Some(path) => checkpoint_read(path, &grid, &clock).stage("resume")?,
        None => (
            ClockedWaveFunction::init_state(&ground.psi0, &clock, window.0),
            SeriesSamples::default(),
        ),
    };
    let n_steps = main_config.n_steps();
    let last = control.stop_after_step.map_or(n_steps, |s| s.min(n_steps));
    let obs = config.observers;
    let checkpoint_path = out.join(CHECKPOINT_FILE);
    let mask = region.mask.values();
    let evolved = prop.evolve_to_step(&mut state, last, 1, |s, info| {
        let k = info.step;
        if k % obs.sample_stride == 0 || k == n_steps {
            series.times.push(s.time());
            series.occupancy.push(s.weighted_probability(mask));
            series.d_in.push(probe_in.signal(s));
            series.d_exit.push(probe_exit.signal(s));
            series.norm.push(s.norm_sqr());
            series.absorbed.push(s.total_absorbed());
        }
        if k % obs.progress_stride == 0 {
            log::info!(
                "step {k}/{n_steps} t {:.3} norm {:.9} absorbed {:.3e} field {:.4}",
                s.time(),
                s.norm_sqr(),
                s.total_absorbed(),
                info.field
            );
        }
        if obs.checkpoint_stride > 0 && k > 0 && k % obs.checkpoint_stride == 0 && k < n_steps {
            checkpoint_write(s, &series, &checkpoint_path)?;
        }
        Ok(())
    });
    if let Err(e) = evolved {
        write_file(&out.join("series.csv"), |w| series.write_csv(w)).ok();
        return Err(e.in_stage("propagation"));
    }
    if last < n_steps {
        checkpoint_write(&state, &series, &checkpoint_path).stage("output")?;
        return Ok(RunOutcome::Stopped {
            step: last,
            checkpoint: checkpoint_path,
        });
    }
    write_file(&out.join("series.csv"), |w| series.write_csv(w)).stage("output")?;
    write_file(&out.join("run_log.csv"), |w| {
        writeln!(w, "t,norm,absorbed,E_field")?;
        for k in 0..series.len() {
            let t = series.times[k];
            writeln!(
                w,
                "{},{},{},{}",
                crate::fmt_f64(t),
                crate::fmt_f64(series.norm[k]),
                crate::fmt_f64(series.absorbed[k]),
                crate::fmt_f64(pulse_amplitude(t, &pulse))
            )?;
        }
        Ok(())
    })
    .stage("output")?;

    // Observables.
    let split = split_bound_free(&state, r_sep);
    let (t_weight, r_weight) = (split.t_weight, split.r_weight);

    // The detector analysis needs uniform sampling; the final sample is off
    // the stride grid when the step count is not a multiple of it.
    let uniform = if n_steps % obs.sample_stride == 0 { series.len() } else { series.len() - 1 };
    let detector = match build_distributions(
        &series.times[..uniform],
        &series.d_in[..uniform],
        &series.d_exit[..uniform],
    ) {
        Ok(d) => Some(d),
        Err(e) => {
            log::warn!("no detector distributions: {e}");
            None
        }
    };
    let tunneling = match detector.as_ref().map(tunneling_distribution) {
        Some(Ok(t)) => Some(t),
        Some(Err(e)) => {
            log::warn!("no tunneling-time distribution: {e}");
            None
        }
        None => None,
    };
    let free_bound_time = detector
        .as_ref()
        .map_or(width, |d| (d.mean_entry_time() - window.0).clamp(0.0, width));
    let baseline = Baseline {
        mode,
        occupancy: static_occupancy,
        clock_reading: baseline_reading,
        window: width,
        free_bound_time,
    };
    let dwell = dwell_time_integral(
        &series.times,
        &series.occupancy,
        baseline.dwell_subtraction(t_weight, r_weight),
        baseline.end_level(r_weight),
        END_LEVEL_THRESHOLD,
    )
    .stage("observables")?;
    let raw = RawTimes {
        tau_tilde_d: total_clock_reading(&state),
        tau_tilde_t: clock_expectation_on(&split.rho_free, &clock),
        tau_tilde_r: clock_expectation_on(&split.rho_bound, &clock),
        t_weight,
        r_weight,
        tau_d_prime: dwell.tau_d_prime,
    };
    let mut report = assemble_times(&raw, &curve, &exp, &baseline).stage("observables")?;
    report.tau_tsub = tunneling.as_ref().map(|t| t.tau_tsub);
    report.tau_t_v = tunneling.as_ref().map(|t| t.tau_t_v);

    write_file(&out.join("times.csv"), |w| TimesReport::write_csv(std::slice::from_ref(&report), w)).stage("output")?;
    if let Some(d) = &detector {
        write_file(&out.join("detector.csv"), |w| d.write_csv(w)).stage("output")?;
    }
    if let Some(t) = &tunneling {
        write_file(&out.join("tunneling.csv"), |w| t.write_csv(w)).stage("output")?;
    }

    let derived = Derived {
        omega_e: pulse.omega_e,
        tau_e: pulse.tau_e,
        t0: pulse.t0,
        window_start: window.0,
        window_end: window.1,
        gamma: exp.gamma,
        tau_k: exp.tau_k,
        dt_effective: main_config.effective_dt(),
        n_steps,
        ground_energy: ground.energy,
        ground_residual: ground.residual,
        e_shift,
        reference_e0,
        xi_in,
        xi_exit,
        eta0,
        r_sep,
        static_occupancy,
        baseline_reading,
        free_bound_time,
    };
    write_resolved(config, &derived, &out).stage("output")?;

    Ok(RunOutcome::Completed(Box::new(RunResult {
        report,
        detector,
        tunneling,
        series,
        dwell,
        baseline,
        derived,
        overlap_warning: split.overlap_warning,
    })))
}

/// `config.toml` (re-loadable, every default filled in) and `derived.toml`.
fn write_resolved(config: &RunConfig, derived: &Derived, out: &Path) -> Result<()> {
    let mut resolved = config.clone();
    resolved.pulse.t0 = Some(derived.t0);
    resolved.clock.n_states = Some(config.clock_params()?.n_states());
    resolved.clock.delta_t = Some(config.clock_params()?.delta_t());
    resolved.barrier.eta0 = Some(derived.eta0);
    resolved.barrier.r_sep = Some(derived.r_sep);
    resolved.barrier.reference_e0 = Some(derived.reference_e0);
    std::fs::write(out.join("config.toml"), resolved.to_toml())?;
    let text = toml::to_string(derived).map_err(|e| crate::Error::Config(format!("derived values: {e}")))?;
    std::fs::write(out.join("derived.toml"), text)?;
    Ok(())
}
