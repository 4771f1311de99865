use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qclock::runner::{
    self, run_sweep, run_time_of_flight_validation, run_with_control, RunConfig, RunControl, RunOutcome, SweepSpec,
    TofConfig,
};
use qclock::{Error, Result};

#[derive(Parser)]
#[command(name = "qclock", version, about = "Clocked tunneling-time simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration (`section.key = value`).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    e0: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    z: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Ground state only.
    Ground(Common),
    /// Single clocked run.
    Run {
        #[command(flatten)]
        common: Common,
        /// Continue from a checkpoint file.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop after this step, leaving a checkpoint.
        #[arg(long)]
        stop_after: Option<u64>,
    },
    /// Field sweep at fixed gamma.
    Sweep(Common),
    /// Free-clock calibration curve `t,f_t`.
    CalibrationCurve(Common),
    /// Free-particle transit through a clocked interval.
    TofValidate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10.0)]
        length: f64,
        #[arg(long, default_value_t = 2.0)]
        k0: f64,
    },
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(z) = common.z {
        config.atom.z = z;
    }
    if let Some(e0) = common.e0 {
        config.pulse.e0 = e0;
    }
    if let Some(gamma) = common.gamma {
        config.pulse.gamma = Some(gamma);
        config.pulse.omega_e = None;
    }
    if let Some(out) = &common.out {
        config.output.dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ground(common) => {
            let config = load(&common)?;
            let g = runner::run_ground(&config)?;
            println!("energy {} after {} iterations (residual {:e})", g.energy, g.iterations, g.residual);
        }
        Command::Run {
            common,
            resume,
            stop_after,
        } => {
            let config = load(&common)?;
            let control = RunControl {
                resume_from: resume,
                stop_after_step: stop_after,
            };
            match run_with_control(&config, &control)? {
                RunOutcome::Completed(r) => println!("{}\n{}", qclock::observables::REPORT_HEADER, r.report.csv_row()),
                RunOutcome::Stopped { step, checkpoint } => {
                    println!("stopped after step {step}; checkpoint {}", checkpoint.display())
                }
            }
        }
        Command::Sweep(common) => {
            let config = load(&common)?;
            let result = run_sweep(&SweepSpec::from_config(config)?)?;
            for (name, fit) in [("tau_t", result.tau_t_fit), ("tau_r", result.tau_r_fit)] {
                if let Some(f) = fit {
                    println!("{name} ~ e0^{:.4}", f.exponent);
                }
            }
        }
        Command::CalibrationCurve(common) => {
            let config = load(&common)?;
            std::fs::create_dir_all(&config.output.dir)?;
            let path = config.output.dir.join("calibration.csv");
            runner::write_calibration_curve(&config, &path)?;
            println!("{}", path.display());
        }
        Command::TofValidate { common, length, k0 } => {
            let config = load(&common)?;
            let report = run_time_of_flight_validation(&TofConfig::new(length, k0, config.clock_params()?))?;
            println!(
                "clock {:.6} a.u., classical {:.6} a.u., relative error {:+.4}",
                report.calibrated_time,
                report.classical_time,
                report.relative_error()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn report(e: &Error) {
    log::error!("{e}");
}
