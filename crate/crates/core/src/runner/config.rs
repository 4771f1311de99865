//! Run configuration: TOML with `section.key = value` entries.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clock::{free_expectation_curve, CalibrationCurve, ClockParams};
use crate::error::{Error, Result};
use crate::fieldgrid::{AtomParams, ExperimentParams, GridSpec, PulseParams, DEFAULT_ABSORBER_STRENGTH};
use crate::groundstate::GroundStateConfig;
use crate::observables::BaselineMode;
use crate::propagator::PropagatorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomSection {
    pub z: f64,
}

impl Default for AtomSection {
    fn default() -> Self {
        Self { z: 1.0 }
    }
}

/// Peak field plus exactly one of `gamma` or `omega_e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseSection {
    pub e0: f64,
    pub gamma: Option<f64>,
    pub omega_e: Option<f64>,
    /// Pulse centre; defaults to `5 tau_e` so the window starts at 0.
    pub t0: Option<f64>,
}

impl Default for PulseSection {
    fn default() -> Self {
        Self {
            e0: 1.1,
            gamma: Some(0.25),
            omega_e: None,
            t0: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ClockSection {
    pub n_states: Option<usize>,
    /// Defaults to `200 / Z^2`.
    pub delta_t: Option<f64>,
    pub samples_per_tick: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationSection {
    pub dt: f64,
    pub krylov_dim: usize,
    pub krylov_tol: f64,
}

impl Default for PropagationSection {
    fn default() -> Self {
        let d = PropagatorConfig::default();
        Self {
            dt: d.dt,
            krylov_dim: d.krylov_dim,
            krylov_tol: d.krylov_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierSection {
    pub eta0: Option<f64>,
    pub r_sep: Option<f64>,
    /// Field used for the barrier geometry; defaults to `pulse.e0`. Needed
    /// for field-free runs, which have no barrier of their own.
    pub reference_e0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbsorberSection {
    pub enabled: bool,
    pub width: f64,
    pub strength: f64,
}

impl Default for AbsorberSection {
    fn default() -> Self {
        Self {
            enabled: true,
            width: 8.0,
            strength: DEFAULT_ABSORBER_STRENGTH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub mode: BaselineMode,
    /// Step of the field-free reference run (exact propagation, so large).
    pub dt: f64,
    pub krylov_dim: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            mode: BaselineMode::Off,
            dt: 0.1,
            krylov_dim: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserverSection {
    /// Steps between samples of occupancy, detector flux, norm and absorbed
    /// probability.
    pub sample_stride: u64,
    /// Steps between progress log lines.
    pub progress_stride: u64,
    /// 0 disables checkpoints.
    pub checkpoint_stride: u64,
}

impl Default for ObserverSection {
    fn default() -> Self {
        Self {
            sample_stride: 4,
            progress_stride: 1000,
            checkpoint_stride: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub e0_values: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            e0_values: vec![0.9, 1.0, 1.1, 1.2, 1.3, 1.4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub atom: AtomSection,
    pub pulse: PulseSection,
    pub grid: GridSpec,
    pub clock: ClockSection,
    pub propagation: PropagationSection,
    pub ground: GroundStateConfig,
    pub barrier: BarrierSection,
    pub absorber: AbsorberSection,
    pub baseline: BaselineSection,
    pub observers: ObserverSection,
    pub output: OutputSection,
    pub sweep: SweepSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn atom(&self) -> Result<AtomParams> {
        AtomParams::new(self.atom.z)
    }

    /// Experiment parameters from `(gamma, e0)` or `(omega_e, e0)`.
    pub fn experiment(&self) -> Result<ExperimentParams> {
        let p = &self.pulse;
        let atom = self.atom()?;
        let exp = match (p.gamma, p.omega_e) {
            (Some(gamma), None) => ExperimentParams::from_keldysh(atom.z, gamma, p.e0)?,
            (None, Some(omega)) => ExperimentParams::from_pulse(atom, PulseParams::starting_at_zero(p.e0, omega)?),
            _ => {
                return Err(Error::Config(
                    "give exactly one of pulse.gamma and pulse.omega_e".into(),
                ))
            }
        };
        Ok(match p.t0 {
            Some(t0) => ExperimentParams {
                pulse: PulseParams::new(exp.pulse.e0, exp.pulse.omega_e, t0)?,
                ..exp
            },
            None => exp,
        })
    }

    pub fn clock_params(&self) -> Result<ClockParams> {
        let z = self.atom.z;
        let n = self.clock.n_states.unwrap_or(3);
        ClockParams::new(n, self.clock.delta_t.unwrap_or(200.0 / (z * z)))
    }

    /// Calibration curve at the configured resolution.
    pub fn calibration_curve(&self) -> Result<CalibrationCurve> {
        let clock = self.clock_params()?;
        match self.clock.samples_per_tick {
            None => Ok(CalibrationCurve::standard(&clock)),
            Some(s) => free_expectation_curve(&clock, s * clock.n_states()),
        }
    }

    pub fn propagator(&self, window: (f64, f64)) -> PropagatorConfig {
        PropagatorConfig {
            dt: self.propagation.dt,
            krylov_dim: self.propagation.krylov_dim,
            krylov_tol: self.propagation.krylov_tol,
            t_start: window.0,
            t_end: window.1,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment()?;
        self.clock_params()?;
        crate::fieldgrid::Grid2D::new(self.grid)?;
        self.propagator((0.0, 1.0)).validate()?;
        let o = &self.observers;
        if o.sample_stride == 0 || o.progress_stride == 0 {
            return Err(Error::Config("observer strides must be >= 1".into()));
        }
        if let Some(eta0) = self.barrier.eta0 {
            if !(eta0 > 0.0) {
                return Err(Error::Config(format!("barrier.eta0 must be positive, got {eta0}")));
            }
        }
        if self.pulse.e0 == 0.0 && self.barrier.reference_e0.is_none() {
            return Err(Error::Config(
                "field-free runs need barrier.reference_e0 to place the barrier".into(),
            ));
        }
        if let Some(e) = self.barrier.reference_e0 {
            if !(e > 0.0) {
                return Err(Error::Config(format!("barrier.reference_e0 must be positive, got {e}")));
            }
        }
        if let Some(r) = self.barrier.r_sep {
            if !(r > 0.0) {
                return Err(Error::Config(format!("barrier.r_sep must be positive, got {r}")));
            }
        }
        Ok(())
    }

    /// Replace the pulse by `(gamma, e0)` (sweep points and CLI overrides).
    pub fn with_keldysh(&self, gamma: f64, e0: f64) -> Self {
        let mut c = self.clone();
        c.pulse.gamma = Some(gamma);
        c.pulse.omega_e = None;
        c.pulse.e0 = e0;
        c
    }
}

/// Sweep over peak fields at fixed Keldysh parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub e0_values: Vec<f64>,
    pub gamma: f64,
    pub base: RunConfig,
}

impl SweepSpec {
    pub fn new(e0_values: Vec<f64>, gamma: f64, base: RunConfig) -> Result<Self> {
        if e0_values.is_empty() {
            return Err(Error::Config("sweep needs at least one field value".into()));
        }
        if e0_values.iter().any(|e| !(*e > 0.0)) || e0_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("sweep fields must be positive and strictly increasing".into()));
        }
        if !(gamma > 0.0) {
            return Err(Error::Config(format!("sweep gamma must be positive, got {gamma}")));
        }
        Ok(Self {
            e0_values,
            gamma,
            base,
        })
    }

    pub fn from_config(base: RunConfig) -> Result<Self> {
        let gamma = base
            .pulse
            .gamma
            .ok_or_else(|| Error::Config("sweeps run at fixed pulse.gamma".into()))?;
        Self::new(base.sweep.e0_values.clone(), gamma, base)
    }
}
