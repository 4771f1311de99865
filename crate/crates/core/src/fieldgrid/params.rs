use serde::Serialize;

use crate::error::{Error, Result};

/// Nuclear charge and the 2D hydrogen-like ground-state energy `-2 Z^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AtomParams {
    pub z: f64,
    pub ground_energy: f64,
}

impl AtomParams {
    pub fn new(z: f64) -> Result<Self> {
        if !(z >= 1.0 && z.is_finite()) {
            return Err(Error::Config(format!("atomic number must be >= 1, got {z}")));
        }
        Ok(Self {
            z,
            ground_energy: -2.0 * z * z,
        })
    }

    pub fn hydrogen() -> Self {
        Self::new(1.0).expect("Z = 1")
    }

    /// `sqrt(-2 E)`, the binding momentum.
    pub fn binding_momentum(&self) -> f64 {
        (-2.0 * self.ground_energy).sqrt()
    }
}

/// Gaussian pulse `E(t) = e0 exp(-omega_e^2 (t - t0)^2 / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulseParams {
    pub e0: f64,
    pub omega_e: f64,
    pub t0: f64,
    pub tau_e: f64,
}

/// Half-width of the default simulation window in units of `tau_e`.
pub const WINDOW_HALF_WIDTH: f64 = 5.0;

impl PulseParams {
    /// `e0 = 0` is accepted and describes the field-free reference.
    pub fn new(e0: f64, omega_e: f64, t0: f64) -> Result<Self> {
        if !(e0 >= 0.0 && e0.is_finite()) {
            return Err(Error::Config(format!("peak field must be >= 0, got {e0}")));
        }
        if !(omega_e > 0.0 && omega_e.is_finite()) {
            return Err(Error::Config(format!(
                "pulse frequency must be positive, got {omega_e}"
            )));
        }
        Ok(Self {
            e0,
            omega_e,
            t0,
            tau_e: std::f64::consts::SQRT_2 / omega_e,
        })
    }

    /// Pulse whose default window `[t0 - 5 tau_e, t0 + 5 tau_e]` starts at 0.
    pub fn starting_at_zero(e0: f64, omega_e: f64) -> Result<Self> {
        let tau_e = std::f64::consts::SQRT_2 / omega_e;
        Self::new(e0, omega_e, WINDOW_HALF_WIDTH * tau_e)
    }

    pub fn window(&self) -> (f64, f64) {
        (
            self.t0 - WINDOW_HALF_WIDTH * self.tau_e,
            self.t0 + WINDOW_HALF_WIDTH * self.tau_e,
        )
    }

    pub fn with_field(&self, e0: f64) -> Self {
        Self { e0, ..*self }
    }
}

/// Atom plus pulse with the derived Keldysh quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExperimentParams {
    pub atom: AtomParams,
    pub pulse: PulseParams,
    pub gamma: f64,
    pub tau_k: f64,
}

impl ExperimentParams {
    pub fn from_pulse(atom: AtomParams, pulse: PulseParams) -> Self {
        let tau_k = atom.binding_momentum() / pulse.e0;
        Self {
            atom,
            pulse,
            gamma: pulse.omega_e * tau_k,
            tau_k,
        }
    }

    /// Fix `(Z, gamma, e0)` and derive `omega_e = gamma / tau_k`; the pulse
    /// peaks at `t0 = 5 tau_e` so the window starts at 0.
    pub fn from_keldysh(z: f64, gamma: f64, e0: f64) -> Result<Self> {
        let atom = AtomParams::new(z)?;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!(
                "Keldysh parameter must be positive, got {gamma}"
            )));
        }
        if !(e0 > 0.0 && e0.is_finite()) {
            return Err(Error::Config(format!(
                "peak field must be positive when fixing gamma, got {e0}"
            )));
        }
        let tau_k = atom.binding_momentum() / e0;
        let pulse = PulseParams::starting_at_zero(e0, gamma / tau_k)?;
        Ok(Self {
            atom,
            pulse,
            gamma,
            tau_k,
        })
    }
}
