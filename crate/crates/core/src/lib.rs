//! Tunneling, dwell, and reflection times of strong-field ionization from a
//! two-dimensional Coulomb potential.
//!
//! A three-level Salecker-Wigner-Peres clock is coupled to the electron inside
//! the static tunneling-barrier region. The clock-resolved wavefunction is
//! propagated on a Cartesian grid (Strang splitting plus Lanczos steps), the
//! asymptotic clock readings of the bound and ionized parts are calibrated
//! into times, and the result is cross-checked against the density-integral
//! dwell time and a virtual-detector flux analysis.
//!
//! All quantities are in atomic units.

pub mod barrier;
pub mod clock;
pub mod detector;
pub mod error;
pub mod fieldgrid;
pub mod groundstate;
pub mod lanczos;
pub mod observables;
pub mod propagator;
pub mod runner;

pub use error::{Error, Result};

/// Lossless decimal rendering used for every CSV value (17 significant digits).
pub fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}
