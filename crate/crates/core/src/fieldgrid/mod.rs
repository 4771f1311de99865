//! Grid geometry, fields, the Coulomb-plus-laser potential, the Gaussian
//! pulse, the fourth-order kinetic operator, and the boundary absorber.

mod absorber;
mod field;
mod grid;
mod kinetic;
mod params;
mod potential;

pub use absorber::{absorber_mask, DEFAULT_ABSORBER_STRENGTH};
pub use field::{ComplexField, ScalarField};
pub(crate) use field::sum_norm_sqr;
pub use grid::{Grid2D, GridSpec};
pub use kinetic::{apply_hamiltonian, apply_kinetic, D2_WEIGHTS};
pub(crate) use kinetic::first_derivative;
pub use params::{AtomParams, ExperimentParams, PulseParams, WINDOW_HALF_WIDTH};
pub use potential::{coulomb_point, coulomb_potential, pulse_amplitude, total_potential};
