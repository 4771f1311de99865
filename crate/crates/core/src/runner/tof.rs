//! Clock check on a free particle: a Gaussian packet on a line crosses
//! `[0, length]` with the clock coupled there; the calibrated reading should
//! match the classical transit time `length / k0`.

use num_complex::Complex64;
use serde::Serialize;

use crate::clock::{CalibrationCurve, ClockParams};
use crate::error::{Error, Result, StageExt};
use crate::fieldgrid::{ComplexField, Grid2D, PulseParams, ScalarField};
use crate::observables::{total_clock_reading, trapezoid};
use crate::propagator::{ClockedWaveFunction, Propagator, PropagatorConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TofConfig {
    pub length: f64,
    pub k0: f64,
    /// Position spread of `|psi|^2`; momentum spread is `1 / (2 sigma)`.
    pub sigma: f64,
    pub clock: ClockParams,
    pub dx: f64,
    pub dt: f64,
    pub krylov_dim: usize,
    /// Distance (in `sigma`) kept between the packet and the grid edges.
    pub margin: f64,
    /// `false` couples the clock nowhere.
    pub attached: bool,
}

impl TofConfig {
    pub fn new(length: f64, k0: f64, clock: ClockParams) -> Self {
        Self {
            length,
            k0,
            sigma: 5.0,
            clock,
            dx: 0.1,
            dt: 0.01,
            krylov_dim: 16,
            margin: 8.0,
            attached: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.k0 > 0.0 && self.sigma > 0.0 && self.dx > 0.0 && self.margin > 0.0) {
            return Err(Error::Config(format!("invalid time-of-flight setup {self:?}")));
        }
        if 2.0 * self.sigma * self.k0 < 4.0 {
            return Err(Error::Config(format!(
                "packet not narrow in momentum: spread {} vs k0 = {}",
                0.5 / self.sigma,
                self.k0
            )));
        }
        Ok(())
    }

    /// Packet starts `margin` widths before the region.
    pub fn start(&self) -> f64 {
        -self.margin * self.sigma
    }

    fn width_at(&self, t: f64) -> f64 {
        let s = t / (2.0 * self.sigma * self.sigma);
        self.sigma * (1.0 + s * s).sqrt()
    }

    /// First time the packet is `margin` widths past the region.
    pub fn end_time(&self) -> f64 {
        let speed = self.k0;
        let mut t = (self.length - self.start()) / speed;
        while self.start() + speed * t - self.margin * self.width_at(t) < self.length {
            t += 0.25 * self.sigma / speed;
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TofReport {
    pub length: f64,
    pub k0: f64,
    pub classical_time: f64,
    pub clock_reading: f64,
    pub calibrated_time: f64,
    /// `int_0^length |psi|^2 dx dt`.
    pub dwell_integral: f64,
    pub final_occupancy: f64,
}

impl TofReport {
    pub fn relative_error(&self) -> f64 {
        (self.calibrated_time - self.classical_time) / self.classical_time
    }
}

/// Clock-coupled free evolution on a line grid with no Coulomb term.
/// Errors when the packet comes near the grid edge or has not left the
/// region by the end.
pub fn run_time_of_flight_validation(config: &TofConfig) -> Result<TofReport> {
    config.validate().stage("config")?;
    let t_end = config.end_time();
    let x0 = config.start();
    let x_lo = x0 - config.margin * config.sigma;
    let x_hi = x0 + config.k0 * t_end + 2.0 * config.margin * config.width_at(t_end);
    let nx = ((x_hi - x_lo) / config.dx).ceil() as usize + 1;
    let grid = Grid2D::line(nx, x_lo, x_lo + (nx - 1) as f64 * config.dx).stage("config")?;

    let s2 = 4.0 * config.sigma * config.sigma;
    let mut psi = ComplexField::from_fn(grid, |x, _| {
        Complex64::from_polar((-(x - x0) * (x - x0) / s2).exp(), config.k0 * x)
    });
    psi.normalize();
    // Fraction of each node's cell inside the region, so the coupled length
    // is exactly `length` rather than a whole number of cells.
    let h = grid.dx();
    let region = ScalarField::from_fn(grid, |x, _| {
        let lo = (x - 0.5 * h).max(0.0);
        let hi = (x + 0.5 * h).min(config.length);
        ((hi - lo) / h).max(0.0)
    });
    let mask = if config.attached {
        region.clone()
    } else {
        ScalarField::constant(grid, 0.0)
    };
    let zero = ScalarField::constant(grid, 0.0);
    let ones = ScalarField::constant(grid, 1.0);
    let prop_config = PropagatorConfig {
        dt: config.dt,
        krylov_dim: config.krylov_dim,
        t_start: 0.0,
        t_end,
        ..Default::default()
    };
    let no_field = PulseParams::new(0.0, 1.0, 0.0)?;
    let mut prop = Propagator::new(&zero, no_field, config.clock, prop_config, &mask, &ones).stage("propagation")?;
    let mut state = ClockedWaveFunction::init_state(&psi, &config.clock, 0.0);

    let edge = config.sigma;
    let edges = ScalarField::from_fn(grid, |x, _| {
        if x < grid.x_first() + edge || x > grid.x_last() - edge {
            1.0
        } else {
            0.0
        }
    });
    let (mut times, mut occ) = (Vec::new(), Vec::new());
    prop.evolve(&mut state, 5, |s, _| {
        times.push(s.time());
        occ.push(s.weighted_probability(region.values()));
        let at_edge = s.weighted_probability(edges.values());
        if at_edge > 1e-6 {
            return Err(Error::Domain(format!(
                "packet reached the grid boundary (probability {at_edge:.2e}) at t = {:.3}",
                s.time()
            )));
        }
        Ok(())
    })
    .stage("propagation")?;
    let final_occupancy = *occ.last().expect("observer ran");
    if final_occupancy > 1e-6 {
        return Err(Error::Domain(format!(
            "packet has not cleared the region by t = {t_end:.3} (occupancy {final_occupancy:.2e})"
        )))
        .stage("propagation");
    }

    let clock_reading = total_clock_reading(&state);
    let calibrated_time = if config.attached {
        CalibrationCurve::standard(&config.clock).calibrate(clock_reading).stage("calibration")?
    } else {
        clock_reading
    };
    Ok(TofReport {
        length: config.length,
        k0: config.k0,
        classical_time: config.length / config.k0,
        clock_reading,
        calibrated_time,
        dwell_integral: trapezoid(&times, &occ),
        final_occupancy,
    })
}
