//! Dwell time from the barrier occupancy, bound/free splitting and the
//! calibrated clock times.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::clock::{reading_from_overlaps, time_operator_matrix, CalibrationCurve, ClockParams};
use crate::error::{Error, Result};
use crate::fieldgrid::ExperimentParams;
use crate::propagator::ClockedWaveFunction;

/// Trapezoid rule over a possibly non-uniform grid.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DwellIntegral {
    /// Integral minus the subtracted static dwell.
    pub tau_d_prime: f64,
    pub raw: f64,
    /// Occupancy at the last sample above the expected static level.
    pub end_excess: f64,
    pub edge_warning: bool,
}

/// `int_B |Psi|^2 dt` from an occupancy series, minus `subtract` (a.u.).
/// Flags the series when the final occupancy exceeds `end_level` by more
/// than `threshold`.
pub fn dwell_time_integral(
    times: &[f64],
    occupancy: &[f64],
    subtract: f64,
    end_level: f64,
    threshold: f64,
) -> Result<DwellIntegral> {
    if times.len() != occupancy.len() || times.len() < 2 {
        return Err(Error::Config("occupancy series needs >= 2 matching samples".into()));
    }
    let raw = trapezoid(times, occupancy);
    let end_excess = occupancy[occupancy.len() - 1] - end_level;
    let edge_warning = end_excess.abs() > threshold;
    if edge_warning {
        log::warn!("barrier occupancy at window end differs from its static level by {end_excess:.3e}");
    }
    Ok(DwellIntegral {
        tau_d_prime: raw - subtract,
        raw,
        end_excess,
        edge_warning,
    })
}

/// Channel-overlap matrices of the bound (`r < r_sep`) and free
/// (`r >= r_sep` plus absorbed) parts.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundFreeSplit {
    pub rho_bound: Vec<Complex64>,
    pub rho_free: Vec<Complex64>,
    pub t_weight: f64,
    pub r_weight: f64,
    /// Probability per unit radius in a two-cell shell around `r_sep`.
    pub shell_density: f64,
    pub overlap_warning: bool,
}

pub const SHELL_DENSITY_THRESHOLD: f64 = 1e-4;

pub fn split_bound_free(state: &ClockedWaveFunction, r_sep: f64) -> BoundFreeSplit {
    let grid = *state.grid();
    let radius = |idx: usize| {
        let (x, y) = grid.coords(idx);
        x.hypot(y)
    };
    let rho_bound = state.overlaps(|i| if radius(i) < r_sep { 1.0 } else { 0.0 });
    let mut rho_free = state.overlaps(|i| if radius(i) < r_sep { 0.0 } else { 1.0 });
    for (f, a) in rho_free.iter_mut().zip(state.absorbed_matrix()) {
        *f += a;
    }
    let trace = |m: &[Complex64]| {
        let n = state.n_channels();
        (0..n).map(|i| m[i * n + i].re).sum::<f64>()
    };
    let (b, f) = (trace(&rho_bound), trace(&rho_free));
    let total = b + f;
    let half = grid.dx().max(grid.dy());
    let shell: Vec<f64> = (0..grid.len())
        .map(|i| if (radius(i) - r_sep).abs() < half { 1.0 } else { 0.0 })
        .collect();
    let shell_density = state.weighted_probability(&shell) / (2.0 * half);
    let overlap_warning = shell_density > SHELL_DENSITY_THRESHOLD;
    if overlap_warning {
        log::warn!("density {shell_density:.3e} per unit radius at r_sep = {r_sep}: bound and free parts overlap");
    }
    BoundFreeSplit {
        rho_bound,
        rho_free,
        t_weight: f / total,
        r_weight: b / total,
        shell_density,
        overlap_warning,
    }
}

/// Clock reading of a part given by its channel overlaps, normalized by
/// the part's probability.
pub fn clock_expectation_on(rho: &[Complex64], clock: &ClockParams) -> f64 {
    let n = clock.n_states();
    let norm: f64 = (0..n).map(|i| rho[i * n + i].re).sum();
    if norm <= 0.0 {
        return 0.0;
    }
    reading_from_overlaps(&time_operator_matrix(clock), rho) / norm
}

/// Clock reading of the whole state, absorbed flux included.
pub fn total_clock_reading(state: &ClockedWaveFunction) -> f64 {
    let mut rho = state.overlaps(|_| 1.0);
    for (r, a) in rho.iter_mut().zip(state.absorbed_matrix()) {
        *r += a;
    }
    clock_expectation_on(&rho, state.clock())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMode {
    /// Static dwell removed in calibrated time, each part over the time it
    /// spent bound.
    PerPart,
    /// Static dwell of the full window removed from every calibrated time.
    Uniform,
    /// Zero-field reading subtracted from raw readings before calibration.
    Raw,
    /// Readings and the occupancy integral used as they are.
    #[default]
    Off,
}

/// Zero-field reference quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Baseline {
    pub mode: BaselineMode,
    /// `int_B |Psi_0|^2`.
    pub occupancy: f64,
    /// Raw clock reading of the zero-field run over the window.
    pub clock_reading: f64,
    /// Window length `W`.
    pub window: f64,
    /// Time the free part spent bound before entering the barrier.
    pub free_bound_time: f64,
}

impl Baseline {
    pub fn off(window: f64) -> Self {
        Self {
            mode: BaselineMode::Off,
            occupancy: 0.0,
            clock_reading: 0.0,
            window,
            free_bound_time: window,
        }
    }

    /// Static dwell subtracted from the occupancy integral.
    pub fn dwell_subtraction(&self, t_weight: f64, r_weight: f64) -> f64 {
        match self.mode {
            BaselineMode::Off => 0.0,
            BaselineMode::Uniform | BaselineMode::Raw => self.occupancy * self.window,
            BaselineMode::PerPart => {
                self.occupancy * (t_weight * self.free_bound_time + r_weight * self.window)
            }
        }
    }

    /// Occupancy expected at the window end once the dynamics is over: the
    /// bound part's share of the static occupancy.
    pub fn end_level(&self, r_weight: f64) -> f64 {
        self.occupancy * r_weight
    }
}

/// Raw inputs to [`assemble_times`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RawTimes {
    pub tau_tilde_d: f64,
    pub tau_tilde_t: f64,
    pub tau_tilde_r: f64,
    pub t_weight: f64,
    pub r_weight: f64,
    pub tau_d_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimesReport {
    pub e0: f64,
    pub gamma: f64,
    pub z: f64,
    pub t_weight: f64,
    pub r_weight: f64,
    pub tau_d_prime: f64,
    pub tau_tilde_d: f64,
    pub tau_tilde_t: f64,
    pub tau_tilde_r: f64,
    pub tau_d: f64,
    pub tau_t: f64,
    pub tau_r: f64,
    pub tau_k: f64,
    /// `tau~_D - (T tau~_T + R tau~_R)`.
    pub identity_residual: f64,
    pub tau_tsub: Option<f64>,
    pub tau_t_v: Option<f64>,
}

pub const REPORT_HEADER: &str =
    "e0,gamma,z,T,R,tau_d_prime,tau_tilde_d,tau_tilde_t,tau_tilde_r,tau_d,tau_t,tau_r,tau_k,tau_tsub,tau_t_v";

impl TimesReport {
    pub fn csv_row(&self) -> String {
        let f = crate::fmt_f64;
        let opt = |v: Option<f64>| v.map(f).unwrap_or_else(|| "nan".into());
        [
            f(self.e0),
            f(self.gamma),
            f(self.z),
            f(self.t_weight),
            f(self.r_weight),
            f(self.tau_d_prime),
            f(self.tau_tilde_d),
            f(self.tau_tilde_t),
            f(self.tau_tilde_r),
            f(self.tau_d),
            f(self.tau_t),
            f(self.tau_r),
            f(self.tau_k),
            opt(self.tau_tsub),
            opt(self.tau_t_v),
        ]
        .join(",")
    }

    pub fn write_csv<W: Write>(reports: &[TimesReport], mut out: W) -> std::io::Result<()> {
        writeln!(out, "{REPORT_HEADER}")?;
        for r in reports {
            writeln!(out, "{}", r.csv_row())?;
        }
        Ok(())
    }

    /// `T tau_T + R tau_R`; differs from `tau_D` through the nonlinear
    /// calibration.
    pub fn weighted_calibrated(&self) -> f64 {
        self.t_weight * self.tau_t + self.r_weight * self.tau_r
    }
}

fn calibrate_named(curve: &CalibrationCurve, value: f64, what: &str) -> Result<f64> {
    curve.calibrate(value).map_err(|e| match e {
        Error::CalibrationRange { value, lo, hi, .. } => Error::CalibrationRange {
            what: what.into(),
            value,
            lo,
            hi,
        },
        other => other,
    })
}

/// Calibrate the raw readings and attach weights and Keldysh quantities.
pub fn assemble_times(
    raw: &RawTimes,
    curve: &CalibrationCurve,
    params: &ExperimentParams,
    baseline: &Baseline,
) -> Result<TimesReport> {
    let identity_residual = raw.tau_tilde_d - (raw.t_weight * raw.tau_tilde_t + raw.r_weight * raw.tau_tilde_r);
    let (tau_d, tau_t, tau_r) = match baseline.mode {
        BaselineMode::Raw => (
            calibrate_named(curve, raw.tau_tilde_d - baseline.clock_reading, "tau_tilde_d - baseline")?,
            calibrate_named(curve, raw.tau_tilde_t - baseline.clock_reading, "tau_tilde_t - baseline")?,
            calibrate_named(curve, raw.tau_tilde_r - baseline.clock_reading, "tau_tilde_r - baseline")?,
        ),
        mode => {
            let d = calibrate_named(curve, raw.tau_tilde_d, "tau_tilde_d")?;
            let t = calibrate_named(curve, raw.tau_tilde_t, "tau_tilde_t")?;
            let r = calibrate_named(curve, raw.tau_tilde_r, "tau_tilde_r")?;
            let static_time = if mode == BaselineMode::Off {
                0.0
            } else {
                calibrate_named(curve, baseline.clock_reading, "baseline reading")?
            };
            match mode {
                BaselineMode::Off => (d, t, r),
                BaselineMode::Uniform => (d - static_time, t - static_time, r - static_time),
                _ => {
                    let rate = static_time / baseline.window;
                    let free = rate * baseline.free_bound_time;
                    let bound = rate * baseline.window;
                    (
                        d - (raw.t_weight * free + raw.r_weight * bound),
                        t - free,
                        r - bound,
                    )
                }
            }
        }
    };
    if identity_residual.abs() > 1e-8 * curve.params().delta_t() {
        log::warn!("raw splitting identity off by {identity_residual:.3e}");
    }
    Ok(TimesReport {
        e0: params.pulse.e0,
        gamma: params.gamma,
        z: params.atom.z,
        t_weight: raw.t_weight,
        r_weight: raw.r_weight,
        tau_d_prime: raw.tau_d_prime,
        tau_tilde_d: raw.tau_tilde_d,
        tau_tilde_t: raw.tau_tilde_t,
        tau_tilde_r: raw.tau_tilde_r,
        tau_d,
        tau_t,
        tau_r,
        tau_k: params.tau_k,
        identity_residual,
        tau_tsub: None,
        tau_t_v: None,
    })
}
