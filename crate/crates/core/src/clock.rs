//! Salecker-Wigner-Peres clock algebra on the finite N-level subspace.
//!
//! Amplitudes are stored in the J basis, index `i` corresponding to the
//! angular quantum number `n = i - j`. Clock states `V_k` are the discrete
//! Fourier transforms of the J basis; the free clock Hamiltonian is diagonal
//! in J with eigenvalues `n * omega` (hbar = 1).

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockParams {
    n_states: usize,
    j: i64,
    delta_t: f64,
    omega: f64,
}

impl ClockParams {
    /// `n_states` must be odd and at least 3; `delta_t` is the time resolution.
    pub fn new(n_states: usize, delta_t: f64) -> Result<Self> {
        if n_states < 3 || n_states % 2 == 0 {
            return Err(Error::Config(format!(
                "clock needs an odd number of states >= 3, got {n_states}"
            )));
        }
        if !(delta_t > 0.0 && delta_t.is_finite()) {
            return Err(Error::Config(format!(
                "clock resolution must be positive, got {delta_t}"
            )));
        }
        Ok(Self {
            n_states,
            j: (n_states as i64 - 1) / 2,
            delta_t,
            omega: 2.0 * PI / (n_states as f64 * delta_t),
        })
    }

    /// Three-state clock with `delta_t = 200 / Z^2`.
    pub fn default_for_charge(z: f64) -> Self {
        Self::new(3, 200.0 / (z * z)).expect("valid default clock")
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn j(&self) -> i64 {
        self.j
    }

    pub fn delta_t(&self) -> f64 {
        self.delta_t
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Full clock period `N * delta_t = 2 pi / omega`.
    pub fn period(&self) -> f64 {
        self.n_states as f64 * self.delta_t
    }

    /// Angular quantum number of storage index `i`.
    pub fn quantum_number(&self, index: usize) -> i64 {
        index as i64 - self.j
    }

    /// Clock energy shift `n * omega` of J-basis channel `index`.
    pub fn channel_energy(&self, index: usize) -> f64 {
        self.quantum_number(index) as f64 * self.omega
    }
}

/// J-basis coefficients of a clock state.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockVector {
    amplitudes: Vec<Complex64>,
}

impl ClockVector {
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Self {
        Self { amplitudes }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &ClockVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scaled(&self, factor: Complex64) -> ClockVector {
        ClockVector {
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
        }
    }

    pub fn add(&self, other: &ClockVector) -> ClockVector {
        ClockVector {
            amplitudes: self
                .amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

/// Clock state `V_k = N^{-1/2} sum_n exp(-2 pi i k n / N) |J_n>`.
pub fn clock_state(k: usize, params: &ClockParams) -> Result<ClockVector> {
    let n_states = params.n_states();
    if k >= n_states {
        return Err(Error::Domain(format!(
            "clock state index {k} outside 0..{n_states}"
        )));
    }
    let norm = 1.0 / (n_states as f64).sqrt();
    let amplitudes = (0..n_states)
        .map(|i| {
            let n = params.quantum_number(i) as f64;
            Complex64::from_polar(norm, -2.0 * PI * k as f64 * n / n_states as f64)
        })
        .collect();
    Ok(ClockVector { amplitudes })
}

/// Free evolution under `H_c = omega J` for a time `t`.
pub fn evolve_free(state: &ClockVector, t: f64, params: &ClockParams) -> ClockVector {
    let amplitudes = state
        .amplitudes
        .iter()
        .enumerate()
        .map(|(i, a)| a * Complex64::from_polar(1.0, -params.channel_energy(i) * t))
        .collect();
    ClockVector { amplitudes }
}

/// Overlaps `<V_k|psi>` for all k from J-basis amplitudes.
///
/// Works for any slice of length N; used both for single clock vectors and
/// for the per-node clock content of a channel-resolved wavefunction.
pub fn clock_projections(amplitudes: &[Complex64], params: &ClockParams) -> Vec<Complex64> {
    let n_states = params.n_states();
    debug_assert_eq!(amplitudes.len(), n_states);
    let table = projection_table(params);
    (0..n_states)
        .map(|k| {
            amplitudes
                .iter()
                .zip(&table[k * n_states..(k + 1) * n_states])
                .map(|(a, w)| a * w)
                .sum()
        })
        .collect()
}

/// Row-major table `w[k][i] = N^{-1/2} exp(+2 pi i k n_i / N)`.
pub(crate) fn projection_table(params: &ClockParams) -> Vec<Complex64> {
    let n_states = params.n_states();
    let norm = 1.0 / (n_states as f64).sqrt();
    let mut table = Vec::with_capacity(n_states * n_states);
    for k in 0..n_states {
        for i in 0..n_states {
            let n = params.quantum_number(i) as f64;
            table.push(Complex64::from_polar(
                norm,
                2.0 * PI * k as f64 * n / n_states as f64,
            ));
        }
    }
    table
}

/// `<T> = sum_k delta_t k |<V_k|psi>|^2`.
pub fn time_operator_expectation(state: &ClockVector, params: &ClockParams) -> f64 {
    clock_projections(&state.amplitudes, params)
        .iter()
        .enumerate()
        .map(|(k, c)| params.delta_t() * k as f64 * c.norm_sqr())
        .sum()
}

/// Clock operator in the channel (`J`) basis, row-major `N x N`:
/// `M[i][l] = sum_k delta_t k conj(w_ki) w_kl`, so that for channel overlaps
/// `rho[i][l] = <psi_i|psi_l>` the reading is `Re sum M[i][l] rho[i][l]`.
pub fn time_operator_matrix(params: &ClockParams) -> Vec<Complex64> {
    let n_states = params.n_states();
    let w = projection_table(params);
    let mut m = vec![Complex64::new(0.0, 0.0); n_states * n_states];
    for k in 0..n_states {
        let tk = params.delta_t() * k as f64;
        for i in 0..n_states {
            for l in 0..n_states {
                m[i * n_states + l] += tk * w[k * n_states + i].conj() * w[k * n_states + l];
            }
        }
    }
    m
}

/// `Re sum M[i][l] rho[i][l]` for a channel-overlap matrix `rho`.
pub fn reading_from_overlaps(matrix: &[Complex64], rho: &[Complex64]) -> f64 {
    matrix.iter().zip(rho).map(|(a, b)| (a * b).re).sum()
}

/// Expectation of the clock operator for a free clock started in `V_0`.
pub fn free_expectation(t: f64, params: &ClockParams) -> f64 {
    let v0 = clock_state(0, params).expect("k = 0 is always valid");
    time_operator_expectation(&evolve_free(&v0, t, params), params)
}

/// Tabulated free-clock expectation `f(t)` on `[0, N delta_t]` together with
/// its invertible branch.
#[derive(Debug, Clone)]
pub struct CalibrationCurve {
    params: ClockParams,
    times: Vec<f64>,
    values: Vec<f64>,
    monotone_end: usize,
}

/// Samples per clock resolution used by [`CalibrationCurve::standard`].
pub const DEFAULT_SAMPLES_PER_TICK: usize = 10_000;

/// Tabulate `f(t)` with `resolution` intervals over one clock period.
pub fn free_expectation_curve(params: &ClockParams, resolution: usize) -> Result<CalibrationCurve> {
    let n_states = params.n_states();
    if resolution < 10 * n_states {
        return Err(Error::Config(format!(
            "calibration resolution {resolution} below 10 * N = {}",
            10 * n_states
        )));
    }
    let period = params.period();
    let times: Vec<f64> = (0..=resolution)
        .map(|i| period * i as f64 / resolution as f64)
        .collect();
    let values: Vec<f64> = times.iter().map(|&t| free_expectation(t, params)).collect();

    let monotone_end = if n_states == 3 {
        // Last sample at or before 2 delta_t.
        (2 * resolution) / 3
    } else {
        values
            .windows(2)
            .position(|w| w[1] <= w[0])
            .unwrap_or(values.len() - 1)
    };

    Ok(CalibrationCurve {
        params: *params,
        times,
        values,
        monotone_end,
    })
}

impl CalibrationCurve {
    /// Curve with [`DEFAULT_SAMPLES_PER_TICK`] samples per `delta_t`.
    pub fn standard(params: &ClockParams) -> Self {
        free_expectation_curve(params, DEFAULT_SAMPLES_PER_TICK * params.n_states())
            .expect("default resolution exceeds minimum")
    }

    pub fn params(&self) -> &ClockParams {
        &self.params
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Upper end of the invertible branch.
    pub fn monotone_hi(&self) -> f64 {
        if self.params.n_states() == 3 {
            2.0 * self.params.delta_t()
        } else {
            self.times[self.monotone_end]
        }
    }

    /// Range of `f` on the invertible branch.
    pub fn branch_range(&self) -> (f64, f64) {
        (0.0, free_expectation(self.monotone_hi(), &self.params))
    }

    /// Inverts `f` on the monotone branch: returns `t` with `f(t) = tau_tilde`.
    ///
    /// The bracketing table interval is located by bisection over the samples,
    /// then refined by bisection on the exact expectation.
    pub fn calibrate(&self, tau_tilde: f64) -> Result<f64> {
        let (lo, hi) = self.branch_range();
        let slack = 1e-12 * self.params.delta_t();
        if !(tau_tilde >= lo - slack && tau_tilde <= hi + slack) {
            return Err(Error::CalibrationRange {
                what: "clock reading".into(),
                value: tau_tilde,
                lo,
                hi,
            });
        }
        let target = tau_tilde.clamp(lo, hi);
        if target <= 0.0 {
            return Ok(0.0);
        }
        let t_hi_branch = self.monotone_hi();
        // Table bisection over [0, monotone_end].
        let (mut a, mut b) = (0usize, self.monotone_end);
        while b - a > 1 {
            let mid = (a + b) / 2;
            if self.values[mid] < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        let mut t_lo = self.times[a];
        let mut t_hi = self.times[b].min(t_hi_branch);
        if free_expectation(t_hi, &self.params) < target {
            t_hi = t_hi_branch;
        }
        for _ in 0..200 {
            let mid = 0.5 * (t_lo + t_hi);
            if mid <= t_lo || mid >= t_hi {
                break;
            }
            if free_expectation(mid, &self.params) < target {
                t_lo = mid;
            } else {
                t_hi = mid;
            }
        }
        Ok(0.5 * (t_lo + t_hi))
    }

    /// CSV with header `t,f_t`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,f_t")?;
        for (t, f) in self.times.iter().zip(&self.values) {
            writeln!(out, "{},{}", crate::fmt_f64(*t), crate::fmt_f64(*f))?;
        }
        Ok(())
    }
}
