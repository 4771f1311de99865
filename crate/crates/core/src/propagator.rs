//! Real-time evolution of the electron coupled to the clock inside the
//! barrier region.
//!
//! The clock Hamiltonian is diagonal in the `J` basis, so the coupled state is
//! stored as `N` spatial channels `psi_n`, channel `n` feeling the extra
//! potential `n omega` on the barrier mask.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clock::ClockParams;
use crate::error::{Error, Result};
use crate::fieldgrid::{apply_hamiltonian, pulse_amplitude, sum_norm_sqr, ComplexField, Grid2D, PulseParams, ScalarField};
use crate::lanczos::{expm_apply, Evolution, KrylovSettings, KrylovWorkspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SplitScheme {
    /// Half clock phase, Krylov step under `H_E(t + dt/2)`, half clock phase.
    #[default]
    Strang,
    /// Clock term inside the Krylov Hamiltonian. Exact for time-independent
    /// fields, so it allows large steps in field-free reference runs.
    Unsplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagatorConfig {
    pub dt: f64,
    pub krylov_dim: usize,
    pub krylov_tol: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub scheme: SplitScheme,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            dt: 0.005,
            krylov_dim: 12,
            krylov_tol: 1e-10,
            t_start: 0.0,
            t_end: 1.0,
            scheme: SplitScheme::Strang,
        }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {}", self.dt)));
        }
        if !(3..=64).contains(&self.krylov_dim) {
            return Err(Error::Config(format!(
                "krylov_dim must be in 3..=64, got {}",
                self.krylov_dim
            )));
        }
        if !(self.krylov_tol > 0.0) {
            return Err(Error::Config("krylov_tol must be positive".into()));
        }
        if !(self.t_end > self.t_start) {
            return Err(Error::Config(format!(
                "empty time window [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        Ok(())
    }

    /// Number of steps; the step is shrunk so they tile the window exactly.
    pub fn n_steps(&self) -> u64 {
        ((self.t_end - self.t_start) / self.dt - 1e-9).ceil().max(1.0) as u64
    }

    pub fn effective_dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps() as f64
    }

    pub fn time_at(&self, step: u64) -> f64 {
        if step == self.n_steps() {
            self.t_end
        } else {
            self.t_start + step as f64 * self.effective_dt()
        }
    }
}

/// Electron-clock state in the `J` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockedWaveFunction {
    grid: Grid2D,
    clock: ClockParams,
    channels: Vec<Vec<Complex64>>,
    time: f64,
    step: u64,
    /// Row-major `N x N`: `sum (1 - m^2) conj(psi_n) psi_m dx dy` removed by
    /// the absorber, kept with its clock coherences.
    absorbed: Vec<Complex64>,
}

impl ClockedWaveFunction {
    /// `psi0 (x) V_0`: every channel is `psi0 / sqrt(N)`.
    pub fn init_state(psi0: &ComplexField, clock: &ClockParams, t_start: f64) -> Self {
        let n = clock.n_states();
        let scale = 1.0 / (n as f64).sqrt();
        let channel: Vec<Complex64> = psi0.values().iter().map(|v| v * scale).collect();
        Self {
            grid: *psi0.grid(),
            clock: *clock,
            channels: vec![channel; n],
            time: t_start,
            step: 0,
            absorbed: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    /// Reassemble a state from stored parts (checkpoint reading).
    pub fn from_parts(
        grid: Grid2D,
        clock: ClockParams,
        channels: Vec<Vec<Complex64>>,
        time: f64,
        step: u64,
        absorbed: Vec<Complex64>,
    ) -> Result<Self> {
        let n = clock.n_states();
        if channels.len() != n || channels.iter().any(|c| c.len() != grid.len()) || absorbed.len() != n * n {
            return Err(Error::Checkpoint("channel count or size does not match grid and clock".into()));
        }
        Ok(Self {
            grid,
            clock,
            channels,
            time,
            step,
            absorbed,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn clock(&self) -> &ClockParams {
        &self.clock
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[Vec<Complex64>] {
        &self.channels
    }

    pub fn channel(&self, n: usize) -> &[Complex64] {
        &self.channels[n]
    }

    pub fn channel_field(&self, n: usize) -> ComplexField {
        ComplexField::from_values(self.grid, self.channels[n].clone()).expect("same grid")
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn absorbed_matrix(&self) -> &[Complex64] {
        &self.absorbed
    }

    /// Absorbed probability per channel.
    pub fn absorbed_norm(&self) -> Vec<f64> {
        let n = self.n_channels();
        (0..n).map(|i| self.absorbed[i * n + i].re).collect()
    }

    pub fn total_absorbed(&self) -> f64 {
        self.absorbed_norm().iter().sum()
    }

    /// Probability still on the grid.
    pub fn norm_sqr(&self) -> f64 {
        self.channels.iter().map(|c| sum_norm_sqr(c)).sum::<f64>() * self.grid.cell_area()
    }

    /// On-grid plus absorbed probability.
    pub fn total_probability(&self) -> f64 {
        self.norm_sqr() + self.total_absorbed()
    }

    /// `sum_n int w |psi_n|^2`.
    pub fn weighted_probability(&self, weights: &[f64]) -> f64 {
        self.channels
            .iter()
            .map(|c| c.iter().zip(weights).map(|(v, w)| w * v.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            * self.grid.cell_area()
    }

    /// Clock-traced density `sum_n |psi_n|^2`.
    pub fn traced_density(&self) -> ScalarField {
        let mut d = vec![0.0; self.grid.len()];
        for c in &self.channels {
            for (a, v) in d.iter_mut().zip(c) {
                *a += v.norm_sqr();
            }
        }
        ScalarField::from_values(self.grid, d).expect("same grid")
    }

    /// Channel overlaps `rho[n][m] = sum_i w_i conj(psi_n) psi_m dx dy`.
    pub fn overlaps(&self, weights: impl Fn(usize) -> f64) -> Vec<Complex64> {
        let n = self.n_channels();
        let mut rho = vec![Complex64::new(0.0, 0.0); n * n];
        let len = self.grid.len();
        for idx in 0..len {
            let w = weights(idx);
            if w == 0.0 {
                continue;
            }
            for a in 0..n {
                let ca = self.channels[a][idx].conj() * w;
                for b in 0..n {
                    rho[a * n + b] += ca * self.channels[b][idx];
                }
            }
        }
        let area = self.grid.cell_area();
        for v in &mut rho {
            *v *= area;
        }
        rho
    }

    /// Multiply every channel by a common phase.
    pub fn rotate_phase(&mut self, phase: Complex64) {
        for c in &mut self.channels {
            for v in c.iter_mut() {
                *v *= phase;
            }
        }
    }
}

/// Per-step summary handed to observers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub step: u64,
    pub time: f64,
    pub field: f64,
    pub krylov_applications: usize,
}

/// Evolution operator for one experiment: static potential, pulse, clock
/// coupling on the barrier mask and the boundary absorber.
pub struct Propagator {
    grid: Grid2D,
    pulse: PulseParams,
    clock: ClockParams,
    config: PropagatorConfig,
    static_potential: Vec<f64>,
    x: Vec<f64>,
    barrier: Vec<f64>,
    /// `(index, mask)` for nodes where the absorber mask is below 1.
    absorber: Vec<(usize, f64)>,
    spatial: bool,
    workspaces: Vec<KrylovWorkspace>,
    scratch: Vec<Vec<f64>>,
}

impl Propagator {
    pub fn new(
        static_potential: &ScalarField,
        pulse: PulseParams,
        clock: ClockParams,
        config: PropagatorConfig,
        barrier_mask: &ScalarField,
        absorber_mask: &ScalarField,
    ) -> Result<Self> {
        config.validate()?;
        let grid = *static_potential.grid();
        if barrier_mask.grid() != &grid || absorber_mask.grid() != &grid {
            return Err(Error::Config("potential, barrier and absorber grids differ".into()));
        }
        let absorber = absorber_mask
            .values()
            .iter()
            .enumerate()
            .filter(|(_, m)| **m < 1.0)
            .map(|(i, m)| (i, *m))
            .collect();
        let n = clock.n_states();
        Ok(Self {
            grid,
            pulse,
            clock,
            config,
            static_potential: static_potential.values().to_vec(),
            x: grid.nodes().map(|(x, _)| x).collect(),
            barrier: barrier_mask.values().to_vec(),
            absorber,
            spatial: true,
            workspaces: (0..n).map(|_| KrylovWorkspace::new()).collect(),
            scratch: vec![Vec::new(); n],
        })
    }

    /// Test hook: drop kinetic and scalar potential so only the clock
    /// coupling acts.
    #[doc(hidden)]
    pub fn without_spatial_hamiltonian(mut self) -> Self {
        self.spatial = false;
        self
    }

    pub fn config(&self) -> &PropagatorConfig {
        &self.config
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn field_at(&self, t: f64) -> f64 {
        pulse_amplitude(t, &self.pulse)
    }

    fn check_state(&self, state: &ClockedWaveFunction) -> Result<()> {
        if state.grid != self.grid || state.clock != self.clock {
            return Err(Error::Config("state grid or clock does not match the propagator".into()));
        }
        Ok(())
    }

    /// One step of length `effective_dt`; returns Krylov applications used.
    pub fn step(&mut self, state: &mut ClockedWaveFunction) -> Result<usize> {
        self.check_state(state)?;
        let dt = self.config.effective_dt();
        let t = state.time;
        let field = pulse_amplitude(t + 0.5 * dt, &self.pulse);
        let v_mid: Vec<f64> = self
            .static_potential
            .iter()
            .zip(&self.x)
            .map(|(v, x)| v - x * field)
            .collect();
        let settings = KrylovSettings {
            max_dim: self.config.krylov_dim,
            tol: self.config.krylov_tol,
        };
        let grid = self.grid;
        let clock = self.clock;
        let scheme = self.config.scheme;
        let spatial = self.spatial;
        let barrier = &self.barrier;

        let results: Vec<Result<(usize, f64)>> = state
            .channels
            .par_iter_mut()
            .zip(self.workspaces.par_iter_mut())
            .zip(self.scratch.par_iter_mut())
            .enumerate()
            .map(|(n, ((psi, ws), scratch))| {
                let shift = clock.channel_energy(n);
                let mut applications = 0;
                match scheme {
                    SplitScheme::Strang => {
                        clock_phase(psi, barrier, shift, 0.5 * dt);
                        if spatial {
                            let stats = expm_apply(
                                |a, b| apply_hamiltonian(&grid, &v_mid, a, b),
                                psi,
                                Evolution::RealTime(dt),
                                &settings,
                                ws,
                            )?;
                            applications = stats.applications;
                        }
                        clock_phase(psi, barrier, shift, 0.5 * dt);
                    }
                    SplitScheme::Unsplit => {
                        if spatial {
                            scratch.clear();
                            scratch.extend(v_mid.iter().zip(barrier).map(|(v, m)| v + shift * m));
                            let stats = expm_apply(
                                |a, b| apply_hamiltonian(&grid, scratch, a, b),
                                psi,
                                Evolution::RealTime(dt),
                                &settings,
                                ws,
                            )?;
                            applications = stats.applications;
                        } else {
                            clock_phase(psi, barrier, shift, dt);
                        }
                    }
                }
                Ok((applications, sum_norm_sqr(psi)))
            })
            .collect();

        let mut applications = 0;
        for (n, r) in results.into_iter().enumerate() {
            let (apps, norm) = r?;
            if !norm.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite norm in clock channel {n} at t = {t:.6}, field {field:.6}"
                )));
            }
            applications += apps;
        }

        self.absorb(state);
        state.step += 1;
        state.time = self.config.time_at(state.step);
        Ok(applications)
    }

    fn absorb(&self, state: &mut ClockedWaveFunction) {
        let n = state.channels.len();
        let area = self.grid.cell_area();
        let mut local = vec![Complex64::new(0.0, 0.0); n * n];
        for &(idx, m) in &self.absorber {
            let loss = 1.0 - m * m;
            for a in 0..n {
                let ca = state.channels[a][idx].conj() * loss;
                for b in 0..n {
                    local[a * n + b] += ca * state.channels[b][idx];
                }
            }
            for c in &mut state.channels {
                c[idx] *= m;
            }
        }
        for (acc, v) in state.absorbed.iter_mut().zip(local) {
            *acc += v * area;
        }
    }

    /// Evolve up to step `last` (inclusive of the final state), calling
    /// `observer` at step 0, every `stride` steps, and at `last`.
    pub fn evolve_to_step(
        &mut self,
        state: &mut ClockedWaveFunction,
        last: u64,
        stride: u64,
        mut observer: impl FnMut(&ClockedWaveFunction, StepInfo) -> Result<()>,
    ) -> Result<()> {
        self.check_state(state)?;
        let stride = stride.max(1);
        let last = last.min(self.config.n_steps());
        let pulse = self.pulse;
        let info = |state: &ClockedWaveFunction, apps: usize| StepInfo {
            step: state.step,
            time: state.time,
            field: pulse_amplitude(state.time, &pulse),
            krylov_applications: apps,
        };
        if state.step == 0 {
            observer(state, info(state, 0))?;
        }
        while state.step < last {
            let apps = self.step(state)?;
            if state.step % stride == 0 || state.step == last {
                observer(state, info(state, apps))?;
            }
        }
        Ok(())
    }

    /// Evolve to `t_end`.
    pub fn evolve(
        &mut self,
        state: &mut ClockedWaveFunction,
        stride: u64,
        observer: impl FnMut(&ClockedWaveFunction, StepInfo) -> Result<()>,
    ) -> Result<()> {
        let last = self.config.n_steps();
        self.evolve_to_step(state, last, stride, observer)
    }
}

/// Clock-free evolution of a single field from `config.t_start` to
/// `config.t_end` (same splitting of the field term as the coupled run),
/// applying the absorber after every step. Returns the absorbed probability.
pub fn propagate_field(
    psi: &mut ComplexField,
    static_potential: &ScalarField,
    pulse: &PulseParams,
    absorber_mask: &ScalarField,
    config: &PropagatorConfig,
) -> Result<f64> {
    config.validate()?;
    let grid = *psi.grid();
    if static_potential.grid() != &grid || absorber_mask.grid() != &grid {
        return Err(Error::Config("field, potential and absorber grids differ".into()));
    }
    let settings = KrylovSettings {
        max_dim: config.krylov_dim,
        tol: config.krylov_tol,
    };
    let mut ws = KrylovWorkspace::new();
    let xs: Vec<f64> = grid.nodes().map(|(x, _)| x).collect();
    let dt = config.effective_dt();
    let mut absorbed = 0.0;
    for step in 0..config.n_steps() {
        let t = config.time_at(step);
        let field = pulse_amplitude(t + 0.5 * dt, pulse);
        let v: Vec<f64> = static_potential.values().iter().zip(&xs).map(|(v, x)| v - x * field).collect();
        expm_apply(
            |a, b| apply_hamiltonian(&grid, &v, a, b),
            psi.values_mut(),
            Evolution::RealTime(dt),
            &settings,
            &mut ws,
        )?;
        let mut lost = 0.0;
        for (value, m) in psi.values_mut().iter_mut().zip(absorber_mask.values()) {
            if *m < 1.0 {
                lost += (1.0 - m * m) * value.norm_sqr();
                *value *= *m;
            }
        }
        absorbed += lost * grid.cell_area();
        let norm = psi.norm_sqr();
        if !norm.is_finite() {
            return Err(Error::Numerical(format!("non-finite norm at t = {t:.6}")));
        }
    }
    Ok(absorbed)
}

/// `psi *= exp(-i shift mask tau)` on the barrier nodes.
fn clock_phase(psi: &mut [Complex64], mask: &[f64], shift: f64, tau: f64) {
    if shift == 0.0 {
        return;
    }
    let full = Complex64::from_polar(1.0, -shift * tau);
    for (v, &m) in psi.iter_mut().zip(mask) {
        if m == 1.0 {
            *v *= full;
        } else if m != 0.0 {
            *v *= Complex64::from_polar(1.0, -shift * m * tau);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::{clock_projections, clock_state, evolve_free};
    use crate::fieldgrid::{coulomb_potential, AtomParams, GridSpec};
    use crate::groundstate::{solve_ground_state, GroundStateConfig};

    fn small_grid() -> Grid2D {
        Grid2D::new(GridSpec::square(33, 8.0)).unwrap()
    }

    fn config(dt: f64, t_end: f64) -> PropagatorConfig {
        PropagatorConfig {
            dt,
            t_end,
            ..Default::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(config(0.0, 1.0).validate().is_err());
        assert!(PropagatorConfig { krylov_dim: 2, ..config(0.1, 1.0) }.validate().is_err());
        assert!(PropagatorConfig { krylov_dim: 65, ..config(0.1, 1.0) }.validate().is_err());
        assert!(config(0.1, 0.0).validate().is_err());
        let c = config(0.3, 1.0);
        assert_eq!(c.n_steps(), 4);
        assert!((c.effective_dt() - 0.25).abs() < 1e-15);
        assert_eq!(c.time_at(4), 1.0);
    }

    #[test]
    fn init_state_splits_evenly() {
        let g = small_grid();
        let mut psi = ComplexField::from_fn(g, |x, y| Complex64::new((-(x * x + y * y)).exp(), 0.0));
        psi.normalize();
        let p = ClockParams::new(3, 1.0).unwrap();
        let s = ClockedWaveFunction::init_state(&psi, &p, 0.0);
        for n in 0..3 {
            let norm = sum_norm_sqr(s.channel(n)) * g.cell_area();
            assert!((norm - 1.0 / 3.0).abs() < 1e-14);
        }
        assert!((s.total_probability() - 1.0).abs() < 1e-14);
        let m = crate::clock::time_operator_matrix(&p);
        let rho = s.overlaps(|_| 1.0);
        assert!(crate::clock::reading_from_overlaps(&m, &rho).abs() < 1e-14);
    }

    #[test]
    fn pure_clock_advances_like_free_clock() {
        let g = small_grid();
        let clock = ClockParams::new(3, 2.0).unwrap();
        let psi = ComplexField::from_fn(g, |x, y| Complex64::new((-(x * x + y * y) / 4.0).exp(), 0.0));
        let ones = ScalarField::constant(g, 1.0);
        let zero = ScalarField::constant(g, 0.0);
        let pulse = PulseParams::new(0.0, 1.0, 0.0).unwrap();
        for scheme in [SplitScheme::Strang, SplitScheme::Unsplit] {
            let cfg = PropagatorConfig {
                scheme,
                ..config(0.05, clock.delta_t())
            };
            let mut prop = Propagator::new(&zero, pulse, clock, cfg, &ones, &ones)
                .unwrap()
                .without_spatial_hamiltonian();
            let mut s = ClockedWaveFunction::init_state(&psi, &clock, 0.0);
            prop.evolve(&mut s, 1, |_, _| Ok(())).unwrap();
            let v1 = clock_state(1, &clock).unwrap();
            let v0 = evolve_free(&clock_state(0, &clock).unwrap(), clock.delta_t(), &clock);
            // Clock factor at an arbitrary node.
            let idx = g.index(10, 20);
            let amp = psi.values()[idx];
            for n in 0..3 {
                let expected = v0.amplitudes()[n] * amp;
                assert!((s.channel(n)[idx] - expected).norm() < 1e-12);
            }
            let c = clock_projections(
                &(0..3).map(|n| s.channel(n)[idx] / amp).collect::<Vec<_>>(),
                &clock,
            );
            assert!((c[1].norm() - 1.0).abs() < 1e-12, "{c:?}");
            assert!(v1.inner(&v0).norm() > 1.0 - 1e-12);
        }
    }

    #[test]
    fn stationary_ground_state_keeps_norm_and_phase() {
        let g = Grid2D::new(GridSpec::square(48, 8.0)).unwrap();
        let atom = AtomParams::hydrogen();
        let cfg_gs = GroundStateConfig {
            tol: 1e-9,
            ..Default::default()
        };
        let gs = solve_ground_state(&g, &atom, &cfg_gs).unwrap();
        let clock = ClockParams::new(3, 200.0).unwrap();
        let zero = ScalarField::constant(g, 0.0);
        let ones = ScalarField::constant(g, 1.0);
        let pulse = PulseParams::new(0.0, 1.0, 0.0).unwrap();
        let coulomb = coulomb_potential(&g, &atom);
        let steps = 1000;
        let dt = 0.01;
        let mut prop = Propagator::new(&coulomb, pulse, clock, config(dt, steps as f64 * dt), &zero, &ones).unwrap();
        let mut s = ClockedWaveFunction::init_state(&gs.psi0, &clock, 0.0);
        let mut worst = 0.0f64;
        prop.evolve(&mut s, 100, |st, _| {
            worst = worst.max((st.norm_sqr() - 1.0).abs());
            Ok(())
        })
        .unwrap();
        assert!(worst < 1e-8, "norm drift {worst}");
        let phase = Complex64::from_polar(1.0, -gs.energy * s.time());
        let scale = 1.0 / 3f64.sqrt();
        let dev = s
            .channel(0)
            .iter()
            .zip(gs.psi0.values())
            .map(|(a, b)| (a - b * phase * scale).norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-6, "deviation {dev}");
    }

    #[test]
    fn zero_shift_channel_ignores_mask() {
        let g = small_grid();
        let atom = AtomParams::hydrogen();
        let coulomb = coulomb_potential(&g, &atom);
        let clock = ClockParams::new(3, 50.0).unwrap();
        let psi = ComplexField::from_fn(g, |x, y| {
            Complex64::from_polar((-((x - 1.0).powi(2) + y * y) / 2.0).exp(), 0.7 * x)
        });
        let ones = ScalarField::constant(g, 1.0);
        let half = ScalarField::from_fn(g, |x, _| if x > 0.5 { 1.0 } else { 0.0 });
        let zero = ScalarField::constant(g, 0.0);
        let pulse = PulseParams::new(0.2, 0.5, 1.0).unwrap();
        let run = |mask: &ScalarField| {
            let mut prop = Propagator::new(&coulomb, pulse, clock, config(0.02, 0.4), mask, &ones).unwrap();
            let mut s = ClockedWaveFunction::init_state(&psi, &clock, 0.0);
            prop.evolve(&mut s, 1, |_, _| Ok(())).unwrap();
            s
        };
        let a = run(&half);
        let b = run(&zero);
        // Channel index 1 carries quantum number 0.
        assert_eq!(a.channel(1), b.channel(1));
        assert_ne!(a.channel(0), b.channel(0));
    }

    #[test]
    fn absorber_bookkeeping() {
        let g = small_grid();
        let clock = ClockParams::new(3, 5.0).unwrap();
        let mut psi = ComplexField::from_fn(g, |x, y| {
            Complex64::from_polar((-((x - 3.0).powi(2) + y * y) / 2.0).exp(), 3.0 * x)
        });
        psi.normalize();
        let absorber = crate::fieldgrid::absorber_mask(&g, 3.0, 0.125).unwrap();
        let zero = ScalarField::constant(g, 0.0);
        let half = ScalarField::from_fn(g, |x, _| if x > 1.0 { 1.0 } else { 0.0 });
        let pulse = PulseParams::new(0.0, 1.0, 0.0).unwrap();
        let mut prop = Propagator::new(&zero, pulse, clock, config(0.02, 2.0), &half, &absorber).unwrap();
        let mut s = ClockedWaveFunction::init_state(&psi, &clock, 0.0);
        prop.evolve(&mut s, 10, |st, _| {
            assert!((st.total_probability() - 1.0).abs() < 1e-10);
            Ok(())
        })
        .unwrap();
        assert!(s.total_absorbed() > 0.05);
        // Absorbed coherence matrix is Hermitian positive semidefinite on the diagonal.
        let m = s.absorbed_matrix();
        for a in 0..3 {
            assert!(m[a * 3 + a].re >= 0.0);
            for b in 0..3 {
                assert!((m[a * 3 + b] - m[b * 3 + a].conj()).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn observer_stride_does_not_change_states() {
        let g = small_grid();
        let atom = AtomParams::hydrogen();
        let coulomb = coulomb_potential(&g, &atom);
        let clock = ClockParams::new(3, 10.0).unwrap();
        let psi = ComplexField::from_fn(g, |x, y| Complex64::new((-(x * x + y * y)).exp(), 0.0));
        let half = ScalarField::from_fn(g, |x, _| if x > 0.5 { 1.0 } else { 0.0 });
        let ones = ScalarField::constant(g, 1.0);
        let pulse = PulseParams::new(0.3, 0.5, 0.5).unwrap();
        let record = |stride: u64| {
            let mut prop = Propagator::new(&coulomb, pulse, clock, config(0.05, 1.0), &half, &ones).unwrap();
            let mut s = ClockedWaveFunction::init_state(&psi, &clock, 0.0);
            let mut seen = Vec::new();
            prop.evolve(&mut s, stride, |st, info| {
                seen.push((info.step, st.channel(0).to_vec()));
                Ok(())
            })
            .unwrap();
            seen
        };
        let one = record(1);
        let two = record(2);
        for (step, values) in &two {
            let other = &one.iter().find(|(s, _)| s == step).unwrap().1;
            assert_eq!(values, other);
        }
        assert_eq!(one.len(), 21);
        assert_eq!(two.len(), 11);
    }

    #[test]
    fn clock_free_matches_coupled_run_without_mask() {
        let g = small_grid();
        let atom = AtomParams::hydrogen();
        let coulomb = coulomb_potential(&g, &atom);
        let clock = ClockParams::new(3, 10.0).unwrap();
        let mut psi = ComplexField::from_fn(g, |x, y| Complex64::new((-(x * x + y * y)).exp(), 0.0));
        psi.normalize();
        let zero = ScalarField::constant(g, 0.0);
        let absorber = crate::fieldgrid::absorber_mask(&g, 2.0, 0.125).unwrap();
        let pulse = PulseParams::new(0.5, 0.8, 0.5).unwrap();
        let cfg = config(0.05, 1.0);
        let mut prop = Propagator::new(&coulomb, pulse, clock, cfg, &zero, &absorber).unwrap();
        let mut s = ClockedWaveFunction::init_state(&psi, &clock, 0.0);
        prop.evolve(&mut s, 100, |_, _| Ok(())).unwrap();
        let mut single = psi.clone();
        let lost = propagate_field(&mut single, &coulomb, &pulse, &absorber, &cfg).unwrap();
        let scale = 1.0 / 3f64.sqrt();
        for (a, b) in s.channel(0).iter().zip(single.values()) {
            assert!((a - b * scale).norm() < 1e-12);
        }
        assert!((lost - s.total_absorbed()).abs() < 1e-12);
    }

    #[test]
    fn mismatched_state_rejected() {
        let g = small_grid();
        let other = Grid2D::new(GridSpec::square(34, 8.0)).unwrap();
        let clock = ClockParams::new(3, 1.0).unwrap();
        let zero = ScalarField::constant(g, 0.0);
        let ones = ScalarField::constant(g, 1.0);
        let pulse = PulseParams::new(0.0, 1.0, 0.0).unwrap();
        let mut prop = Propagator::new(&zero, pulse, clock, config(0.1, 1.0), &zero, &ones).unwrap();
        let psi = ComplexField::zeros(other);
        let mut s = ClockedWaveFunction::init_state(&psi, &clock, 0.0);
        assert!(prop.step(&mut s).is_err());
    }
}
