//! Bound initial state by imaginary-time propagation with the same
//! discretized Hamiltonian used for real-time evolution.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fieldgrid::{apply_hamiltonian, coulomb_potential, sum_norm_sqr, AtomParams, ComplexField, Grid2D};
use crate::lanczos::{expm_apply, Evolution, KrylovSettings, KrylovWorkspace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundStateConfig {
    /// Stop when `||H psi - E psi|| < tol`.
    pub tol: f64,
    /// Initial imaginary-time step; halved when a step would raise the energy.
    pub dtau: f64,
    pub max_iterations: usize,
    pub krylov_dim: usize,
}

impl Default for GroundStateConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            dtau: 1.0,
            max_iterations: 2000,
            krylov_dim: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub psi0: ComplexField,
    pub energy: f64,
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<IterationRecord>,
}

impl GroundStateResult {
    /// CSV `iteration,energy,residual`.
    pub fn write_log<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,energy,residual")?;
        for r in &self.history {
            writeln!(
                out,
                "{},{},{}",
                r.iteration,
                crate::fmt_f64(r.energy),
                crate::fmt_f64(r.residual)
            )?;
        }
        Ok(())
    }
}

/// Energy and residual norm of a unit-norm state.
fn rayleigh(grid: &Grid2D, potential: &[f64], psi: &[Complex64], h_psi: &mut [Complex64]) -> (f64, f64) {
    apply_hamiltonian(grid, potential, psi, h_psi);
    let num: f64 = psi
        .iter()
        .zip(h_psi.iter())
        .map(|(a, b)| a.re * b.re + a.im * b.im)
        .sum();
    let den = sum_norm_sqr(psi);
    let energy = num / den;
    let res: f64 = psi
        .iter()
        .zip(h_psi.iter())
        .map(|(a, b)| (b - a * energy).norm_sqr())
        .sum::<f64>()
        / den;
    (energy, res.sqrt())
}

/// Ground state of `-laplacian/2 - Z/r` on `grid`, starting from `exp(-2 Z r)`.
pub fn solve_ground_state(grid: &Grid2D, atom: &AtomParams, config: &GroundStateConfig) -> Result<GroundStateResult> {
    if !(config.tol > 0.0 && config.dtau > 0.0) {
        return Err(Error::Config("ground-state tolerance and step must be positive".into()));
    }
    let spacing = grid.dx().max(if grid.is_line() { 0.0 } else { grid.dy() });
    if spacing > 0.1 / atom.z {
        log::warn!(
            "grid spacing {spacing:.4} exceeds 0.1/Z; ground-state profile is under-resolved"
        );
    }
    let potential = coulomb_potential(grid, atom);
    let v = potential.values();
    let z = atom.z;
    let mut psi = ComplexField::from_fn(*grid, |x, y| Complex64::new((-2.0 * z * x.hypot(y)).exp(), 0.0));
    psi.normalize();

    let settings = KrylovSettings {
        max_dim: config.krylov_dim,
        tol: 1e-10,
    };
    let mut ws = KrylovWorkspace::new();
    let mut h_psi = vec![Complex64::new(0.0, 0.0); grid.len()];
    let (mut energy, mut residual) = rayleigh(grid, v, psi.values(), &mut h_psi);
    let mut history = vec![IterationRecord {
        iteration: 0,
        energy,
        residual,
    }];
    let mut dtau = config.dtau;
    let mut iterations = 0;

    while residual >= config.tol {
        if iterations >= config.max_iterations {
            return Err(Error::NotConverged { iterations, residual });
        }
        iterations += 1;
        let mut trial = psi.values().to_vec();
        expm_apply(
            |x, y| apply_hamiltonian(grid, v, x, y),
            &mut trial,
            Evolution::ImaginaryTime(dtau),
            &settings,
            &mut ws,
        )?;
        let scale = 1.0 / (sum_norm_sqr(&trial) * grid.cell_area()).sqrt();
        for x in &mut trial {
            *x *= scale;
        }
        let (e_new, r_new) = rayleigh(grid, v, &trial, &mut h_psi);
        if !e_new.is_finite() {
            return Err(Error::Numerical("non-finite energy in imaginary-time step".into()));
        }
        if e_new > energy + 1e-12 * energy.abs() {
            dtau *= 0.5;
            if dtau < 1e-8 * config.dtau {
                return Err(Error::NotConverged { iterations, residual });
            }
            continue;
        }
        psi.values_mut().copy_from_slice(&trial);
        energy = e_new;
        residual = r_new;
        history.push(IterationRecord {
            iteration: iterations,
            energy,
            residual,
        });
    }

    fix_phase(&mut psi);
    Ok(GroundStateResult {
        psi0: psi,
        energy,
        iterations,
        residual,
        history,
    })
}

/// Rotate so the largest-magnitude node is real and positive.
fn fix_phase(psi: &mut ComplexField) {
    let peak = psi
        .values()
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    if peak.norm() > 0.0 {
        psi.scale(peak.conj() / peak.norm());
    }
}
