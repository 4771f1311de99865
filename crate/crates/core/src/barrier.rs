//! Parabolic coordinates and the static tunneling region.
//!
//! With `xi = r + x`, `eta = r - x` the field-dressed Coulomb problem
//! separates; the barrier is the band `xi_in <= xi <= xi_exit`, `eta <= eta0`,
//! mirrored in `y`.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fieldgrid::{apply_hamiltonian, total_potential, AtomParams, ComplexField, Grid2D, PulseParams, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParabolicPoint {
    pub xi: f64,
    pub eta: f64,
}

impl ParabolicPoint {
    pub fn new(xi: f64, eta: f64) -> Result<Self> {
        if !(xi >= 0.0 && eta >= 0.0) {
            return Err(Error::Domain(format!(
                "parabolic coordinates must be non-negative, got ({xi}, {eta})"
            )));
        }
        Ok(Self { xi, eta })
    }
}

/// `xi = r + x`, `eta = r - x`; the sign of `y` is dropped.
pub fn to_parabolic(x: f64, y: f64) -> ParabolicPoint {
    let r = x.hypot(y);
    // Avoid cancellation in whichever of r +- x is small.
    let (xi, eta) = if x >= 0.0 {
        let xi = r + x;
        (xi, if xi > 0.0 { y * y / xi } else { 0.0 })
    } else {
        let eta = r - x;
        (y * y / eta, eta)
    };
    ParabolicPoint { xi, eta }
}

/// `(x, y) = ((xi - eta) / 2, sqrt(xi eta))`, upper half plane.
pub fn from_parabolic(p: ParabolicPoint) -> Result<(f64, f64)> {
    let ParabolicPoint { xi, eta } = ParabolicPoint::new(p.xi, p.eta)?;
    Ok((0.5 * (xi - eta), (xi * eta).sqrt()))
}

/// `<psi|H_E(t0)|psi>` over the disk `r < r_bound`, normalized by the
/// probability inside it.
pub fn stark_shifted_energy(
    psi: &ComplexField,
    atom: &AtomParams,
    pulse: &PulseParams,
    r_bound: f64,
) -> Result<f64> {
    let grid = psi.grid();
    let zero = ScalarField::constant(*grid, 0.0);
    let v = total_potential(grid, atom, pulse, pulse.t0, 0.0, &zero)?;
    let mut h_psi = vec![Complex64::new(0.0, 0.0); grid.len()];
    apply_hamiltonian(grid, v.values(), psi.values(), &mut h_psi);
    let (mut num, mut den) = (0.0, 0.0);
    for (idx, (a, b)) in psi.values().iter().zip(&h_psi).enumerate() {
        let (x, y) = grid.coords(idx);
        if x.hypot(y) < r_bound {
            num += a.re * b.re + a.im * b.im;
            den += a.norm_sqr();
        }
    }
    let bound = den * grid.cell_area();
    if bound < 0.5 {
        return Err(Error::Numerical(format!(
            "bound probability {bound:.3} < 0.5 inside r = {r_bound}; Stark shift ill-defined"
        )));
    }
    Ok(num / den)
}

/// Turning points `xi_in < xi_exit` of the separated `xi` equation,
/// `(F/2) xi^2 + E xi + Z = 0`, for field `F = e0` and level `E = e_shift`.
pub fn compute_barrier(atom: &AtomParams, e0: f64, e_shift: f64) -> Result<(f64, f64)> {
    if !(e0 > 0.0) {
        return Err(Error::Domain(format!("barrier needs a positive field, got {e0}")));
    }
    if !(e_shift < 0.0) {
        return Err(Error::Domain(format!("barrier needs a bound level, got E = {e_shift}")));
    }
    let disc = e_shift * e_shift - 2.0 * e0 * atom.z;
    if disc <= 0.0 {
        return Err(Error::NoBarrier {
            field: e0,
            energy: e_shift,
            discriminant: disc,
        });
    }
    let s = disc.sqrt();
    // -E > 0; the small root via the product of roots 2Z/F.
    let xi_exit = (-e_shift + s) / e0;
    let xi_in = 2.0 * atom.z / (e0 * xi_exit);
    Ok((xi_in, xi_exit))
}

/// Curve of constant `xi` parametrized by `y`: `x(y) = xi/2 - y^2/(2 xi)`,
/// `|y| <= sqrt(xi eta0)`. Flux through it along increasing `xi` is
/// `int (j_x + (y/xi) j_y) dy`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorLine {
    pub xi: f64,
    pub ys: Vec<f64>,
    /// Trapezoid weights in `y`.
    pub weights: Vec<f64>,
}

impl DetectorLine {
    /// Sampled with spacing at most `spacing`, both signs of `y`.
    pub fn new(xi: f64, eta0: f64, spacing: f64) -> Self {
        let half = (xi * eta0).sqrt();
        let segments = (2.0 * half / spacing).ceil().max(2.0) as usize;
        let h = 2.0 * half / segments as f64;
        let ys: Vec<f64> = (0..=segments).map(|i| -half + i as f64 * h).collect();
        let mut weights = vec![h; segments + 1];
        weights[0] = 0.5 * h;
        weights[segments] = 0.5 * h;
        Self { xi, ys, weights }
    }

    pub fn x_at(&self, y: f64) -> f64 {
        0.5 * self.xi - y * y / (2.0 * self.xi)
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.ys.iter().map(|&y| (self.x_at(y), y))
    }

    /// `n ds = (1, y/xi) dy`, unnormalized normal times line element.
    pub fn normal_weight(&self, k: usize) -> (f64, f64) {
        let w = self.weights[k];
        (w, w * self.ys[k] / self.xi)
    }
}

#[derive(Debug, Clone)]
pub struct BarrierRegion {
    pub xi_in: f64,
    pub xi_exit: f64,
    pub eta0: f64,
    pub mask: ScalarField,
    pub entry_line: DetectorLine,
    pub exit_line: DetectorLine,
}

impl BarrierRegion {
    /// Mask is 1 on nodes with `xi_in <= xi <= xi_exit`, `eta <= eta0`.
    /// Errors if the region's bounding box reaches within `absorber_width`
    /// of the grid edge.
    pub fn rasterize(grid: &Grid2D, xi_in: f64, xi_exit: f64, eta0: f64, absorber_width: f64) -> Result<Self> {
        if !(xi_in > 0.0 && xi_exit > xi_in && eta0 > 0.0) {
            return Err(Error::Config(format!(
                "barrier bounds must satisfy 0 < xi_in < xi_exit and eta0 > 0, got ({xi_in}, {xi_exit}, {eta0})"
            )));
        }
        if grid.is_line() {
            return Err(Error::Config("barrier region needs a two-dimensional grid".into()));
        }
        let x_lo = 0.5 * (xi_in - eta0);
        let x_hi = 0.5 * xi_exit;
        let y_hi = (xi_exit * eta0).sqrt();
        // Keep one stencil width of clearance for the current interpolation.
        let pad_x = absorber_width + 2.0 * grid.dx();
        let pad_y = absorber_width + 2.0 * grid.dy();
        if x_lo < grid.x_first() + pad_x
            || x_hi > grid.x_last() - pad_x
            || -y_hi < grid.y_first() + pad_y
            || y_hi > grid.y_last() - pad_y
        {
            return Err(Error::Config(format!(
                "barrier region x in [{x_lo:.3}, {x_hi:.3}], |y| <= {y_hi:.3} reaches the absorber"
            )));
        }
        let mask = ScalarField::from_fn(*grid, |x, y| {
            let p = to_parabolic(x, y);
            if p.xi >= xi_in && p.xi <= xi_exit && p.eta <= eta0 {
                1.0
            } else {
                0.0
            }
        });
        let spacing = 0.5 * grid.dx().min(grid.dy());
        Ok(Self {
            xi_in,
            xi_exit,
            eta0,
            mask,
            entry_line: DetectorLine::new(xi_in, eta0, spacing),
            exit_line: DetectorLine::new(xi_exit, eta0, spacing),
        })
    }

    /// `int_B |psi|^2`.
    pub fn occupancy(&self, psi: &ComplexField) -> f64 {
        psi.weighted_norm_sqr(&self.mask)
    }

    /// CSV `xi_in,xi_exit,eta0,nodes`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "xi_in,xi_exit,eta0,nodes")?;
        let nodes = self.mask.values().iter().filter(|&&m| m > 0.5).count();
        writeln!(
            out,
            "{},{},{},{}",
            crate::fmt_f64(self.xi_in),
            crate::fmt_f64(self.xi_exit),
            crate::fmt_f64(self.eta0),
            nodes
        )
    }
}
