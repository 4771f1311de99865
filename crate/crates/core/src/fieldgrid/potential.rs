use super::field::ScalarField;
use super::grid::Grid2D;
use super::params::{AtomParams, PulseParams};
use crate::error::{Error, Result};

/// Point value `-Z / sqrt(x^2 + y^2)`.
pub fn coulomb_point(x: f64, y: f64, atom: &AtomParams) -> f64 {
    -atom.z / x.hypot(y)
}

/// `int_0^x int_0^y dy' dx' / r` for any signs of `x` and `y`.
fn inverse_r_corner(x: f64, y: f64) -> f64 {
    let (ax, ay) = (x.abs(), y.abs());
    if ax == 0.0 || ay == 0.0 {
        return 0.0;
    }
    let g = ax * (ay / ax).asinh() + ay * (ax / ay).asinh();
    g * x.signum() * y.signum()
}

/// Mean of `1/r` over the rectangle `[x0, x1] x [y0, y1]`.
pub(crate) fn inverse_r_cell_mean(x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let total = inverse_r_corner(x1, y1) - inverse_r_corner(x0, y1) - inverse_r_corner(x1, y0)
        + inverse_r_corner(x0, y0);
    total / ((x1 - x0) * (y1 - y0))
}

/// Coulomb potential with each node carrying the mean of `-Z/r` over its
/// `dx * dy` cell. Finite at an origin node; within `O(h^2 / r^2)` of the
/// point value elsewhere. Line grids are point-sampled.
pub fn coulomb_potential(grid: &Grid2D, atom: &AtomParams) -> ScalarField {
    if grid.is_line() {
        return ScalarField::from_fn(*grid, |x, y| coulomb_point(x, y, atom));
    }
    let (hx, hy) = (0.5 * grid.dx(), 0.5 * grid.dy());
    ScalarField::from_fn(*grid, |x, y| {
        -atom.z * inverse_r_cell_mean(x - hx, x + hx, y - hy, y + hy)
    })
}

/// Gaussian envelope `e0 exp(-omega_e^2 (t - t0)^2 / 2)`.
pub fn pulse_amplitude(t: f64, pulse: &PulseParams) -> f64 {
    let s = pulse.omega_e * (t - pulse.t0);
    pulse.e0 * (-0.5 * s * s).exp()
}

/// Potential seen by clock channel with energy shift `clock_shift`:
/// `-Z/r - x E(t) + clock_shift * mask`.
pub fn total_potential(
    grid: &Grid2D,
    atom: &AtomParams,
    pulse: &PulseParams,
    t: f64,
    clock_shift: f64,
    barrier_mask: &ScalarField,
) -> Result<ScalarField> {
    if barrier_mask.grid() != grid {
        return Err(Error::Config("barrier mask built on a different grid".into()));
    }
    let field = pulse_amplitude(t, pulse);
    let mut v = coulomb_potential(grid, atom);
    for ((value, (x, _)), m) in v
        .values_mut()
        .iter_mut()
        .zip(grid.nodes())
        .zip(barrier_mask.values())
    {
        *value += -x * field + clock_shift * m;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldgrid::GridSpec;

    fn grid() -> Grid2D {
        Grid2D::new(GridSpec::square(16, 6.0)).unwrap()
    }

    #[test]
    fn coulomb_values() {
        let one = AtomParams::new(1.0).unwrap();
        let two = AtomParams::new(2.0).unwrap();
        assert!((coulomb_point(3.0, 4.0, &one) + 0.2).abs() < 1e-15);
        assert!((coulomb_point(1.0, 0.0, &two) + 2.0).abs() < 1e-15);
        let g = grid();
        let field = coulomb_potential(&g, &one);
        assert!(field.values().iter().all(|v| v.is_finite() && *v < 0.0));
        // Square grid, symmetric spacing: V(x_i, y_j) == V(x_j, y_i).
        for i in 0..16 {
            for j in 0..16 {
                assert!((field.at(i, j) - field.at(j, i)).abs() < 1e-14);
            }
        }
    }

    /// Midpoint-rule oracle for the cell mean of `1/r`.
    fn cell_mean_quadrature(x0: f64, x1: f64, y0: f64, y1: f64, n: usize) -> f64 {
        let (hx, hy) = ((x1 - x0) / n as f64, (y1 - y0) / n as f64);
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = x0 + (i as f64 + 0.5) * hx;
                let y = y0 + (j as f64 + 0.5) * hy;
                s += 1.0 / x.hypot(y);
            }
        }
        s / (n * n) as f64
    }

    #[test]
    fn cell_mean_matches_quadrature() {
        for (x0, x1, y0, y1) in [
            (0.5, 0.7, 0.1, 0.4),
            (-1.3, -1.1, 0.2, 0.3),
            (2.0, 2.2, -3.0, -2.7),
            (0.3, 0.5, -0.1, 0.1),
        ] {
            let a = inverse_r_cell_mean(x0, x1, y0, y1);
            let b = cell_mean_quadrature(x0, x1, y0, y1, 400);
            assert!((a - b).abs() < 1e-6 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn cell_mean_at_origin() {
        // Square of side h centred on the origin: 4 ln(1 + sqrt 2) / h.
        for h in [0.1, 0.156, 1.0] {
            let exact = 4.0 * (1.0 + 2f64.sqrt()).ln() / h;
            let a = inverse_r_cell_mean(-h / 2.0, h / 2.0, -h / 2.0, h / 2.0);
            assert!((a - exact).abs() < 1e-13 * exact);
        }
    }

    #[test]
    fn cell_mean_far_field_is_point_value() {
        // Leading correction is h^2 / (24 r^3) per axis pair.
        let g = Grid2D::new(GridSpec::default()).unwrap();
        let v = coulomb_potential(&g, &AtomParams::hydrogen());
        for (idx, (x, y)) in g.nodes().enumerate().step_by(977) {
            let r = x.hypot(y);
            if r < 5.0 {
                continue;
            }
            let point = -1.0 / r;
            let rel = (v.values()[idx] - point).abs() / point.abs();
            assert!(rel < 2.0 * g.dx() * g.dx() / (r * r), "r={r} rel={rel}");
        }
    }

    #[test]
    fn coulomb_increases_outward() {
        let g = Grid2D::new(GridSpec::square(64, 10.0)).unwrap();
        let atom = AtomParams::new(1.0).unwrap();
        let v = coulomb_potential(&g, &atom);
        // Along the row closest to the x axis, moving right from the centre.
        let j = 32;
        for i in 32..63 {
            assert!(v.at(i + 1, j) > v.at(i, j));
        }
        // Along the diagonal.
        for i in 32..63 {
            assert!(v.at(i + 1, i + 1) > v.at(i, i));
        }
    }

    #[test]
    fn pulse_shape() {
        let p = PulseParams::new(1.3, 0.2, 40.0).unwrap();
        assert_eq!(pulse_amplitude(40.0, &p), 1.3);
        let e = std::f64::consts::E;
        assert!((pulse_amplitude(40.0 + p.tau_e, &p) - 1.3 / e).abs() < 1e-14);
        assert!((pulse_amplitude(40.0 - p.tau_e, &p) - 1.3 / e).abs() < 1e-14);
        let far = pulse_amplitude(40.0 + 5.0 * p.tau_e, &p);
        assert!((far - 1.3 * (-25.0f64).exp()).abs() < 1e-24);
        for s in [0.1, 1.7, 9.3, 33.0] {
            let (a, b) = (pulse_amplitude(40.0 + s, &p), pulse_amplitude(40.0 - s, &p));
            assert!((a - b).abs() <= 1e-13 * a.max(1e-300), "{a} vs {b}");
        }
    }

    #[test]
    fn total_potential_composition() {
        let g = grid();
        let atom = AtomParams::new(1.0).unwrap();
        let pulse = PulseParams::new(0.7, 0.3, 0.0).unwrap();
        let half = ScalarField::from_fn(g, |x, _| if x > 0.0 { 1.0 } else { 0.0 });
        let zero = ScalarField::constant(g, 0.0);
        let coul = coulomb_potential(&g, &atom);

        let v = total_potential(&g, &atom, &pulse.with_field(0.0), 0.0, 0.3, &zero).unwrap();
        assert_eq!(v.values(), coul.values());

        let plain = total_potential(&g, &atom, &pulse, 0.0, 0.0, &half).unwrap();
        for ((a, b), (x, _)) in plain.values().iter().zip(coul.values()).zip(g.nodes()) {
            assert!((a - (b - 0.7 * x)).abs() < 1e-14);
        }

        let omega = 0.01;
        let up = total_potential(&g, &atom, &pulse, 0.0, omega, &half).unwrap();
        let down = total_potential(&g, &atom, &pulse, 0.0, -omega, &half).unwrap();
        for ((a, b), m) in up.values().iter().zip(down.values()).zip(half.values()) {
            assert!((a - b - 2.0 * omega * m).abs() < 1e-14);
        }
    }

    #[test]
    fn total_potential_grid_mismatch() {
        let g = grid();
        let other = Grid2D::new(GridSpec::square(20, 6.0)).unwrap();
        let atom = AtomParams::new(1.0).unwrap();
        let pulse = PulseParams::new(0.7, 0.3, 0.0).unwrap();
        let mask = ScalarField::constant(other, 0.0);
        assert!(total_potential(&g, &atom, &pulse, 0.0, 0.0, &mask).is_err());
    }
}
