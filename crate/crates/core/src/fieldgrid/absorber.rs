use std::f64::consts::FRAC_PI_2;

use super::field::ScalarField;
use super::grid::Grid2D;
use crate::error::{Error, Result};

/// Exponent of the default `cos^{1/8}` ramp.
pub const DEFAULT_ABSORBER_STRENGTH: f64 = 0.125;

fn ramp(depth: f64, strength: f64) -> f64 {
    if depth <= 0.0 {
        1.0
    } else if depth >= 1.0 {
        0.0
    } else {
        (FRAC_PI_2 * depth).cos().powf(strength)
    }
}

/// Multiplicative boundary mask: 1 in the interior, falling as
/// `cos(pi/2 s)^strength` over a layer of `width`, where `s` is the relative
/// depth into the layer (1 at the outermost nodes).
pub fn absorber_mask(grid: &Grid2D, width: f64, strength: f64) -> Result<ScalarField> {
    if width < 0.0 || strength <= 0.0 {
        return Err(Error::Config(format!(
            "absorber width {width} and strength {strength} must be non-negative / positive"
        )));
    }
    if width == 0.0 {
        return Ok(ScalarField::constant(*grid, 1.0));
    }
    let span_x = grid.x_last() - grid.x_first();
    let span_y = if grid.is_line() {
        f64::INFINITY
    } else {
        grid.y_last() - grid.y_first()
    };
    if width >= 0.5 * span_x.min(span_y) {
        return Err(Error::Config(format!(
            "absorber width {width} not below half the smaller extent"
        )));
    }
    let (x_lo, x_hi) = (grid.x_first(), grid.x_last());
    let (y_lo, y_hi) = (grid.y_first(), grid.y_last());
    let line = grid.is_line();
    Ok(ScalarField::from_fn(*grid, |x, y| {
        let sx = ((x_lo + width - x) / width).max((x - (x_hi - width)) / width);
        let mx = ramp(sx, strength);
        if line {
            return mx;
        }
        let sy = ((y_lo + width - y) / width).max((y - (y_hi - width)) / width);
        mx * ramp(sy, strength)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldgrid::GridSpec;

    #[test]
    fn interior_and_corner() {
        let g = Grid2D::new(GridSpec::square(128, 20.0)).unwrap();
        let mask = absorber_mask(&g, 4.0, DEFAULT_ABSORBER_STRENGTH).unwrap();
        assert_eq!(mask.at(64, 64), 1.0);
        assert!(mask.at(0, 0) < 1e-3);
        assert!(mask.at(127, 127) < 1e-3);
        assert!(mask.values().iter().all(|m| (0.0..=1.0).contains(m)));
    }

    #[test]
    fn ramp_formula_at_edge() {
        // Default strength: cos(pi/2 * (1 - eps))^(1/8) -> 0.
        assert_eq!(ramp(1.0, DEFAULT_ABSORBER_STRENGTH), 0.0);
        assert!(ramp(0.999, DEFAULT_ABSORBER_STRENGTH) < 0.5);
        assert_eq!(ramp(-0.2, DEFAULT_ABSORBER_STRENGTH), 1.0);
    }

    #[test]
    fn zero_width_disables() {
        let g = Grid2D::new(GridSpec::square(32, 5.0)).unwrap();
        let mask = absorber_mask(&g, 0.0, DEFAULT_ABSORBER_STRENGTH).unwrap();
        assert!(mask.values().iter().all(|m| *m == 1.0));
    }

    #[test]
    fn too_wide_rejected() {
        let g = Grid2D::new(GridSpec::square(32, 5.0)).unwrap();
        assert!(absorber_mask(&g, 5.0, DEFAULT_ABSORBER_STRENGTH).is_err());
    }

    #[test]
    fn monotone_into_layer() {
        let g = Grid2D::new(GridSpec::square(64, 10.0)).unwrap();
        let mask = absorber_mask(&g, 3.0, DEFAULT_ABSORBER_STRENGTH).unwrap();
        for i in 32..63 {
            assert!(mask.at(i + 1, 32) <= mask.at(i, 32));
        }
    }
}
