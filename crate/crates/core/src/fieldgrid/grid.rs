use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Requested grid extents and point counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nx: 512,
            ny: 512,
            x_min: -40.0,
            x_max: 40.0,
            y_min: -40.0,
            y_max: 40.0,
        }
    }
}

impl GridSpec {
    pub fn square(n: usize, half_width: f64) -> Self {
        Self {
            nx: n,
            ny: n,
            x_min: -half_width,
            x_max: half_width,
            y_min: -half_width,
            y_max: half_width,
        }
    }
}

/// Cartesian grid, row-major (`x` fastest).
///
/// Node positions are shifted by a fraction of a cell so that the origin
/// falls on a node along each axis (the Coulomb singularity is handled by
/// cell averaging, see `coulomb_potential`). A grid with `ny == 1` is a
/// line along `x` at `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    spec: GridSpec,
    dx: f64,
    dy: f64,
    x_first: f64,
    y_first: f64,
    x_origin: i64,
    y_origin: i64,
}

/// Index offset `k` such that node `i` sits at `(i - k) * step`.
fn origin_index(min: f64, step: f64) -> i64 {
    let u = -min / step;
    if (u - u.round()).abs() < 1e-9 {
        u.round() as i64
    } else {
        u.floor() as i64
    }
}

impl Grid2D {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let GridSpec {
            nx,
            ny,
            x_min,
            x_max,
            y_min,
            y_max,
        } = spec;
        if nx < 8 {
            return Err(Error::Config(format!("nx = {nx} < 8")));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::Config(format!(
                "degenerate x extent [{x_min}, {x_max}]"
            )));
        }
        let dx = (x_max - x_min) / (nx - 1) as f64;
        let x_origin = origin_index(x_min, dx);
        let x_first = -(x_origin as f64) * dx;
        if ny == 1 {
            return Ok(Self {
                spec: GridSpec {
                    y_min: 0.0,
                    y_max: 0.0,
                    ..spec
                },
                dx,
                dy: 1.0,
                x_first,
                y_first: 0.0,
                x_origin,
                y_origin: 0,
            });
        }
        if ny < 8 {
            return Err(Error::Config(format!("ny = {ny} < 8")));
        }
        if !(y_max > y_min) || !y_min.is_finite() || !y_max.is_finite() {
            return Err(Error::Config(format!(
                "degenerate y extent [{y_min}, {y_max}]"
            )));
        }
        let dy = (y_max - y_min) / (ny - 1) as f64;
        let y_origin = origin_index(y_min, dy);
        let y_first = -(y_origin as f64) * dy;
        Ok(Self {
            spec,
            dx,
            dy,
            x_first,
            y_first,
            x_origin,
            y_origin,
        })
    }

    /// One-dimensional grid along `x` (used for time-of-flight checks).
    pub fn line(nx: usize, x_min: f64, x_max: f64) -> Result<Self> {
        Self::new(GridSpec {
            nx,
            ny: 1,
            x_min,
            x_max,
            y_min: 0.0,
            y_max: 0.0,
        })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn nx(&self) -> usize {
        self.spec.nx
    }

    pub fn ny(&self) -> usize {
        self.spec.ny
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Spacing along `y`; 1 for line grids so that `cell_area() == dx`.
    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn is_line(&self) -> bool {
        self.spec.ny == 1
    }

    pub fn len(&self) -> usize {
        self.spec.nx * self.spec.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        (i as i64 - self.x_origin) as f64 * self.dx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        (j as i64 - self.y_origin) as f64 * self.dy
    }

    pub fn x_last(&self) -> f64 {
        self.x(self.nx() - 1)
    }

    pub fn y_last(&self) -> f64 {
        self.y(self.ny() - 1)
    }

    pub fn x_first(&self) -> f64 {
        self.x_first
    }

    pub fn y_first(&self) -> f64 {
        self.y_first
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.spec.nx + i
    }

    /// Coordinates of flat index `idx`.
    #[inline]
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let nx = self.spec.nx;
        (self.x(idx % nx), self.y(idx / nx))
    }

    /// Node coordinates in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.ny()).flat_map(move |j| (0..self.nx()).map(move |i| (self.x(i), self.y(j))))
    }

    /// Fractional cell position of a point: `(i, j, fx, fy)` with the point
    /// between nodes `i..=i+1` and `j..=j+1`. `None` outside the node range.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize, f64, f64)> {
        let u = (x - self.x_first) / self.dx;
        let v = (y - self.y_first) / self.dy;
        if u < 0.0 || v < 0.0 {
            return None;
        }
        let i = u.floor() as usize;
        let j = v.floor() as usize;
        if i + 1 >= self.nx() || (!self.is_line() && j + 1 >= self.ny()) {
            return None;
        }
        Some((i, j, u - i as f64, v - j as f64))
    }
}
