use std::io::Write;

use num_complex::Complex64;

use super::grid::Grid2D;
use crate::error::{Error, Result};

/// Real-valued field on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid.nodes().map(|(x, y)| f(x, y)).collect();
        Self { grid, values }
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// CSV `x,y,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,y,value")?;
        for ((x, y), v) in self.grid.nodes().zip(&self.values) {
            writeln!(
                out,
                "{},{},{}",
                crate::fmt_f64(x),
                crate::fmt_f64(y),
                crate::fmt_f64(*v)
            )?;
        }
        Ok(())
    }
}

/// Complex-valued field (a wavefunction) on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid2D,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let values = grid.nodes().map(|(x, y)| f(x, y)).collect();
        Self { grid, values }
    }

    pub fn from_values(grid: Grid2D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// `sum |psi|^2 dx dy`.
    pub fn norm_sqr(&self) -> f64 {
        sum_norm_sqr(&self.values) * self.grid.cell_area()
    }

    /// `<self|other>` with the grid measure.
    pub fn inner(&self, other: &ComplexField) -> Complex64 {
        debug_assert_eq!(self.grid, other.grid);
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        s * self.grid.cell_area()
    }

    pub fn scale(&mut self, factor: Complex64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    /// Rescale to unit norm; returns the previous norm.
    pub fn normalize(&mut self) -> f64 {
        let norm = self.norm_sqr().sqrt();
        if norm > 0.0 {
            self.scale(Complex64::new(1.0 / norm, 0.0));
        }
        norm
    }

    pub fn density(&self) -> ScalarField {
        ScalarField::from_values(self.grid, self.values.iter().map(|v| v.norm_sqr()).collect())
            .expect("same grid")
    }

    pub fn conj(&self) -> ComplexField {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    /// `sum mask * |psi|^2 dx dy`.
    pub fn weighted_norm_sqr(&self, weights: &ScalarField) -> f64 {
        debug_assert_eq!(&self.grid, weights.grid());
        self.values
            .iter()
            .zip(weights.values())
            .map(|(v, w)| w * v.norm_sqr())
            .sum::<f64>()
            * self.grid.cell_area()
    }
}

/// Sequential sum of squared magnitudes (fixed reduction order).
pub(crate) fn sum_norm_sqr(values: &[Complex64]) -> f64 {
    values.iter().map(|v| v.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldgrid::GridSpec;

    #[test]
    fn gaussian_norm() {
        let g = Grid2D::new(GridSpec::square(128, 8.0)).unwrap();
        let mut psi = ComplexField::from_fn(g, |x, y| Complex64::new((-(x * x + y * y)).exp(), 0.0));
        // Integral of exp(-2 r^2) is pi / 2.
        assert!((psi.norm_sqr() - std::f64::consts::PI / 2.0).abs() < 1e-10);
        psi.normalize();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-14);
        assert!((psi.inner(&psi).re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn from_values_checks_length() {
        let g = Grid2D::new(GridSpec::square(8, 1.0)).unwrap();
        assert!(ScalarField::from_values(g, vec![0.0; 3]).is_err());
        assert!(ComplexField::from_values(g, vec![Complex64::new(0.0, 0.0); 64]).is_ok());
    }

    #[test]
    fn csv_export() {
        let g = Grid2D::new(GridSpec::square(8, 1.0)).unwrap();
        let f = ScalarField::constant(g, 2.0);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("x,y,value\n"));
        assert_eq!(s.lines().count(), 65);
    }
}
