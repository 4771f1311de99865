use num_complex::Complex64;

use super::field::ComplexField;
use super::grid::Grid2D;

/// Fourth-order central second-derivative weights for offsets 0, 1, 2.
pub const D2_WEIGHTS: [f64; 3] = [-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];

/// `-(1/2) laplacian(psi)` with zero values outside the grid.
pub fn apply_kinetic(psi: &ComplexField) -> ComplexField {
    let grid = *psi.grid();
    let zeros = vec![0.0; grid.len()];
    let mut out = ComplexField::zeros(grid);
    apply_hamiltonian(&grid, &zeros, psi.values(), out.values_mut());
    out
}

/// `out = (-(1/2) laplacian + V) input` for a real diagonal potential `V`.
///
/// Five-point fourth-order stencil per axis; line grids (`ny == 1`) only
/// differentiate along `x`.
pub fn apply_hamiltonian(
    grid: &Grid2D,
    potential: &[f64],
    input: &[Complex64],
    out: &mut [Complex64],
) {
    let nx = grid.nx();
    let ny = grid.ny();
    debug_assert_eq!(input.len(), nx * ny);
    debug_assert_eq!(out.len(), nx * ny);
    debug_assert_eq!(potential.len(), nx * ny);

    let kx = -0.5 / (grid.dx() * grid.dx());
    let (kx0, kx1, kx2) = (kx * D2_WEIGHTS[0], kx * D2_WEIGHTS[1], kx * D2_WEIGHTS[2]);
    let (ky0, ky1, ky2) = if grid.is_line() {
        (0.0, 0.0, 0.0)
    } else {
        let ky = -0.5 / (grid.dy() * grid.dy());
        (ky * D2_WEIGHTS[0], ky * D2_WEIGHTS[1], ky * D2_WEIGHTS[2])
    };
    let diag = kx0 + ky0;

    for j in 0..ny {
        let row = &input[j * nx..(j + 1) * nx];
        let vrow = &potential[j * nx..(j + 1) * nx];
        let orow = &mut out[j * nx..(j + 1) * nx];
        x_pass(row, vrow, orow, diag, kx1, kx2);
    }
    if grid.is_line() {
        return;
    }
    for j in 0..ny {
        let (before, rest) = out.split_at_mut(j * nx);
        let _ = before;
        let orow = &mut rest[..nx];
        for (offset, weight) in [(1usize, ky1), (2usize, ky2)] {
            if j >= offset {
                axpy_row(orow, weight, &input[(j - offset) * nx..(j - offset + 1) * nx]);
            }
            if j + offset < ny {
                axpy_row(orow, weight, &input[(j + offset) * nx..(j + offset + 1) * nx]);
            }
        }
    }
}

#[inline]
fn x_pass(row: &[Complex64], vrow: &[f64], orow: &mut [Complex64], diag: f64, k1: f64, k2: f64) {
    let n = row.len();
    let at = |i: isize| -> Complex64 {
        if i < 0 || i >= n as isize {
            Complex64::new(0.0, 0.0)
        } else {
            row[i as usize]
        }
    };
    let edge = |i: usize| -> Complex64 {
        let ii = i as isize;
        row[i] * (diag + vrow[i]) + (at(ii - 1) + at(ii + 1)) * k1 + (at(ii - 2) + at(ii + 2)) * k2
    };
    if n < 5 {
        for i in 0..n {
            orow[i] = edge(i);
        }
        return;
    }
    orow[0] = edge(0);
    orow[1] = edge(1);
    for i in 2..n - 2 {
        orow[i] = row[i] * (diag + vrow[i])
            + (row[i - 1] + row[i + 1]) * k1
            + (row[i - 2] + row[i + 2]) * k2;
    }
    orow[n - 2] = edge(n - 2);
    orow[n - 1] = edge(n - 1);
}

#[inline]
fn axpy_row(out: &mut [Complex64], weight: f64, input: &[Complex64]) {
    for (o, v) in out.iter_mut().zip(input) {
        *o += v * weight;
    }
}

/// Fourth-order first derivative at node `i` of a strided line with zero
/// values outside `0..n`.
#[inline]
pub(crate) fn first_derivative(values: &[Complex64], start: usize, stride: usize, n: usize, i: usize, h: f64) -> Complex64 {
    let at = |k: isize| -> Complex64 {
        if k < 0 || k >= n as isize {
            Complex64::new(0.0, 0.0)
        } else {
            values[start + k as usize * stride]
        }
    };
    let k = i as isize;
    ((at(k - 2) - at(k + 2)) * (1.0 / 12.0) + (at(k + 1) - at(k - 1)) * (2.0 / 3.0)) / h
}
