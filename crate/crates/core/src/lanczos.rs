//! Lanczos (Krylov subspace) evaluation of `exp(-i H dt) v` and
//! `exp(-H tau) v` for a real symmetric operator given as a closure.
//!
//! The subspace grows until the a-posteriori error estimate
//! `beta_m |e_m^T exp(T_m) e_1|` drops below the tolerance. If the maximal
//! dimension is reached first, the step is split in halves.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovSettings {
    pub max_dim: usize,
    pub tol: f64,
}

impl Default for KrylovSettings {
    fn default() -> Self {
        Self {
            max_dim: 12,
            tol: 1e-10,
        }
    }
}

/// Which exponential to apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Evolution {
    /// `exp(-i H dt)`.
    RealTime(f64),
    /// `exp(-H tau)`.
    ImaginaryTime(f64),
}

impl Evolution {
    fn span(&self) -> f64 {
        match *self {
            Evolution::RealTime(dt) | Evolution::ImaginaryTime(dt) => dt,
        }
    }

    fn with_span(&self, span: f64) -> Self {
        match self {
            Evolution::RealTime(_) => Evolution::RealTime(span),
            Evolution::ImaginaryTime(_) => Evolution::ImaginaryTime(span),
        }
    }

    fn factor(&self, lambda: f64) -> Complex64 {
        match *self {
            Evolution::RealTime(dt) => Complex64::from_polar(1.0, -lambda * dt),
            Evolution::ImaginaryTime(tau) => Complex64::new((-lambda * tau).exp(), 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KrylovStats {
    /// Operator applications.
    pub applications: usize,
    /// Sub-steps used (1 when the full span converged directly).
    pub substeps: usize,
    /// Largest accepted error estimate.
    pub error_estimate: f64,
}

/// Reusable Krylov basis storage.
#[derive(Debug, Default)]
pub struct KrylovWorkspace {
    basis: Vec<Vec<Complex64>>,
    w: Vec<Complex64>,
}

impl KrylovWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn ensure(&mut self, dim: usize, len: usize) {
        if self.w.len() != len {
            self.w = vec![Complex64::new(0.0, 0.0); len];
            self.basis.clear();
        }
        while self.basis.len() < dim + 1 {
            self.basis.push(vec![Complex64::new(0.0, 0.0); len]);
        }
    }
}

const MAX_SPLIT_DEPTH: usize = 12;

/// Replace `v` by `exp(-i H dt) v` (or the imaginary-time variant).
pub fn expm_apply<F>(
    mut apply_h: F,
    v: &mut [Complex64],
    evolution: Evolution,
    settings: &KrylovSettings,
    ws: &mut KrylovWorkspace,
) -> Result<KrylovStats>
where
    F: FnMut(&[Complex64], &mut [Complex64]),
{
    if settings.max_dim < 2 {
        return Err(Error::Config("Krylov dimension must be at least 2".into()));
    }
    ws.ensure(settings.max_dim, v.len());
    let mut stats = KrylovStats::default();
    split_apply(&mut apply_h, v, evolution, settings, ws, 0, &mut stats)?;
    Ok(stats)
}

fn split_apply<F>(
    apply_h: &mut F,
    v: &mut [Complex64],
    evolution: Evolution,
    settings: &KrylovSettings,
    ws: &mut KrylovWorkspace,
    depth: usize,
    stats: &mut KrylovStats,
) -> Result<()>
where
    F: FnMut(&[Complex64], &mut [Complex64]),
{
    match try_step(apply_h, v, evolution, settings, ws, stats)? {
        true => {
            stats.substeps += 1;
            Ok(())
        }
        false if depth < MAX_SPLIT_DEPTH => {
            let half = evolution.with_span(0.5 * evolution.span());
            split_apply(apply_h, v, half, settings, ws, depth + 1, stats)?;
            split_apply(apply_h, v, half, settings, ws, depth + 1, stats)
        }
        false => Err(Error::Numerical(format!(
            "Krylov propagation did not converge after {MAX_SPLIT_DEPTH} step halvings"
        ))),
    }
}

/// One Lanczos attempt over the full span. Returns `false` (leaving `v`
/// untouched) when the error estimate stays above tolerance.
fn try_step<F>(
    apply_h: &mut F,
    v: &mut [Complex64],
    evolution: Evolution,
    settings: &KrylovSettings,
    ws: &mut KrylovWorkspace,
    stats: &mut KrylovStats,
) -> Result<bool>
where
    F: FnMut(&[Complex64], &mut [Complex64]),
{
    let beta0 = norm(v);
    if beta0 == 0.0 {
        return Ok(true);
    }
    if !beta0.is_finite() {
        return Err(Error::Numerical("non-finite vector entering Lanczos step".into()));
    }
    let inv = 1.0 / beta0;
    for (b, x) in ws.basis[0].iter_mut().zip(v.iter()) {
        *b = x * inv;
    }

    let mut alpha: Vec<f64> = Vec::with_capacity(settings.max_dim);
    let mut beta: Vec<f64> = Vec::with_capacity(settings.max_dim);

    for j in 0..settings.max_dim {
        {
            let (head, _) = ws.basis.split_at(j + 1);
            apply_h(&head[j], &mut ws.w);
        }
        stats.applications += 1;
        let a = dot_re(&ws.basis[j], &ws.w);
        alpha.push(a);
        {
            let vj = &ws.basis[j];
            for (w, x) in ws.w.iter_mut().zip(vj) {
                *w -= x * a;
            }
        }
        if j > 0 {
            let b_prev = beta[j - 1];
            let vprev = &ws.basis[j - 1];
            for (w, x) in ws.w.iter_mut().zip(vprev) {
                *w -= x * b_prev;
            }
        }
        // One pass of local reorthogonalization against the newest vector.
        let corr = dot(&ws.basis[j], &ws.w);
        {
            let vj = &ws.basis[j];
            for (w, x) in ws.w.iter_mut().zip(vj) {
                *w -= x * corr;
            }
        }
        let b = norm(&ws.w);
        if !b.is_finite() || !a.is_finite() {
            return Err(Error::Numerical("non-finite Lanczos coefficient".into()));
        }

        let coeffs = small_exponential(&alpha, &beta, evolution);
        let scale = alpha
            .iter()
            .map(|x| x.abs())
            .fold(0.0, f64::max)
            .max(beta.iter().copied().fold(0.0, f64::max))
            .max(1.0);
        let breakdown = b <= 1e-14 * scale;
        let estimate = b * coeffs[j].norm();
        if breakdown || estimate < settings.tol {
            stats.error_estimate = stats.error_estimate.max(if breakdown { 0.0 } else { estimate });
            for x in v.iter_mut() {
                *x = Complex64::new(0.0, 0.0);
            }
            for (k, c) in coeffs.iter().enumerate() {
                let c = c * beta0;
                for (x, q) in v.iter_mut().zip(&ws.basis[k]) {
                    *x += q * c;
                }
            }
            return Ok(true);
        }
        beta.push(b);
        if j + 1 < settings.max_dim {
            let inv_b = 1.0 / b;
            let (head, tail) = ws.basis.split_at_mut(j + 1);
            let _ = head;
            for (q, w) in tail[0].iter_mut().zip(&ws.w) {
                *q = w * inv_b;
            }
        }
    }
    Ok(false)
}

/// `exp(f(T)) e_1` for the tridiagonal `T` with diagonal `alpha`, off-diagonal `beta`.
fn small_exponential(alpha: &[f64], beta: &[f64], evolution: Evolution) -> Vec<Complex64> {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let weight = evolution.factor(lambda) * eig.eigenvectors[(0, k)];
        for (i, o) in out.iter_mut().enumerate() {
            *o += weight * eig.eigenvectors[(i, k)];
        }
    }
    out
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn dot_re(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}
