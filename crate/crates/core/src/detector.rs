//! Virtual detectors on the barrier's entry and exit lines: probability
//! current, crossing signals and the entry-to-exit delay distribution.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::barrier::DetectorLine;
use crate::error::{Error, Result};
use crate::fieldgrid::{first_derivative, ComplexField, Grid2D, ScalarField};
use crate::observables::trapezoid;
use crate::propagator::ClockedWaveFunction;

/// Current `Im(conj(psi) d psi)` at flat index `idx`.
fn current_at(grid: &Grid2D, psi: &[Complex64], idx: usize) -> (f64, f64) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (i, j) = (idx % nx, idx / nx);
    let c = psi[idx].conj();
    let dx = first_derivative(psi, j * nx, 1, nx, i, grid.dx());
    let jx = (c * dx).im;
    let jy = if grid.is_line() {
        0.0
    } else {
        (c * first_derivative(psi, i, nx, ny, j, grid.dy())).im
    };
    (jx, jy)
}

/// `j = Im(conj(psi) grad psi)` with fourth-order differences.
pub fn probability_current(psi: &ComplexField) -> (ScalarField, ScalarField) {
    let grid = *psi.grid();
    let (jx, jy): (Vec<f64>, Vec<f64>) = (0..grid.len()).map(|i| current_at(&grid, psi.values(), i)).unzip();
    (
        ScalarField::from_values(grid, jx).expect("same grid"),
        ScalarField::from_values(grid, jy).expect("same grid"),
    )
}

/// Cubic Lagrange weights for fractional offset `f` on nodes -1, 0, 1, 2.
fn lagrange4(f: f64) -> [f64; 4] {
    [
        -f * (f - 1.0) * (f - 2.0) / 6.0,
        (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
        -(f + 1.0) * f * (f - 2.0) / 2.0,
        (f + 1.0) * f * (f - 1.0) / 6.0,
    ]
}

/// Precomputed flux integral through one detector line: the nodes whose
/// current is needed and, per line sample, 4x4 interpolation weights
/// already multiplied by the normal line element.
#[derive(Debug, Clone)]
pub struct LineProbe {
    xi: f64,
    nodes: Vec<usize>,
    /// `(local node, weight for j_x, weight for j_y)`.
    terms: Vec<(usize, f64, f64)>,
}

impl LineProbe {
    pub fn new(grid: &Grid2D, line: &DetectorLine) -> Result<Self> {
        let mut local: BTreeMap<usize, usize> = BTreeMap::new();
        let mut nodes = Vec::new();
        let mut acc: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
        for (k, (x, y)) in line.points().enumerate() {
            let (i, j, fx, fy) = grid.locate(x, y).ok_or_else(|| {
                Error::Config(format!("detector line xi = {} leaves the grid at ({x:.3}, {y:.3})", line.xi))
            })?;
            if i < 1 || j < 1 || i + 2 >= grid.nx() || j + 2 >= grid.ny() {
                return Err(Error::Config(format!(
                    "detector line xi = {} too close to the grid edge",
                    line.xi
                )));
            }
            let (nwx, nwy) = line.normal_weight(k);
            let (wx, wy) = (lagrange4(fx), lagrange4(fy));
            for (b, wyb) in wy.iter().enumerate() {
                for (a, wxa) in wx.iter().enumerate() {
                    let idx = grid.index(i + a - 1, j + b - 1);
                    let w = wxa * wyb;
                    let e = acc.entry(idx).or_insert((0.0, 0.0));
                    e.0 += w * nwx;
                    e.1 += w * nwy;
                    if let std::collections::btree_map::Entry::Vacant(v) = local.entry(idx) {
                        v.insert(nodes.len());
                        nodes.push(idx);
                    }
                }
            }
        }
        let terms = acc.into_iter().map(|(idx, (a, b))| (local[&idx], a, b)).collect();
        Ok(Self {
            xi: line.xi,
            nodes,
            terms,
        })
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Flux of the clock-traced current through the line.
    pub fn signal(&self, state: &ClockedWaveFunction) -> f64 {
        let grid = state.grid();
        let mut j = vec![(0.0, 0.0); self.nodes.len()];
        for psi in state.channels() {
            for (slot, &idx) in j.iter_mut().zip(&self.nodes) {
                let (a, b) = current_at(grid, psi, idx);
                slot.0 += a;
                slot.1 += b;
            }
        }
        self.terms.iter().map(|&(k, wx, wy)| wx * j[k].0 + wy * j[k].1).sum()
    }

    /// Flux of a single field's current.
    pub fn signal_of(&self, psi: &ComplexField) -> f64 {
        let grid = psi.grid();
        let j: Vec<(f64, f64)> = self.nodes.iter().map(|&i| current_at(grid, psi.values(), i)).collect();
        self.terms.iter().map(|&(k, wx, wy)| wx * j[k].0 + wy * j[k].1).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorRecord {
    pub times: Vec<f64>,
    pub d_in: Vec<f64>,
    pub d_exit: Vec<f64>,
    pub p_in: Vec<f64>,
    pub p_exit: Vec<f64>,
    pub n_in: f64,
    pub n_exit: f64,
}

fn clip_normalize(times: &[f64], d: &[f64], what: &str) -> Result<(Vec<f64>, f64)> {
    let clipped: Vec<f64> = d.iter().map(|v| v.max(0.0)).collect();
    let n = trapezoid(times, &clipped);
    if !(n > 0.0) {
        return Err(Error::Numerical(format!("{what} signal is never positive")));
    }
    Ok((clipped.into_iter().map(|v| v / n).collect(), n))
}

/// Heaviside-clip and normalize both signals.
pub fn build_distributions(times: &[f64], d_in: &[f64], d_exit: &[f64]) -> Result<DetectorRecord> {
    if times.len() != d_in.len() || times.len() != d_exit.len() || times.len() < 3 {
        return Err(Error::Config("detector signals must share a time grid of >= 3 samples".into()));
    }
    let (p_in, n_in) = clip_normalize(times, d_in, "entry")?;
    let (p_exit, n_exit) = clip_normalize(times, d_exit, "exit")?;
    Ok(DetectorRecord {
        times: times.to_vec(),
        d_in: d_in.to_vec(),
        d_exit: d_exit.to_vec(),
        p_in,
        p_exit,
        n_in,
        n_exit,
    })
}

impl DetectorRecord {
    /// CSV `t,d_in,d_exit,p_in,p_exit`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let f = crate::fmt_f64;
        writeln!(out, "t,d_in,d_exit,p_in,p_exit")?;
        for k in 0..self.times.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                f(self.times[k]),
                f(self.d_in[k]),
                f(self.d_exit[k]),
                f(self.p_in[k]),
                f(self.p_exit[k])
            )?;
        }
        Ok(())
    }

    /// Mean of `p_in`.
    pub fn mean_entry_time(&self) -> f64 {
        let w: Vec<f64> = self.times.iter().zip(&self.p_in).map(|(t, p)| t * p).collect();
        trapezoid(&self.times, &w)
    }
}

/// Location of the maximum, refined by a parabola through the three
/// samples around it.
pub fn refined_peak(xs: &[f64], ys: &[f64]) -> f64 {
    let k = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    if k == 0 || k + 1 >= ys.len() {
        return xs[k];
    }
    let (a, b, c) = (ys[k - 1], ys[k], ys[k + 1]);
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return xs[k];
    }
    let shift = 0.5 * (a - c) / denom;
    xs[k] + shift * (xs[k + 1] - xs[k - 1]) * 0.5
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TunnelingDistribution {
    pub taus: Vec<f64>,
    pub p: Vec<f64>,
    pub norm_const: f64,
    pub tau_tsub: f64,
    pub tau_t_v: f64,
}

impl TunnelingDistribution {
    /// CSV `tau,p_tau`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "tau,p_tau")?;
        for (t, p) in self.taus.iter().zip(&self.p) {
            writeln!(out, "{},{}", crate::fmt_f64(*t), crate::fmt_f64(*p))?;
        }
        Ok(())
    }

    pub fn peak(&self) -> f64 {
        refined_peak(&self.taus, &self.p)
    }
}

/// `p(tau) ~ int p_in(t) p_exit(t + tau) dt` on `tau >= 0` (uniform grid).
pub fn tunneling_distribution(rec: &DetectorRecord) -> Result<TunnelingDistribution> {
    let n = rec.times.len();
    let h = (rec.times[n - 1] - rec.times[0]) / (n - 1) as f64;
    if rec
        .times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1.0))
    {
        return Err(Error::Config("detector samples must be uniformly spaced".into()));
    }
    let mut p = vec![0.0; n];
    for (m, slot) in p.iter_mut().enumerate() {
        let prod: Vec<f64> = (0..n - m).map(|i| rec.p_in[i] * rec.p_exit[i + m]).collect();
        *slot = if prod.len() >= 2 {
            trapezoid(&rec.times[..prod.len()], &prod)
        } else {
            0.0
        };
    }
    let taus: Vec<f64> = (0..n).map(|m| m as f64 * h).collect();
    let norm_const = trapezoid(&taus, &p);
    if !(norm_const > 0.0) {
        return Err(Error::Numerical("entry/exit correlation has no weight at tau >= 0".into()));
    }
    for v in &mut p {
        *v /= norm_const;
    }
    let weighted: Vec<f64> = taus.iter().zip(&p).map(|(t, v)| t * v).collect();
    let tau_t_v = trapezoid(&taus, &weighted);
    let tau_tsub = refined_peak(&rec.times, &rec.p_exit) - refined_peak(&rec.times, &rec.p_in);
    Ok(TunnelingDistribution {
        taus,
        p,
        norm_const,
        tau_tsub,
        tau_t_v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ClockParams;
    use crate::fieldgrid::GridSpec;

    fn gaussian(t: f64, mu: f64, s: f64) -> f64 {
        (-(t - mu).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    }

    #[test]
    fn current_of_plane_wave_packet() {
        let g = Grid2D::new(GridSpec::square(121, 6.0)).unwrap();
        let k = 1.3;
        let psi = ComplexField::from_fn(g, |x, y| Complex64::from_polar((-(x * x + y * y) / 4.0).exp(), k * x));
        let (jx, jy) = probability_current(&psi);
        for (idx, (x, y)) in g.nodes().enumerate() {
            if x.hypot(y) < 3.0 {
                let rho = psi.values()[idx].norm_sqr();
                assert!((jx.values()[idx] - k * rho).abs() < 3e-4 * rho.max(1e-3), "{x} {y} {} {}", jx.values()[idx], k * rho);
                assert!(jy.values()[idx].abs() < 1e-12);
            }
        }
        let (cx, _) = probability_current(&psi.conj());
        for (a, b) in cx.values().iter().zip(jx.values()) {
            assert!((a + b).abs() < 1e-13);
        }
        let real = ComplexField::from_fn(g, |x, y| Complex64::new((-(x * x + y * y)).exp(), 0.0));
        let (rx, ry) = probability_current(&real);
        assert!(rx.values().iter().chain(ry.values()).all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn lagrange_reproduces_cubics() {
        for f in [0.0, 0.25, 0.5, 0.9] {
            let w = lagrange4(f);
            for p in 0..4 {
                let exact = f.powi(p);
                let interp: f64 = w.iter().enumerate().map(|(k, wk)| wk * (k as f64 - 1.0).powi(p)).sum();
                assert!((interp - exact).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn flux_through_line_of_uniform_current() {
        // psi = exp(i k x): j = (k, 0); flux through the xi-line is k times its y extent.
        let g = Grid2D::new(GridSpec::square(161, 8.0)).unwrap();
        let k = 0.7;
        let psi = ComplexField::from_fn(g, |x, _| Complex64::from_polar(1.0, k * x));
        let line = DetectorLine::new(2.0, 1.5, 0.05);
        let probe = LineProbe::new(&g, &line).unwrap();
        let expected = k * 2.0 * (2.0f64 * 1.5).sqrt();
        assert!((probe.signal_of(&psi) - expected).abs() < 1e-6 * expected);
        // Uniform current along y: the normal's y part integrates y/xi over a
        // symmetric range, so the flux vanishes.
        let psi_y = ComplexField::from_fn(g, |_, y| Complex64::from_polar(1.0, k * y));
        assert!(probe.signal_of(&psi_y).abs() < 1e-9);
        let far = DetectorLine::new(30.0, 5.0, 0.05);
        assert!(LineProbe::new(&g, &far).is_err());
    }

    #[test]
    fn ground_state_has_no_flux() {
        let g = Grid2D::new(GridSpec::square(81, 8.0)).unwrap();
        let psi = ComplexField::from_fn(g, |x, y| Complex64::new((-2.0 * x.hypot(y)).exp(), 0.0));
        let clock = ClockParams::new(3, 200.0).unwrap();
        let s = ClockedWaveFunction::init_state(&psi, &clock, 0.0);
        let probe = LineProbe::new(&g, &DetectorLine::new(1.0, 1.0, 0.05)).unwrap();
        assert!(probe.signal(&s).abs() < 1e-10);
    }

    #[test]
    fn clipping_and_scaling() {
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
        let d_in: Vec<f64> = times.iter().map(|&t| gaussian(t, 6.0, 1.0) - 0.05 * gaussian(t, 14.0, 0.5)).collect();
        let d_exit: Vec<f64> = times.iter().map(|&t| gaussian(t, 9.0, 1.0)).collect();
        let rec = build_distributions(&times, &d_in, &d_exit).unwrap();
        for (t, p) in times.iter().zip(&rec.p_in) {
            assert!(*p >= 0.0);
            if (13.0..15.0).contains(t) {
                assert_eq!(*p, 0.0);
            }
        }
        assert!((trapezoid(&times, &rec.p_in) - 1.0).abs() < 1e-12);
        let scaled: Vec<f64> = d_in.iter().map(|v| 3.5 * v).collect();
        let again = build_distributions(&times, &scaled, &d_exit).unwrap();
        for (a, b) in again.p_in.iter().zip(&rec.p_in) {
            assert!((a - b).abs() < 1e-14);
        }
        let negative = vec![-1.0; times.len()];
        assert!(build_distributions(&times, &negative, &d_exit).is_err());
    }

    #[test]
    fn spikes_give_their_delay() {
        let times: Vec<f64> = (0..101).map(|i| i as f64 * 0.1).collect();
        let spike = |at: usize| -> Vec<f64> { (0..101).map(|i| if i == at { 1.0 } else { 0.0 }).collect() };
        let rec = build_distributions(&times, &spike(20), &spike(55)).unwrap();
        let dist = tunneling_distribution(&rec).unwrap();
        assert!((dist.tau_t_v - 3.5).abs() < 1e-12);
        assert!((dist.tau_tsub - 3.5).abs() < 1e-12);
        assert!((dist.peak() - 3.5).abs() < 1e-12);
    }

    /// Cross-correlation oracle for Gaussians: a Gaussian of mean mu2 - mu1
    /// and width s sqrt(2), truncated at zero.
    #[test]
    fn gaussian_cross_correlation() {
        let h = 0.02;
        let times: Vec<f64> = (0..2001).map(|i| i as f64 * h).collect();
        let (mu1, mu2, s) = (12.0, 13.0, 1.0);
        let d_in: Vec<f64> = times.iter().map(|&t| gaussian(t, mu1, s)).collect();
        let d_exit: Vec<f64> = times.iter().map(|&t| gaussian(t, mu2, s)).collect();
        let rec = build_distributions(&times, &d_in, &d_exit).unwrap();
        let dist = tunneling_distribution(&rec).unwrap();
        let sw = s * 2f64.sqrt();
        let oracle: Vec<f64> = dist.taus.iter().map(|&t| gaussian(t, mu2 - mu1, sw)).collect();
        let oracle_norm = trapezoid(&dist.taus, &oracle);
        for (p, o) in dist.p.iter().zip(&oracle) {
            assert!((p - o / oracle_norm).abs() < 1e-4);
        }
        let oracle_mean =
            trapezoid(&dist.taus, &dist.taus.iter().zip(&oracle).map(|(t, o)| t * o).collect::<Vec<_>>()) / oracle_norm;
        assert!((dist.tau_t_v - oracle_mean).abs() < 1e-4);
        // Truncation pushes the mean above the untruncated mean.
        assert!(dist.tau_t_v > mu2 - mu1);
        assert!((dist.tau_tsub - 1.0).abs() < 1e-3);
        assert!((trapezoid(&dist.taus, &dist.p) - 1.0).abs() < 1e-12);
        assert!(dist.p.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn shift_invariance() {
        let h = 0.05;
        let times: Vec<f64> = (0..800).map(|i| i as f64 * h).collect();
        let build = |off: f64| {
            let d_in: Vec<f64> = times.iter().map(|&t| gaussian(t, 10.0 + off, 1.2)).collect();
            let d_exit: Vec<f64> = times.iter().map(|&t| gaussian(t, 12.5 + off, 0.8)).collect();
            tunneling_distribution(&build_distributions(&times, &d_in, &d_exit).unwrap()).unwrap()
        };
        let (a, b) = (build(0.0), build(5.0));
        assert!((a.tau_t_v - b.tau_t_v).abs() < 1e-6);
        assert!((a.tau_tsub - b.tau_tsub).abs() < 1e-6);
    }

    #[test]
    fn non_uniform_grid_rejected() {
        let times = vec![0.0, 0.1, 0.3, 0.4];
        let d = vec![0.1, 1.0, 1.0, 0.1];
        let rec = build_distributions(&times, &d, &d).unwrap();
        assert!(tunneling_distribution(&rec).is_err());
    }
}
