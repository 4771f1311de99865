//! Binary checkpoints of the coupled state.
//!
//! Layout (little endian): `QCTD`, u32 version, u32 channels, u32 nx, u32 ny,
//! f64 x_min, x_max, y_min, y_max, f64 time, then per channel `nx * ny`
//! complex values as `(re, im)` f64 pairs, row-major. Followed by a trailer
//! `QCTX`, u64 step, `N * N` complex absorbed-coherence entries, u64 sample
//! count and six f64 columns of observer samples
//! (time, occupancy, entry flux, exit flux, norm, absorbed).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::clock::ClockParams;
use crate::error::{Error, Result};
use crate::fieldgrid::{ComplexField, Grid2D};
use crate::propagator::ClockedWaveFunction;

const MAGIC: &[u8; 4] = b"QCTD";
const TRAILER: &[u8; 4] = b"QCTX";
pub const VERSION: u32 = 1;

/// Observer samples accumulated so far in a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeriesSamples {
    pub times: Vec<f64>,
    pub occupancy: Vec<f64>,
    pub d_in: Vec<f64>,
    pub d_exit: Vec<f64>,
    pub norm: Vec<f64>,
    pub absorbed: Vec<f64>,
}

impl SeriesSamples {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn columns(&self) -> [&Vec<f64>; 6] {
        [&self.times, &self.occupancy, &self.d_in, &self.d_exit, &self.norm, &self.absorbed]
    }

    /// CSV `t,occupancy,d_in,d_exit,norm,absorbed`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,occupancy,d_in,d_exit,norm,absorbed")?;
        for k in 0..self.len() {
            let row: Vec<String> = self.columns().iter().map(|c| crate::fmt_f64(c[k])).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_u64(w: &mut impl Write, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64(w: &mut impl Write, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn truncated(what: &str) -> Error {
    Error::Checkpoint(format!("truncated checkpoint while reading {what}"))
}

fn get<const K: usize>(r: &mut impl Read, what: &str) -> Result<[u8; K]> {
    let mut b = [0u8; K];
    r.read_exact(&mut b).map_err(|_| truncated(what))?;
    Ok(b)
}

fn get_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    Ok(u32::from_le_bytes(get::<4>(r, what)?))
}

fn get_u64(r: &mut impl Read, what: &str) -> Result<u64> {
    Ok(u64::from_le_bytes(get::<8>(r, what)?))
}

fn get_f64(r: &mut impl Read, what: &str) -> Result<f64> {
    Ok(f64::from_le_bytes(get::<8>(r, what)?))
}

fn write_header(w: &mut impl Write, grid: &Grid2D, n_channels: usize, time: f64) -> std::io::Result<()> {
    let spec = grid.spec();
    w.write_all(MAGIC)?;
    put_u32(w, VERSION)?;
    put_u32(w, n_channels as u32)?;
    put_u32(w, spec.nx as u32)?;
    put_u32(w, spec.ny as u32)?;
    for v in [spec.x_min, spec.x_max, spec.y_min, spec.y_max, time] {
        put_f64(w, v)?;
    }
    Ok(())
}

fn write_complex(w: &mut impl Write, values: &[Complex64]) -> std::io::Result<()> {
    for v in values {
        put_f64(w, v.re)?;
        put_f64(w, v.im)?;
    }
    Ok(())
}

fn atomic_write(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        body(&mut w)?;
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Write atomically (temporary file, then rename).
pub fn checkpoint_write(state: &ClockedWaveFunction, series: &SeriesSamples, path: &Path) -> Result<()> {
    atomic_write(path, |w| {
        write_header(w, state.grid(), state.n_channels(), state.time())?;
        for c in state.channels() {
            write_complex(w, c)?;
        }
        w.write_all(TRAILER)?;
        put_u64(w, state.step_index())?;
        write_complex(w, state.absorbed_matrix())?;
        put_u64(w, series.len() as u64)?;
        for col in series.columns() {
            for v in col {
                put_f64(w, *v)?;
            }
        }
        Ok(())
    })
}

/// Single-field snapshot (one channel, no trailer), e.g. the ground state.
pub fn snapshot_write(psi: &ComplexField, time: f64, path: &Path) -> Result<()> {
    atomic_write(path, |w| {
        write_header(w, psi.grid(), 1, time)?;
        write_complex(w, psi.values())
    })
}

/// Read a snapshot written by [`snapshot_write`] on `grid`.
pub fn snapshot_read(path: &Path, grid: &Grid2D) -> Result<(ComplexField, f64)> {
    let mut r = BufReader::new(File::open(path)?);
    let time = read_header(&mut r, grid, 1)?;
    let values = read_complex(&mut r, grid.len(), "field data")?;
    expect_end(&mut r)?;
    Ok((ComplexField::from_values(*grid, values)?, time))
}

fn read_header(r: &mut impl Read, grid: &Grid2D, n_expected: usize) -> Result<f64> {
    if &get::<4>(r, "magic")? != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = get_u32(r, "version")?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n = get_u32(r, "channel count")? as usize;
    let nx = get_u32(r, "nx")? as usize;
    let ny = get_u32(r, "ny")? as usize;
    let spec = grid.spec();
    if n != n_expected || nx != spec.nx || ny != spec.ny {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {n} channels on {nx}x{ny}; expected {n_expected} on {}x{}",
            spec.nx, spec.ny
        )));
    }
    let mut extents = [0.0; 4];
    for e in &mut extents {
        *e = get_f64(r, "extents")?;
    }
    if extents != [spec.x_min, spec.x_max, spec.y_min, spec.y_max] {
        return Err(Error::Checkpoint(format!("checkpoint extents {extents:?} differ from the grid")));
    }
    get_f64(r, "time")
}

fn read_complex(r: &mut impl Read, len: usize, what: &str) -> Result<Vec<Complex64>> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let re = get_f64(r, what)?;
        let im = get_f64(r, what)?;
        out.push(Complex64::new(re, im));
    }
    Ok(out)
}

fn expect_end(r: &mut impl Read) -> Result<()> {
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    Ok(())
}

/// Read a checkpoint written for `grid` and `clock`.
pub fn checkpoint_read(path: &Path, grid: &Grid2D, clock: &ClockParams) -> Result<(ClockedWaveFunction, SeriesSamples)> {
    let mut r = BufReader::new(File::open(path)?);
    let n = clock.n_states();
    let time = read_header(&mut r, grid, n)?;
    let mut channels = Vec::with_capacity(n);
    for _ in 0..n {
        channels.push(read_complex(&mut r, grid.len(), "channel data")?);
    }
    if &get::<4>(&mut r, "trailer")? != TRAILER {
        return Err(Error::Checkpoint("missing trailer".into()));
    }
    let step = get_u64(&mut r, "step")?;
    let absorbed = read_complex(&mut r, n * n, "absorbed")?;
    let len = get_u64(&mut r, "sample count")? as usize;
    let mut cols: [Vec<f64>; 6] = Default::default();
    for col in &mut cols {
        for _ in 0..len {
            col.push(get_f64(&mut r, "samples")?);
        }
    }
    expect_end(&mut r)?;
    let [times, occupancy, d_in, d_exit, norm, absorbed_series] = cols;
    let state = ClockedWaveFunction::from_parts(*grid, *clock, channels, time, step, absorbed)?;
    Ok((
        state,
        SeriesSamples {
            times,
            occupancy,
            d_in,
            d_exit,
            norm,
            absorbed: absorbed_series,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldgrid::GridSpec;

    fn sample() -> (Grid2D, ClockParams, ClockedWaveFunction, SeriesSamples) {
        let g = Grid2D::new(GridSpec::square(12, 3.0)).unwrap();
        let clock = ClockParams::new(3, 7.0).unwrap();
        let psi = ComplexField::from_fn(g, |x, y| Complex64::new(x.sin() + 0.1, y * 0.3 - x));
        let mut s = ClockedWaveFunction::init_state(&psi, &clock, 0.25);
        s.rotate_phase(Complex64::from_polar(1.0, 0.1));
        let series = SeriesSamples {
            times: vec![0.0, 0.5],
            occupancy: vec![0.1, 0.2],
            d_in: vec![1e-3, -2e-3],
            d_exit: vec![0.0, 1e-300],
            norm: vec![1.0, 0.99],
            absorbed: vec![0.0, 0.01],
        };
        (g, clock, s, series)
    }

    #[test]
    fn bitwise_round_trip() {
        let (g, clock, s, series) = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.bin");
        checkpoint_write(&s, &series, &path).unwrap();
        let (back, back_series) = checkpoint_read(&path, &g, &clock).unwrap();
        assert_eq!(back, s);
        assert_eq!(back_series, series);
        // Header is the documented layout.
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"QCTD");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 12);
        assert_eq!(f64::from_le_bytes(bytes[52..60].try_into().unwrap()), 0.25);
    }

    #[test]
    fn truncated_and_mismatched_files_fail() {
        let (g, clock, s, series) = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.bin");
        checkpoint_write(&s, &series, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let cut = dir.path().join("cut.bin");
        std::fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(checkpoint_read(&cut, &g, &clock), Err(Error::Checkpoint(_))));
        let mut bad = bytes.clone();
        bad[4] = 9;
        std::fs::write(&cut, &bad).unwrap();
        assert!(matches!(checkpoint_read(&cut, &g, &clock), Err(Error::Checkpoint(_))));
        let other = Grid2D::new(GridSpec::square(14, 3.0)).unwrap();
        assert!(matches!(checkpoint_read(&path, &other, &clock), Err(Error::Checkpoint(_))));
        let five = ClockParams::new(5, 7.0).unwrap();
        assert!(matches!(checkpoint_read(&path, &g, &five), Err(Error::Checkpoint(_))));
        // A single-field snapshot is not a checkpoint.
        snapshot_write(&ComplexField::zeros(g), 0.0, &cut).unwrap();
        assert!(matches!(checkpoint_read(&cut, &g, &clock), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn snapshot_round_trip() {
        let (g, _, s, _) = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ground.bin");
        let psi = s.channel_field(1);
        snapshot_write(&psi, -3.5, &path).unwrap();
        let (back, t) = snapshot_read(&path, &g).unwrap();
        assert_eq!(back, psi);
        assert_eq!(t, -3.5);
        assert_eq!(std::fs::metadata(&path).unwrap().len() as usize, 60 + 16 * g.len());
    }
}
