use std::io::Write;

use serde::Serialize;

use super::config::SweepSpec;
use super::{run_single, write_file, RunResult};
use crate::error::{Error, Result, StageExt};
use crate::observables::TimesReport;

/// `y = prefactor * x^exponent` fitted by least squares on `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
}

pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Config("power-law fit needs >= 2 matching points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("power-law fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("power-law fit needs distinct abscissae".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    Ok(PowerLawFit {
        exponent,
        prefactor: (my - exponent * mx).exp(),
    })
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub runs: Vec<RunResult>,
    pub tau_t_fit: Option<PowerLawFit>,
    pub tau_r_fit: Option<PowerLawFit>,
    pub tau_d_fit: Option<PowerLawFit>,
}

impl SweepResult {
    pub fn reports(&self) -> Vec<TimesReport> {
        self.runs.iter().map(|r| r.report.clone()).collect()
    }
}

/// One run per field, each in `<dir>/e0_<value>`; `sweep.csv` is rewritten
/// after every run so a failure keeps the finished rows. Power-law fits go
/// to `sweep_summary.csv`.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    let dir = spec.base.output.dir.clone();
    std::fs::create_dir_all(&dir)?;
    if spec.e0_values.len() < 4 {
        log::warn!("{} sweep points; exponent fits want at least 4", spec.e0_values.len());
    }
    let mut runs: Vec<RunResult> = Vec::new();
    for &e0 in &spec.e0_values {
        let mut config = spec.base.with_keldysh(spec.gamma, e0);
        config.output.dir = dir.join(format!("e0_{e0:.4}"));
        log::info!("sweep point e0 = {e0}");
        let run = run_single(&config).map_err(|e| Error::Stage {
            stage: "sweep",
            source: Box::new(e),
        })?;
        runs.push(run);
        let reports: Vec<TimesReport> = runs.iter().map(|r| r.report.clone()).collect();
        write_file(&dir.join("sweep.csv"), |w| TimesReport::write_csv(&reports, w)).stage("output")?;
    }

    let e0s: Vec<f64> = runs.iter().map(|r| r.report.e0).collect();
    let fit = |pick: fn(&TimesReport) -> f64, name: &str| {
        let ys: Vec<f64> = runs.iter().map(|r| pick(&r.report)).collect();
        match fit_power_law(&e0s, &ys) {
            Ok(f) => Some(f),
            Err(e) => {
                log::warn!("no power-law fit for {name}: {e}");
                None
            }
        }
    };
    let tau_t_fit = fit(|r| r.tau_t, "tau_t");
    let tau_r_fit = fit(|r| r.tau_r, "tau_r");
    let tau_d_fit = fit(|r| r.tau_d, "tau_d");
    write_file(&dir.join("sweep_summary.csv"), |w| {
        writeln!(w, "quantity,exponent,prefactor")?;
        for (name, f) in [("tau_t", tau_t_fit), ("tau_r", tau_r_fit), ("tau_d", tau_d_fit)] {
            let (a, b) = f.map_or((f64::NAN, f64::NAN), |f| (f.exponent, f.prefactor));
            writeln!(w, "{name},{},{}", crate::fmt_f64(a), crate::fmt_f64(b))?;
        }
        Ok(())
    })
    .stage("output")?;
    Ok(SweepResult {
        runs,
        tau_t_fit,
        tau_r_fit,
        tau_d_fit,
    })
}
