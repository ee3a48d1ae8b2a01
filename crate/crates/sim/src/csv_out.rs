//! CSV schemas for every sweep.

use std::io::Write;
use std::path::Path;

use crossbar_core::experiments::{NoiseSweep, NoptStudy, QuantizationSweep, ScalingSweep};
use serde::Serialize;

use crate::error::{Result, SimError};

/// A row type with a fixed column list.
pub trait CsvRow: Serialize {
    const HEADER: &'static [&'static str];
}

#[derive(Debug, Clone, Serialize)]
pub struct QuantizationCsv {
    pub n_states: usize,
    pub rmse_mean: f64,
    pub rmse_stddev: f64,
    pub trials: usize,
}

impl CsvRow for QuantizationCsv {
    const HEADER: &'static [&'static str] = &["n_states", "rmse_mean", "rmse_stddev", "trials"];
}

#[derive(Debug, Clone, Serialize)]
pub struct NoiseCsv {
    pub sigma_kind: &'static str,
    pub sigma_ohm: f64,
    pub rmse_mean: f64,
    pub rmse_stddev: f64,
    pub trials: usize,
}

impl CsvRow for NoiseCsv {
    const HEADER: &'static [&'static str] = &["sigma_kind", "sigma_ohm", "rmse_mean", "rmse_stddev", "trials"];
}

#[derive(Debug, Clone, Serialize)]
pub struct NoptHistogramCsv {
    pub sigma_perp_ohm: f64,
    pub n_states: usize,
    pub fraction: f64,
    pub repetitions: usize,
}

impl CsvRow for NoptHistogramCsv {
    const HEADER: &'static [&'static str] = &["sigma_perp_ohm", "n_states", "fraction", "repetitions"];
}

#[derive(Debug, Clone, Serialize)]
pub struct NoptMedianCsv {
    pub sigma_perp_ohm: f64,
    pub median_n_opt: f64,
}

impl CsvRow for NoptMedianCsv {
    const HEADER: &'static [&'static str] = &["sigma_perp_ohm", "median_n_opt"];
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingCsv {
    pub vary: &'static str,
    pub size: usize,
    pub sigma_nl_ohm: f64,
    pub sigma_perp_ohm: f64,
    pub rmse_mean: f64,
    pub rmse_stddev: f64,
    pub trials: usize,
}

impl CsvRow for ScalingCsv {
    const HEADER: &'static [&'static str] =
        &["vary", "size", "sigma_nl_ohm", "sigma_perp_ohm", "rmse_mean", "rmse_stddev", "trials"];
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatmapCsv {
    pub x1: f64,
    pub x2: f64,
    pub software: f64,
    pub crossbar: f64,
    pub abs_error: f64,
}

impl CsvRow for HeatmapCsv {
    const HEADER: &'static [&'static str] = &["x1", "x2", "software", "crossbar", "abs_error"];
}

/// Header line plus one line per row; an empty slice gives a header-only
/// file.
pub fn write_rows<W: Write, R: CsvRow>(out: W, rows: &[R]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(R::HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| SimError::Csv(e.into()))?;
    Ok(())
}

pub fn write_sweep_csv<R: CsvRow>(path: &Path, rows: &[R]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(SimError::io(path))?;
    write_rows(std::io::BufWriter::new(file), rows)
}

pub fn quantization_rows(s: &QuantizationSweep) -> Vec<QuantizationCsv> {
    s.rows
        .iter()
        .map(|r| QuantizationCsv {
            n_states: r.n_states,
            rmse_mean: r.rmse.mean,
            rmse_stddev: r.rmse.std_dev,
            trials: r.rmse.trials,
        })
        .collect()
}

pub fn noise_rows(s: &NoiseSweep) -> Vec<NoiseCsv> {
    s.rows
        .iter()
        .map(|r| NoiseCsv {
            sigma_kind: r.kind.name(),
            sigma_ohm: r.sigma_ohm,
            rmse_mean: r.rmse.mean,
            rmse_stddev: r.rmse.std_dev,
            trials: r.rmse.trials,
        })
        .collect()
}

pub fn nopt_rows(s: &NoptStudy) -> (Vec<NoptHistogramCsv>, Vec<NoptMedianCsv>) {
    let hist = s
        .histogram
        .iter()
        .map(|h| NoptHistogramCsv {
            sigma_perp_ohm: h.sigma_perp_ohm,
            n_states: h.n_states,
            fraction: h.fraction,
            repetitions: s.config.repetitions,
        })
        .collect();
    let med = s
        .medians
        .iter()
        .map(|m| NoptMedianCsv { sigma_perp_ohm: m.sigma_perp_ohm, median_n_opt: m.median_n_opt })
        .collect();
    (hist, med)
}

pub fn scaling_rows(s: &ScalingSweep) -> Vec<ScalingCsv> {
    s.rows
        .iter()
        .map(|r| ScalingCsv {
            vary: r.axis.name(),
            size: r.size,
            sigma_nl_ohm: s.noise.sigma_nl,
            sigma_perp_ohm: s.noise.sigma_perp,
            rmse_mean: r.rmse.mean,
            rmse_stddev: r.rmse.std_dev,
            trials: r.rmse.trials,
        })
        .collect()
}
