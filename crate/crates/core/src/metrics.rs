//! Image-quality metrics and capture statistics.

use std::io::Write;

use crate::error::{check_len, Error, Result};
use crate::forward::{intensity_observation, HistogramCube};

/// `10 log10(peak² / MSE)`; identical images give `f64::INFINITY`.
pub fn psnr(a: &[f64], b: &[f64], peak: f64) -> Result<f64> {
    check_len("image", a.len(), b.len())?;
    if a.is_empty() {
        return Err(Error::invalid("PSNR of an empty image"));
    }
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::invalid(format!("PSNR peak must be positive, got {peak}")));
    }
    let mse = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Root-mean-square depth error over masked pixels with a valid estimate.
/// Errors when no pixel qualifies.
pub fn depth_rmse(estimate: &[Option<f64>], truth: &[f64], mask: &[bool]) -> Result<f64> {
    check_len("depth estimate", truth.len(), estimate.len())?;
    check_len("mask", truth.len(), mask.len())?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((e, t), &m) in estimate.iter().zip(truth).zip(mask) {
        if let (true, Some(z)) = (m, e) {
            sum += (z - t) * (z - t);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::invalid("depth RMSE over an empty mask"));
    }
    Ok((sum / count as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonStatistics {
    pub mean: f64,
    /// Population standard deviation.
    pub stddev: f64,
}

/// Mean and standard deviation of the per-pixel photon totals.
pub fn photon_statistics(cube: &HistogramCube) -> PhotonStatistics {
    let totals = intensity_observation(cube);
    let n = totals.len() as f64;
    let mean = totals.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = totals.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    PhotonStatistics {
        mean,
        stddev: var.sqrt(),
    }
}

/// One named metric value per row, as an aligned table and as CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricTable {
    rows: Vec<(String, f64)>,
}

impl MetricTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: f64) {
        self.rows.push((name.into(), value));
    }

    pub fn rows(&self) -> &[(String, f64)] {
        &self.rows
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.rows.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn to_aligned(&self) -> String {
        let width = self.rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
        self.rows
            .iter()
            .map(|(n, v)| format!("{n:<width$}  {v:>14.6}\n"))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["metric", "value"])?;
        for (n, v) in &self.rows {
            out.write_record([n.as_str(), &v.to_string()])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
