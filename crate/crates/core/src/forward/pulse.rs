use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discretised laser pulse `s`: expected photons per time-bin returned by a
/// unit-reflectivity pixel for one pulse, before quantum efficiency.
///
/// The `m x m` matrix `S` built from it is circulant with each row the
/// previous one shifted right: `S[k][j] = s[(j - k) mod m]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseModel {
    waveform: Vec<f64>,
}

impl PulseModel {
    pub fn new(waveform: Vec<f64>) -> Result<Self> {
        if waveform.is_empty() {
            return Err(Error::invalid("pulse waveform needs at least one bin"));
        }
        if waveform.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("pulse waveform must be finite and non-negative"));
        }
        if !waveform.iter().any(|&v| v > 0.0) {
            return Err(Error::invalid("pulse waveform has no positive entry"));
        }
        Ok(Self { waveform })
    }

    /// Gaussian pulse of the given FWHM (in bins) peaking at bin 0 and
    /// wrapping circularly, scaled so the waveform sums to `photons`.
    pub fn gaussian(bins: usize, fwhm_bins: f64, photons: f64) -> Result<Self> {
        if !(fwhm_bins.is_finite() && fwhm_bins > 0.0) {
            return Err(Error::invalid("pulse FWHM must be positive"));
        }
        if !(photons.is_finite() && photons > 0.0) {
            return Err(Error::invalid("photons per pulse must be positive"));
        }
        let sigma = fwhm_bins / (8.0 * std::f64::consts::LN_2).sqrt();
        let raw: Vec<f64> = (0..bins)
            .map(|j| {
                let d = j.min(bins - j) as f64;
                (-0.5 * (d / sigma).powi(2)).exp()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        Self::new(raw.into_iter().map(|v| v * photons / total).collect())
    }

    pub fn bins(&self) -> usize {
        self.waveform.len()
    }

    pub fn waveform(&self) -> &[f64] {
        &self.waveform
    }

    /// Σ s.
    pub fn total(&self) -> f64 {
        self.waveform.iter().sum()
    }

    /// Same shape with the waveform multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.waveform.iter().map(|v| v * factor).collect())
    }

    /// `s` delayed by `shift` bins with circular wrap: `out[j] = s[(j - shift) mod m]`.
    pub fn shifted(&self, shift: usize) -> Vec<f64> {
        let m = self.bins();
        let shift = shift % m;
        (0..m).map(|j| self.waveform[(j + m - shift) % m]).collect()
    }

    /// Dense `S`, row-major.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.bins()).map(|k| self.shifted(k)).collect()
    }
}
