use ndarray::Array2;

use crate::error::{check_len, Error, Result};
use crate::forward::PulseModel;
use crate::grid::GridShape;
use crate::params::SystemParams;
use crate::scene::SceneModel;

/// The binary `n x m` matrix `δ(z)` placing each pixel's return in one
/// time-bin. Stored as the 1-based bin of every pixel; each row holds a
/// single one.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthOperator {
    shape: GridShape,
    bins: usize,
    bin_index: Vec<usize>,
}

impl DepthOperator {
    /// `bin_index` is 1-based, in `1..=bins`.
    pub fn new(shape: GridShape, bins: usize, bin_index: Vec<usize>) -> Result<Self> {
        check_len("bin index", shape.len(), bin_index.len())?;
        if let Some(i) = bin_index.iter().position(|&b| b == 0 || b > bins) {
            return Err(Error::invalid(format!(
                "pixel {}: bin {} outside 1..={bins}",
                i + 1,
                bin_index[i]
            )));
        }
        Ok(Self {
            shape,
            bins,
            bin_index,
        })
    }

    /// A pixel at depth `z` lands in bin `round(2z / (cΔ)) + 1`, i.e. the bin
    /// whose start is closest to its time of flight.
    pub fn from_scene(scene: &SceneModel, params: &SystemParams) -> Result<Self> {
        let bins = scene.time_bins(params)?;
        Self::new(
            scene.shape(),
            params.bins,
            bins.into_iter().map(|b| b + 1).collect(),
        )
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn bin_index(&self) -> &[usize] {
        &self.bin_index
    }

    /// `diag(weights) · δ(z) · S` as per-pixel circular shifts of the pulse.
    pub fn apply_pulse(&self, pulse: &PulseModel, weights: &[f64]) -> Result<Array2<f64>> {
        check_len("pulse length", self.bins, pulse.bins())?;
        check_len("pixel weights", self.shape.len(), weights.len())?;
        let m = self.bins;
        let s = pulse.waveform();
        let mut out = Array2::zeros((self.shape.len(), m));
        for (i, mut row) in out.outer_iter_mut().enumerate() {
            let w = weights[i];
            if w == 0.0 {
                continue;
            }
            let shift = self.bin_index[i] - 1;
            for (j, v) in row.iter_mut().enumerate() {
                *v = w * s[(j + m - shift) % m];
            }
        }
        Ok(out)
    }

    /// Dense `δ(z)`, row-major.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.bin_index
            .iter()
            .map(|&b| {
                let mut row = vec![0.0; self.bins];
                row[b - 1] = 1.0;
                row
            })
            .collect()
    }
}
