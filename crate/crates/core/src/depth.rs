//! Depth recovery: per-time-slice spatial deconvolution, temporal median
//! filtering of every pixel's histogram, then a circular cross-correlation
//! with the pulse to locate the time of flight.

use ndarray::Array2;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::admm::{Admm, AdmmSettings, Constraint, DerivativeMode, DerivativeStack, Operator, SolveReport};
use crate::circulant::FftPair;
use crate::error::{check_len, Error, Result};
use crate::forward::{HistogramCube, IlluminationOperator, PulseModel};
use crate::grid::GridShape;
use crate::params::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepthSettings {
    /// Per-slice TV weight, in photons.
    pub mu: f64,
    /// Temporal median order (odd).
    pub median_order: usize,
    /// Slice solver settings; `reg_weight` is replaced by `mu`.
    pub admm: AdmmSettings,
}

impl Default for DepthSettings {
    fn default() -> Self {
        Self {
            mu: 0.5,
            median_order: 5,
            admm: AdmmSettings::default(),
        }
    }
}

/// `C̄`: non-negative `n x m` spatially deconvolved histograms.
#[derive(Debug, Clone, PartialEq)]
pub struct DeconvolvedCube {
    shape: GridShape,
    values: Array2<f64>,
}

impl DeconvolvedCube {
    pub fn new(shape: GridShape, values: Array2<f64>) -> Result<Self> {
        check_len("deconvolved rows", shape.len(), values.nrows())?;
        if values.ncols() == 0 {
            return Err(Error::invalid("deconvolved cube needs at least one bin"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("deconvolved values must be finite and non-negative"));
        }
        let values = if values.is_standard_layout() {
            values
        } else {
            values.as_standard_layout().into_owned()
        };
        Ok(Self { shape, values })
    }

    fn row(&self, i: usize) -> &[f64] {
        self.values.row(i).to_slice().expect("standard layout")
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn bins(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthResult {
    /// Metres; `None` where the filtered histogram is empty.
    pub depth: Vec<Option<f64>>,
    /// 0-based lag of the correlation peak.
    pub tof_bins: Vec<Option<usize>>,
    /// One report per time-slice; empty slices are skipped and report zero
    /// iterations.
    pub slice_reports: Vec<SolveReport>,
}

impl DepthResult {
    pub fn valid_count(&self) -> usize {
        self.depth.iter().filter(|d| d.is_some()).count()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["pixel", "bin", "depth_m"])?;
        for (k, (b, z)) in self.tof_bins.iter().zip(&self.depth).enumerate() {
            out.write_record([
                (k + 1).to_string(),
                b.map_or_else(String::new, |b| b.to_string()),
                z.map_or_else(String::new, |z| format!("{z:.9}")),
            ])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Solves every column `R_j` independently for `min ½‖H c - R_j‖² + μ‖∇c‖₁`,
/// `c ≥ 0`. An all-zero slice has the exact solution `c = 0` and is skipped.
pub fn deconvolve_slices(
    cube: &HistogramCube,
    op: &IlluminationOperator,
    stack: &DerivativeStack,
    mu: f64,
    settings: &AdmmSettings,
) -> Result<(DeconvolvedCube, Vec<SolveReport>)> {
    let counts = cube.to_f64();
    deconvolve_slices_real(cube.shape(), &counts, op, stack, mu, settings)
}

/// [`deconvolve_slices`] on real-valued histograms.
pub fn deconvolve_slices_real(
    shape: GridShape,
    histograms: &Array2<f64>,
    op: &IlluminationOperator,
    stack: &DerivativeStack,
    mu: f64,
    settings: &AdmmSettings,
) -> Result<(DeconvolvedCube, Vec<SolveReport>)> {
    check_len("histogram rows", shape.len(), histograms.nrows())?;
    check_len("illumination operator", shape.len(), op.shape().len())?;
    check_len("derivative stack", shape.len(), stack.len())?;
    let admm = Admm::new(
        Operator::Circulant(op.circulant()),
        stack,
        DerivativeMode::GradientOnly,
        Constraint::NonNegative,
        settings.with_weight(mu),
    )?;
    let m = histograms.ncols();
    let slices: Vec<(Vec<f64>, SolveReport)> = (0..m)
        .into_par_iter()
        .map(|j| {
            let column = histograms.column(j).to_vec();
            if column.iter().all(|&v| v == 0.0) {
                return Ok((column, SolveReport { converged: true, ..Default::default() }));
            }
            admm.solve(&column).map_err(|e| Error::Slice {
                slice: j + 1,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let mut values = Array2::zeros((shape.len(), m));
    let mut reports = Vec::with_capacity(m);
    for (j, (c, report)) in slices.into_iter().enumerate() {
        for (dst, v) in values.column_mut(j).iter_mut().zip(c) {
            *dst = v;
        }
        reports.push(report);
    }
    Ok((DeconvolvedCube::new(shape, values)?, reports))
}

/// Running median of odd order along every row, with replicated edges.
pub fn median_filter_rows(cube: &DeconvolvedCube, order: usize) -> Result<DeconvolvedCube> {
    if order % 2 == 0 {
        return Err(Error::invalid(format!("median order must be odd, got {order}")));
    }
    if order > cube.bins() {
        return Err(Error::invalid(format!(
            "median order {order} exceeds the {} time-bins",
            cube.bins()
        )));
    }
    if order == 1 {
        return Ok(cube.clone());
    }
    let rows: Vec<f64> = (0..cube.values.nrows())
        .into_par_iter()
        .flat_map_iter(|i| median_filter(cube.row(i), order))
        .collect();
    let out = Array2::from_shape_vec(cube.values.raw_dim(), rows).expect("same shape");
    DeconvolvedCube::new(cube.shape, out)
}

pub fn median_filter(row: &[f64], order: usize) -> Vec<f64> {
    let m = row.len() as isize;
    let half = (order / 2) as isize;
    let mut window = vec![0.0; order];
    (0..m)
        .map(|j| {
            for (w, d) in window.iter_mut().zip(-half..=half) {
                *w = row[(j + d).clamp(0, m - 1) as usize];
            }
            window.sort_unstable_by(f64::total_cmp);
            window[order / 2]
        })
        .collect()
}

/// Circular cross-correlation `Σ_a ĉ[a] s[(a - b) mod m]` for every lag `b`.
fn correlation_direct(row: &[f64], pulse: &[f64], lag: usize) -> f64 {
    let m = row.len();
    row.iter()
        .enumerate()
        .map(|(a, &c)| c * pulse[(a + m - lag) % m])
        .sum()
}

/// Peak lag of the correlation with the pulse, smallest lag on ties. Rows
/// with no positive entry yield `None`.
pub fn tof_by_crosscorrelation(
    filtered: &DeconvolvedCube,
    pulse: &PulseModel,
    params: &SystemParams,
) -> Result<DepthResult> {
    let m = filtered.bins();
    check_len("pulse bins", m, pulse.bins())?;
    let fft = FftPair::new(m);
    let pulse_spec: Vec<Complex64> = fft.forward(pulse.waveform()).into_iter().map(|c| c.conj()).collect();
    let s = pulse.waveform();
    let bin_depth = params.bin_depth();
    let bins: Vec<Option<usize>> = (0..filtered.values.nrows())
        .into_par_iter()
        .map(|i| {
            let row = filtered.row(i);
            if !row.iter().any(|&v| v > 0.0) {
                return None;
            }
            let mut spec = fft.forward(row);
            for (x, p) in spec.iter_mut().zip(&pulse_spec) {
                *x *= p;
            }
            let corr = fft.inverse_real(spec);
            let peak = corr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let scale: f64 = row.iter().sum::<f64>() * s.iter().cloned().fold(0.0, f64::max);
            let slack = 1e-9 * scale.max(f64::MIN_POSITIVE);
            // FFT round-off can reorder near-ties; settle them with exact sums
            let mut best: Option<(usize, f64)> = None;
            for (b, &c) in corr.iter().enumerate() {
                if c >= peak - slack {
                    let exact = correlation_direct(row, s, b);
                    if best.is_none_or(|(_, v)| exact > v) {
                        best = Some((b, exact));
                    }
                }
            }
            best.map(|(b, _)| b)
        })
        .collect();
    Ok(DepthResult {
        depth: bins.iter().map(|b| b.map(|b| b as f64 * bin_depth)).collect(),
        tof_bins: bins,
        slice_reports: Vec::new(),
    })
}

/// Slice deconvolution, median filtering and cross-correlation.
pub fn recover_depth(
    cube: &HistogramCube,
    op: &IlluminationOperator,
    stack: &DerivativeStack,
    pulse: &PulseModel,
    params: &SystemParams,
    settings: &DepthSettings,
) -> Result<DepthResult> {
    recover_depth_real(cube.shape(), &cube.to_f64(), op, stack, pulse, params, settings)
}

/// [`recover_depth`] on real-valued histograms.
pub fn recover_depth_real(
    shape: GridShape,
    histograms: &Array2<f64>,
    op: &IlluminationOperator,
    stack: &DerivativeStack,
    pulse: &PulseModel,
    params: &SystemParams,
    settings: &DepthSettings,
) -> Result<DepthResult> {
    check_len("histogram bins", params.bins, histograms.ncols())?;
    let (deconvolved, reports) =
        deconvolve_slices_real(shape, histograms, op, stack, settings.mu, &settings.admm)
            .map_err(|e| e.in_stage("slice deconvolution"))?;
    let filtered = median_filter_rows(&deconvolved, settings.median_order)
        .map_err(|e| e.in_stage("median filter"))?;
    let mut result = tof_by_crosscorrelation(&filtered, pulse, params)
        .map_err(|e| e.in_stage("cross-correlation"))?;
    result.slice_reports = reports;
    Ok(result)
}
