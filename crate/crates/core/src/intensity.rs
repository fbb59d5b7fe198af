//! Intensity recovery from overlapping-window captures:
//!
//! 1. total counts `v` per measurement, stabilised as `f(v)`;
//! 2. TV denoising of `f(v)` above the floor `2√(3/8)`;
//! 3. exact-unbiased inverse back to photon rates `b*`;
//! 4. non-negative TV deconvolution of `H α = b*`.

use serde::{Deserialize, Serialize};

use crate::admm::{
    solve_generic, AdmmSettings, Constraint, DerivativeMode, DerivativeStack, Operator, SolveReport,
};
use crate::error::{check_len, Error, Result};
use crate::forward::{intensity_observation, HistogramCube, IlluminationOperator};
use crate::vst::{anscombe, InverseTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntensitySettings {
    /// Denoising weight, in the stabilised domain.
    pub mu: f64,
    /// Deconvolution weight, in photons.
    pub lambda: f64,
    pub denoise: AdmmSettings,
    pub deconvolve: AdmmSettings,
}

impl Default for IntensitySettings {
    fn default() -> Self {
        Self {
            mu: 0.5,
            lambda: 2.0,
            denoise: AdmmSettings::default(),
            deconvolve: AdmmSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityResult {
    /// Total counts per measurement.
    pub observation: Vec<f64>,
    pub stabilized: Vec<f64>,
    pub b_opt: Vec<f64>,
    pub b_star: Vec<f64>,
    pub alpha_opt: Vec<f64>,
    pub denoise_report: SolveReport,
    pub deconvolve_report: SolveReport,
}

/// TV denoising of `f(v)` with the Anscombe floor enforced.
pub fn denoise_stabilized(
    v: &[f64],
    stack: &DerivativeStack,
    mu: f64,
    settings: &AdmmSettings,
) -> Result<(Vec<f64>, SolveReport)> {
    let stabilized = anscombe(v)?;
    solve_generic(
        Operator::Identity,
        &stabilized,
        stack,
        DerivativeMode::Full,
        Constraint::Stabilized,
        &settings.with_weight(mu),
    )
}

/// Non-negative TV deconvolution of `H α = b*`.
pub fn deconvolve(
    b_star: &[f64],
    op: &IlluminationOperator,
    stack: &DerivativeStack,
    lambda: f64,
    settings: &AdmmSettings,
) -> Result<(Vec<f64>, SolveReport)> {
    if let Some(i) = b_star.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid(format!(
            "deconvolution input at pixel {} is negative or non-finite",
            i + 1
        )));
    }
    solve_generic(
        Operator::Circulant(op.circulant()),
        b_star,
        stack,
        DerivativeMode::Full,
        Constraint::NonNegative,
        &settings.with_weight(lambda),
    )
}

/// All four stages on a histogram cube.
pub fn recover_intensity(
    cube: &HistogramCube,
    op: &IlluminationOperator,
    stack: &DerivativeStack,
    table: &InverseTable,
    settings: &IntensitySettings,
) -> Result<IntensityResult> {
    let v: Vec<f64> = intensity_observation(cube).into_iter().map(|c| c as f64).collect();
    recover_intensity_from_totals(&v, op, stack, table, settings)
}

/// All four stages on per-measurement totals (counts or noiseless rates).
pub fn recover_intensity_from_totals(
    v: &[f64],
    op: &IlluminationOperator,
    stack: &DerivativeStack,
    table: &InverseTable,
    settings: &IntensitySettings,
) -> Result<IntensityResult> {
    check_len("observation", op.shape().len(), v.len())?;
    check_len("derivative stack", op.shape().len(), stack.len())?;
    let stabilized = anscombe(v).map_err(|e| e.in_stage("stabilise"))?;
    let (b_opt, denoise_report) = denoise_stabilized(v, stack, settings.mu, &settings.denoise)
        .map_err(|e| e.in_stage("denoise"))?;
    let b_star = table.ml_inverse(&b_opt).map_err(|e| e.in_stage("inverse transform"))?;
    let (alpha_opt, deconvolve_report) =
        deconvolve(&b_star, op, stack, settings.lambda, &settings.deconvolve)
            .map_err(|e| e.in_stage("deconvolve"))?;
    Ok(IntensityResult {
        observation: v.to_vec(),
        stabilized,
        b_opt,
        b_star,
        alpha_opt,
        denoise_report,
        deconvolve_report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridShape;
    use crate::params::IlluminationConfig;
    use crate::vst::{anscombe_scalar, ANSCOMBE_FLOOR};

    fn phantom(shape: GridShape) -> Vec<f64> {
        (0..shape.len())
            .map(|k| {
                let (r, c) = shape.coords(k);
                if (4..11).contains(&r) && (3..9).contains(&c) {
                    8.0
                } else if c >= 11 {
                    3.0
                } else {
                    1.0
                }
            })
            .collect()
    }

    fn psnr(a: &[f64], b: &[f64], peak: f64) -> f64 {
        let mse = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
        10.0 * (peak * peak / mse).log10()
    }

    #[test]
    fn constant_counts_are_a_fixed_point() {
        let stack = DerivativeStack::new(GridShape::new(5, 6).unwrap(), 0.5).unwrap();
        let settings = AdmmSettings { tol_primal: 1e-9, tol_dual: 1e-9, max_iters: 5000, ..Default::default() };
        let (b, _) = denoise_stabilized(&[7.0; 30], &stack, 2.0, &settings).unwrap();
        for x in b {
            assert!((x - anscombe_scalar(7.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn heavy_denoising_flattens() {
        let shape = GridShape::new(8, 8).unwrap();
        let stack = DerivativeStack::new(shape, 0.5).unwrap();
        let v: Vec<f64> = (0..64).map(|k| ((k * 37) % 11) as f64).collect();
        let (b, _) = denoise_stabilized(&v, &stack, 1e3, &AdmmSettings::default()).unwrap();
        let tv = |x: &[f64]| -> f64 {
            stack.apply(x, DerivativeMode::GradientOnly).unwrap().iter().map(|d| d.abs()).sum()
        };
        let fv = anscombe(&v).unwrap();
        assert!(tv(&b) < 0.01 * tv(&fv));
        assert!(b.iter().all(|&x| x >= ANSCOMBE_FLOOR));
    }

    #[test]
    fn identity_deconvolution_returns_input() {
        let shape = GridShape::new(4, 4).unwrap();
        let op = IlluminationOperator::new(shape, IlluminationConfig::raster_ideal()).unwrap();
        let stack = DerivativeStack::new(shape, 0.5).unwrap();
        let b: Vec<f64> = (0..16).map(|k| (k % 5) as f64).collect();
        let settings = AdmmSettings { max_iters: 5000, tol_primal: 1e-10, tol_dual: 1e-10, ..Default::default() };
        let (alpha, _) = deconvolve(&b, &op, &stack, 1e-8, &settings).unwrap();
        for (a, want) in alpha.iter().zip(&b) {
            assert!((a - want).abs() < 1e-5);
        }
    }

    #[test]
    fn constant_image_deconvolves_exactly() {
        let shape = GridShape::new(6, 6).unwrap();
        let op = IlluminationOperator::new(shape, IlluminationConfig::new(3, 0.001)).unwrap();
        let stack = DerivativeStack::new(shape, 0.5).unwrap();
        let b = op.apply(&[4.0; 36]).unwrap();
        let settings = AdmmSettings { max_iters: 5000, tol_primal: 1e-10, tol_dual: 1e-10, ..Default::default() };
        let (alpha, _) = deconvolve(&b, &op, &stack, 1e-6, &settings).unwrap();
        for a in alpha {
            assert!((a - 4.0).abs() < 4e-4);
        }
    }

    #[test]
    fn deconvolution_beats_blurred_input() {
        let shape = GridShape::new(16, 16).unwrap();
        let op = IlluminationOperator::new(shape, IlluminationConfig::new(5, 0.001)).unwrap();
        let stack = DerivativeStack::new(shape, 0.5).unwrap();
        let truth = phantom(shape);
        let blurred = op.apply(&truth).unwrap();
        let settings = AdmmSettings { max_iters: 2000, ..Default::default() };
        let (alpha, _) = deconvolve(&blurred, &op, &stack, 0.01, &settings).unwrap();
        // compare the blurred image at the same scale as the truth
        let gain: f64 = op.kernel().iter().sum();
        let b_scaled: Vec<f64> = blurred.iter().map(|v| v / gain).collect();
        let peak = 8.0;
        assert!(psnr(&alpha, &truth, peak) >= psnr(&b_scaled, &truth, peak) + 6.0);
    }

    #[test]
    fn dark_noiseless_scene_recovers_zero() {
        let shape = GridShape::new(6, 5).unwrap();
        let op = IlluminationOperator::new(shape, IlluminationConfig::new(2, 0.001)).unwrap();
        let stack = DerivativeStack::new(shape, 0.5).unwrap();
        let table = InverseTable::for_counts(10.0).unwrap();
        let cube = HistogramCube::zeros(shape, 8).unwrap();
        let res = recover_intensity(&cube, &op, &stack, &table, &IntensitySettings::default()).unwrap();
        let norm: f64 = res.alpha_opt.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(norm < 1e-6 * 30.0);
        assert!(res.b_opt.iter().all(|&b| b >= ANSCOMBE_FLOOR));
        assert!(res.alpha_opt.iter().all(|&a| a >= 0.0));
    }

    #[test]
    fn stage_errors_are_labelled() {
        let shape = GridShape::new(2, 2).unwrap();
        let op = IlluminationOperator::new(shape, IlluminationConfig::raster_ideal()).unwrap();
        let stack = DerivativeStack::new(shape, 0.5).unwrap();
        let table = InverseTable::for_counts(10.0).unwrap();
        let err = recover_intensity_from_totals(&[1.0, -1.0, 0.0, 0.0], &op, &stack, &table, &IntensitySettings::default())
            .unwrap_err();
        assert!(err.to_string().starts_with("stabilise:"), "{err}");
        assert!(recover_intensity_from_totals(&[1.0; 3], &op, &stack, &table, &IntensitySettings::default()).is_err());
    }
}
