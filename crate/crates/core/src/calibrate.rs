//! Closed-form photon-budget calibration.
//!
//! Expected per-pixel totals are linear in the pulse energy and in the
//! leakage, so both calibrations solve a single linear equation:
//! `mean total = N_r · η · Σs · mean(H κ) + N_r · m · b`.

use crate::error::{check_len, Error, Result};
use crate::forward::{IlluminationOperator, PulseModel};
use crate::params::SystemParams;
use crate::scene::SceneModel;

/// Mean noise counts per pixel with the laser off.
pub fn noise_photons_per_pixel(params: &SystemParams) -> f64 {
    params.repetitions as f64 * params.bins as f64 * params.background_per_bin()
}

/// Mean expected total counts per pixel (signal, leakage and noise).
pub fn mean_total_photons(
    scene: &SceneModel,
    op: &IlluminationOperator,
    pulse: &PulseModel,
    params: &SystemParams,
) -> Result<f64> {
    check_len("scene pixels", op.shape().len(), scene.shape().len())?;
    let hk = op.apply(scene.reflectivity())?;
    let mean_hk = hk.iter().sum::<f64>() / hk.len() as f64;
    Ok(params.repetitions as f64 * params.quantum_efficiency * pulse.total() * mean_hk
        + noise_photons_per_pixel(params))
}

/// Rescales `pulse` so that captures through `op` average `target` photons
/// per pixel.
pub fn calibrate_pulse_energy(
    target: f64,
    scene: &SceneModel,
    op: &IlluminationOperator,
    pulse: &PulseModel,
    params: &SystemParams,
) -> Result<PulseModel> {
    let noise = noise_photons_per_pixel(params);
    let current = mean_total_photons(scene, op, pulse, params)? - noise;
    if !(target.is_finite() && target > noise) {
        return Err(Error::invalid(format!(
            "target of {target} photons/pixel does not exceed the noise floor {noise:.4}"
        )));
    }
    if current <= 0.0 {
        return Err(Error::invalid("scene returns no light; cannot calibrate pulse energy"));
    }
    pulse.scaled((target - noise) / current)
}

/// Leakage `ε` for which an all-mirrors-off capture averages `target`
/// photons per pixel.
pub fn calibrate_epsilon(
    target: f64,
    scene: &SceneModel,
    pulse: &PulseModel,
    params: &SystemParams,
) -> Result<f64> {
    let noise = noise_photons_per_pixel(params);
    let sum_kappa: f64 = scene.reflectivity().iter().sum();
    let per_epsilon = params.repetitions as f64 * params.quantum_efficiency * pulse.total() * sum_kappa;
    if !(target.is_finite() && target > noise) {
        return Err(Error::invalid(format!(
            "target of {target} photons/pixel does not exceed the noise floor {noise:.4}"
        )));
    }
    if per_epsilon <= 0.0 {
        return Err(Error::invalid("scene returns no light; cannot calibrate leakage"));
    }
    let epsilon = (target - noise) / per_epsilon;
    if epsilon >= 1.0 {
        return Err(Error::invalid(format!(
            "target of {target} photons/pixel needs leakage {epsilon:.3} >= 1"
        )));
    }
    Ok(epsilon)
}
