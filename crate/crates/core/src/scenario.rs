//! A profile bound to its phantom and calibrated pulse: captures at any
//! window size and scores reconstructions against ground truth.

use crate::calibrate::noise_photons_per_pixel;
use crate::depth::{recover_depth, DepthResult};
use crate::error::{check_len, Result};
use crate::forward::{
    expected_histograms, sample_events_with_deadtime, sample_poisson, ExpectedHistograms,
    HistogramCube, IlluminationOperator, PulseModel,
};
use crate::admm::DerivativeStack;
use crate::intensity::{recover_intensity, IntensityResult};
use crate::metrics::{depth_rmse, psnr};
use crate::params::IlluminationConfig;
use crate::profile::{Profile, Sampler};
use crate::scene::SceneModel;
use crate::vst::InverseTable;

/// Minimum expected signal photons for a pixel to count in depth scores.
pub const SIGNAL_MASK_PHOTONS: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub profile: Profile,
    pub scene: SceneModel,
    /// Pulse at its calibrated energy; shared by every window size.
    pub pulse: PulseModel,
    pub stack: DerivativeStack,
}

impl Scenario {
    /// Uses the profile's ball phantom.
    pub fn new(profile: &Profile) -> Result<Self> {
        profile.validate()?;
        let scene = profile.ball_scene()?;
        Self::with_scene(profile, scene)
    }

    pub fn with_scene(profile: &Profile, scene: SceneModel) -> Result<Self> {
        profile.validate()?;
        check_len("scene pixels", profile.shape()?.len(), scene.shape().len())?;
        scene.time_bins(&profile.system)?;
        let pulse = profile.pulse_for(&scene)?;
        Ok(Self {
            profile: profile.clone(),
            stack: profile.derivative_stack()?,
            scene,
            pulse,
        })
    }

    pub fn operator(&self, window: usize) -> Result<IlluminationOperator> {
        IlluminationOperator::new(
            self.scene.shape(),
            IlluminationConfig::new(window, self.profile.illumination.epsilon),
        )
    }

    pub fn expected(&self, op: &IlluminationOperator) -> Result<ExpectedHistograms> {
        expected_histograms(&self.scene, op, &self.pulse, &self.profile.system)
    }

    pub fn capture(&self, op: &IlluminationOperator, seed: u64) -> Result<HistogramCube> {
        let expected = self.expected(op)?;
        match self.profile.sampler {
            Sampler::Poisson => sample_poisson(&expected, seed),
            Sampler::Events => sample_events_with_deadtime(&expected, &self.profile.system, seed),
        }
    }

    /// Photons one unit of reflectivity returns per measurement.
    pub fn photons_per_unit_reflectivity(&self) -> f64 {
        let s = &self.profile.system;
        s.repetitions as f64 * s.quantum_efficiency * self.pulse.total()
    }

    /// What the intensity pipeline estimates: the scaled reflectivity plus
    /// the background rate referred back through the row sum of `H`.
    pub fn intensity_target(&self, op: &IlluminationOperator) -> Vec<f64> {
        let e = self.photons_per_unit_reflectivity();
        let gain: f64 = op.kernel().iter().sum();
        let noise = noise_photons_per_pixel(&self.profile.system) / gain;
        self.scene.reflectivity().iter().map(|k| e * k + noise).collect()
    }

    /// PSNR of `alpha` against [`Scenario::intensity_target`], peak at the
    /// target maximum.
    pub fn intensity_psnr(&self, op: &IlluminationOperator, alpha: &[f64]) -> Result<f64> {
        let target = self.intensity_target(op);
        let peak = target.iter().copied().fold(0.0, f64::max);
        psnr(alpha, &target, peak)
    }

    /// Pixels whose measurement through `op` expects at least `min_photons`
    /// signal (laser) photons.
    pub fn signal_mask(&self, op: &IlluminationOperator, min_photons: f64) -> Result<Vec<bool>> {
        let e = self.photons_per_unit_reflectivity();
        Ok(op
            .apply(self.scene.reflectivity())?
            .into_iter()
            .map(|hk| e * hk >= min_photons)
            .collect())
    }

    pub fn depth_rmse(&self, result: &DepthResult, mask: &[bool]) -> Result<f64> {
        depth_rmse(&result.depth, self.scene.depth(), mask)
    }

    pub fn inverse_table(cube: &HistogramCube) -> Result<InverseTable> {
        let max = cube
            .counts()
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|&c| c as f64).sum::<f64>())
            .fold(0.0, f64::max);
        InverseTable::for_counts(max)
    }

    pub fn reconstruct_intensity(&self, cube: &HistogramCube, op: &IlluminationOperator) -> Result<IntensityResult> {
        let table = Self::inverse_table(cube)?;
        recover_intensity(cube, op, &self.stack, &table, &self.profile.intensity)
    }

    pub fn reconstruct_depth(&self, cube: &HistogramCube, op: &IlluminationOperator) -> Result<DepthResult> {
        recover_depth(cube, op, &self.stack, &self.pulse, &self.profile.system, &self.profile.depth)
    }
}
