//! Complete simulation and reconstruction configurations.
//!
//! A profile bundles the grid, acquisition parameters, illumination, pulse,
//! phantom geometry and solver settings. Two are built in: `reference`, the
//! full-size experimental setup, and `desk`, a reduced grid and time axis
//! that keeps the same rates and field of view but runs in seconds.

use serde::{Deserialize, Serialize};

use crate::admm::{DerivativeStack, DEFAULT_RHO_SECOND};
use crate::calibrate::calibrate_pulse_energy;
use crate::depth::DepthSettings;
use crate::error::{Error, Result};
use crate::forward::{IlluminationOperator, PulseModel};
use crate::grid::GridShape;
use crate::intensity::IntensitySettings;
use crate::params::{IlluminationConfig, SystemParams};
use crate::scene::{make_ball_scene, BallGeometry, SceneModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    /// Full width at half maximum (s).
    pub fwhm: f64,
    /// Mean photons per pixel a raster (`w = 1`) capture should collect;
    /// used to set the pulse energy when `photons_per_pulse` is absent.
    pub raster_total_photons: f64,
    /// Photons returned per pulse by a unit-reflectivity pixel, before
    /// quantum efficiency.
    #[serde(default)]
    pub photons_per_pulse: Option<f64>,
}

/// How photon counts are drawn from the expected histograms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    /// Independent Poisson counts per bin.
    #[default]
    Poisson,
    /// Per-pulse arrivals with the configured detector deadtime.
    Events,
}

fn default_rho_second() -> f64 {
    DEFAULT_RHO_SECOND
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub system: SystemParams,
    pub illumination: IlluminationConfig,
    pub pulse: PulseSpec,
    #[serde(default)]
    pub sampler: Sampler,
    #[serde(default)]
    pub scene: BallGeometry,
    /// Weight of the second-derivative block of the regulariser.
    #[serde(default = "default_rho_second")]
    pub rho_second: f64,
    #[serde(default)]
    pub intensity: IntensitySettings,
    #[serde(default)]
    pub depth: DepthSettings,
}

impl Profile {
    /// 95 x 152 grid, 1410 bins of 4 ps, 5e6 pulses, 35% QE, 1000:1 contrast.
    pub fn reference() -> Self {
        Self {
            name: "reference".into(),
            rows: 95,
            cols: 152,
            system: SystemParams::reference(),
            illumination: IlluminationConfig::new(5, 0.001),
            pulse: PulseSpec {
                fwhm: 80e-12,
                raster_total_photons: 26.8,
                photons_per_pulse: None,
            },
            sampler: Sampler::Poisson,
            scene: BallGeometry::default(),
            rho_second: DEFAULT_RHO_SECOND,
            intensity: IntensitySettings::default(),
            depth: DepthSettings::default(),
        }
    }

    /// 48 x 64 grid, 256 bins of 20 ps; rates, contrast and field of view
    /// as in [`Profile::reference`]. Weights are tuned for the `w = 5` window.
    pub fn desk() -> Self {
        let mut system = SystemParams::reference();
        system.bins = 256;
        system.bin_width = 20e-12;
        let mut profile = Self {
            name: "desk".into(),
            rows: 48,
            cols: 64,
            system,
            ..Self::reference()
        };
        profile.intensity.lambda = 0.3;
        profile.depth.mu = 5.0;
        profile
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "reference" => Ok(Self::reference()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::invalid(format!(
                "unknown profile '{other}' (expected 'reference' or 'desk')"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let shape = self.shape()?;
        self.system.validate()?;
        self.illumination.validate(shape)?;
        if !(self.pulse.fwhm.is_finite() && self.pulse.fwhm > 0.0) {
            return Err(Error::invalid("pulse FWHM must be positive"));
        }
        if let Some(p) = self.pulse.photons_per_pulse {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::invalid("photons per pulse must be positive"));
            }
        }
        if self.intensity.mu <= 0.0 || self.intensity.lambda <= 0.0 || self.depth.mu <= 0.0 {
            return Err(Error::invalid("regularisation weights must be positive"));
        }
        self.intensity.denoise.validate()?;
        self.intensity.deconvolve.validate()?;
        self.depth.admm.validate()?;
        DerivativeStack::new(shape, self.rho_second)?;
        if self.sampler == Sampler::Events && self.system.deadtime.is_none() {
            return Err(Error::invalid("event sampling needs a detector deadtime"));
        }
        Ok(())
    }

    pub fn shape(&self) -> Result<GridShape> {
        GridShape::new(self.rows, self.cols)
    }

    pub fn ball_scene(&self) -> Result<SceneModel> {
        make_ball_scene(self.shape()?, &self.scene, &self.system)
    }

    pub fn illumination_operator(&self) -> Result<IlluminationOperator> {
        IlluminationOperator::new(self.shape()?, self.illumination)
    }

    pub fn with_window(&self, window: usize) -> Self {
        let mut p = self.clone();
        p.illumination.window = window;
        p
    }

    pub fn derivative_stack(&self) -> Result<DerivativeStack> {
        DerivativeStack::new(self.shape()?, self.rho_second)
    }

    /// Unit-energy waveform of the configured width.
    pub fn pulse_shape(&self) -> Result<PulseModel> {
        PulseModel::gaussian(self.system.bins, self.pulse.fwhm / self.system.bin_width, 1.0)
    }

    /// Pulse at the configured energy, or calibrated on `scene` so a raster
    /// capture with the configured leakage averages `raster_total_photons`.
    /// A dark scene gets the unit-energy shape.
    pub fn pulse_for(&self, scene: &SceneModel) -> Result<PulseModel> {
        let shape = self.pulse_shape()?;
        match self.pulse.photons_per_pulse {
            Some(p) => shape.scaled(p),
            // nothing to calibrate against; a dark scene returns no signal
            // at any energy
            None if scene.reflectivity().iter().all(|&k| k == 0.0) => Ok(shape),
            None => {
                let raster = IlluminationOperator::new(
                    scene.shape(),
                    IlluminationConfig::new(1, self.illumination.epsilon),
                )?;
                calibrate_pulse_energy(
                    self.pulse.raster_total_photons,
                    scene,
                    &raster,
                    &shape,
                    &self.system,
                )
            }
        }
    }
}
