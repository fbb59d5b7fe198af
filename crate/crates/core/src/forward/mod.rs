//! Image formation: the illumination blur `H`, the depth/pulse operators
//! `δ(z)` and `S`, noiseless expected histograms and photon sampling.
//!
//! Light leaked by off-state mirrors is still pulsed laser light, so it is
//! delayed by the time of flight of the pixel it reaches exactly like the
//! in-window light: the full `H · diag(κ) · δ(z) · S` product carries both.

mod depth_op;
mod histogram;
mod illumination;
mod pulse;
mod sampling;

use ndarray::Axis;

pub use depth_op::DepthOperator;
pub use histogram::{
    intensity_observation, ExpectedHistograms, HistogramCube, CUBE_MAGIC, CUBE_VERSION,
};
pub use illumination::{IlluminationOperator, Pattern};
pub use pulse::PulseModel;
pub use sampling::{pixel_rng, sample_events_with_deadtime, sample_poisson, simulate_with_deadtime};

use crate::error::{check_len, Result};
use crate::params::SystemParams;
use crate::scene::SceneModel;

/// Expected counts `Λ = N_r · (η · H · diag(κ) · δ(z) · S + b)` with
/// `b = (η n_a + n_d) Δ` per bin.
pub fn expected_histograms(
    scene: &SceneModel,
    op: &IlluminationOperator,
    pulse: &PulseModel,
    params: &SystemParams,
) -> Result<ExpectedHistograms> {
    params.validate()?;
    check_len("scene pixels", op.shape().len(), scene.shape().len())?;
    check_len("pulse bins", params.bins, pulse.bins())?;
    let delta = DepthOperator::from_scene(scene, params)?;
    let mut values = delta.apply_pulse(pulse, scene.reflectivity())?;

    let reps = params.repetitions as f64;
    let gain = reps * params.quantum_efficiency;
    let floor = reps * params.background_per_bin();
    let mut column = vec![0.0; values.nrows()];
    for mut slice in values.axis_iter_mut(Axis(1)) {
        if slice.iter().all(|&v| v == 0.0) {
            slice.fill(floor);
            continue;
        }
        for (dst, &src) in column.iter_mut().zip(slice.iter()) {
            *dst = src;
        }
        let blurred = op.apply(&column)?;
        for (dst, v) in slice.iter_mut().zip(blurred) {
            // FFT round-off can leave tiny negatives where the exact value is 0
            *dst = (gain * v).max(0.0) + floor;
        }
    }
    ExpectedHistograms::new(scene.shape(), values)
}
