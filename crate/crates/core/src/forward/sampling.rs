//! Photon-count sampling.
//!
//! Every pixel draws from its own ChaCha stream (`stream = pixel offset`)
//! derived from the run seed, so the output depends only on `(inputs, seed)`
//! and not on how rows are scheduled across threads.

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Poisson};
use rayon::prelude::*;

use super::{expected_histograms, ExpectedHistograms, HistogramCube, IlluminationOperator, PulseModel};
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::scene::SceneModel;

pub fn pixel_rng(seed: u64, pixel: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pixel as u64);
    rng
}

fn check_expectations(expected: &ExpectedHistograms) -> Result<()> {
    if let Some(pos) = expected.values().iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        let bins = expected.bins();
        return Err(Error::invalid(format!(
            "expected count at pixel {}, bin {} is negative or non-finite",
            pos / bins + 1,
            pos % bins
        )));
    }
    if expected.values().iter().any(|&v| v > u32::MAX as f64 / 2.0) {
        return Err(Error::invalid("expected counts too large for 32-bit histograms"));
    }
    Ok(())
}

fn assemble(expected: &ExpectedHistograms, rows: Vec<Vec<u32>>) -> Result<HistogramCube> {
    let bins = expected.bins();
    let flat: Vec<u32> = rows.into_iter().flatten().collect();
    let counts = Array2::from_shape_vec((expected.shape().len(), bins), flat)
        .expect("row lengths equal bin count");
    HistogramCube::new(expected.shape(), counts)
}

/// Independent `Poisson(Λ[i][j])` counts.
pub fn sample_poisson(expected: &ExpectedHistograms, seed: u64) -> Result<HistogramCube> {
    check_expectations(expected)?;
    let values = expected.values();
    let rows: Vec<Vec<u32>> = (0..values.nrows())
        .into_par_iter()
        .map(|i| {
            let mut rng = pixel_rng(seed, i);
            values
                .row(i)
                .iter()
                .map(|&lam| {
                    if lam > 0.0 {
                        Poisson::new(lam).expect("validated rate").sample(&mut rng) as u32
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect();
    assemble(expected, rows)
}

/// Event-level simulation with a non-extensible deadtime.
///
/// Per pixel, arrivals follow the rate `Λ[i][·] / N_r` in every repetition.
/// Repetitions without arrivals are skipped geometrically; in the others,
/// arrival times are drawn inside the observation window, and each
/// detection blinds the detector for `deadtime` seconds of absolute time,
/// which can extend into later repetitions. Arrivals outside the window are
/// not modelled.
pub fn sample_events_with_deadtime(
    expected: &ExpectedHistograms,
    params: &SystemParams,
    seed: u64,
) -> Result<HistogramCube> {
    params.validate()?;
    let deadtime = params
        .deadtime
        .ok_or_else(|| Error::invalid("event-level simulation needs a deadtime"))?;
    if !(params.repetition_period > 0.0) {
        return Err(Error::invalid("repetition period must be positive"));
    }
    check_expectations(expected)?;
    if expected.bins() != params.bins {
        return Err(Error::DimensionMismatch {
            what: "histogram bins",
            expected: params.bins,
            actual: expected.bins(),
        });
    }
    let values = expected.values();
    let reps = params.repetitions;
    let rows: Vec<Vec<u32>> = (0..values.nrows())
        .into_par_iter()
        .map(|i| {
            let mut rng = pixel_rng(seed, i);
            let per_pulse: Vec<f64> = values.row(i).iter().map(|&v| v / reps as f64).collect();
            simulate_pixel(&per_pulse, reps, deadtime, params, &mut rng)
        })
        .collect();
    assemble(expected, rows)
}

fn simulate_pixel(
    rates: &[f64],
    reps: u64,
    deadtime: f64,
    params: &SystemParams,
    rng: &mut ChaCha8Rng,
) -> Vec<u32> {
    let mut counts = vec![0u32; rates.len()];
    let mean: f64 = rates.iter().sum();
    if mean <= 0.0 || reps == 0 {
        return counts;
    }
    let p_busy = -(-mean).exp_m1();
    let skip = Geometric::new(p_busy).expect("probability in (0, 1]");
    let bin_of = WeightedIndex::new(rates).expect("positive total weight");
    let period = params.repetition_period;
    let width = params.bin_width;

    let mut blind_until = f64::NEG_INFINITY;
    let mut arrivals: Vec<(f64, usize)> = Vec::new();
    let mut rep: u64 = 0;
    loop {
        rep = rep.saturating_add(skip.sample(rng));
        if rep >= reps {
            break;
        }
        let k = sample_nonzero_poisson(mean, rng);
        arrivals.clear();
        for _ in 0..k {
            let bin = bin_of.sample(rng);
            let t = (bin as f64 + rng.random::<f64>()) * width;
            arrivals.push((t, bin));
        }
        arrivals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let start = rep as f64 * period;
        for &(t, bin) in &arrivals {
            let at = start + t;
            if at >= blind_until {
                counts[bin] = counts[bin].saturating_add(1);
                blind_until = at + deadtime;
            }
        }
        rep += 1;
    }
    counts
}

/// Zero-truncated Poisson draw.
fn sample_nonzero_poisson(mean: f64, rng: &mut ChaCha8Rng) -> u64 {
    if mean > 30.0 {
        // P(0) < 1e-13; plain rejection terminates at once
        let dist = Poisson::new(mean).expect("positive mean");
        loop {
            let k = dist.sample(rng) as u64;
            if k > 0 {
                return k;
            }
        }
    }
    let target = rng.random::<f64>() * -(-mean).exp_m1();
    let mut k = 1u64;
    let mut p = (-mean).exp() * mean;
    let mut cum = p;
    while cum < target && k < 1000 {
        k += 1;
        p *= mean / k as f64;
        if p == 0.0 {
            break;
        }
        cum += p;
    }
    k
}

/// Event-level capture of a scene: expected rates from the forward model,
/// then [`sample_events_with_deadtime`].
pub fn simulate_with_deadtime(
    scene: &SceneModel,
    op: &IlluminationOperator,
    pulse: &PulseModel,
    params: &SystemParams,
    seed: u64,
) -> Result<HistogramCube> {
    if params.deadtime.is_none() {
        return Err(Error::invalid("event-level simulation needs a deadtime"));
    }
    let expected = expected_histograms(scene, op, pulse, params)?;
    sample_events_with_deadtime(&expected, params, seed)
}
