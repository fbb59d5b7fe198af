//! One-parameter grid evaluation.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// `points` values spaced evenly in log between `lo` and `hi` inclusive.
pub fn log_range(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi >= lo) {
        return Err(Error::invalid(format!("log range needs 0 < lo <= hi, got {lo}..{hi}")));
    }
    if points == 0 {
        return Err(Error::invalid("empty sweep range"));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..points)
        .map(|k| {
            if k == 0 {
                lo
            } else if k + 1 == points {
                hi
            } else {
                (a + (b - a) * k as f64 / (points - 1) as f64).exp()
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub parameter: String,
    pub metric: String,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// Point with the largest metric; the first one wins ties and NaN never
    /// wins.
    pub fn argmax(&self) -> Option<SweepPoint> {
        self.points
            .iter()
            .filter(|p| !p.metric.is_nan())
            .fold(None, |best: Option<SweepPoint>, p| match best {
                Some(b) if b.metric >= p.metric => Some(b),
                _ => Some(*p),
            })
    }

    pub fn argmin(&self) -> Option<SweepPoint> {
        self.points
            .iter()
            .filter(|p| !p.metric.is_nan())
            .fold(None, |best: Option<SweepPoint>, p| match best {
                Some(b) if b.metric <= p.metric => Some(b),
                _ => Some(*p),
            })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([self.parameter.as_str(), self.metric.as_str()])?;
        for p in &self.points {
            out.write_record([p.value.to_string(), p.metric.to_string()])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Evaluates `eval` at every value, in parallel; results keep input order.
pub fn run_sweep<F>(parameter: &str, metric: &str, values: &[f64], eval: F) -> Result<SweepResult>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if values.is_empty() {
        return Err(Error::invalid("empty sweep range"));
    }
    let metrics: Vec<f64> = values.par_iter().map(|&v| eval(v)).collect::<Result<_>>()?;
    Ok(SweepResult {
        parameter: parameter.to_string(),
        metric: metric.to_string(),
        points: values
            .iter()
            .zip(metrics)
            .map(|(&value, metric)| SweepPoint { value, metric })
            .collect(),
    })
}
