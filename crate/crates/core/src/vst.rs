//! Anscombe transform `f(v) = 2√(v + 3/8)` and its exact-unbiased inverse.
//!
//! The inverse maps a stabilised value `b` to the Poisson rate `λ` whose
//! expected transform `E[f(Y)]`, `Y ~ Poisson(λ)`, equals `b`. A geometric
//! lookup table brackets the answer; the rate is then solved exactly inside
//! the bracketing cell so that the result is monotone and accurate well
//! beyond linear-interpolation precision.

use std::io::Write;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// `2√(3/8)`, the transform of a zero count.
pub const ANSCOMBE_FLOOR: f64 = 1.224_744_871_391_589;

/// Default number of geometric knots.
pub const DEFAULT_RESOLUTION: usize = 4096;

const LAMBDA_MIN: f64 = 1e-3;

pub fn anscombe_scalar(v: f64) -> f64 {
    2.0 * (v + 0.375).sqrt()
}

pub fn anscombe(v: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = v.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::invalid(format!(
            "anscombe input at pixel {} is negative or non-finite ({})",
            i + 1,
            v[i]
        )));
    }
    Ok(v.iter().map(|&x| anscombe_scalar(x)).collect())
}

pub fn anscombe_counts(v: &[u64]) -> Vec<f64> {
    v.iter().map(|&x| anscombe_scalar(x as f64)).collect()
}

/// Closed-form inverse `(b/2)² - 3/8`.
pub fn algebraic_inverse(b: f64) -> f64 {
    (b / 2.0).powi(2) - 0.375
}

/// `E[2√(Y + 3/8)]` for `Y ~ Poisson(λ)`, summed outwards from the mode
/// until the remaining mass is below `1e-16` of the total.
pub fn expected_anscombe(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return ANSCOMBE_FLOOR;
    }
    let mode = lambda.floor();
    let log_p_mode = mode * lambda.ln() - lambda - ln_gamma(mode + 1.0);
    let p_mode = log_p_mode.exp();
    let mut sum = p_mode * anscombe_scalar(mode);
    let mut mass = p_mode;

    let mut p = p_mode;
    let mut k = mode;
    loop {
        k += 1.0;
        p *= lambda / k;
        sum += p * anscombe_scalar(k);
        mass += p;
        // tail beyond the mode decays faster than geometric with ratio λ/k
        if p < 1e-18 * mass && k > lambda {
            break;
        }
    }

    let mut p = p_mode;
    let mut k = mode;
    while k > 0.0 {
        p *= k / lambda;
        k -= 1.0;
        sum += p * anscombe_scalar(k);
        mass += p;
        if p < 1e-18 * mass {
            break;
        }
    }
    sum / mass
}

/// Monotone table of `(λ, E[f(Y)|λ])` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseTable {
    lambdas: Vec<f64>,
    expectations: Vec<f64>,
}

impl InverseTable {
    /// `resolution` geometric knots from `1e-3` to `lambda_max`, plus `λ = 0`.
    pub fn build(lambda_max: f64, resolution: usize) -> Result<Self> {
        if !(lambda_max.is_finite() && lambda_max > LAMBDA_MIN) {
            return Err(Error::invalid(format!(
                "inverse table needs lambda_max > {LAMBDA_MIN}, got {lambda_max}"
            )));
        }
        if resolution < 2 {
            return Err(Error::invalid("inverse table needs at least 2 knots"));
        }
        let ratio = (lambda_max / LAMBDA_MIN).ln() / (resolution - 1) as f64;
        let mut lambdas = Vec::with_capacity(resolution + 1);
        lambdas.push(0.0);
        lambdas.extend((0..resolution).map(|k| {
            if k + 1 == resolution {
                lambda_max
            } else {
                LAMBDA_MIN * (ratio * k as f64).exp()
            }
        }));
        let expectations: Vec<f64> = lambdas.iter().map(|&l| expected_anscombe(l)).collect();
        if expectations.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("inverse table is not strictly increasing"));
        }
        Ok(Self {
            lambdas,
            expectations,
        })
    }

    /// Table covering counts up to `max_count` with headroom.
    pub fn for_counts(max_count: f64) -> Result<Self> {
        Self::build((2.0 * max_count).max(100.0), DEFAULT_RESOLUTION)
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn expectations(&self) -> &[f64] {
        &self.expectations
    }

    pub fn lambda_max(&self) -> f64 {
        *self.lambdas.last().expect("non-empty table")
    }

    /// Rate whose expected transform is `b`. Values at or below the floor
    /// map to 0; values past the last knot use `(b/2)² - 1/8`, the
    /// large-rate limit of the exact inverse.
    pub fn invert(&self, b: f64) -> Result<f64> {
        if !b.is_finite() {
            return Err(Error::invalid(format!("cannot invert non-finite value {b}")));
        }
        let e = &self.expectations;
        if b <= e[0] {
            return Ok(0.0);
        }
        let last = e.len() - 1;
        if b >= e[last] {
            return Ok(((b / 2.0).powi(2) - 0.125).max(self.lambdas[last]));
        }
        let hi = e.partition_point(|&x| x < b);
        if e[hi] == b {
            return Ok(self.lambdas[hi]);
        }
        Ok(self.solve_in_cell(hi - 1, b))
    }

    pub fn ml_inverse(&self, b: &[f64]) -> Result<Vec<f64>> {
        b.iter()
            .enumerate()
            .map(|(i, &x)| {
                self.invert(x)
                    .map_err(|e| Error::invalid(format!("pixel {}: {e}", i + 1)))
            })
            .collect()
    }

    /// Illinois regula falsi on `E[f|λ] - b` inside `[λ_k, λ_{k+1}]`.
    fn solve_in_cell(&self, k: usize, b: f64) -> f64 {
        let (mut a, mut c) = (self.lambdas[k], self.lambdas[k + 1]);
        let (mut fa, mut fc) = (self.expectations[k] - b, self.expectations[k + 1] - b);
        let mut side = 0i8;
        let mut x = 0.5 * (a + c);
        for _ in 0..60 {
            x = (a * fc - c * fa) / (fc - fa);
            if !(x > a && x < c) {
                x = 0.5 * (a + c);
            }
            let fx = expected_anscombe(x) - b;
            if fx == 0.0 || (c - a) <= 1e-14 * c.max(1e-300) {
                break;
            }
            if fx.signum() == fc.signum() {
                c = x;
                fc = fx;
                if side == -1 {
                    fa *= 0.5;
                }
                side = -1;
            } else {
                a = x;
                fa = fx;
                if side == 1 {
                    fc *= 0.5;
                }
                side = 1;
            }
        }
        x
    }

    /// `lambda,expectation` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["lambda", "expectation"])?;
        for (l, e) in self.lambdas.iter().zip(&self.expectations) {
            out.write_record([format!("{l:e}"), format!("{e:.15}")])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
