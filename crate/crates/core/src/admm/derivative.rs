use rustfft::num_complex::Complex64;

use crate::circulant::FftPair;
use crate::error::{check_len, Error, Result};
use crate::grid::GridShape;

/// Which rows of the derivative stack a solve regularises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    /// First and second derivatives, `8n` rows.
    Full,
    /// First derivatives only, `4n` rows.
    GradientOnly,
}

impl DerivativeMode {
    pub fn blocks(self) -> usize {
        match self {
            DerivativeMode::Full => 8,
            DerivativeMode::GradientOnly => 4,
        }
    }
}

/// Periodic derivative operators on a column-stacked image.
///
/// Directions are offsets along the linear pixel index, the same index the
/// circulant illumination blur wraps on: `x` moves one column (`+rows`),
/// `y` one row (`+1`), `xy` one row and one column (`+rows+1`) and `yx`
/// one column up a row (`+rows-1`). First derivatives are forward
/// differences `x[k+s] - x[k]`, second derivatives `x[k+s] - 2x[k] + x[k-s]`.
/// The output is ordered `[A_x; A_y; A_xy; A_yx; ρA″_x; ρA″_y; ρA″_xy; ρA″_yx]`.
#[derive(Debug, Clone)]
pub struct DerivativeStack {
    shape: GridShape,
    rho_second: f64,
    shifts: [usize; 4],
}

pub const DEFAULT_RHO_SECOND: f64 = 0.5;

impl DerivativeStack {
    pub fn new(shape: GridShape, rho_second: f64) -> Result<Self> {
        if !(rho_second.is_finite() && rho_second >= 0.0) {
            return Err(Error::invalid(format!(
                "second-derivative weight must be non-negative, got {rho_second}"
            )));
        }
        let n = shape.len();
        let r = shape.rows();
        let shifts = [r % n, 1 % n, (r + 1) % n, (r + n - 1) % n];
        Ok(Self {
            shape,
            rho_second,
            shifts,
        })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn rho_second(&self) -> f64 {
        self.rho_second
    }

    pub fn len(&self) -> usize {
        self.shape.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn output_len(&self, mode: DerivativeMode) -> usize {
        mode.blocks() * self.len()
    }

    /// `D x`.
    pub fn apply(&self, x: &[f64], mode: DerivativeMode) -> Result<Vec<f64>> {
        check_len("derivative operand", self.len(), x.len())?;
        let mut out = vec![0.0; self.output_len(mode)];
        self.apply_into(x, mode, &mut out);
        Ok(out)
    }

    /// `Dᵀ y`.
    pub fn apply_transpose(&self, y: &[f64], mode: DerivativeMode) -> Result<Vec<f64>> {
        check_len("derivative stack output", self.output_len(mode), y.len())?;
        let mut out = vec![0.0; self.len()];
        self.apply_transpose_into(y, mode, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_into(&self, x: &[f64], mode: DerivativeMode, out: &mut [f64]) {
        let n = self.len();
        for (d, &s) in self.shifts.iter().enumerate() {
            let block = &mut out[d * n..(d + 1) * n];
            for k in 0..n {
                block[k] = x[wrap(k + s, n)] - x[k];
            }
        }
        if mode == DerivativeMode::Full {
            let rho = self.rho_second;
            for (d, &s) in self.shifts.iter().enumerate() {
                let block = &mut out[(4 + d) * n..(5 + d) * n];
                for k in 0..n {
                    block[k] = rho * (x[wrap(k + s, n)] - 2.0 * x[k] + x[wrap(k + n - s, n)]);
                }
            }
        }
    }

    pub(crate) fn apply_transpose_into(&self, y: &[f64], mode: DerivativeMode, out: &mut [f64]) {
        let n = self.len();
        out.iter_mut().for_each(|v| *v = 0.0);
        for (d, &s) in self.shifts.iter().enumerate() {
            let block = &y[d * n..(d + 1) * n];
            for k in 0..n {
                out[k] += block[wrap(k + n - s, n)] - block[k];
            }
        }
        if mode == DerivativeMode::Full {
            let rho = self.rho_second;
            for (d, &s) in self.shifts.iter().enumerate() {
                let block = &y[(4 + d) * n..(5 + d) * n];
                for k in 0..n {
                    out[k] += rho
                        * (block[wrap(k + n - s, n)] - 2.0 * block[k] + block[wrap(k + s, n)]);
                }
            }
        }
    }

    /// Eigenvalues of `DᵀD` in the DFT basis (real, non-negative).
    pub fn gram_spectrum(&self, mode: DerivativeMode) -> Vec<f64> {
        let n = self.len();
        let rho2 = self.rho_second * self.rho_second;
        (0..n)
            .map(|f| {
                let mut total = 0.0;
                for &s in &self.shifts {
                    let theta = 2.0 * std::f64::consts::PI * ((f * s) % n) as f64 / n as f64;
                    let first = 2.0 - 2.0 * theta.cos();
                    total += first;
                    if mode == DerivativeMode::Full {
                        total += rho2 * first * first;
                    }
                }
                total
            })
            .collect()
    }

    /// Dense `D`, row-major (`8n x n` or `4n x n`).
    pub fn to_dense(&self, mode: DerivativeMode) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut rows = Vec::with_capacity(self.output_len(mode));
        for &s in &self.shifts {
            for k in 0..n {
                let mut row = vec![0.0; n];
                row[wrap(k + s, n)] += 1.0;
                row[k] -= 1.0;
                rows.push(row);
            }
        }
        if mode == DerivativeMode::Full {
            for &s in &self.shifts {
                for k in 0..n {
                    let mut row = vec![0.0; n];
                    row[wrap(k + s, n)] += self.rho_second;
                    row[k] -= 2.0 * self.rho_second;
                    row[wrap(k + n - s, n)] += self.rho_second;
                    rows.push(row);
                }
            }
        }
        rows
    }
}

#[inline]
fn wrap(k: usize, n: usize) -> usize {
    if k >= n {
        k - n
    } else {
        k
    }
}

/// Frequency-domain solver for `(AᵀA + ρ1 DᵀD + ρ2 I) x = rhs` where `A`
/// is circulant (or the identity).
#[derive(Debug, Clone)]
pub struct QuadraticSolver {
    fft: FftPair,
    inverse_diagonal: Vec<f64>,
}

impl QuadraticSolver {
    /// `operator_gram` holds `|â_f|²` per frequency.
    pub fn new(
        fft: FftPair,
        operator_gram: &[f64],
        derivative_gram: &[f64],
        rho1: f64,
        rho2: f64,
    ) -> Result<Self> {
        check_len("operator spectrum", fft.len(), operator_gram.len())?;
        check_len("derivative spectrum", fft.len(), derivative_gram.len())?;
        let inverse_diagonal: Vec<f64> = operator_gram
            .iter()
            .zip(derivative_gram)
            .map(|(a, d)| 1.0 / (a + rho1 * d + rho2))
            .collect();
        if inverse_diagonal.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("quadratic system is singular"));
        }
        Ok(Self {
            fft,
            inverse_diagonal,
        })
    }

    pub fn len(&self) -> usize {
        self.fft.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fft.is_empty()
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len("right-hand side", self.len(), rhs.len())?;
        let mut spec = self.fft.forward(rhs);
        self.scale(&mut spec);
        Ok(self.fft.inverse_real(spec))
    }

    pub(crate) fn scale(&self, spec: &mut [Complex64]) {
        for (s, d) in spec.iter_mut().zip(&self.inverse_diagonal) {
            *s *= *d;
        }
    }

    pub(crate) fn fft(&self) -> &FftPair {
        &self.fft
    }
}
