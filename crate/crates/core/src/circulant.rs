//! FFT-backed circulant operators on real vectors.
//!
//! A circulant matrix is stored through its first row `r`, laid out so that
//! `C[k][j] = r[(j - k) mod n]`: every row is the previous row shifted one
//! place to the right. With the DFT convention `X[f] = Σ x[k] e^{-2πi f k/n}`
//! such a matrix is diagonal in the Fourier basis with eigenvalues
//! `conj(DFT(r))` for real `r`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Result};

/// Forward/inverse FFT plans of one length. Plans are immutable and shared.
#[derive(Clone)]
pub struct FftPair {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPair").field("len", &self.len).finish()
    }
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse transform including the 1/n normalisation; keeps the real part.
    pub fn inverse_real(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        self.inverse.process(&mut spectrum);
        let scale = 1.0 / self.len as f64;
        spectrum.into_iter().map(|c| c.re * scale).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Circulant {
    first_row: Vec<f64>,
    eigenvalues: Vec<Complex64>,
    fft: FftPair,
}

impl Circulant {
    pub fn from_first_row(first_row: Vec<f64>) -> Self {
        let fft = FftPair::new(first_row.len());
        let eigenvalues = fft.forward(&first_row).into_iter().map(|c| c.conj()).collect();
        Self {
            first_row,
            eigenvalues,
            fft,
        }
    }

    pub fn len(&self) -> usize {
        self.first_row.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_row.is_empty()
    }

    pub fn first_row(&self) -> &[f64] {
        &self.first_row
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn fft(&self) -> &FftPair {
        &self.fft
    }

    /// `C x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("circulant operand", self.len(), x.len())?;
        Ok(self.apply_spectrum(x, false))
    }

    /// `Cᵀ x`.
    pub fn apply_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("circulant operand", self.len(), x.len())?;
        Ok(self.apply_spectrum(x, true))
    }

    fn apply_spectrum(&self, x: &[f64], transpose: bool) -> Vec<f64> {
        let mut spec = self.fft.forward(x);
        for (s, e) in spec.iter_mut().zip(&self.eigenvalues) {
            *s *= if transpose { e.conj() } else { *e };
        }
        self.fft.inverse_real(spec)
    }

    /// Dense `n x n` matrix, row-major. Intended for small reference checks.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n)
            .map(|k| (0..n).map(|j| self.first_row[(j + n - k) % n]).collect())
            .collect()
    }
}
