//! ADMM for `min ½‖A x - y‖² + τ‖D x‖₁` subject to an elementwise floor,
//! with `A` circulant or the identity and `D` a periodic derivative stack.
//!
//! Splitting `z1 = D x`, `z2 = x` gives the iteration
//!
//! ```text
//! x  ← (AᵀA + ρ1 DᵀD + ρ2 I)⁻¹ (Aᵀy + ρ1 Dᵀ(z1 - u1) + ρ2 (z2 - u2))
//! z1 ← shrink(D x + u1, τ/ρ1)
//! z2 ← max(x + u2, floor)
//! u1 ← u1 + D x - z1
//! u2 ← u2 + x - z2
//! ```
//!
//! Every operator is diagonal in the same DFT basis, so the `x` step is one
//! forward and one inverse FFT.

mod derivative;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use derivative::{DerivativeMode, DerivativeStack, QuadraticSolver, DEFAULT_RHO_SECOND};

use crate::circulant::{Circulant, FftPair};
use crate::error::{check_len, Error, Result};
use crate::vst::ANSCOMBE_FLOOR;

/// Soft thresholding, the proximal map of `τ‖·‖₁`.
pub fn shrink_scalar(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

pub fn shrinkage(x: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid(format!("shrinkage threshold must be positive, got {tau}")));
    }
    Ok(x.iter().map(|&v| shrink_scalar(v, tau)).collect())
}

pub fn project(x: &[f64], floor: f64) -> Result<Vec<f64>> {
    if !floor.is_finite() {
        return Err(Error::invalid("projection floor must be finite"));
    }
    Ok(x.iter().map(|&v| v.max(floor)).collect())
}

/// Feasible set of the `z2` split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constraint {
    /// `x ≥ 2√(3/8)`: the range of the Anscombe transform.
    Stabilized,
    NonNegative,
}

impl Constraint {
    pub fn floor(self) -> f64 {
        match self {
            Constraint::Stabilized => ANSCOMBE_FLOOR,
            Constraint::NonNegative => 0.0,
        }
    }
}

/// The data operator `A`.
#[derive(Debug, Clone, Copy)]
pub enum Operator<'a> {
    Identity,
    Circulant(&'a Circulant),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmmSettings {
    pub rho1: f64,
    pub rho2: f64,
    /// `τ`: weight of the `‖D x‖₁` term.
    pub reg_weight: f64,
    pub max_iters: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            rho1: 1.0,
            rho2: 1.0,
            reg_weight: 1.0,
            max_iters: 500,
            tol_primal: 1e-5,
            tol_dual: 1e-5,
        }
    }
}

impl AdmmSettings {
    pub fn with_weight(self, reg_weight: f64) -> Self {
        Self { reg_weight, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rho1", self.rho1),
            ("rho2", self.rho2),
            ("reg_weight", self.reg_weight),
            ("tol_primal", self.tol_primal),
            ("tol_dual", self.tol_dual),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// One record per iteration; objective evaluated at the feasible iterate.
    pub history: Vec<IterationRecord>,
}

impl SolveReport {
    pub fn objective_trace(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.objective).collect()
    }

    pub fn final_objective(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.objective)
    }

    /// `iteration,primal_residual,dual_residual,objective` with 1-based iterations.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["iteration", "primal_residual", "dual_residual", "objective"])?;
        for (k, r) in self.history.iter().enumerate() {
            out.write_record([
                (k + 1).to_string(),
                format!("{:e}", r.primal_residual),
                format!("{:e}", r.dual_residual),
                format!("{:.17e}", r.objective),
            ])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// A prepared problem: operator spectra and the quadratic solver are built
/// once and reused for every right-hand side `y`.
#[derive(Debug, Clone)]
pub struct Admm<'a> {
    operator: Operator<'a>,
    stack: &'a DerivativeStack,
    mode: DerivativeMode,
    constraint: Constraint,
    settings: AdmmSettings,
    quadratic: QuadraticSolver,
}

impl<'a> Admm<'a> {
    pub fn new(
        operator: Operator<'a>,
        stack: &'a DerivativeStack,
        mode: DerivativeMode,
        constraint: Constraint,
        settings: AdmmSettings,
    ) -> Result<Self> {
        settings.validate()?;
        let n = stack.len();
        let (fft, operator_gram) = match operator {
            Operator::Identity => (FftPair::new(n), vec![1.0; n]),
            Operator::Circulant(c) => {
                check_len("operator size", n, c.len())?;
                (c.fft().clone(), c.eigenvalues().iter().map(|e| e.norm_sqr()).collect())
            }
        };
        let quadratic = QuadraticSolver::new(
            fft,
            &operator_gram,
            &stack.gram_spectrum(mode),
            settings.rho1,
            settings.rho2,
        )?;
        Ok(Self {
            operator,
            stack,
            mode,
            constraint,
            settings,
            quadratic,
        })
    }

    pub fn settings(&self) -> &AdmmSettings {
        &self.settings
    }

    pub fn quadratic(&self) -> &QuadraticSolver {
        &self.quadratic
    }

    fn apply_operator(&self, x: &[f64]) -> Vec<f64> {
        match self.operator {
            Operator::Identity => x.to_vec(),
            Operator::Circulant(c) => c.apply(x).expect("length checked"),
        }
    }

    fn apply_operator_transpose(&self, x: &[f64]) -> Vec<f64> {
        match self.operator {
            Operator::Identity => x.to_vec(),
            Operator::Circulant(c) => c.apply_transpose(x).expect("length checked"),
        }
    }

    /// `½‖A x - y‖² + τ‖D x‖₁`.
    pub fn objective(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_len("iterate", self.stack.len(), x.len())?;
        check_len("data", self.stack.len(), y.len())?;
        let ax = self.apply_operator(x);
        let mut dx = vec![0.0; self.stack.output_len(self.mode)];
        self.stack.apply_into(x, self.mode, &mut dx);
        Ok(self.objective_parts(&ax, y, &dx))
    }

    fn objective_parts(&self, ax: &[f64], y: &[f64], dx: &[f64]) -> f64 {
        let data: f64 = ax.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        let reg: f64 = dx.iter().map(|v| v.abs()).sum();
        0.5 * data + self.settings.reg_weight * reg
    }

    /// Runs to convergence or `max_iters` and returns the feasible iterate `z2`.
    pub fn solve(&self, y: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        let n = self.stack.len();
        check_len("data", n, y.len())?;
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("data entry {} is non-finite", i + 1)));
        }
        let s = &self.settings;
        let m = self.stack.output_len(self.mode);
        let floor = self.constraint.floor();
        let threshold = s.reg_weight / s.rho1;
        let primal_scale = s.tol_primal * ((m + n) as f64).sqrt();
        let dual_scale = s.tol_dual * (n as f64).sqrt();
        let circulant = match self.operator {
            Operator::Circulant(c) => Some(c),
            Operator::Identity => None,
        };

        let aty = self.apply_operator_transpose(y);
        let mut z1 = vec![0.0; m];
        let mut u1 = vec![0.0; m];
        let mut z2 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut dx = vec![0.0; m];
        let mut dt = vec![0.0; n];
        let mut scratch_m = vec![0.0; m];
        let mut rhs = vec![0.0; n];
        let mut z2_old = vec![0.0; n];
        let mut report = SolveReport::default();
        let fft = self.quadratic.fft();

        for iter in 1..=s.max_iters {
            // x-minimisation
            for k in 0..m {
                scratch_m[k] = z1[k] - u1[k];
            }
            self.stack.apply_transpose_into(&scratch_m, self.mode, &mut dt);
            for k in 0..n {
                rhs[k] = aty[k] + s.rho1 * dt[k] + s.rho2 * (z2[k] - u2[k]);
            }
            let mut spec = fft.forward(&rhs);
            self.quadratic.scale(&mut spec);
            let x = fft.inverse_real(spec);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { iteration: iter });
            }

            // z-minimisations and dual updates
            self.stack.apply_into(&x, self.mode, &mut dx);
            let mut primal_sq = 0.0;
            for k in 0..m {
                let old = z1[k];
                let v = dx[k] + u1[k];
                z1[k] = shrink_scalar(v, threshold);
                let r = dx[k] - z1[k];
                u1[k] += r;
                primal_sq += r * r;
                scratch_m[k] = s.rho1 * (z1[k] - old);
            }
            z2_old.copy_from_slice(&z2);
            for k in 0..n {
                z2[k] = (x[k] + u2[k]).max(floor);
                let r = x[k] - z2[k];
                u2[k] += r;
                primal_sq += r * r;
            }
            self.stack.apply_transpose_into(&scratch_m, self.mode, &mut dt);
            let dual_sq: f64 = (0..n)
                .map(|k| {
                    let v = dt[k] + s.rho2 * (z2[k] - z2_old[k]);
                    v * v
                })
                .sum();

            let az2 = match circulant {
                Some(c) => c.apply(&z2).expect("length checked"),
                None => z2.clone(),
            };
            self.stack.apply_into(&z2, self.mode, &mut scratch_m);
            let objective = self.objective_parts(&az2, y, &scratch_m);
            let primal = primal_sq.sqrt();
            let dual = dual_sq.sqrt();
            if !(primal.is_finite() && dual.is_finite() && objective.is_finite()) {
                return Err(Error::NonFinite { iteration: iter });
            }
            report.history.push(IterationRecord {
                primal_residual: primal,
                dual_residual: dual,
                objective,
            });
            report.iterations = iter;
            report.primal_residual = primal;
            report.dual_residual = dual;
            if primal <= primal_scale && dual <= dual_scale {
                report.converged = true;
                break;
            }
        }
        Ok((z2, report))
    }
}

/// One-shot solve; see [`Admm`].
pub fn solve_generic(
    operator: Operator<'_>,
    y: &[f64],
    stack: &DerivativeStack,
    mode: DerivativeMode,
    constraint: Constraint,
    settings: &AdmmSettings,
) -> Result<(Vec<f64>, SolveReport)> {
    Admm::new(operator, stack, mode, constraint, *settings)?.solve(y)
}
