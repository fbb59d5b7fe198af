#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

pub fn dense(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let (r, c) = (rows.len(), rows.first().map_or(0, |x| x.len()));
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}

/// Plain dense ADMM for `min ½‖A x - y‖² + τ‖D x‖₁` s.t. `x ≥ floor`,
/// run for a fixed number of iterations from zero.
pub fn dense_admm(
    a: &DMatrix<f64>,
    d: &DMatrix<f64>,
    y: &[f64],
    tau: f64,
    floor: f64,
    rho1: f64,
    rho2: f64,
    iters: usize,
) -> Vec<f64> {
    let n = a.ncols();
    let m = d.nrows();
    let q = (a.transpose() * a + d.transpose() * d * rho1 + DMatrix::identity(n, n) * rho2)
        .try_inverse()
        .expect("invertible");
    let aty = a.transpose() * DVector::from_column_slice(y);
    let qdt = &q * d.transpose() * rho1;
    let qaty = &q * aty;
    let q2 = &q * rho2;
    let mut z1 = DVector::zeros(m);
    let mut u1 = DVector::zeros(m);
    let mut z2 = DVector::zeros(n);
    let mut u2 = DVector::zeros(n);
    let thr = tau / rho1;
    for _ in 0..iters {
        let x = &qaty + &qdt * (&z1 - &u1) + &q2 * (&z2 - &u2);
        let dx = d * &x;
        let v = &dx + &u1;
        z1 = v.map(|t| t.signum() * (t.abs() - thr).max(0.0));
        u1 += &dx - &z1;
        z2 = (&x + &u2).map(|t| t.max(floor));
        u2 += &x - &z2;
    }
    z2.iter().copied().collect()
}

pub fn objective(a: &DMatrix<f64>, d: &DMatrix<f64>, y: &[f64], tau: f64, x: &[f64]) -> f64 {
    let xv = DVector::from_column_slice(x);
    let r = a * &xv - DVector::from_column_slice(y);
    0.5 * r.norm_squared() + tau * (d * &xv).abs().sum()
}
