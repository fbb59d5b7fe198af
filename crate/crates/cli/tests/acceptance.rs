//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --release -p spadscan-cli --test acceptance`.
//! Criterion numbers given as arguments select a subset.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use spadscan::admm::{Admm, AdmmSettings, Constraint, DerivativeMode, DerivativeStack, Operator};
use spadscan::calibrate::calibrate_epsilon;
use spadscan::depth::recover_depth_real;
use spadscan::forward::{DepthOperator, IlluminationOperator, PulseModel};
use spadscan::intensity::recover_intensity_from_totals;
use spadscan::metrics::photon_statistics;
use spadscan::profile::Profile;
use spadscan::scenario::{Scenario, SIGNAL_MASK_PHOTONS};
use spadscan::vst::{anscombe_scalar, InverseTable};
use spadscan::{GridShape, IlluminationConfig};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn within(elapsed: Duration, limit: f64) -> bool {
    elapsed.as_secs_f64() < limit
}

fn dense(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let (r, c) = (rows.len(), rows.first().map_or(0, |x| x.len()));
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}

fn rel_err(got: &[f64], want: &DVector<f64>) -> f64 {
    let diff: f64 = got.iter().zip(want.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    diff / want.norm().max(f64::MIN_POSITIVE)
}

/// Window blur built from its definition: pixel `(r, c)` of the kernel is
/// lit when both coordinates fall inside the window, and row `k` of the
/// matrix is the kernel rotated right by `k`.
fn window_blur(shape: GridShape, w: usize, eps: f64) -> DMatrix<f64> {
    let (rows, n) = (shape.rows(), shape.len());
    let h: Vec<f64> = (0..n)
        .map(|j| if j % rows < w && j / rows < w { 1.0 } else { eps })
        .collect();
    DMatrix::from_fn(n, n, |k, j| h[(j + n - k) % n])
}

/// First and second periodic differences along the four linear-index
/// offsets, stacked.
fn derivative_matrix(shape: GridShape, rho: f64, full: bool) -> DMatrix<f64> {
    let (rows, n) = (shape.rows(), shape.len());
    let offsets = [rows, 1, rows + 1, rows + n - 1].map(|s| s % n);
    let blocks = if full { 8 } else { 4 };
    let mut d = DMatrix::zeros(blocks * n, n);
    for (b, &s) in offsets.iter().enumerate() {
        for k in 0..n {
            d[(b * n + k, (k + s) % n)] += 1.0;
            d[(b * n + k, k)] -= 1.0;
            if full {
                let r = (4 + b) * n + k;
                d[(r, (k + s) % n)] += rho;
                d[(r, k)] -= 2.0 * rho;
                d[(r, (k + n - s) % n)] += rho;
            }
        }
    }
    d
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let rows = rng.random_range(1..=6);
        let cols = rng.random_range(1..=36 / rows);
        let shape = GridShape::new(rows, cols).unwrap();
        let n = shape.len();
        let m = rng.random_range(1..=16);
        let w = rng.random_range(1..=rows.min(cols));
        let eps = rng.random_range(0.0..0.05);
        let rho = rng.random_range(0.1..1.0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xv = DVector::from_column_slice(&x);

        let op = IlluminationOperator::new(shape, IlluminationConfig::new(w, eps)).unwrap();
        let h = window_blur(shape, w, eps);
        worst = worst.max(rel_err(&op.apply(&x).unwrap(), &(&h * &xv)));
        worst = worst.max(rel_err(&op.apply_transpose(&x).unwrap(), &(h.transpose() * &xv)));

        let stack = DerivativeStack::new(shape, rho).unwrap();
        for (mode, full) in [(DerivativeMode::Full, true), (DerivativeMode::GradientOnly, false)] {
            let d = derivative_matrix(shape, rho, full);
            worst = worst.max(rel_err(&stack.apply(&x, mode).unwrap(), &(&d * &xv)));
            let y: Vec<f64> = (0..d.nrows()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let yv = DVector::from_column_slice(&y);
            worst = worst.max(rel_err(&stack.apply_transpose(&y, mode).unwrap(), &(d.transpose() * yv)));

            let (rho1, rho2) = (rng.random_range(0.1..3.0), rng.random_range(0.1..3.0));
            let settings = AdmmSettings { rho1, rho2, ..Default::default() };
            let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let rv = DVector::from_column_slice(&rhs);
            let eye = DMatrix::<f64>::identity(n, n);
            for (operator, a) in [(Operator::Identity, eye.clone()), (Operator::Circulant(op.circulant()), h.clone())] {
                let admm = Admm::new(operator, &stack, mode, Constraint::NonNegative, settings).unwrap();
                let system = a.transpose() * &a + d.transpose() * &d * rho1 + &eye * rho2;
                let want = system.lu().solve(&rv).unwrap();
                worst = worst.max(rel_err(&admm.quadratic().solve(&rhs).unwrap(), &want));
            }
        }

        let bins: Vec<usize> = (0..n).map(|_| rng.random_range(1..=m)).collect();
        let waveform: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        let pulse = PulseModel::new(waveform.clone()).unwrap();
        let got = DepthOperator::new(shape, m, bins.clone()).unwrap().apply_pulse(&pulse, &weights).unwrap();
        let placement = DMatrix::from_fn(n, m, |i, t| if bins[i] == t + 1 { 1.0 } else { 0.0 });
        let delays = DMatrix::from_fn(m, m, |k, j| waveform[(j + m - k) % m]);
        let want = DMatrix::from_diagonal(&DVector::from_column_slice(&weights)) * placement * delays;
        let got: Vec<f64> = (0..n).flat_map(|i| (0..m).map(move |t| (i, t))).map(|(i, t)| got[[i, t]]).collect();
        let want: Vec<f64> = (0..n).flat_map(|i| (0..m).map(move |t| (i, t))).map(|(i, t)| want[(i, t)]).collect();
        worst = worst.max(rel_err(&got, &DVector::from_vec(want)));
    }
    let t = start.elapsed();
    verdict(
        worst <= 1e-8 && within(t, 10.0),
        format!("max relative error {worst:.2e}, {:.2} s", t.as_secs_f64()),
    )
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut parts = Vec::new();
    let mut ok = true;
    for lambda in [4.0, 10.0, 25.0, 100.0] {
        let poisson = Poisson::new(lambda).unwrap();
        let samples: Vec<f64> = (0..100_000).map(|_| anscombe_scalar(poisson.sample(&mut rng))).collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
        ok &= (0.85..=1.15).contains(&var);
        parts.push(format!("{lambda}:{var:.3}"));
    }
    let t = start.elapsed();
    verdict(ok && within(t, 5.0), format!("variance {}, {:.2} s", parts.join(" "), t.as_secs_f64()))
}

/// `E[2√(Y+3/8)]` for `Y ~ Poisson(λ)` by direct summation of the mass
/// function in log space.
fn expected_transform(lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 2.0 * 0.375f64.sqrt();
    }
    let top = (lambda + 40.0 * lambda.sqrt() + 60.0) as u64;
    let (mut log_fact, mut total, mut mass) = (0.0, 0.0, 0.0);
    for y in 0..=top {
        if y > 0 {
            log_fact += (y as f64).ln();
        }
        let p = (y as f64 * lambda.ln() - lambda - log_fact).exp();
        mass += p;
        total += p * 2.0 * (y as f64 + 0.375).sqrt();
    }
    total / mass
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let table = InverseTable::for_counts(2000.0).unwrap();
    let mut worst: f64 = 0.0;
    for &lambda in table.lambdas() {
        let back = table.ml_inverse(&[expected_transform(lambda)]).unwrap()[0];
        worst = worst.max((back - lambda).abs() / (1e-4 * (1.0 + lambda)));
    }
    let t = start.elapsed();
    verdict(
        worst <= 1.0,
        format!(
            "{} knots, worst error {worst:.3} of tolerance, {:.2} s",
            table.lambdas().len(),
            t.as_secs_f64()
        ),
    )
}

/// Dense ADMM from zero for a fixed number of iterations; returns `z2`.
fn dense_admm(a: &DMatrix<f64>, d: &DMatrix<f64>, y: &[f64], tau: f64, floor: f64, iters: usize) -> Vec<f64> {
    let n = a.ncols();
    let q = (a.transpose() * a + d.transpose() * d + DMatrix::identity(n, n))
        .try_inverse()
        .unwrap();
    let qaty = &q * a.transpose() * DVector::from_column_slice(y);
    let qdt = &q * d.transpose();
    let (mut z1, mut u1) = (DVector::zeros(d.nrows()), DVector::zeros(d.nrows()));
    let (mut z2, mut u2) = (DVector::zeros(n), DVector::zeros(n));
    for _ in 0..iters {
        let x = &qaty + &qdt * (&z1 - &u1) + &q * (&z2 - &u2);
        let dx = d * &x;
        z1 = (&dx + &u1).map(|t| t.signum() * (t.abs() - tau).max(0.0));
        u1 += &dx - &z1;
        z2 = (&x + &u2).map(|t| t.max(floor));
        u2 += &x - &z2;
    }
    z2.iter().copied().collect()
}

fn dense_objective(a: &DMatrix<f64>, d: &DMatrix<f64>, y: &[f64], tau: f64, x: &[f64]) -> f64 {
    let xv = DVector::from_column_slice(x);
    0.5 * (a * &xv - DVector::from_column_slice(y)).norm_squared() + tau * (d * &xv).abs().sum()
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst, mut worst_default): (f64, f64) = (0.0, 0.0);
    let mut feasible = true;
    let matched = AdmmSettings {
        max_iters: 100_000,
        tol_primal: 1e-13,
        tol_dual: 1e-13,
        ..Default::default()
    };
    for algorithm in 1..=3 {
        for _ in 0..20 {
            let (rows, cols) = (rng.random_range(2..=4), rng.random_range(2..=4));
            let shape = GridShape::new(rows, cols).unwrap();
            let n = shape.len();
            let stack = DerivativeStack::new(shape, 0.5).unwrap();
            let op = IlluminationOperator::new(
                shape,
                IlluminationConfig::new(rng.random_range(1..=rows.min(cols)), rng.random_range(0.0..0.05)),
            )
            .unwrap();
            let tau = rng.random_range(0.05..1.0);
            let (operator, a, mode, constraint, y): (_, _, _, _, Vec<f64>) = match algorithm {
                1 => (
                    Operator::Identity,
                    DMatrix::identity(n, n),
                    DerivativeMode::Full,
                    Constraint::Stabilized,
                    (0..n).map(|_| anscombe_scalar(rng.random_range(0..30) as f64)).collect(),
                ),
                2 => (
                    Operator::Circulant(op.circulant()),
                    dense(&op.to_dense()),
                    DerivativeMode::Full,
                    Constraint::NonNegative,
                    (0..n).map(|_| rng.random_range(0.0..20.0)).collect(),
                ),
                _ => (
                    Operator::Circulant(op.circulant()),
                    dense(&op.to_dense()),
                    DerivativeMode::GradientOnly,
                    Constraint::NonNegative,
                    (0..n).map(|_| rng.random_range(0.0..5.0)).collect(),
                ),
            };
            let d = dense(&stack.to_dense(mode));
            let reference = dense_admm(&a, &d, &y, tau, constraint.floor(), 100_000);
            let f_ref = dense_objective(&a, &d, &y, tau, &reference);
            for (settings, gap) in [(matched, &mut worst), (AdmmSettings::default(), &mut worst_default)] {
                let admm = Admm::new(operator, &stack, mode, constraint, settings.with_weight(tau)).unwrap();
                let (x, report) = admm.solve(&y).unwrap();
                feasible &= x.iter().all(|&v| v >= constraint.floor());
                *gap = gap.max((report.final_objective() - f_ref).abs());
            }
        }
    }
    let t = start.elapsed();
    verdict(
        worst <= 1e-6 && feasible,
        format!(
            "max objective gap {worst:.2e} ({worst_default:.2e} at default stopping), constraints {}, {:.2} s",
            if feasible { "exact" } else { "violated" },
            t.as_secs_f64()
        ),
    )
}

fn criterion_5() -> Verdict {
    let start = Instant::now();
    let profile = Profile::reference();
    let scenario = Scenario::new(&profile).unwrap();
    let shape = scenario.scene.shape();
    let dark = Scenario::with_scene(&profile, scenario.scene.scaled_reflectivity(0.0).unwrap()).unwrap();
    let noise = photon_statistics(&dark.capture(&IlluminationOperator::all_off(shape, 0.0).unwrap(), 5).unwrap());
    let eps = calibrate_epsilon(25.8, &scenario.scene, &scenario.pulse, &profile.system).unwrap();
    let leak = photon_statistics(&scenario.capture(&IlluminationOperator::all_off(shape, eps).unwrap(), 5).unwrap());
    let t = start.elapsed();
    verdict(
        noise.mean <= 1.0 && (20.0..=32.0).contains(&leak.mean) && within(t, 30.0),
        format!(
            "noise {:.2} ± {:.2}, diffraction {:.2} ± {:.2} at leakage {eps:.3e}, {:.1} s",
            noise.mean,
            noise.stddev,
            leak.mean,
            leak.stddev,
            t.as_secs_f64()
        ),
    )
}

fn raster_desk() -> Profile {
    let mut p = Profile::desk();
    p.illumination.window = 1;
    p.intensity.mu = 0.05;
    p.intensity.lambda = 1.0;
    p.depth.mu = 0.3;
    p
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let window = Scenario::new(&Profile::desk()).unwrap();
    let raster = Scenario::new(&raster_desk()).unwrap();
    let (op5, op1) = (window.operator(5).unwrap(), raster.operator(1).unwrap());
    let (mut gaps, mut wins) = (Vec::new(), 0);
    for seed in 1..=10 {
        let psnr = |s: &Scenario, op: &IlluminationOperator| {
            let cube = s.capture(op, seed).unwrap();
            let r = s.reconstruct_intensity(&cube, op).unwrap();
            s.intensity_psnr(op, &r.alpha_opt).unwrap()
        };
        let (p5, p1) = (psnr(&window, &op5), psnr(&raster, &op1));
        gaps.push(p5 - p1);
        wins += usize::from(p5 > p1);
    }
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let t = start.elapsed();
    verdict(
        mean_gap >= 3.0 && wins >= 9 && within(t, 300.0),
        format!(
            "mean gain {mean_gap:.2} dB (min {:.2}), w=5 ahead on {wins}/10 seeds, {:.0} s",
            gaps.iter().copied().fold(f64::INFINITY, f64::min),
            t.as_secs_f64()
        ),
    )
}

fn criterion_7() -> Verdict {
    let start = Instant::now();
    let window = Scenario::new(&Profile::desk()).unwrap();
    let raster = Scenario::new(&raster_desk()).unwrap();
    let (op5, op1) = (window.operator(5).unwrap(), raster.operator(1).unwrap());
    let mask = window.signal_mask(&op5, SIGNAL_MASK_PHOTONS).unwrap();
    let bin_depth = window.profile.system.bin_depth();
    let (mut rmse5, mut wins) = (Vec::new(), 0);
    let mut rmse1 = Vec::new();
    for seed in 1..=10 {
        let rmse = |s: &Scenario, op: &IlluminationOperator| {
            let cube = s.capture(op, seed).unwrap();
            let r = s.reconstruct_depth(&cube, op).unwrap();
            s.depth_rmse(&r, &mask).unwrap() / bin_depth
        };
        let (a, b) = (rmse(&window, &op5), rmse(&raster, &op1));
        wins += usize::from(a < b);
        rmse5.push(a);
        rmse1.push(b);
    }
    let mean5 = rmse5.iter().sum::<f64>() / 10.0;
    let mean1 = rmse1.iter().sum::<f64>() / 10.0;
    let t = start.elapsed();
    verdict(
        mean5 < 2.0 && rmse5.iter().all(|&r| r < 2.0) && wins >= 9 && within(t, 600.0),
        format!(
            "w=5 RMSE {mean5:.2} bin-depths (max {:.2}), w=1 {mean1:.2}, w=5 lower on {wins}/10 seeds, {:.0} s",
            rmse5.iter().copied().fold(0.0, f64::max),
            t.as_secs_f64()
        ),
    )
}

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let mut p = raster_desk();
    p.illumination.epsilon = 0.0;
    p.system.ambient_rate = 0.0;
    p.system.dark_count_rate = 0.0;
    p.pulse.raster_total_photons = 1e7;
    let s = Scenario::new(&p).unwrap();
    let op = s.operator(1).unwrap();
    let shape = s.scene.shape();
    let expected = s.expected(&op).unwrap();

    let depth = recover_depth_real(shape, expected.values(), &op, &s.stack, &s.pulse, &p.system, &p.depth).unwrap();
    let truth = s.scene.time_bins(&p.system).unwrap();
    let wrong = depth.tof_bins.iter().zip(&truth).filter(|(got, want)| **got != Some(**want)).count();

    let totals = expected.totals();
    let table = InverseTable::for_counts(totals.iter().copied().fold(0.0, f64::max)).unwrap();
    let r = recover_intensity_from_totals(&totals, &op, &s.stack, &table, &p.intensity).unwrap();
    let kappa = s.scene.reflectivity();
    let scale = r.alpha_opt.iter().zip(kappa).map(|(a, k)| a * k).sum::<f64>()
        / kappa.iter().map(|k| k * k).sum::<f64>();
    let worst = r
        .alpha_opt
        .iter()
        .zip(kappa)
        .map(|(a, k)| (a - scale * k).abs() / (scale * k))
        .fold(0.0, f64::max);
    let t = start.elapsed();
    verdict(
        wrong == 0 && worst <= 1e-4,
        format!(
            "{wrong} of {} bins wrong, reflectivity error {worst:.2e} after scaling, {:.1} s",
            truth.len(),
            t.as_secs_f64()
        ),
    )
}

const SMALL_CONFIG: &str = r#"base = "desk"
rows = 12
cols = 16
[system]
bins = 64
bin_width = 80e-12
[pulse]
fwhm = 240e-12
"#;

fn spadscan(args: &[&str], config: Option<&Path>) -> Result<(), String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spadscan"));
    cmd.arg("--quiet").env_remove("SPADSCAN_CONFIG");
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    let out = cmd.args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism(root: &Path) -> Result<usize, String> {
    let config = root.join("small.toml");
    std::fs::write(&config, SMALL_CONFIG).map_err(|e| e.to_string())?;
    let arg = |p: &PathBuf| p.to_string_lossy().into_owned();
    let sim = root.join("input");
    spadscan(&["simulate", "--seed", "4", "--csv", "--out", &arg(&sim)], Some(&config))?;
    let (cube, scene) = (arg(&sim.join("cube.bin")), arg(&sim.join("scene.txt")));
    let jobs: Vec<(&str, Vec<String>)> = vec![
        ("simulate", vec!["simulate".into(), "--seed".into(), "4".into(), "--csv".into()]),
        ("intensity", vec!["reconstruct-intensity".into(), "--cube".into(), cube.clone(), "--truth".into(), scene.clone()]),
        ("depth", vec!["reconstruct-depth".into(), "--cube".into(), cube.clone(), "--truth".into(), scene.clone()]),
        ("sweep", vec!["sweep".into(), "--pipeline".into(), "depth".into(), "--param".into(), "mu".into(), "--values".into(), "1,5".into()]),
        ("calibrate", vec!["calibrate".into(), "--seed".into(), "2".into()]),
        ("metrics", vec!["metrics".into(), "--cube".into(), cube.clone(), "--truth".into(), scene.clone()]),
    ];
    let mut compared = 0;
    for (name, args) in jobs {
        let mut runs = Vec::new();
        for threads in ["1", "2", "4"] {
            let out = root.join(format!("{name}-{threads}"));
            let mut full: Vec<String> = vec!["--threads".into(), threads.into()];
            full.extend(args.iter().cloned());
            full.extend(["--out".into(), arg(&out)]);
            let refs: Vec<&str> = full.iter().map(String::as_str).collect();
            spadscan(&refs, Some(&config))?;
            runs.push(out);
        }
        let replayed = root.join(format!("{name}-replay"));
        spadscan(&["replay", "--manifest", &arg(&runs[0].join("manifest.json")), "--out", &arg(&replayed)], None)?;
        runs.push(replayed);
        let first = dir_files(&runs[0]);
        for other in &runs[1..] {
            if dir_files(other) != first {
                return Err(format!("{name}: {} differs from {}", other.display(), runs[0].display()));
            }
        }
        compared += first.len();
    }
    Ok(compared)
}

fn criterion_9() -> Verdict {
    let start = Instant::now();
    let root = tempfile::tempdir().unwrap();
    match determinism(root.path()) {
        Ok(files) => verdict(
            true,
            format!(
                "{files} output files identical across 1, 2, 4 threads and replay, {:.1} s",
                start.elapsed().as_secs_f64()
            ),
        ),
        Err(e) => verdict(false, e),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("operator oracles", criterion_1),
        ("variance stabilization", criterion_2),
        ("inverse transform round trip", criterion_3),
        ("solver optimality", criterion_4),
        ("photon budget calibration", criterion_5),
        ("intensity, window vs raster", criterion_6),
        ("depth, window vs raster", criterion_7),
        ("noiseless exactness", criterion_8),
        ("determinism", criterion_9),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let number = i + 1;
        if !selected.is_empty() && !selected.contains(&number) {
            continue;
        }
        let v = check();
        failed += usize::from(!v.passed);
        println!(
            "criterion {number}: {} {name}: {}",
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
