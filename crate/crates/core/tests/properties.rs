mod common;

use common::{dense, dense_admm, objective};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spadscan::admm::{solve_generic, AdmmSettings, Constraint, DerivativeMode, DerivativeStack, Operator};
use spadscan::depth::{median_filter, tof_by_crosscorrelation, DeconvolvedCube};
use spadscan::forward::{expected_histograms, IlluminationOperator, PulseModel};
use spadscan::intensity::{recover_intensity_from_totals, IntensitySettings};
use spadscan::vst::{anscombe, InverseTable, ANSCOMBE_FLOOR};
use spadscan::{GridShape, IlluminationConfig, SceneModel, SystemParams};

fn shape_strategy() -> impl Strategy<Value = GridShape> {
    (1usize..7, 1usize..7).prop_map(|(r, c)| GridShape::new(r, c).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn median_never_leaves_row_range(row in proptest::collection::vec(-5.0f64..5.0, 1..40), half in 0usize..4) {
        let order = 2 * half + 1;
        let out = median_filter(&row, order);
        let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(out.iter().all(|&v| v >= lo && v <= hi));
        let flat = vec![row[0]; row.len()];
        prop_assert_eq!(median_filter(&flat, order), flat);
    }

    #[test]
    fn argmax_ignores_positive_scale(seed in 0u64..1000, scale in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = GridShape::new(2, 2).unwrap();
        let m = 32;
        let params = SystemParams { bins: m, ..SystemParams::reference() };
        let values = Array2::from_shape_fn((4, m), |_| rng.random_range(0.0..1.0));
        let pulse = PulseModel::gaussian(m, 3.0, 1.0).unwrap();
        let a = tof_by_crosscorrelation(&DeconvolvedCube::new(shape, values.clone()).unwrap(), &pulse, &params).unwrap();
        let b = tof_by_crosscorrelation(&DeconvolvedCube::new(shape, values * scale).unwrap(), &pulse, &params).unwrap();
        prop_assert_eq!(&a.tof_bins, &b.tof_bins);
        for (z, bin) in a.depth.iter().zip(&a.tof_bins) {
            prop_assert_eq!(z.unwrap(), params.bin_to_depth(bin.unwrap()));
        }
    }

    #[test]
    fn solution_never_worse_than_start(shape in shape_strategy(), seed in 0u64..1000, tau in 0.01f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.len();
        let stack = DerivativeStack::new(shape, 0.5).unwrap();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let op = IlluminationOperator::new(shape, IlluminationConfig::new(1, 0.01)).unwrap();
        for (operator, mode) in [
            (Operator::Identity, DerivativeMode::Full),
            (Operator::Circulant(op.circulant()), DerivativeMode::GradientOnly),
        ] {
            let settings = AdmmSettings::default().with_weight(tau);
            let (x, rep) = solve_generic(operator, &y, &stack, mode, Constraint::NonNegative, &settings).unwrap();
            prop_assert!(x.iter().all(|&v| v >= 0.0));
            let a = match operator {
                Operator::Identity => nalgebra::DMatrix::identity(n, n),
                Operator::Circulant(_) => dense(&op.to_dense()),
            };
            let d = dense(&stack.to_dense(mode));
            // the data-only start x = y is feasible here
            let start = objective(&a, &d, &y, tau, &y);
            prop_assert!(rep.final_objective() <= start + 1e-9 * (1.0 + start));
        }
    }

    #[test]
    fn stage_outputs_respect_constraints(seed in 0u64..1000, w in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = GridShape::new(5, 6).unwrap();
        let v: Vec<f64> = (0..30).map(|_| rng.random_range(0..20) as f64).collect();
        let op = IlluminationOperator::new(shape, IlluminationConfig::new(w, 0.001)).unwrap();
        let stack = DerivativeStack::new(shape, 0.5).unwrap();
        let table = InverseTable::for_counts(20.0).unwrap();
        let r = recover_intensity_from_totals(&v, &op, &stack, &table, &IntensitySettings::default()).unwrap();
        prop_assert!(r.b_opt.iter().all(|&b| b >= ANSCOMBE_FLOOR));
        prop_assert!(r.alpha_opt.iter().all(|&a| a >= 0.0));
    }

    #[test]
    fn totals_scale_linearly_with_reflectivity(seed in 0u64..1000, c in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = GridShape::new(4, 5).unwrap();
        let params = SystemParams { ambient_rate: 0.0, dark_count_rate: 0.0, bins: 32, ..SystemParams::reference() };
        let kappa: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..1.0)).collect();
        let depth: Vec<f64> = (0..20).map(|_| params.bin_to_depth(rng.random_range(0..32))).collect();
        let scene = SceneModel::new(shape, kappa.clone(), depth.clone()).unwrap();
        let brighter = SceneModel::new(shape, kappa.iter().map(|k| c * k).collect(), depth).unwrap();
        let op = IlluminationOperator::new(shape, IlluminationConfig::new(2, 0.0)).unwrap();
        let pulse = PulseModel::gaussian(32, 3.0, 1e-6).unwrap();
        let a = expected_histograms(&scene, &op, &pulse, &params).unwrap().totals();
        let b = expected_histograms(&brighter, &op, &pulse, &params).unwrap().totals();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((y - c * x).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }
}

#[test]
fn intensity_pipeline_matches_dense_reference() {
    let iters = 20_000;
    let settings = AdmmSettings { max_iters: iters, tol_primal: f64::MIN_POSITIVE, tol_dual: f64::MIN_POSITIVE, ..Default::default() };
    for (seed, (rows, cols, w)) in [(4usize, 5usize, 2usize), (6, 6, 3), (3, 4, 1)].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
        let shape = GridShape::new(rows, cols).unwrap();
        let n = shape.len();
        let op = IlluminationOperator::new(shape, IlluminationConfig::new(w, 0.002)).unwrap();
        let stack = DerivativeStack::new(shape, 0.5).unwrap();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0..60) as f64).collect();
        let table = InverseTable::for_counts(60.0).unwrap();
        let (mu, lambda) = (0.4, 0.8);
        let s = IntensitySettings { mu, lambda, denoise: settings, deconvolve: settings };
        let got = recover_intensity_from_totals(&v, &op, &stack, &table, &s).unwrap();

        let eye = nalgebra::DMatrix::identity(n, n);
        let h = dense(&op.to_dense());
        let d = dense(&stack.to_dense(DerivativeMode::Full));
        let b_opt = dense_admm(&eye, &d, &anscombe(&v).unwrap(), mu, ANSCOMBE_FLOOR, 1.0, 1.0, iters);
        let b_star = table.ml_inverse(&b_opt).unwrap();
        let alpha = dense_admm(&h, &d, &b_star, lambda, 0.0, 1.0, 1.0, iters);
        for k in 0..n {
            assert!((got.b_opt[k] - b_opt[k]).abs() < 1e-6, "b_opt {k}");
            assert!((got.alpha_opt[k] - alpha[k]).abs() < 1e-6, "alpha {k}: {} vs {}", got.alpha_opt[k], alpha[k]);
        }
    }
}
