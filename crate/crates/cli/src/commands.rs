use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde_json::json;
use spadscan::calibrate::{calibrate_epsilon, noise_photons_per_pixel};
use spadscan::depth::recover_depth;
use spadscan::export::{
    depth_range, save_point_cloud, save_vectors_csv, write_depth_png, write_gamma_preview,
    write_intensity_png, PREVIEW_GAMMA,
};
use spadscan::forward::{HistogramCube, IlluminationOperator};
use spadscan::intensity::recover_intensity;
use spadscan::metrics::{depth_rmse, photon_statistics, psnr, MetricTable};
use spadscan::profile::Profile;
use spadscan::scenario::{Scenario, SIGNAL_MASK_PHOTONS};
use spadscan::sweep::{log_range, run_sweep, SweepResult};
use spadscan::SceneModel;

use crate::args::{
    CalibrateArgs, Command, DepthArgs, IntensityArgs, MetricsArgs, Pipeline, ReplayArgs,
    SimulateArgs, SweepArgs, SweepParam,
};
use crate::config::apply_scan;
use crate::failure::{Failure, Outcome};
use crate::report::{Log, Manifest};

fn absolute(path: &mut PathBuf) -> Outcome {
    *path = std::fs::canonicalize(&*path).map_err(|e| Failure::io(path, e))?;
    Ok(())
}

fn absolute_opt(path: &mut Option<PathBuf>) -> Outcome {
    match path {
        Some(p) => absolute(p),
        None => Ok(()),
    }
}

fn create(path: &Path) -> Outcome<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::io(path, e))
}

fn resolve_inputs(command: &mut Command) -> Outcome {
    match command {
        Command::Simulate(a) => absolute_opt(&mut a.scene),
        Command::ReconstructIntensity(a) => {
            absolute(&mut a.cube)?;
            absolute_opt(&mut a.truth)
        }
        Command::ReconstructDepth(a) => {
            absolute(&mut a.cube)?;
            absolute_opt(&mut a.truth)
        }
        Command::Sweep(a) => absolute_opt(&mut a.scene),
        Command::Calibrate(a) => absolute_opt(&mut a.scene),
        Command::Metrics(a) => {
            absolute_opt(&mut a.cube)?;
            absolute_opt(&mut a.truth)?;
            absolute_opt(&mut a.intensity)?;
            absolute_opt(&mut a.depth)
        }
        Command::Replay(_) => Ok(()),
    }
}

fn apply_overrides(profile: &mut Profile, command: &Command) {
    match command {
        Command::Simulate(a) => apply_scan(profile, &a.scan),
        Command::ReconstructIntensity(a) => {
            apply_scan(profile, &a.scan);
            if let Some(mu) = a.mu {
                profile.intensity.mu = mu;
            }
            if let Some(l) = a.lambda {
                profile.intensity.lambda = l;
            }
            if let Some(n) = a.max_iters {
                profile.intensity.denoise.max_iters = n;
                profile.intensity.deconvolve.max_iters = n;
            }
        }
        Command::ReconstructDepth(a) => {
            apply_scan(profile, &a.scan);
            if let Some(mu) = a.mu {
                profile.depth.mu = mu;
            }
            if let Some(n) = a.median_order {
                profile.depth.median_order = n;
            }
            if let Some(n) = a.max_iters {
                profile.depth.admm.max_iters = n;
            }
        }
        Command::Sweep(a) => {
            apply_scan(profile, &a.scan);
            if let Some(n) = a.max_iters {
                profile.intensity.denoise.max_iters = n;
                profile.intensity.deconvolve.max_iters = n;
                profile.depth.admm.max_iters = n;
            }
        }
        Command::Calibrate(a) => apply_scan(profile, &a.scan),
        Command::Metrics(a) => apply_scan(profile, &a.scan),
        Command::Replay(_) => {}
    }
}

fn out_dir(command: &Command) -> Option<&Path> {
    match command {
        Command::Simulate(a) => Some(&a.out),
        Command::ReconstructIntensity(a) => Some(&a.out),
        Command::ReconstructDepth(a) => Some(&a.out),
        Command::Sweep(a) => Some(&a.out),
        Command::Calibrate(a) => Some(&a.out),
        Command::Metrics(a) => a.out.as_deref(),
        Command::Replay(a) => Some(&a.out),
    }
}

fn set_out(command: &mut Command, out: PathBuf) {
    match command {
        Command::Simulate(a) => a.out = out,
        Command::ReconstructIntensity(a) => a.out = out,
        Command::ReconstructDepth(a) => a.out = out,
        Command::Sweep(a) => a.out = out,
        Command::Calibrate(a) => a.out = out,
        Command::Metrics(a) => a.out = Some(out),
        Command::Replay(a) => a.out = out,
    }
}

/// Applies flag overrides, records the manifest and runs `command`.
pub fn execute(mut profile: Profile, mut command: Command, quiet: bool) -> Outcome {
    resolve_inputs(&mut command)?;
    apply_overrides(&mut profile, &command);
    profile.validate()?;
    let mut log = match out_dir(&command) {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
            Manifest::new(&profile, &command).save(dir)?;
            Log::in_dir(dir, quiet)?
        }
        None => Log::stderr_only(quiet),
    };
    match &command {
        Command::Simulate(a) => simulate(&profile, a, &mut log)?,
        Command::ReconstructIntensity(a) => reconstruct_intensity(&profile, a, &mut log)?,
        Command::ReconstructDepth(a) => reconstruct_depth(&profile, a, &mut log)?,
        Command::Sweep(a) => sweep(&profile, a, &mut log)?,
        Command::Calibrate(a) => calibrate(&profile, a, &mut log)?,
        Command::Metrics(a) => metrics(&profile, a, &mut log)?,
        Command::Replay(_) => return Err(Failure::validation("a manifest cannot replay another replay")),
    }
    log.finish()
}

pub fn replay(args: &ReplayArgs, quiet: bool) -> Outcome {
    let manifest = Manifest::load(&args.manifest)?;
    if manifest.version != env!("CARGO_PKG_VERSION") && !quiet {
        eprintln!(
            "warning: manifest written by version {}, replaying with {}",
            manifest.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    let mut command = manifest.command;
    set_out(&mut command, args.out.clone());
    execute(manifest.profile, command, quiet)
}

fn load_scenario(profile: &Profile, scene: Option<&Path>) -> Outcome<Scenario> {
    Ok(match scene {
        Some(path) => Scenario::with_scene(profile, SceneModel::load(path)?)?,
        None => Scenario::new(profile)?,
    })
}

fn load_cube(profile: &Profile, path: &Path) -> Outcome<HistogramCube> {
    let cube = HistogramCube::load(path)?;
    let shape = cube.shape();
    if shape.rows() != profile.rows || shape.cols() != profile.cols || cube.bins() != profile.system.bins {
        return Err(Failure::validation(format!(
            "{}: cube is {}x{} with {} bins but the profile expects {}x{} with {}",
            path.display(),
            shape.rows(),
            shape.cols(),
            cube.bins(),
            profile.rows,
            profile.cols,
            profile.system.bins
        )));
    }
    Ok(cube)
}

fn emit_metrics(table: &MetricTable, out: Option<&Path>) -> Outcome {
    print!("{}", table.to_aligned());
    if let Some(dir) = out {
        table.write_csv(create(&dir.join("metrics.csv"))?)?;
    }
    Ok(())
}

fn simulate(profile: &Profile, a: &SimulateArgs, log: &mut Log) -> Outcome {
    let scenario = load_scenario(profile, a.scene.as_deref())?;
    let op = scenario.operator(profile.illumination.window)?;
    let cube = scenario.capture(&op, a.seed)?;
    cube.save(&a.out.join("cube.bin"))?;
    scenario.scene.save(&a.out.join("scene.txt"))?;
    if a.csv {
        cube.write_csv(create(&a.out.join("cube.csv"))?)?;
    }
    let stats = photon_statistics(&cube);
    log.event(
        "simulate",
        json!({
            "rows": profile.rows,
            "cols": profile.cols,
            "bins": cube.bins(),
            "window": profile.illumination.window,
            "seed": a.seed,
            "pulse_photons": scenario.pulse.total(),
            "mean_photons": stats.mean,
            "stddev_photons": stats.stddev,
        }),
    )
}

fn reconstruct_intensity(profile: &Profile, a: &IntensityArgs, log: &mut Log) -> Outcome {
    let cube = load_cube(profile, &a.cube)?;
    let shape = cube.shape();
    let op = IlluminationOperator::new(shape, profile.illumination)?;
    let stack = profile.derivative_stack()?;
    let table = Scenario::inverse_table(&cube)?;
    let r = recover_intensity(&cube, &op, &stack, &table, &profile.intensity)?;
    write_intensity_png(&a.out.join("alpha.png"), shape, &r.alpha_opt)?;
    write_gamma_preview(&a.out.join("alpha_preview.png"), shape, &r.alpha_opt, PREVIEW_GAMMA)?;
    save_vectors_csv(
        &a.out.join("intensity.csv"),
        &[
            ("observation", &r.observation),
            ("stabilized", &r.stabilized),
            ("b_opt", &r.b_opt),
            ("b_star", &r.b_star),
            ("alpha_opt", &r.alpha_opt),
        ],
    )?;
    r.denoise_report.write_csv(create(&a.out.join("denoise_convergence.csv"))?)?;
    r.deconvolve_report.write_csv(create(&a.out.join("deconvolve_convergence.csv"))?)?;
    log.event(
        "intensity",
        json!({
            "window": profile.illumination.window,
            "mu": profile.intensity.mu,
            "lambda": profile.intensity.lambda,
            "denoise_iterations": r.denoise_report.iterations,
            "denoise_converged": r.denoise_report.converged,
            "deconvolve_iterations": r.deconvolve_report.iterations,
            "deconvolve_converged": r.deconvolve_report.converged,
        }),
    )?;
    if let Some(truth) = &a.truth {
        let scenario = Scenario::with_scene(profile, SceneModel::load(truth)?)?;
        let value = scenario.intensity_psnr(&op, &r.alpha_opt)?;
        let mut table = MetricTable::new();
        table.push("psnr_db", value);
        log.event("metrics", json!({ "psnr_db": value }))?;
        emit_metrics(&table, Some(&a.out))?;
    }
    Ok(())
}

fn reconstruct_depth(profile: &Profile, a: &DepthArgs, log: &mut Log) -> Outcome {
    let cube = load_cube(profile, &a.cube)?;
    let shape = cube.shape();
    let op = IlluminationOperator::new(shape, profile.illumination)?;
    let stack = profile.derivative_stack()?;
    let pulse = profile.pulse_shape()?;
    let r = recover_depth(&cube, &op, &stack, &pulse, &profile.system, &profile.depth)?;
    let truth = a.truth.as_deref().map(SceneModel::load).transpose()?;
    let range = match &truth {
        Some(scene) => scene.depth().iter().fold(None, |acc: Option<(f64, f64)>, &z| match acc {
            None => Some((z, z)),
            Some((lo, hi)) => Some((lo.min(z), hi.max(z))),
        }),
        None => depth_range(&r.depth),
    };
    let (z_min, z_max) = range.unwrap_or((0.0, 1.0));
    r.write_csv(create(&a.out.join("depth.csv"))?)?;
    write_depth_png(&a.out.join("depth.png"), shape, &r.depth, z_min, z_max)?;
    let pitch = profile.scene.field_height / profile.rows as f64;
    save_point_cloud(&a.out.join("points.xyz"), shape, &r.depth, pitch)?;
    let mut slices = csv::Writer::from_writer(create(&a.out.join("slices.csv"))?);
    let csv_err = |e: csv::Error| Failure::from(spadscan::Error::from(e));
    slices
        .write_record(["slice", "iterations", "converged", "primal_residual", "dual_residual"])
        .map_err(csv_err)?;
    for (j, rep) in r.slice_reports.iter().enumerate() {
        slices
            .write_record([
                (j + 1).to_string(),
                rep.iterations.to_string(),
                rep.converged.to_string(),
                rep.primal_residual.to_string(),
                rep.dual_residual.to_string(),
            ])
            .map_err(csv_err)?;
    }
    slices.flush().map_err(|e| Failure::io(&a.out.join("slices.csv"), e))?;
    log.event(
        "depth",
        json!({
            "window": profile.illumination.window,
            "mu": profile.depth.mu,
            "median_order": profile.depth.median_order,
            "valid_pixels": r.valid_count(),
            "slice_iterations": r.slice_reports.iter().map(|s| s.iterations).sum::<usize>(),
            "unconverged_slices": r.slice_reports.iter().filter(|s| !s.converged).count(),
        }),
    )?;
    if let Some(scene) = truth {
        let scenario = Scenario::with_scene(profile, scene)?;
        let mask = scenario.signal_mask(&op, SIGNAL_MASK_PHOTONS)?;
        let rmse = scenario.depth_rmse(&r, &mask)?;
        let mut table = MetricTable::new();
        table.push("depth_rmse_m", rmse);
        table.push("depth_rmse_bins", rmse / profile.system.bin_depth());
        table.push("valid_pixels", r.valid_count() as f64);
        table.push("scored_pixels", mask.iter().filter(|&&m| m).count() as f64);
        log.event("metrics", json!({ "depth_rmse_m": rmse }))?;
        emit_metrics(&table, Some(&a.out))?;
    }
    Ok(())
}

fn sweep_values(a: &SweepArgs) -> Outcome<Vec<f64>> {
    let values = match &a.log_range {
        Some(spec) => {
            let parts: Vec<&str> = spec.split(':').collect();
            let parsed = match parts.as_slice() {
                [lo, hi, n] => lo
                    .parse::<f64>()
                    .ok()
                    .zip(hi.parse::<f64>().ok())
                    .zip(n.parse::<usize>().ok()),
                _ => None,
            };
            let ((lo, hi), n) = parsed
                .ok_or_else(|| Failure::validation(format!("log range `{spec}` is not lo:hi:points")))?;
            log_range(lo, hi, n)?
        }
        None => a.values.clone(),
    };
    if values.is_empty() {
        return Err(Failure::validation("empty sweep range"));
    }
    let integral = matches!(a.param, SweepParam::W | SweepParam::N);
    for &v in &values {
        if !v.is_finite() || v <= 0.0 || (integral && v.fract() != 0.0) {
            return Err(Failure::validation(format!("sweep value {v} is not valid for {:?}", a.param)));
        }
    }
    match (a.param, a.pipeline) {
        (SweepParam::Lambda, Pipeline::Depth) => Err(Failure::validation("lambda only applies to the intensity pipeline")),
        (SweepParam::N, Pipeline::Intensity) => Err(Failure::validation("median order only applies to the depth pipeline")),
        _ => Ok(values),
    }
}

fn sweep(profile: &Profile, a: &SweepArgs, log: &mut Log) -> Outcome {
    let values = sweep_values(a)?;
    let scenario = load_scenario(profile, a.scene.as_deref())?;
    let base_op = scenario.operator(profile.illumination.window)?;
    let base_cube = match a.param {
        SweepParam::W => None,
        _ => Some(scenario.capture(&base_op, a.seed)?),
    };
    let mask = scenario.signal_mask(&base_op, SIGNAL_MASK_PHOTONS)?;
    let eval = |v: f64| -> spadscan::Result<f64> {
        let mut s = scenario.clone();
        match (a.param, a.pipeline) {
            (SweepParam::Mu, Pipeline::Intensity) => s.profile.intensity.mu = v,
            (SweepParam::Mu, Pipeline::Depth) => s.profile.depth.mu = v,
            (SweepParam::Lambda, _) => s.profile.intensity.lambda = v,
            (SweepParam::N, _) => s.profile.depth.median_order = v as usize,
            (SweepParam::W, _) => s.profile.illumination.window = v as usize,
        }
        s.profile.validate()?;
        let own;
        let (op, cube) = match &base_cube {
            Some(cube) => (&base_op, cube),
            None => {
                let op = s.operator(v as usize)?;
                let cube = s.capture(&op, a.seed)?;
                own = (op, cube);
                (&own.0, &own.1)
            }
        };
        match a.pipeline {
            Pipeline::Intensity => {
                let r = s.reconstruct_intensity(cube, op)?;
                s.intensity_psnr(op, &r.alpha_opt)
            }
            Pipeline::Depth => {
                let r = s.reconstruct_depth(cube, op)?;
                s.depth_rmse(&r, &mask)
            }
        }
    };
    let name = match a.param {
        SweepParam::Mu => "mu",
        SweepParam::Lambda => "lambda",
        SweepParam::W => "w",
        SweepParam::N => "n",
    };
    let metric = match a.pipeline {
        Pipeline::Intensity => "psnr_db",
        Pipeline::Depth => "depth_rmse_m",
    };
    let result: SweepResult = run_sweep(name, metric, &values, eval)?;
    result.write_csv(create(&a.out.join("sweep.csv"))?)?;
    for p in &result.points {
        log.event("sweep_point", json!({ name: p.value, metric: p.metric }))?;
    }
    let best = match a.pipeline {
        Pipeline::Intensity => result.argmax(),
        Pipeline::Depth => result.argmin(),
    };
    let mut table = MetricTable::new();
    for p in &result.points {
        table.push(format!("{name}={}", p.value), p.metric);
    }
    print!("{}", table.to_aligned());
    if let Some(b) = best {
        println!("best {name}={} ({metric} {})", b.value, b.metric);
        log.event("sweep_best", json!({ name: b.value, metric: b.metric }))?;
    }
    Ok(())
}

fn calibrate(profile: &Profile, a: &CalibrateArgs, log: &mut Log) -> Outcome {
    let scenario = load_scenario(profile, a.scene.as_deref())?;
    let shape = scenario.scene.shape();
    let mut table = MetricTable::new();

    let dark = Scenario::with_scene(profile, scenario.scene.scaled_reflectivity(0.0)?)?;
    let noise = photon_statistics(&dark.capture(&IlluminationOperator::all_off(shape, 0.0)?, a.seed)?);
    table.push("noise_expected", noise_photons_per_pixel(&profile.system));
    table.push("noise_mean", noise.mean);
    table.push("noise_stddev", noise.stddev);

    let eps = calibrate_epsilon(a.target_leakage, &scenario.scene, &scenario.pulse, &profile.system)?;
    let leak = photon_statistics(&scenario.capture(&IlluminationOperator::all_off(shape, eps)?, a.seed)?);
    table.push("leakage_epsilon_calibrated", eps);
    table.push("leakage_mean_calibrated", leak.mean);
    table.push("leakage_stddev_calibrated", leak.stddev);

    let eps0 = profile.illumination.epsilon;
    let leak0 = photon_statistics(&scenario.capture(&IlluminationOperator::all_off(shape, eps0)?, a.seed)?);
    table.push("leakage_epsilon_profile", eps0);
    table.push("leakage_mean_profile", leak0.mean);
    table.push("leakage_stddev_profile", leak0.stddev);

    let raster = photon_statistics(&scenario.capture(&scenario.operator(1)?, a.seed)?);
    table.push("raster_mean", raster.mean);
    table.push("raster_stddev", raster.stddev);
    let w = profile.illumination.window;
    let window = photon_statistics(&scenario.capture(&scenario.operator(w)?, a.seed)?);
    table.push("window_mean", window.mean);
    table.push("window_stddev", window.stddev);
    table.push("pulse_photons", scenario.pulse.total());

    log.event(
        "calibrate",
        json!({
            "noise_mean": noise.mean,
            "leakage_epsilon": eps,
            "leakage_mean": leak.mean,
            "raster_mean": raster.mean,
            "window_mean": window.mean,
        }),
    )?;
    emit_metrics(&table, Some(&a.out))
}

fn read_column(path: &Path, column: &str) -> Outcome<Vec<Option<f64>>> {
    let bad = |detail: String| Failure::validation(format!("{}: {detail}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| Failure::io(path, e))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let idx = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| bad(format!("no `{column}` column")))?;
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let field = record.get(idx).unwrap_or("");
        out.push(if field.is_empty() {
            None
        } else {
            Some(field.parse().map_err(|_| bad(format!("row {}: bad number `{field}`", line + 1)))?)
        });
    }
    Ok(out)
}

fn metrics(profile: &Profile, a: &MetricsArgs, log: &mut Log) -> Outcome {
    let mut table = MetricTable::new();
    if let Some(path) = &a.cube {
        let stats = photon_statistics(&HistogramCube::load(path)?);
        table.push("photons_mean", stats.mean);
        table.push("photons_stddev", stats.stddev);
    }
    if let Some(truth) = &a.truth {
        let scenario = Scenario::with_scene(profile, SceneModel::load(truth)?)?;
        let op = scenario.operator(profile.illumination.window)?;
        if let Some(path) = &a.intensity {
            let alpha = read_column(path, "alpha_opt")?
                .into_iter()
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| Failure::validation(format!("{}: empty alpha_opt value", path.display())))?;
            let target = scenario.intensity_target(&op);
            let peak = target.iter().copied().fold(0.0, f64::max);
            table.push("psnr_db", psnr(&alpha, &target, peak)?);
        }
        if let Some(path) = &a.depth {
            let depth = read_column(path, "depth_m")?;
            let mask = scenario.signal_mask(&op, SIGNAL_MASK_PHOTONS)?;
            let rmse = depth_rmse(&depth, scenario.scene.depth(), &mask)?;
            table.push("depth_rmse_m", rmse);
            table.push("depth_rmse_bins", rmse / profile.system.bin_depth());
        }
    }
    if table.rows().is_empty() {
        return Err(Failure::validation("nothing to score: pass --cube, or --truth with --intensity/--depth"));
    }
    let fields: serde_json::Map<String, serde_json::Value> =
        table.rows().iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    log.event("metrics", serde_json::Value::Object(fields))?;
    emit_metrics(&table, a.out.as_deref())
}
