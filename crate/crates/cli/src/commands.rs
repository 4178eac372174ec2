use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use neural_pde::experiment::{generate as solve, initial_model, prepare_samples, run_observed};
use neural_pde::nn::{load_model, param_count, save_model, ModelParams};
use neural_pde::pipeline::{read_series, write_series, Normalizer, SampleSet};
use neural_pde::training::{evaluate_report, predict as predict_window, rollout as roll, EvalReport};
use neural_pde::{Error, FieldSeries, GridSpec, Matrix};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Settings, Source};
use crate::image::{range, write_pgm, write_ppm};
use crate::report::{
    grid_json, load_normalizer, normalizer_json, normalizer_path, provenance, sha256_file,
    write_json,
};
use crate::CliError;

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(format!("cannot create {}", dir.display())))
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => Ok(()),
    }
}

fn load_series(path: &Path) -> Result<FieldSeries, CliError> {
    if !path.exists() {
        return Err(Error::Data(format!("series file {} does not exist", path.display())).into());
    }
    Ok(read_series(path)?)
}

fn model_path(cfg: &ExperimentConfig, model: Option<PathBuf>) -> PathBuf {
    model.unwrap_or_else(|| cfg.output_dir.join("model.npm"))
}

fn load_trained(path: &Path, num_vars: usize) -> Result<(ModelParams, Normalizer), CliError> {
    if !path.exists() {
        return Err(Error::Data(format!("model file {} does not exist", path.display())).into());
    }
    let model = load_model(path)?;
    let norm = load_normalizer(path, num_vars)?;
    Ok((model, norm))
}

pub fn generate(settings: &Settings, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let bench = match cfg.source {
        Source::Builtin(b) => b,
        Source::External => {
            return Err(CliError::Config("generate needs a built-in benchmark".into()));
        }
    };
    let grid = cfg.grid.expect("built-in benchmarks carry a grid");
    let series = solve(bench, &grid, cfg.solver)?;
    let path = cfg.data_path()?;
    ensure_parent(&path)?;
    write_series(&series, &path)?;
    let checksum = sha256_file(&path)?;

    let mut m = provenance(settings, cfg.pipeline.seed, cfg.seed_source);
    m.insert("artifact".into(), json!(file_name(&path)));
    m.insert("sha256".into(), json!(checksum));
    m.insert("benchmark".into(), json!(bench.as_str()));
    m.insert("variables".into(), json!(series.variables));
    m.insert("rows".into(), json!(series.data.rows()));
    m.insert("columns".into(), json!(series.data.cols()));
    m.insert("grid".into(), grid_json(&grid));
    m.insert("burgers_form".into(), json!(format!("{:?}", cfg.solver.burgers_form)));
    m.insert("time_origin".into(), json!(format!("{:?}", cfg.solver.time_origin)));
    let manifest = path.with_extension("manifest.json");
    write_json(&manifest, &Value::Object(m))?;

    println!(
        "wrote {} ({} x {}), sha256 {checksum}",
        path.display(),
        series.data.rows(),
        series.data.cols()
    );
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn split_counts(set: &SampleSet) -> Value {
    json!({"train": set.train().len(), "test": set.test().len(), "total": set.len()})
}

pub fn train(settings: &Settings, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let data_path = cfg.data_path()?;
    let series = load_series(&data_path)?;
    let samples = prepare_samples(&series, &cfg.pipeline)?;
    let model = initial_model(&cfg.pipeline, cfg.hidden, cfg.peephole, cfg.train.seed)?;
    let count = param_count(&model.hyper);
    eprintln!(
        "training on {}: {} windows ({} train, {} test), {count} parameters",
        data_path.display(),
        samples.len(),
        samples.train().len(),
        samples.test().len()
    );
    let started = Instant::now();
    let report = run_observed(model, samples, &cfg.train, |r| {
        let val = r.val_mse.map_or_else(|| "-".to_string(), |v| format!("{v:.4e}"));
        eprintln!(
            "epoch {:>3}  train {:.4e}  val {val}  {:.1}s",
            r.epoch, r.train_mse, r.seconds
        );
    })?;
    let wall = started.elapsed().as_secs_f64();

    ensure_dir(&cfg.output_dir)?;
    let model_file = cfg.output_dir.join("model.npm");
    save_model(&report.outcome.params, &model_file)?;
    write_json(
        &normalizer_path(&model_file),
        &normalizer_json(&report.outcome.normalizer),
    )?;
    let history_file = cfg.output_dir.join("history.csv");
    report.outcome.history.write_csv(&history_file, cfg.timing)?;

    let mut m = provenance(settings, cfg.train.seed, cfg.seed_source);
    m.insert("benchmark".into(), json!(cfg.benchmark_name()));
    m.insert("data".into(), json!(data_path.display().to_string()));
    m.insert("data_sha256".into(), json!(sha256_file(&data_path)?));
    m.insert("test_mse".into(), json!(report.test_mse));
    m.insert("param_count".into(), json!(count));
    m.insert("epochs".into(), json!(cfg.train.epochs));
    m.insert("best_epoch".into(), json!(report.outcome.history.best_epoch));
    m.insert("samples".into(), split_counts(&report.samples));
    m.insert("model_sha256".into(), json!(sha256_file(&model_file)?));
    m.insert("history_sha256".into(), json!(sha256_file(&history_file)?));
    if cfg.timing {
        m.insert("wall_seconds".into(), json!(wall));
    }
    write_json(&cfg.output_dir.join("summary.json"), &Value::Object(m))?;

    println!(
        "test MSE {:.4e} (best epoch {}), model written to {}",
        report.test_mse,
        report.outcome.history.best_epoch,
        model_file.display()
    );
    Ok(())
}

/// Rejects explicit window settings that contradict the model.
fn check_windows(cfg: &ExperimentConfig, model: &ModelParams) -> Result<(), CliError> {
    if cfg.n_in_explicit && cfg.pipeline.n_in != model.hyper.n_in {
        return Err(Error::shape("model n_in vs configured n_in", model.hyper.n_in, cfg.pipeline.n_in).into());
    }
    Ok(())
}

fn report_json(r: &EvalReport) -> Value {
    json!({
        "mse": r.mse,
        "per_variable_mse": r.per_variable_mse,
        "max_abs_error": r.max_abs_error,
        "per_step_mse": r.per_step_mse,
        "samples": r.samples,
    })
}

pub fn evaluate(cfg: &ExperimentConfig, model: Option<PathBuf>, split: &str) -> Result<(), CliError> {
    let series = load_series(&cfg.data_path()?)?;
    let mpath = model_path(cfg, model);
    let (model, norm) = load_trained(&mpath, series.variables.len())?;
    check_windows(cfg, &model)?;
    let mut pipeline = cfg.pipeline;
    pipeline.n_in = model.hyper.n_in;
    pipeline.m_out = model.hyper.m_out;
    let samples = prepare_samples(&series, &pipeline)?;
    let chosen = match split {
        "test" => samples.test(),
        "train" => samples.train(),
        "all" => samples.samples.iter().collect(),
        other => {
            return Err(CliError::Config(format!("unknown split '{other}' (expected test, train, or all)")));
        }
    };
    let report = evaluate_report(&model, &chosen, &norm)?;

    println!("samples        {}", report.samples);
    println!("mse            {:.6e}", report.mse);
    for (name, v) in series.variables.iter().zip(&report.per_variable_mse) {
        println!("mse[{name}]{:width$}{v:.6e}", "", width = 10usize.saturating_sub(name.len()));
    }
    println!("max abs error  {:.6e}", report.max_abs_error);
    for (k, v) in report.per_step_mse.iter().enumerate() {
        println!("step {:>3}       {v:.6e}", k + 1);
    }

    ensure_dir(&cfg.output_dir)?;
    write_json(&cfg.output_dir.join("evaluation.json"), &report_json(&report))?;
    let mut csv = String::from("step,mse\n");
    for (k, v) in report.per_step_mse.iter().enumerate() {
        csv.push_str(&format!("{},{v:e}\n", k + 1));
    }
    let profile = cfg.output_dir.join("error_profile.csv");
    fs::write(&profile, csv).map_err(CliError::io(format!("cannot write {}", profile.display())))?;
    Ok(())
}

/// Series over `data` with the grid of `like` but `data.cols()` steps.
fn series_like(like: &FieldSeries, data: Matrix) -> Result<FieldSeries, CliError> {
    let grid = GridSpec {
        n_steps: data.cols(),
        ..like.grid
    };
    Ok(FieldSeries::new(grid, like.variables.clone(), data)?)
}

fn seed_window(series: &FieldSeries, n_in: usize, start: usize) -> Result<Matrix, CliError> {
    let n = series.data.cols();
    if start + n_in > n {
        return Err(Error::Data(format!(
            "input window [{start}, {}) runs past the {n} columns of the series",
            start + n_in
        ))
        .into());
    }
    Ok(series.data.column_range(start..start + n_in))
}

fn mse(a: &Matrix, b: &Matrix) -> f64 {
    let s: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum();
    s / a.as_slice().len() as f64
}

pub fn predict(cfg: &ExperimentConfig, model: Option<PathBuf>, start: Option<usize>) -> Result<(), CliError> {
    let series = load_series(&cfg.data_path()?)?;
    let mpath = model_path(cfg, model);
    let (model, norm) = load_trained(&mpath, series.variables.len())?;
    check_windows(cfg, &model)?;
    let (n_in, m_out) = (model.hyper.n_in, model.hyper.m_out);
    let n = series.data.cols();
    let start = match start {
        Some(s) => s,
        None => n.checked_sub(n_in + m_out).ok_or_else(|| {
            Error::Data(format!("series has {n} columns; a window needs {}", n_in + m_out))
        })?,
    };
    let input = seed_window(&series, n_in, start)?;
    let pred = predict_window(&model, &input, &norm)?;

    ensure_dir(&cfg.output_dir)?;
    let out = cfg.output_dir.join("prediction.nps");
    write_series(&series_like(&series, pred.clone())?, &out)?;
    let mut meta = json!({
        "model": mpath.display().to_string(),
        "model_sha256": sha256_file(&mpath)?,
        "start": start,
        "target_columns": [start + n_in, start + n_in + m_out],
    });
    if start + n_in + m_out <= n {
        let target = series.data.column_range(start + n_in..start + n_in + m_out);
        write_series(&series_like(&series, target.clone())?, cfg.output_dir.join("target.nps"))?;
        meta["mse"] = json!(mse(&pred, &target));
        meta["max_abs_error"] = json!(pred.max_abs_diff(&target));
        println!(
            "predicted columns {}..{}: mse {:.4e}, max abs error {:.4e}",
            start + n_in,
            start + n_in + m_out,
            mse(&pred, &target),
            pred.max_abs_diff(&target)
        );
    } else {
        println!("predicted columns {}..{}", start + n_in, start + n_in + m_out);
    }
    write_json(&cfg.output_dir.join("prediction.json"), &meta)?;
    Ok(())
}

pub fn rollout(
    cfg: &ExperimentConfig,
    model: Option<PathBuf>,
    start: Option<usize>,
    horizon: usize,
) -> Result<(), CliError> {
    let series = load_series(&cfg.data_path()?)?;
    let mpath = model_path(cfg, model);
    let (model, norm) = load_trained(&mpath, series.variables.len())?;
    check_windows(cfg, &model)?;
    let n_in = model.hyper.n_in;
    let start = start.unwrap_or(0);
    let input = seed_window(&series, n_in, start)?;
    let out = roll(&model, &input, horizon, &norm)?;

    ensure_dir(&cfg.output_dir)?;
    write_series(&series_like(&series, out.clone())?, cfg.output_dir.join("rollout.nps"))?;
    let first = start + n_in;
    let mut meta = json!({
        "experimental": true,
        "model": mpath.display().to_string(),
        "model_sha256": sha256_file(&mpath)?,
        "start": start,
        "horizon": horizon,
        "block": model.hyper.m_out,
    });
    let available = series.data.cols().saturating_sub(first).min(horizon);
    if available > 0 {
        let truth = series.data.column_range(first..first + available);
        let pred = out.column_range(0..available);
        meta["compared_steps"] = json!(available);
        meta["mse"] = json!(mse(&pred, &truth));
        meta["max_abs_error"] = json!(pred.max_abs_diff(&truth));
        if available == horizon {
            write_series(&series_like(&series, truth)?, cfg.output_dir.join("rollout_target.nps"))?;
        }
    }
    write_json(&cfg.output_dir.join("rollout.json"), &meta)?;
    println!("rolled out {horizon} steps from column {first} (experimental)");
    Ok(())
}

/// The image drawn for one variable: the whole block for 1D grids (points ×
/// steps), or one time column reshaped to `nx × ny` for 2D grids.
fn frame(series: &FieldSeries, var: usize, step: Option<usize>) -> Result<Matrix, CliError> {
    let v = series.variables.len();
    if var >= v {
        return Err(CliError::Config(format!("variable {var} out of range (series has {v})")));
    }
    let k = series.num_points();
    let block = series.data.row_range(var * k..(var + 1) * k);
    if !series.grid.is_2d() {
        return Ok(block);
    }
    let n = block.cols();
    let col = step.unwrap_or(n - 1);
    if col >= n {
        return Err(CliError::Config(format!("step {col} out of range (series has {n} steps)")));
    }
    let values = block.column(col);
    Ok(Matrix::from_vec(series.grid.nx, series.grid.ny, values)?)
}

pub fn plot(
    cfg: &ExperimentConfig,
    exact: Option<PathBuf>,
    predicted: Option<PathBuf>,
    history: Option<PathBuf>,
    variable: usize,
    step: Option<usize>,
) -> Result<(), CliError> {
    if exact.is_none() && predicted.is_none() && history.is_none() {
        return Err(CliError::Config("plot needs --exact, --predicted, or --history".into()));
    }
    ensure_dir(&cfg.output_dir)?;
    let out = |name: &str| cfg.output_dir.join(name);
    let io = |p: &Path| CliError::io(format!("cannot write {}", p.display()));

    let exact = exact.map(|p| load_series(&p)).transpose()?;
    let predicted = predicted.map(|p| load_series(&p)).transpose()?;
    let frames = |s: &Option<FieldSeries>| s.as_ref().map(|s| frame(s, variable, step)).transpose();
    let (fe, fp) = (frames(&exact)?, frames(&predicted)?);
    if let (Some(e), Some(p)) = (&fe, &fp) {
        if e.shape() != p.shape() {
            return Err(Error::shape(
                "exact vs predicted field",
                format!("{:?}", e.shape()),
                format!("{:?}", p.shape()),
            )
            .into());
        }
    }
    let shown: Vec<&Matrix> = fe.iter().chain(fp.iter()).collect();
    if !shown.is_empty() {
        let (lo, hi) = range(&shown);
        if let Some(e) = &fe {
            let p = out("exact.ppm");
            write_ppm(&p, e, lo, hi).map_err(io(&p))?;
        }
        if let Some(pr) = &fp {
            let p = out("predicted.ppm");
            write_ppm(&p, pr, lo, hi).map_err(io(&p))?;
        }
        if let (Some(e), Some(pr)) = (&fe, &fp) {
            let err = Matrix::from_fn(e.rows(), e.cols(), |r, c| (pr.get(r, c) - e.get(r, c)).abs());
            let (_, max) = range(&[&err]);
            let p = out("error.pgm");
            write_pgm(&p, &err, 0.0, max).map_err(io(&p))?;
            println!("max abs error {max:.4e}");
        }
        let (h, w) = shown[0].shape();
        println!("wrote {w} x {h} images to {}", cfg.output_dir.display());
    }

    if let Some(path) = history {
        let text = fs::read_to_string(&path).map_err(CliError::io(format!("cannot read {}", path.display())))?;
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.starts_with("epoch,train_mse,val_mse") => {}
            _ => {
                return Err(Error::Format(format!("{} is not a training history", path.display())).into());
            }
        }
        let mut csv = String::from("epoch,train_mse,val_mse\n");
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() < 3 {
                return Err(Error::Format(format!("bad history row '{line}'")).into());
            }
            csv.push_str(&format!("{},{},{}\n", cols[0], cols[1], cols[2]));
        }
        let p = out("loss.csv");
        fs::write(&p, csv).map_err(io(&p))?;
    }
    Ok(())
}
