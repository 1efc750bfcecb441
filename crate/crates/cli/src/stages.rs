use std::fmt::Write as _;
use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::time::Duration;

use hytwin_core::cosim::{serve_model, RemoteModel, DEFAULT_PORT};
use hytwin_core::historian::{
    export_csv, format_decimal, import_csv, jitter_timestamps, resample_fixed_grid, GridSpec, TimeSeriesFrame,
};
use hytwin_core::hybrid::{
    bind_surrogate, compare_runs, compute_metrics, run_hybrid, run_open_loop, HorizonModel, HybridConfig, HybridMode,
    HybridRun, RunComparison, StepEvent,
};
use hytwin_core::plant::{
    build_default_plant, reference_scenario, steady_state, run_scenario, Disturbances, PlantTopology, SetpointStep,
};
use hytwin_core::surrogate::{
    load_model, make_windows, save_model, train_with, NormStats, SignalStats, SurrogateSpec, TrainConfig,
    WindowedDataset,
};
use hytwin_core::{PlantState, ScenarioSchedule};
use serde_json::json;

use crate::plot::{emit_plot_svg, Series};
use crate::{Cli, CliError, ScenarioArgs, Stage, StepArgs, SurrogateArgs};

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::FileNotFound(path.to_path_buf()),
        _ => CliError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, text).map_err(io)
}

fn read_frame(path: &Path) -> Result<TimeSeriesFrame, CliError> {
    Ok(import_csv(&read_text(path)?)?)
}

fn write_frame(path: &Path, frame: &TimeSeriesFrame) -> Result<(), CliError> {
    write_text(path, &export_csv(frame))?;
    eprintln!("wrote {} rows to {}", frame.len(), path.display());
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("json values always serialize");
    text.push('\n');
    write_text(path, &text)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn or_default(path: Option<PathBuf>, out: &Path, name: &str) -> PathBuf {
    path.unwrap_or_else(|| out.join(name))
}

fn scenario(args: &ScenarioArgs) -> Result<(PlantTopology, ScenarioSchedule, PlantState), CliError> {
    let plant = build_default_plant().with_ua_scaled(args.ua_scale);
    let step = SetpointStep {
        initial: args.sp_initial,
        target: args.sp_target,
        at: args.step_at,
    };
    let sc = reference_scenario(args.duration, step, &Disturbances::excitation(args.disturbance_seed, args.duration));
    let (sp, ov) = sc.initial_values();
    sc.validate()?;
    let initial = steady_state(&plant, &sp, &ov)?;
    Ok((plant, sc, initial))
}

fn scenario_event(args: &ScenarioArgs) -> Option<StepEvent> {
    (args.step_at > 0.0 && args.step_at < args.duration && args.sp_initial != args.sp_target).then_some(StepEvent {
        time: args.step_at,
        from: args.sp_initial,
        to: args.sp_target,
    })
}

fn step_event(args: &StepArgs) -> Option<StepEvent> {
    args.step_at.map(|time| StepEvent {
        time,
        from: args.step_from,
        to: args.step_to,
    })
}

fn train_config(args: &SurrogateArgs, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed,
        lr: args.lr,
        clip: (args.clip > 0.0).then_some(args.clip),
        ..TrainConfig::default()
    }
}

/// Normalizer fitted over all recordings pooled together.
fn pooled_norm(frames: &[TimeSeriesFrame], spec: &SurrogateSpec) -> Result<NormStats, CliError> {
    let pooled = |tag: &str| -> Result<SignalStats, CliError> {
        let mut all = Vec::new();
        for f in frames {
            all.extend(f.column(tag)?);
        }
        Ok(SignalStats::fit(tag, &all)?)
    };
    Ok(NormStats {
        features: spec.features.iter().map(|t| pooled(t)).collect::<Result<_, _>>()?,
        label: pooled(&spec.label)?,
    })
}

fn metrics_json(m: &hytwin_core::hybrid::Metrics) -> serde_json::Value {
    serde_json::to_value(m).expect("metrics serialize")
}

pub(crate) fn run_stage(cli: Cli) -> Result<(), CliError> {
    let out = cli.out;
    match cli.stage {
        Stage::Collect { scenario: args, output } => {
            let (plant, sc, initial) = scenario(&args)?;
            let frame = run_scenario(&plant, &sc, &initial)?;
            write_frame(&or_default(output, &out, "collect.csv"), &frame)
        }
        Stage::Jitter { input, output, lo, hi } => {
            let frame = read_frame(&input)?;
            let jittered = jitter_timestamps(&frame, lo, hi, cli.seed)?;
            write_frame(&or_default(output, &out, "jittered.csv"), &jittered)
        }
        Stage::Resample { input, output, dt } => {
            let frame = read_frame(&input)?;
            let grid = GridSpec::covering(&frame, dt)?;
            let resampled = resample_fixed_grid(&frame, &grid)?;
            write_frame(&or_default(output, &out, "resampled.csv"), &resampled)
        }
        Stage::Train {
            input,
            output,
            losses,
            surrogate,
        } => train_stage(&input, or_default(output, &out, "model.json"), or_default(losses, &out, "losses.csv"), &surrogate, cli.seed),
        Stage::Openloop {
            model,
            input,
            output,
            metrics,
            event,
        } => {
            let model = load_model(&read_text(&model)?)?;
            let recorded = read_frame(&input)?;
            let spec = model.spec();
            let mut binding = bind_surrogate(&build_default_plant(), model, &spec)?;
            let cmp = run_open_loop(&mut binding, &recorded, step_event(&event).as_ref())?;
            let frame = TimeSeriesFrame::from_columns(
                cmp.candidate.times().to_vec(),
                vec![
                    (spec.label.clone(), cmp.candidate.column_at(0)),
                    (format!("{}_recorded", spec.label), cmp.reference.column_at(0)),
                ],
            )?;
            write_frame(&or_default(output, &out, "openloop.csv"), &frame)?;
            print_metrics("open loop", &cmp.metrics);
            write_json(
                &or_default(metrics, &out, "openloop_metrics.json"),
                &json!({ "mode": "open_loop", "label": spec.label, "metrics": metrics_json(&cmp.metrics) }),
            )
        }
        Stage::Hybrid {
            model,
            mode,
            alpha,
            cadence,
            remote,
            port,
            timeout,
            scenario: args,
            reference_out,
            hybrid_out,
            metrics_out,
        } => {
            let model = load_model(&read_text(&model)?)?;
            let mode: HybridMode = mode.parse()?;
            let config = HybridConfig {
                mode,
                alpha,
                cadence,
                step_event: scenario_event(&args),
            };
            let (plant, sc, initial) = scenario(&args)?;
            let spec = model.spec();
            let run = match remote {
                None => couple(&plant, model, &spec, &config, &sc, &initial)?,
                Some(addr) => {
                    let addr = if addr.contains(':') {
                        addr
                    } else {
                        format!("{addr}:{}", port.unwrap_or(DEFAULT_PORT))
                    };
                    let client = RemoteModel::connect(addr.as_str(), model.norm.clone(), Duration::from_secs(timeout))?;
                    couple(&plant, client, &spec, &config, &sc, &initial)?
                }
            };
            write_frame(&or_default(reference_out, &out, "reference.csv"), &run.reference)?;
            write_frame(&or_default(hybrid_out, &out, "hybrid.csv"), &run.hybrid)?;
            print_metrics("hybrid", &run.comparison.metrics);
            write_json(
                &or_default(metrics_out, &out, "hybrid_metrics.json"),
                &json!({
                    "mode": mode,
                    "alpha": alpha,
                    "cadence": cadence,
                    "label": spec.label,
                    "metrics": metrics_json(&run.comparison.metrics),
                }),
            )
        }
        Stage::Evaluate {
            reference,
            candidate,
            baseline,
            tag,
            event,
            output,
        } => {
            let event = step_event(&event);
            let reference = read_frame(&reference)?;
            let a = score(&reference, &read_frame(&candidate)?, &tag, event.as_ref())?;
            let value = match baseline {
                None => {
                    print_metrics("candidate", &a.metrics);
                    json!({ "label": tag, "candidate": metrics_json(&a.metrics) })
                }
                Some(b) => {
                    let b = score(&reference, &read_frame(&b)?, &tag, event.as_ref())?;
                    let ranking = compare_runs(&a, &b)?;
                    println!("first = candidate, second = baseline");
                    println!("{ranking}");
                    json!({ "label": tag, "ranking": serde_json::to_value(&ranking).expect("ranking serializes") })
                }
            };
            write_json(&or_default(output, &out, "evaluation.json"), &value)
        }
        Stage::Serve {
            model,
            host,
            port,
            sessions,
        } => {
            let model = load_model(&read_text(&model)?)?;
            let addr = format!("{host}:{port}");
            let listener = TcpListener::bind(&addr).map_err(|e| CliError::Io {
                path: PathBuf::from(&addr),
                source: e,
            })?;
            eprintln!("serving {} on {}", model.spec().label, listener.local_addr().map_or(addr, |a| a.to_string()));
            let answered = serve_model(&listener, &model, sessions)?;
            eprintln!("answered {answered} predictions");
            Ok(())
        }
        Stage::Plot {
            series,
            tag,
            title,
            output,
        } => {
            let mut list = Vec::with_capacity(series.len());
            for s in &series {
                let (path, tag) = match s.rsplit_once(':') {
                    Some((p, t)) if !t.is_empty() => (p, t),
                    _ => (s.as_str(), tag.as_str()),
                };
                let frame = read_frame(Path::new(path))?;
                let stem = Path::new(path).file_stem().map_or(path.into(), |s| s.to_string_lossy().into_owned());
                list.push(Series {
                    label: format!("{stem}:{tag}"),
                    times: frame.times().to_vec(),
                    values: frame.column(tag)?,
                });
            }
            let svg = emit_plot_svg(&list, &title, &tag)?;
            let path = or_default(output, &out, "plot.svg");
            write_text(&path, &svg)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn couple<M: HorizonModel>(
    plant: &PlantTopology,
    model: M,
    spec: &SurrogateSpec,
    config: &HybridConfig,
    sc: &ScenarioSchedule,
    initial: &PlantState,
) -> Result<HybridRun, CliError> {
    let mut binding = bind_surrogate(plant, model, spec)?;
    Ok(run_hybrid(plant, &mut binding, config, sc, initial)?)
}

fn train_stage(
    inputs: &[PathBuf],
    model_path: PathBuf,
    losses_path: PathBuf,
    args: &SurrogateArgs,
    seed: u64,
) -> Result<(), CliError> {
    let spec = SurrogateSpec {
        enc_len: args.enc_len,
        dec_len: args.dec_len,
        ..SurrogateSpec::default()
    };
    let frames = inputs.iter().map(|p| read_frame(p)).collect::<Result<Vec<_>, _>>()?;
    let norm = pooled_norm(&frames, &spec)?;
    let mut ds: Option<WindowedDataset> = None;
    for f in &frames {
        let w = make_windows(f, &spec, args.stride, &norm)?;
        match ds.as_mut() {
            None => ds = Some(w),
            Some(d) => d.extend(w)?,
        }
    }
    let ds = ds.expect("clap requires at least one input");
    let cfg = train_config(args, seed);
    let every = (cfg.epochs / 10).max(1);
    let (model, report) = train_with(&ds, spec.dims(args.hidden), norm, &cfg, |epoch, loss| {
        if epoch % every == 0 || epoch + 1 == cfg.epochs {
            eprintln!("epoch {:>4}  loss {loss:.4e}", epoch + 1);
        }
    })?;
    write_text(&model_path, &save_model(&model)?)?;
    eprintln!("wrote {} ({} windows, {} updates)", model_path.display(), report.windows, report.updates);
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in report.epoch_losses.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", i + 1, format_decimal(*l));
    }
    write_text(&losses_path, &csv)?;
    eprintln!("wrote {}", losses_path.display());
    Ok(())
}

/// Scores `run` against `reference` on the rows `run` covers; its grid must
/// be a contiguous stretch of the reference grid.
fn score(
    reference: &TimeSeriesFrame,
    run: &TimeSeriesFrame,
    tag: &str,
    event: Option<&StepEvent>,
) -> Result<RunComparison, CliError> {
    let times = run.times();
    let start = times
        .first()
        .and_then(|t0| reference.times().iter().position(|t| t == t0))
        .ok_or_else(|| CliError::GridMismatch("run does not start on the reference grid".into()))?;
    let end = start + times.len();
    if end > reference.len() || reference.times()[start..end] != *times {
        return Err(CliError::GridMismatch("run grid is not a stretch of the reference grid".into()));
    }
    let r = reference.column(tag)?[start..end].to_vec();
    let c = run.column(tag)?;
    let metrics = compute_metrics(times, &r, &c, event)?;
    let single = |v: Vec<f64>| TimeSeriesFrame::from_columns(times.to_vec(), vec![(tag.to_string(), v)]);
    Ok(RunComparison {
        reference: single(r)?,
        candidate: single(c)?,
        metrics,
    })
}

fn print_metrics(what: &str, m: &hytwin_core::hybrid::Metrics) {
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
    println!("{what}: rmse {:.4} K  mae {:.4} K  oscillation {:.4} K", m.rmse, m.mae, m.oscillation_index);
    if m.rise_time_ref.is_some() || m.rise_time_cand.is_some() {
        println!("rise time: reference {} s  candidate {} s", opt(m.rise_time_ref), opt(m.rise_time_cand));
    }
}
