use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use har_core::activity::ActivityLabel;
use har_core::features::FeatureVector;
use har_core::harness::dataset::{extract_records, labeled_samples, load_stream, read_segments_csv};
use har_core::harness::synth::EventKind;
use har_core::harness::{
    evaluate, read_features_csv, run_pipeline, synthesize_user, training_profile, write_features_csv, write_recording,
    write_segments_csv, HarnessConfig, RecordingPaths,
};
use har_core::ingest::write_labels_csv;
use har_core::model::{load_model, save_model, sweep_hidden, train_supervised, weight_bytes};
use har_core::online::{run_experiment, run_feedback_session};
use har_core::segment::{cut_stream, segment_spans, SegmentSpan};
use har_core::{Error, Result};
use serde_json::json;

use crate::log::RunLog;
use crate::Command;

type Rows = Vec<(FeatureVector, Option<ActivityLabel>)>;

pub fn run(command: Command, config: &HarnessConfig, log: &mut RunLog) -> Result<()> {
    match command {
        Command::Synth { out } => synth(&out, config, log),
        Command::Preprocess { input, out } => preprocess(&input, &out, config, log),
        Command::Segment { input, out } => segment(&input, &out, config, log),
        Command::Features { input, segments, out } => features(&input, segments.as_deref(), &out, config, log),
        Command::Train {
            features,
            model_out,
            report,
        } => train(&features, &model_out, report.as_deref(), config, log),
        Command::Eval { model, features, out } => eval(&model, &features, out.as_deref(), log),
        Command::Sweep { features, out } => sweep(&features, out.as_deref(), config, log),
        Command::RlReplay {
            model,
            features,
            out,
            model_out,
        } => rl_replay(&model, &features, out.as_deref(), model_out.as_deref(), config, log),
        Command::Pipeline {
            input,
            model,
            mode,
            out,
            model_out,
        } => {
            let result = run_pipeline(&RecordingPaths::in_dir(&input), &model, mode, config)?;
            log.event(
                "pipeline",
                json!({
                    "segments": result.recognized.len(),
                    "updates": result.updates,
                    "session_accuracy": result.session_accuracy(),
                }),
            );
            emit(out.as_deref(), &result.to_csv())?;
            if let Some(path) = model_out {
                save_model(&result.params, &path)?;
                log.event("model_saved", json!({ "path": path }));
            }
            Ok(())
        }
    }
}

/// Write CSV text to `path`, or to stdout when no path is given.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn read_rows(paths: &[PathBuf]) -> Result<Rows> {
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(read_features_csv(BufReader::new(File::open(p)?))?);
    }
    Ok(rows)
}

fn synth(out: &Path, config: &HarnessConfig, log: &mut RunLog) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut manifest = String::from("user,dir,seed,stretch_samples,accel_samples,labels,events,segments\n");
    for user in 0..config.synth.users {
        let seed = config.seed.wrapping_mul(1000).wrapping_add(user as u64);
        let profile = training_profile(&config.synth.profile, user);
        let corpus = synthesize_user(seed, &profile, config.synth.duration_s, config)?;
        let dir = out.join(format!("user{user}"));
        let rec = &corpus.recording;
        write_recording(&dir, &rec.raw, Some(&rec.labels))?;

        let mut events = String::from("t_ms,kind,activity\n");
        for e in &rec.events {
            match e.kind {
                EventKind::ActivityStart(a) => writeln!(events, "{},activity_start,{a}", e.t_ms),
                EventKind::StepOnset => writeln!(events, "{},step_onset,", e.t_ms),
            }
            .expect("writing to a String");
        }
        fs::write(dir.join("events.csv"), events)?;
        writeln!(
            manifest,
            "{user},{},{seed},{},{},{},{},{}",
            dir.display(),
            rec.raw.stretch.len(),
            rec.raw.accel.len(),
            rec.labels.len(),
            rec.events.len(),
            corpus.records.len()
        )
        .expect("writing to a String");
        log.event(
            "user",
            json!({ "user": user, "seed": seed, "dir": dir, "segments": corpus.records.len() }),
        );
    }
    fs::write(out.join("manifest.csv"), manifest)?;
    Ok(())
}

fn preprocess(input: &Path, out: &Path, config: &HarnessConfig, log: &mut RunLog) -> Result<()> {
    let stream = load_stream(&RecordingPaths::in_dir(input), &config.preprocess)?;
    fs::create_dir_all(out)?;
    let mut stretch = String::from("t_ms,s\n");
    for p in &stream.stretch {
        writeln!(stretch, "{},{}", p.t_ms, p.s).expect("writing to a String");
    }
    fs::write(out.join("stretch_norm.csv"), stretch)?;
    let mut accel = String::from("t_ms,ax,ay,az\n");
    for a in &stream.accel {
        writeln!(accel, "{},{},{},{}", a.t_ms, a.ax, a.ay, a.az).expect("writing to a String");
    }
    fs::write(out.join("accel_aligned.csv"), accel)?;
    if let Some(labels) = &stream.labels {
        write_labels_csv(labels, File::create(out.join("labels.csv"))?)?;
    }
    log.event(
        "preprocess",
        json!({ "stretch_samples": stream.stretch.len(), "accel_samples": stream.accel.len(), "duration_ms": stream.duration_ms() }),
    );
    Ok(())
}

fn segment(input: &Path, out: &Path, config: &HarnessConfig, log: &mut RunLog) -> Result<()> {
    let stream = load_stream(&RecordingPaths::in_dir(input), &config.preprocess)?;
    let spans = segment_spans(&stream, config.segmenter).map_err(|e| e.at_stage("segment"))?;
    write_segments_csv(&spans, File::create(out)?)?;
    log.event("segment", json!({ "segments": spans.len() }));
    Ok(())
}

fn features(input: &Path, segments: Option<&Path>, out: &Path, config: &HarnessConfig, log: &mut RunLog) -> Result<()> {
    let stream = load_stream(&RecordingPaths::in_dir(input), &config.preprocess)?;
    let spans: Vec<SegmentSpan> = match segments {
        Some(p) => read_segments_csv(BufReader::new(File::open(p)?)).map_err(|e| e.at_stage("segment"))?,
        None => segment_spans(&stream, config.segmenter).map_err(|e| e.at_stage("segment"))?,
    };
    let cut = cut_stream(&stream, &spans, config.segmenter);
    let records = extract_records(&stream, &cut);
    let rows: Rows = records.iter().map(|r| (r.features, r.label)).collect();
    write_features_csv(&rows, File::create(out)?)?;
    log.event(
        "features",
        json!({ "segments": rows.len(), "labeled": rows.iter().filter(|r| r.1.is_some()).count() }),
    );
    Ok(())
}

fn train(
    features: &[PathBuf],
    model_out: &Path,
    report: Option<&Path>,
    config: &HarnessConfig,
    log: &mut RunLog,
) -> Result<()> {
    let data = labeled_samples(&read_rows(features)?);
    let outcome = train_supervised(&data, &config.train).map_err(|e| e.at_stage("model"))?;
    save_model(&outcome.params, model_out)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |a| format!("{a:.6}"));
    let mut csv = String::from("metric,value\n");
    writeln!(csv, "n_hidden,{}", config.train.n_hidden).expect("writing to a String");
    writeln!(csv, "weight_bytes,{}", weight_bytes(config.train.n_hidden)).expect("writing to a String");
    writeln!(csv, "train_size,{}", outcome.train_size).expect("writing to a String");
    writeln!(csv, "test_size,{}", outcome.test_size).expect("writing to a String");
    writeln!(csv, "final_loss,{:.6}", outcome.final_loss).expect("writing to a String");
    writeln!(csv, "train_accuracy,{:.6}", outcome.train_accuracy).expect("writing to a String");
    writeln!(csv, "validation_accuracy,{}", opt(outcome.validation_accuracy)).expect("writing to a String");
    writeln!(csv, "test_accuracy,{}", opt(outcome.test_accuracy)).expect("writing to a String");
    emit(report, &csv)?;
    log.event(
        "train",
        json!({
            "samples": data.len(),
            "final_loss": outcome.final_loss,
            "train_accuracy": outcome.train_accuracy,
            "test_accuracy": outcome.test_accuracy,
            "model": model_out,
        }),
    );
    Ok(())
}

fn eval(model: &Path, features: &[PathBuf], out: Option<&Path>, log: &mut RunLog) -> Result<()> {
    let params = load_model(model).map_err(|e| e.at_stage("model"))?;
    let rows = read_rows(features)?;
    let matrix = evaluate(&params, &rows)?;
    emit(out, &matrix.to_csv())?;
    log.event(
        "eval",
        json!({ "segments": matrix.total(), "accuracy": matrix.accuracy() }),
    );
    Ok(())
}

fn sweep(features: &[PathBuf], out: Option<&Path>, config: &HarnessConfig, log: &mut RunLog) -> Result<()> {
    let data = labeled_samples(&read_rows(features)?);
    let points =
        sweep_hidden(&data, config.sweep_min..=config.sweep_max, &config.train).map_err(|e| e.at_stage("model"))?;
    let mut csv = String::from("n_hidden,accuracy,weight_bytes\n");
    for p in &points {
        writeln!(csv, "{},{:.6},{}", p.n_hidden, p.accuracy, p.weight_bytes).expect("writing to a String");
        log.event(
            "sweep_point",
            json!({ "n_hidden": p.n_hidden, "accuracy": p.accuracy, "weight_bytes": p.weight_bytes }),
        );
    }
    emit(out, &csv)
}

fn rl_replay(
    model: &Path,
    features: &Path,
    out: Option<&Path>,
    model_out: Option<&Path>,
    config: &HarnessConfig,
    log: &mut RunLog,
) -> Result<()> {
    let params = load_model(model).map_err(|e| e.at_stage("model"))?;
    let rows = read_rows(&[features.to_path_buf()])?;
    if let Some(i) = rows.iter().position(|r| r.1.is_none()) {
        return Err(Error::Unlabeled(i));
    }
    let sequence = labeled_samples(&rows);
    let traces =
        run_experiment(&params, std::slice::from_ref(&sequence), &config.learner).map_err(|e| e.at_stage("online"))?;
    let trace = &traces[0];
    let mut csv = String::from("run,episode,accuracy\n");
    for (run, log_run) in trace.runs.iter().enumerate() {
        writeln!(csv, "{run},0,{:.6}", log_run.initial_accuracy).expect("writing to a String");
        for (e, acc) in log_run.accuracy.iter().enumerate() {
            writeln!(csv, "{run},{},{acc:.6}", e + 1).expect("writing to a String");
        }
    }
    emit(out, &csv)?;
    log.event(
        "rl_replay",
        json!({
            "segments": sequence.len(),
            "runs": trace.runs.len(),
            "episodes": config.learner.episodes,
            "alpha": config.learner.alpha,
            "mean_initial": trace.mean_initial,
            "mean_final": trace.mean_accuracy.last(),
        }),
    );
    if let Some(path) = model_out {
        let (updated, session) =
            run_feedback_session(&params, &sequence, &config.learner).map_err(|e| e.at_stage("online"))?;
        save_model(&updated, path)?;
        log.event("model_saved", json!({ "path": path, "updates": session.updates }));
    }
    Ok(())
}
