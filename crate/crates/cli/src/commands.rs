use std::path::{Path, PathBuf};
use std::process::ExitCode;

use prosody_core::corpus::{generate_fixture_corpus, load_manifest, FixtureSpec};
use prosody_core::learner::{brute_force_optimum, train_model, GridSpec};
use prosody_core::manipulate::{apply_manipulation, PitchShift};
use prosody_core::pipeline::{analyze_file, compare_files, corpus_reports, process_all_files};
use prosody_core::{
    synthesize, write_wav, AnalysisConfig, Error, Features, LossWeights, ManipulationParams,
    Result, SynthConfig, TrainedModel, TrainingConfig,
};

use crate::{AnalysisArgs, Command};

/// Largest per-parameter gap between training and the grid oracle that
/// `train --verify` accepts.
const VERIFY_TOLERANCE: f64 = 1e-3;

pub fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Analyze { input, out, analysis } => {
            let features = analyze_file(&input, &analysis_config(&analysis)?)?;
            features.save(&out)?;
            println!(
                "{}: {} frames, {} voiced",
                out.display(),
                features.frames(),
                features.voiced_count()
            );
        }
        Command::Compare { human, tts, out, analysis } => {
            let report = compare_files(&human, &tts, &analysis_config(&analysis)?)?;
            let json = report.to_json()?;
            write_text(&out, &json)?;
            println!("{json}");
        }
        Command::Train {
            manifest,
            out,
            loss_csv,
            epochs,
            steps_per_epoch,
            lr,
            weights,
            f0_scale,
            verify,
            analysis,
        } => {
            let cfg = TrainingConfig {
                epochs,
                steps_per_epoch,
                learning_rate: lr,
                weights: LossWeights::new(weights[0], weights[1], weights[2])?,
                f0_scale,
            };
            cfg.validate()?;
            let manifest = load_manifest(&manifest)?;
            let reports = corpus_reports(&manifest, &analysis_config(&analysis)?)?;
            let (theta, history) = train_model(&reports, &cfg)?;
            let model = TrainedModel::new(&theta, &cfg, &reports)?;
            model.save(&out)?;

            let loss_path = loss_csv.unwrap_or_else(|| out.with_extension("loss.csv"));
            let mut w = csv::Writer::from_path(&loss_path)?;
            w.write_record(["epoch", "avg_loss"])?;
            for e in &history {
                w.write_record([e.epoch.to_string(), e.avg_loss.to_string()])?;
                println!("epoch {} avg_loss {}", e.epoch, e.avg_loss);
            }
            flush(w, &loss_path)?;
            println!(
                "pitch_shift_hz {} duration_ratio {} energy_scale {}",
                model.pitch_shift_hz, model.duration_ratio, model.energy_scale
            );

            if verify {
                let grid = GridSpec::covering(&reports)?;
                let oracle = brute_force_optimum(&reports, &cfg.weights, cfg.f0_scale, &grid)?;
                let gap = theta
                    .as_array()
                    .iter()
                    .zip(oracle.as_array())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if gap > VERIFY_TOLERANCE {
                    return Err(Error::InvariantViolation(format!(
                        "trained parameters differ from the grid optimum by {gap:e} ({theta:?} vs {oracle:?})"
                    )));
                }
                println!("verify: ok (max deviation {gap:e})");
            }
        }
        Command::Apply {
            input,
            out,
            model,
            pitch_shift,
            pitch_semitones,
            duration_ratio,
            energy_scale,
            seed,
            analysis,
        } => {
            let base = match model {
                Some(path) => TrainedModel::load(path)?.manipulation()?,
                None => ManipulationParams::identity(),
            };
            let params = ManipulationParams::new(
                pitch_shift.unwrap_or(base.pitch_shift_hz),
                duration_ratio.unwrap_or(base.duration_ratio),
                energy_scale.unwrap_or(base.energy_scale),
            )?;
            let pitch = match pitch_semitones {
                Some(st) => PitchShift::Semitones(st),
                None => PitchShift::Additive(params.pitch_shift_hz),
            };
            let cfg = analysis_config(&analysis)?;
            let features = analyze_file(&input, &cfg)?;
            let manipulated = apply_manipulation(
                &features,
                pitch,
                params.duration_ratio,
                params.energy_scale,
                &cfg,
            )?;
            let audio = synthesize(&manipulated, &SynthConfig { noise_seed: seed })?;
            write_wav(&out, &audio)?;
            println!("{}: {:.3} s", out.display(), audio.duration_secs());
        }
        Command::Batch { manifest, model, out_dir, seed, analysis } => {
            let manifest = load_manifest(&manifest)?;
            let params = TrainedModel::load(&model)?.manipulation()?;
            let summary = process_all_files(
                &manifest,
                &params,
                &analysis_config(&analysis)?,
                &SynthConfig { noise_seed: seed },
                &out_dir,
            )?;
            let summary_path = out_dir.join("summary.csv");
            summary.save_csv(&summary_path)?;
            for row in summary.rows.iter().filter(|r| !r.succeeded()) {
                eprintln!("failed: {}: {}", row.id, row.error.as_deref().unwrap_or(""));
            }
            println!(
                "{}: {} pairs, {} failed",
                summary_path.display(),
                summary.rows.len(),
                summary.failures()
            );
            if summary.failures() > 0 {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Report { features_a, features_b, out_dir } => {
            let a = Features::load(&features_a)?;
            let b = Features::load(&features_b)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| io_error(&out_dir, e))?;
            write_f0_table(&a, &b, &out_dir.join("f0_comparison.csv"))?;
            write_envelope_table(&a, &b, &out_dir.join("envelope_comparison.csv"))?;
            println!("{}: f0_comparison.csv, envelope_comparison.csv", out_dir.display());
        }
        Command::Fixture {
            out_dir,
            seed,
            pairs,
            pitch_offset,
            duration_factor,
            energy_factor,
        } => {
            let spec = FixtureSpec {
                pairs,
                pitch_offset_hz: pitch_offset,
                duration_factor,
                energy_factor,
                ..FixtureSpec::default()
            };
            let manifest = generate_fixture_corpus(&out_dir, seed, &spec)?;
            println!(
                "{}: {} pairs",
                out_dir.join("manifest.json").display(),
                manifest.pairs.len()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn analysis_config(args: &AnalysisArgs) -> Result<AnalysisConfig> {
    let cfg = AnalysisConfig {
        frame_period_ms: args.frame_period,
        f0_floor: args.f0_floor,
        f0_ceil: args.f0_ceil,
        fft_size: args.fft_size,
    };
    cfg.validate(prosody_core::CANONICAL_RATE)?;
    Ok(cfg)
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::IoFailure {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

fn flush(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| io_error(path, e))
}

/// One row per frame up to the longer input; the shorter input leaves its
/// column empty past its end.
fn write_f0_table(a: &Features, b: &Features, path: &PathBuf) -> Result<()> {
    if a.frame_period_ms != b.frame_period_ms {
        return Err(Error::ConfigMismatch(format!(
            "frame periods {} ms and {} ms",
            a.frame_period_ms, b.frame_period_ms
        )));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["time_s", "f0_a_hz", "f0_b_hz"])?;
    let cell = |f: &Features, i: usize| f.f0.get(i).map(|v| v.to_string()).unwrap_or_default();
    for i in 0..a.frames().max(b.frames()) {
        let t = i as f64 * a.frame_period_ms / 1000.0;
        w.write_record([t.to_string(), cell(a, i), cell(b, i)])?;
    }
    flush(w, path)
}

/// Frame-averaged log power (dB) per envelope bin.
fn write_envelope_table(a: &Features, b: &Features, path: &PathBuf) -> Result<()> {
    if a.fft_size != b.fft_size || a.sample_rate != b.sample_rate {
        return Err(Error::ConfigMismatch(format!(
            "fft sizes {} / {} at {} / {} Hz",
            a.fft_size, b.fft_size, a.sample_rate, b.sample_rate
        )));
    }
    let mean_db = |f: &Features| -> Vec<f64> {
        let mut acc = vec![0.0; f.bins()];
        for row in &f.sp {
            for (s, v) in acc.iter_mut().zip(row) {
                *s += 10.0 * v.log10();
            }
        }
        acc.iter().map(|s| s / f.frames() as f64).collect()
    };
    let (da, db) = (mean_db(a), mean_db(b));
    let bin_hz = a.sample_rate as f64 / a.fft_size as f64;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bin", "freq_hz", "log_power_a_db", "log_power_b_db"])?;
    for (k, (x, y)) in da.iter().zip(&db).enumerate() {
        w.write_record([
            k.to_string(),
            (k as f64 * bin_hz).to_string(),
            x.to_string(),
            y.to_string(),
        ])?;
    }
    flush(w, path)
}
