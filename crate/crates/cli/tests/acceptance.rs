//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Tolerances are fixed constants at the top of each check.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use prosody_core::audio_io::{read_wav, write_wav, AudioBuffer};
use prosody_core::compare::{compare_features, ComparisonReport};
use prosody_core::corpus::{
    annotations_to_csv, generate_fixture_corpus, load_manifest, parse_annotations, FixtureSpec,
    StressAnnotation,
};
use prosody_core::features::{extract_features, AnalysisConfig, ProsodicFeatures};
use prosody_core::learner::{
    brute_force_optimum, loss_gradient, pair_loss, train_model, Correction, GridSpec,
    LossWeights, TrainedModel, TrainingConfig,
};
use prosody_core::manipulate::{
    manipulate_features, modify_duration, scale_energy, shift_pitch, ManipulationParams,
};
use prosody_core::pipeline::{corpus_reports, process_all_files};
use prosody_core::signals::{harmonic_source, rms, sawtooth, vowel_filter, white_noise, VOWEL_FORMANTS};
use prosody_core::synth::{synthesize, SynthConfig};
use prosody_core::testing::synthetic_features;
use prosody_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Check);

const SR: u32 = 16_000;
const FIXTURE_SEED: u64 = 2024;

fn cfg() -> AnalysisConfig<f64> {
    AnalysisConfig::default()
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn vowel(f0_at: impl Fn(f64) -> f64, secs: f64, level: f64) -> AudioBuffer<f64> {
    let src = harmonic_source(f0_at, SR, (secs * SR as f64) as usize, 1.0);
    let mut y = vowel_filter(&src, &VOWEL_FORMANTS, SR);
    let r = rms(&y);
    y.iter_mut().for_each(|v| *v *= level / r);
    AudioBuffer::new(y, SR).unwrap()
}

fn fixture_reports(dir: &Path) -> Result<(prosody_core::corpus::CorpusManifest, Vec<ComparisonReport<f64>>), String> {
    let manifest = generate_fixture_corpus(dir, FIXTURE_SEED, &FixtureSpec::default()).map_err(err)?;
    let reports = corpus_reports(&manifest, &cfg()).map_err(err)?;
    Ok((manifest, reports))
}

fn metric_recovery() -> Check {
    const MAX_PITCH_HZ: f64 = 5.0;
    const DURATION: (f64, f64) = (0.97, 1.03);
    const ENERGY: (f64, f64) = (0.93, 1.07);
    const BUDGET: Duration = Duration::from_secs(30);

    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(err)?;
    let (manifest, reports) = fixture_reports(dir.path())?;
    let (theta, _) = train_model(&reports, &TrainingConfig::default()).map_err(err)?;
    let params = theta.manipulation().map_err(err)?;
    let summary = process_all_files(&manifest, &params, &cfg(), &SynthConfig::default(), dir.path().join("out"))
        .map_err(err)?;
    if summary.failures() > 0 {
        return Err(format!("{} pairs failed", summary.failures()));
    }
    let before = summary.mean_before().ok_or("no rows")?;
    let [p, d, e] = summary.mean_after().ok_or("no rows")?;
    let elapsed = start.elapsed();
    let pass = p.abs() <= MAX_PITCH_HZ
        && (DURATION.0..=DURATION.1).contains(&d)
        && (ENERGY.0..=ENERGY.1).contains(&e)
        && elapsed < BUDGET;
    Ok((
        pass,
        format!(
            "before ({:.2} Hz, {:.4}, {:.4}) after ({p:.3} Hz, {d:.4}, {e:.4}) in {:.1}s",
            before[0], before[1], before[2], elapsed.as_secs_f64()
        ),
    ))
}

fn training_curve() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let (_, reports) = fixture_reports(dir.path())?;
    let cfg = TrainingConfig { epochs: 5, ..TrainingConfig::default() };
    let (_, history) = train_model(&reports, &cfg).map_err(err)?;
    let losses: Vec<f64> = history.iter().map(|e| e.avg_loss).collect();
    let pass = losses.len() == 5 && losses.windows(2).all(|w| w[1] <= w[0]);
    let strict = losses.windows(2).all(|w| w[1] < w[0]);
    let shown: Vec<String> = losses.iter().map(|l| format!("{l:.3e}")).collect();
    Ok((pass, format!("avg_loss [{}], strictly decreasing {strict}", shown.join(", "))))
}

fn random_report(rng: &mut ChaCha8Rng) -> ComparisonReport<f64> {
    ComparisonReport {
        pitch_diff_hz: rng.random_range(-60.0..60.0),
        duration_ratio: rng.random_range(0.6f64..1.6),
        energy_ratio: rng.random_range(0.6f64..1.6),
        voiced_frames_human: 100,
        voiced_frames_tts: 100,
        aligned_f0_rmse_hz: 0.0,
    }
}

fn learner_oracle() -> Check {
    const TOL: f64 = 1e-3;
    const BUDGET: Duration = Duration::from_secs(60);
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = TrainingConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(1..=16);
        let reports: Vec<_> = (0..n).map(|_| random_report(&mut rng)).collect();
        let (theta, _) = train_model(&reports, &cfg).map_err(err)?;
        let grid = GridSpec::covering(&reports).map_err(err)?;
        let oracle = brute_force_optimum(&reports, &cfg.weights, cfg.f0_scale, &grid).map_err(err)?;
        for (a, b) in theta.as_array().iter().zip(oracle.as_array()) {
            worst = worst.max((a - b).abs());
        }
    }
    let elapsed = start.elapsed();
    Ok((
        worst <= TOL && elapsed < BUDGET,
        format!("max |train - oracle| = {worst:.2e} over 20 corpora in {:.2}s", elapsed.as_secs_f64()),
    ))
}

fn gradient_check() -> Check {
    const TOL: f64 = 1e-4;
    const REL_STEP: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let report = random_report(&mut rng);
        let theta = Correction {
            pitch_shift_hz: rng.random_range(-80.0..80.0),
            duration_ratio: rng.random_range(0.4f64..2.5),
            energy_ratio: rng.random_range(0.4f64..2.5),
        };
        let w = LossWeights::new(
            rng.random_range(0.1..3.0),
            rng.random_range(0.1..3.0),
            rng.random_range(0.1..3.0),
        )
        .map_err(err)?;
        let g = loss_gradient(&theta, &report, &w, 100.0).map_err(err)?;
        let analytic = [g.pitch, g.duration, g.energy];
        for axis in 0..3 {
            let x = theta.as_array()[axis];
            let h = REL_STEP * x.abs().max(1.0);
            let at = |v: f64| {
                let mut t = theta;
                match axis {
                    0 => t.pitch_shift_hz = v,
                    1 => t.duration_ratio = v,
                    _ => t.energy_ratio = v,
                }
                pair_loss(&t, &report, &w, 100.0).unwrap()
            };
            let fd = (at(x + h) - at(x - h)) / (2.0 * h);
            let a = analytic[axis];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-12);
            worst = worst.max(rel);
        }
    }
    Ok((worst <= TOL, format!("max relative error {worst:.2e} over 100 draws")))
}

fn pitch_tracker() -> Check {
    const MAX_REL_ERR: f64 = 0.03;
    const MIN_UNVOICED: f64 = 0.95;
    let mut worst = 0.0f64;
    let mut octave_errors = 0usize;
    for f in [100.0, 150.0, 200.0, 250.0, 300.0, 350.0, 400.0] {
        let x = AudioBuffer::new(sawtooth(f, SR, SR as usize, 0.5), SR).map_err(err)?;
        let feats = extract_features(&x, &cfg()).map_err(err)?;
        let voiced: Vec<f64> = feats.voiced_f0().collect();
        if voiced.is_empty() {
            return Ok((false, format!("{f} Hz: no voiced frames")));
        }
        octave_errors += voiced.iter().filter(|v| (*v / f).log2().abs() > 0.5).count();
        let mean = voiced.iter().sum::<f64>() / voiced.len() as f64;
        worst = worst.max((mean - f).abs() / f);
    }
    let noise = AudioBuffer::new(white_noise(SR as usize, 0.1, 99), SR).map_err(err)?;
    let nf = extract_features(&noise, &cfg()).map_err(err)?;
    let unvoiced = 1.0 - nf.voiced_count() as f64 / nf.frames() as f64;
    Ok((
        worst <= MAX_REL_ERR && octave_errors == 0 && unvoiced >= MIN_UNVOICED,
        format!(
            "max mean-F0 error {:.3}%, octave errors {octave_errors}, noise unvoiced {:.1}%",
            worst * 100.0,
            unvoiced * 100.0
        ),
    ))
}

fn round_trip() -> Check {
    const MAX_RMSE_HZ: f64 = 5.0;
    const ENERGY: (f64, f64) = (0.9, 1.1);
    let cases: Vec<(&str, AudioBuffer<f64>)> = vec![
        ("120 Hz", vowel(|_| 120.0, 1.0, 0.1)),
        ("180 Hz", vowel(|_| 180.0, 1.0, 0.1)),
        ("220 Hz", vowel(|_| 220.0, 1.0, 0.1)),
        ("300 Hz", vowel(|_| 300.0, 1.0, 0.1)),
        ("glide", vowel(|t| 160.0 + 80.0 * t, 1.2, 0.05)),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, x) in cases {
        let f = extract_features(&x, &cfg()).map_err(err)?;
        let y = synthesize(&f, &SynthConfig::default()).map_err(err)?;
        let g = extract_features(&y, &cfg()).map_err(err)?;
        let (sq, n) = f
            .f0
            .iter()
            .zip(&g.f0)
            .filter(|(a, b)| **a > 0.0 && **b > 0.0)
            .fold((0.0, 0usize), |(s, n), (a, b)| (s + (a - b) * (a - b), n + 1));
        let rmse = if n == 0 { f64::INFINITY } else { (sq / n as f64).sqrt() };
        let ratio = y.rms() / x.rms();
        let hop = f.hop_samples();
        let len_err = (y.len() as f64 - x.len() as f64).abs();
        let ok = rmse <= MAX_RMSE_HZ && (ENERGY.0..=ENERGY.1).contains(&ratio) && len_err <= hop;
        pass &= ok;
        parts.push(format!("{name}: rmse {rmse:.2} Hz, energy {ratio:.3}, len diff {len_err}"));
    }
    Ok((pass, parts.join("; ")))
}

fn manipulation_algebra() -> Check {
    const ENERGY_TOL: f64 = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let c = cfg();

    let x = vowel(|t| 180.0 + 20.0 * t, 0.5, 0.1);
    let f = extract_features(&x, &c).map_err(err)?;
    let fixed = manipulate_features(&f, &ManipulationParams::identity(), &c).map_err(err)? == f;

    // dyadic values keep the arithmetic exact
    let mut diffs_exact = true;
    for _ in 0..200 {
        let f0: Vec<f64> = (0..50)
            .map(|_| if rng.random_bool(0.8) { rng.random_range(9600..25600) as f64 / 64.0 } else { 0.0 })
            .collect();
        let delta = rng.random_range(-3200..3200) as f64 / 64.0;
        let out = shift_pitch(&f0, delta, 71.0, 800.0);
        let voiced: Vec<usize> = (0..f0.len()).filter(|&i| f0[i] > 0.0).collect();
        for &i in &voiced {
            for &j in &voiced {
                diffs_exact &= out[i] - out[j] == f0[i] - f0[j];
            }
        }
    }

    let mut counts_ok = true;
    for _ in 0..1000 {
        let n = rng.random_range(1..=400usize);
        let ratio = rng.random_range(0.1001f64..9.999);
        let feats = synthetic_features(&vec![150.0; n], 64);
        let out = modify_duration(&feats, ratio).map_err(err)?;
        counts_ok &= out.frames() == ((n as f64 * ratio).round() as usize).max(1);
    }

    let base = synthesize(&f, &SynthConfig::default()).map_err(err)?;
    let mut louder = f.clone();
    louder.sp = scale_energy(&f.sp, 4.0).map_err(err)?;
    let loud = synthesize(&louder, &SynthConfig::default()).map_err(err)?;
    let ratio = loud.rms() / base.rms();

    Ok((
        fixed && diffs_exact && counts_ok && (ratio / 2.0 - 1.0).abs() <= ENERGY_TOL,
        format!(
            "identity fixed point {fixed}, pairwise diffs exact {diffs_exact}, 1000 frame counts {counts_ok}, scale_energy(4) RMS ratio {ratio:.3}"
        ),
    ))
}

fn random_features(rng: &mut ChaCha8Rng) -> ProsodicFeatures<f64> {
    let n = rng.random_range(2..300);
    let f0: Vec<f64> = (0..n)
        .map(|i| if i == 0 || rng.random_bool(0.7) { rng.random_range(80.0..400.0) } else { 0.0 })
        .collect();
    let mut f = synthetic_features(&f0, 64);
    f.energy = (0..n).map(|_| rng.random_range(1e-3..1.0)).collect();
    f
}

fn comparison_identities() -> Check {
    const REL: f64 = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut identity = true;
    let mut worst = 0.0f64;
    for _ in 0..300 {
        let a = random_features(&mut rng);
        let b = random_features(&mut rng);
        let s = compare_features(&a, &a).map_err(err)?;
        identity &= s.pitch_diff_hz == 0.0 && s.duration_ratio == 1.0 && s.energy_ratio == 1.0;
        let ab = compare_features(&a, &b).map_err(err)?;
        let ba = compare_features(&b, &a).map_err(err)?;
        let pitch = (ab.pitch_diff_hz + ba.pitch_diff_hz).abs() / ab.pitch_diff_hz.abs().max(1e-300);
        worst = worst
            .max(if ab.pitch_diff_hz == -ba.pitch_diff_hz { 0.0 } else { pitch })
            .max((ab.duration_ratio * ba.duration_ratio - 1.0).abs())
            .max((ab.energy_ratio * ba.energy_ratio - 1.0).abs());
    }
    Ok((identity && worst <= REL, format!("self-compare exact {identity}, max swap deviation {worst:.2e} over 300 draws")))
}

fn io_contracts() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    let samples: Vec<f64> = (0..4000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let wav = dir.path().join("x.wav");
    write_wav(&wav, &AudioBuffer::new(samples.clone(), SR).map_err(err)?).map_err(err)?;
    let back: AudioBuffer<f64> = read_wav(&wav).map_err(err)?;
    let wav_err = samples.iter().zip(&back.samples).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let wav_ok = back.len() == samples.len() && wav_err <= 1.0 / 32768.0;

    let f = extract_features(&vowel(|_| 200.0, 0.3, 0.1), &cfg()).map_err(err)?;
    let features_ok = ProsodicFeatures::from_json(&f.to_json().map_err(err)?).map_err(err)? == f;

    let reports: Vec<_> = (0..5).map(|_| random_report(&mut rng)).collect();
    let tc = TrainingConfig::default();
    let (theta, _) = train_model(&reports, &tc).map_err(err)?;
    let model = TrainedModel::new(&theta, &tc, &reports).map_err(err)?;
    let model_ok = TrainedModel::from_json(&model.to_json().map_err(err)?).map_err(err)? == model;

    let mut annotations_ok = true;
    for _ in 0..50 {
        let rows: Vec<StressAnnotation> = (0..rng.random_range(0..6))
            .map(|i| {
                let words = rng.random_range(0..5);
                let labels = rng.random_range(0..6);
                StressAnnotation {
                    filename: format!("utt_{i}.wav"),
                    word_count: words,
                    label_count: labels,
                    correct_count: rng.random_range(0..=labels),
                    word_labels: (0..words).map(|_| ["HIGH", "LOW", "MID"][rng.random_range(0..3)].to_string()).collect(),
                }
            })
            .collect();
        let text = annotations_to_csv(&rows).map_err(err)?;
        let parsed = parse_annotations(text.as_bytes()).map_err(err)?;
        annotations_ok &= parsed == rows && annotations_to_csv(&parsed).map_err(err)? == text;
    }

    for name in ["h1.wav", "t1.wav", "h2.wav", "t2.wav"] {
        std::fs::copy(&wav, dir.path().join(name)).map_err(err)?;
    }
    let manifest = dir.path().join("m.json");
    let attempt = |pairs: &[(&str, &str, &str)]| {
        let entries: Vec<_> = pairs
            .iter()
            .map(|(id, h, t)| serde_json::json!({"id": id, "human_path": h, "tts_path": t}))
            .collect();
        std::fs::write(&manifest, serde_json::json!({"language_tag": "ITA", "pairs": entries}).to_string()).unwrap();
        load_manifest(&manifest)
    };
    let valid = attempt(&[("a", "h1.wav", "t1.wav"), ("b", "h2.wav", "t2.wav")]).is_ok();
    let dup = matches!(attempt(&[("a", "h1.wav", "t1.wav"), ("a", "h2.wav", "t2.wav")]), Err(Error::DuplicateId(_)));
    let broken = matches!(attempt(&[("a", "h1.wav", "t1.wav"), ("b", "h2.wav", "t1.wav")]), Err(Error::BrokenPairing(_)));
    let missing = matches!(attempt(&[("a", "h1.wav", "absent.wav")]), Err(Error::MissingFile(_)));
    let manifest_ok = valid && dup && broken && missing;

    Ok((
        wav_ok && features_ok && model_ok && annotations_ok && manifest_ok,
        format!(
            "wav max err {:.2e} (limit {:.2e}), features json {features_ok}, model json {model_ok}, annotations {annotations_ok}, manifest mutations {manifest_ok}",
            wav_err,
            1.0 / 32768.0
        ),
    ))
}

fn batch_robustness() -> Check {
    const REL: f64 = 1e-9;
    let bin = env!("CARGO_BIN_EXE_prosody");
    let dir = tempfile::tempdir().map_err(err)?;
    let corpus = dir.path().join("corpus");
    let manifest = generate_fixture_corpus(&corpus, FIXTURE_SEED, &FixtureSpec::default()).map_err(err)?;
    let model = dir.path().join("model.json");
    let status = Command::new(bin)
        .args(["train", corpus.join("manifest.json").to_str().unwrap(), "--out", model.to_str().unwrap()])
        .output()
        .map_err(err)?;
    if !status.status.success() {
        return Err(format!("train failed: {}", String::from_utf8_lossy(&status.stderr)));
    }
    std::fs::write(manifest.tts_path(&manifest.pairs[3]), b"RIFF\x10\x00\x00\x00WAVEjunk").map_err(err)?;

    let out_dir = dir.path().join("out");
    let run = Command::new(bin)
        .args([
            "batch",
            corpus.join("manifest.json").to_str().unwrap(),
            "--model",
            model.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .map_err(err)?;
    let code = run.status.code();
    let wavs = std::fs::read_dir(&out_dir)
        .map_err(err)?
        .filter(|e| e.as_ref().map(|e| e.path().extension().is_some_and(|x| x == "wav")).unwrap_or(false))
        .count();

    let mut rdr = csv::Reader::from_path(out_dir.join("summary.csv")).map_err(err)?;
    let rows: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>().map_err(err)?;
    let (mean_row, pair_rows) = rows.split_last().ok_or("empty summary")?;
    let failed = pair_rows.iter().filter(|r| &r[1] == "failed").count();
    let mut means_ok = &mean_row[0] == "mean";
    for col in 2..8 {
        let values: Vec<f64> = pair_rows
            .iter()
            .filter(|r| &r[1] == "ok")
            .map(|r| r[col].parse::<f64>().unwrap())
            .collect();
        let expect = values.iter().sum::<f64>() / values.len() as f64;
        let got: f64 = mean_row[col].parse().map_err(err)?;
        means_ok &= (got - expect).abs() <= REL * expect.abs().max(1.0);
    }
    Ok((
        code == Some(2) && wavs == 7 && pair_rows.len() == 8 && failed == 1 && means_ok,
        format!("exit {code:?}, {wavs} outputs, {} rows, {failed} failed, means consistent {means_ok}", pair_rows.len()),
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("metric recovery", metric_recovery),
        ("training curve", training_curve),
        ("learner vs oracle", learner_oracle),
        ("gradient check", gradient_check),
        ("pitch tracker", pitch_tracker),
        ("analysis-synthesis round trip", round_trip),
        ("manipulation algebra", manipulation_algebra),
        ("comparison identities", comparison_identities),
        ("I/O contracts", io_contracts),
        ("batch robustness", batch_robustness),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let (pass, detail) = match outcome {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {:<30} {}  {detail}",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
