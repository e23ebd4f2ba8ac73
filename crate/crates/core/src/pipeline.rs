//! File-level workflows shared by the command-line tool: analyze a WAV,
//! compare a pair, measure a corpus, and correct a corpus in batch.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::audio_io::{read_wav, write_wav, AudioBuffer};
use crate::compare::{compare_features, ComparisonReport};
use crate::corpus::CorpusManifest;
use crate::error::{Error, Result};
use crate::features::{extract_features, AnalysisConfig, ProsodicFeatures};
use crate::manipulate::{manipulate_features, ManipulationParams};
use crate::real::Real;
use crate::synth::{synthesize, SynthConfig};

/// Reads a WAV, converts it to the canonical rate and extracts features.
pub fn analyze_file<T: Real>(
    path: impl AsRef<Path>,
    cfg: &AnalysisConfig<T>,
) -> Result<ProsodicFeatures<T>> {
    let audio: AudioBuffer<T> = read_wav(path)?;
    extract_features(&audio.into_canonical()?, cfg)
}

pub fn compare_files<T: Real>(
    human: impl AsRef<Path>,
    tts: impl AsRef<Path>,
    cfg: &AnalysisConfig<T>,
) -> Result<ComparisonReport<T>> {
    compare_features(&analyze_file(human, cfg)?, &analyze_file(tts, cfg)?)
}

/// Comparison report for every pair, in manifest order. Pairs are measured
/// in parallel; the first failure is returned.
pub fn corpus_reports<T: Real>(
    manifest: &CorpusManifest,
    cfg: &AnalysisConfig<T>,
) -> Result<Vec<ComparisonReport<T>>> {
    if manifest.pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    manifest
        .pairs
        .par_iter()
        .map(|p| compare_files(manifest.human_path(p), manifest.tts_path(p), cfg))
        .collect()
}

/// Analyzes `input`, applies `params`, resynthesizes and writes `output`.
pub fn process_file<T: Real>(
    input: impl AsRef<Path>,
    output: impl AsRef<Path>,
    params: &ManipulationParams<T>,
    analysis: &AnalysisConfig<T>,
    synth: &SynthConfig,
) -> Result<AudioBuffer<T>> {
    let features = analyze_file(input, analysis)?;
    let manipulated = manipulate_features(&features, params, analysis)?;
    let audio = synthesize(&manipulated, synth)?;
    write_wav(output, &audio)?;
    Ok(audio)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRow<T> {
    pub id: String,
    pub output: Option<PathBuf>,
    pub before: Option<ComparisonReport<T>>,
    pub after: Option<ComparisonReport<T>>,
    pub error: Option<String>,
}

impl<T: Real> BatchRow<T> {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary<T> {
    pub rows: Vec<BatchRow<T>>,
}

/// Mean of (pitch_diff, duration_ratio, energy_ratio) over reports.
pub fn mean_triple<'a, T: Real + 'a>(
    reports: impl Iterator<Item = &'a ComparisonReport<T>>,
) -> Option<[T; 3]> {
    let (sum, n) = reports.fold(([T::zero(); 3], 0usize), |(s, n), r| {
        (
            [
                s[0] + r.pitch_diff_hz,
                s[1] + r.duration_ratio,
                s[2] + r.energy_ratio,
            ],
            n + 1,
        )
    });
    (n > 0).then(|| sum.map(|v| v / T::of_usize(n)))
}

pub const SUMMARY_HEADER: [&str; 9] = [
    "id",
    "status",
    "pitch_diff_before",
    "duration_ratio_before",
    "energy_ratio_before",
    "pitch_diff_after",
    "duration_ratio_after",
    "energy_ratio_after",
    "error",
];

impl<T: Real> BatchSummary<T> {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.succeeded()).count()
    }

    pub fn mean_before(&self) -> Option<[T; 3]> {
        mean_triple(self.rows.iter().filter(|r| r.succeeded()).filter_map(|r| r.before.as_ref()))
    }

    pub fn mean_after(&self) -> Option<[T; 3]> {
        mean_triple(self.rows.iter().filter(|r| r.succeeded()).filter_map(|r| r.after.as_ref()))
    }

    /// One row per pair followed by a `mean` row over the successful pairs.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(SUMMARY_HEADER)?;
        let triple = |r: Option<&ComparisonReport<T>>| -> [String; 3] {
            match r {
                Some(r) => [
                    r.pitch_diff_hz.to_string(),
                    r.duration_ratio.to_string(),
                    r.energy_ratio.to_string(),
                ],
                None => Default::default(),
            }
        };
        for row in &self.rows {
            let [pb, db, eb] = triple(row.before.as_ref());
            let [pa, da, ea] = triple(row.after.as_ref());
            let status = if row.succeeded() { "ok" } else { "failed" };
            let error = row.error.clone().unwrap_or_default();
            w.write_record([row.id.clone(), status.into(), pb, db, eb, pa, da, ea, error])?;
        }
        let fmt = |m: Option<[T; 3]>| -> [String; 3] {
            m.map(|v| v.map(|x| x.to_string())).unwrap_or_default()
        };
        let [pb, db, eb] = fmt(self.mean_before());
        let [pa, da, ea] = fmt(self.mean_after());
        w.write_record(["mean".into(), String::new(), pb, db, eb, pa, da, ea, String::new()])?;
        w.flush().map_err(|e| Error::io("<summary writer>", e))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }
}

fn batch_pair<T: Real>(
    manifest: &CorpusManifest,
    index: usize,
    params: &ManipulationParams<T>,
    analysis: &AnalysisConfig<T>,
    synth: &SynthConfig,
    out_dir: &Path,
) -> Result<(PathBuf, ComparisonReport<T>, ComparisonReport<T>)> {
    let pair = &manifest.pairs[index];
    let human = analyze_file(manifest.human_path(pair), analysis)?;
    let tts = analyze_file(manifest.tts_path(pair), analysis)?;
    let before = compare_features(&human, &tts)?;
    let out = out_dir.join(format!("{}.wav", pair.id));
    let cfg = SynthConfig {
        noise_seed: synth.noise_seed.wrapping_add(index as u64),
    };
    let audio = synthesize(&manipulate_features(&tts, params, analysis)?, &cfg)?;
    write_wav(&out, &audio)?;
    let after = compare_features(&human, &analyze_file(&out, analysis)?)?;
    Ok((out, before, after))
}

/// Corrects every TTS file of the corpus with `params` and measures each
/// pair before and after. A failing pair is recorded and does not stop the
/// run. Pair `i` uses noise seed `synth.noise_seed + i`.
pub fn process_all_files<T: Real>(
    manifest: &CorpusManifest,
    params: &ManipulationParams<T>,
    analysis: &AnalysisConfig<T>,
    synth: &SynthConfig,
    out_dir: impl AsRef<Path>,
) -> Result<BatchSummary<T>> {
    if manifest.pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    params.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let rows = (0..manifest.pairs.len())
        .into_par_iter()
        .map(|i| {
            let id = manifest.pairs[i].id.clone();
            match batch_pair(manifest, i, params, analysis, synth, out_dir) {
                Ok((out, before, after)) => BatchRow {
                    id,
                    output: Some(out),
                    before: Some(before),
                    after: Some(after),
                    error: None,
                },
                Err(e) => BatchRow {
                    id,
                    output: None,
                    before: None,
                    after: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(BatchSummary { rows })
}
