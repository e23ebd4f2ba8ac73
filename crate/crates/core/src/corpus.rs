//! Paired human/TTS registries, stress-annotation tables and the synthetic
//! fixture corpus.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio_io::{write_wav, AudioBuffer, CANONICAL_RATE};
use crate::error::{Error, Result};
use crate::signals::{harmonic_source, rms, vowel_filter, VOWEL_FORMANTS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairEntry {
    pub id: String,
    pub human_path: PathBuf,
    pub tts_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation_id: Option<String>,
}

/// Explicit one-to-one pairing of human and TTS recordings. Relative paths
/// resolve against the directory holding the manifest file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub language_tag: String,
    pub pairs: Vec<PairEntry>,
    /// Optional annotations CSV, relative like the audio paths.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<PathBuf>,
    #[serde(skip)]
    pub root: PathBuf,
}

impl CorpusManifest {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.root.join(path)
        }
    }

    pub fn human_path(&self, pair: &PairEntry) -> PathBuf {
        self.resolve(&pair.human_path)
    }

    pub fn tts_path(&self, pair: &PairEntry) -> PathBuf {
        self.resolve(&pair.tts_path)
    }

    /// Checks, in order: schema, id uniqueness, one-to-one pairing, file
    /// existence.
    pub fn validate(&self) -> Result<()> {
        if self.language_tag.trim().is_empty() {
            return Err(Error::SchemaViolation("empty language_tag".into()));
        }
        for (i, p) in self.pairs.iter().enumerate() {
            if p.id.trim().is_empty() {
                return Err(Error::SchemaViolation(format!("pair {i} has an empty id")));
            }
            if p.human_path.as_os_str().is_empty() || p.tts_path.as_os_str().is_empty() {
                return Err(Error::SchemaViolation(format!("pair {:?} has an empty path", p.id)));
            }
        }
        let mut ids = HashSet::new();
        for p in &self.pairs {
            if !ids.insert(p.id.as_str()) {
                return Err(Error::DuplicateId(p.id.clone()));
            }
        }
        let mut seen = HashSet::new();
        for p in &self.pairs {
            for path in [self.human_path(p), self.tts_path(p)] {
                if !seen.insert(path.clone()) {
                    return Err(Error::BrokenPairing(path));
                }
            }
        }
        for p in &self.pairs {
            for path in [self.human_path(p), self.tts_path(p)] {
                if !path.is_file() {
                    return Err(Error::MissingFile(path));
                }
            }
        }
        if let Some(a) = &self.annotations {
            let path = self.resolve(a);
            if !path.is_file() {
                return Err(Error::MissingFile(path));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("manifest", e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// Loaded annotations, if the manifest names a table.
    pub fn load_annotations(&self) -> Result<Option<Vec<StressAnnotation>>> {
        self.annotations
            .as_ref()
            .map(|a| load_annotations(self.resolve(a)))
            .transpose()
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<CorpusManifest> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest: CorpusManifest = serde_json::from_str(&text)
        .map_err(|e| Error::SchemaViolation(format!("{}: {e}", path.display())))?;
    manifest.root = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    manifest.validate()?;
    Ok(manifest)
}

pub const ANNOTATION_HEADER: [&str; 5] =
    ["filename", "word_count", "label_count", "correct_count", "word_labels"];

/// Per-file stress-annotation row. Carried as metadata; it does not feed
/// the loss or the manipulation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StressAnnotation {
    pub filename: String,
    pub word_count: usize,
    pub label_count: usize,
    pub correct_count: usize,
    pub word_labels: Vec<String>,
}

impl StressAnnotation {
    fn check(&self, row: usize) -> Result<()> {
        if self.correct_count > self.label_count {
            return Err(Error::AnnotationInvalid {
                row,
                message: format!(
                    "correct_count {} exceeds label_count {}",
                    self.correct_count, self.label_count
                ),
            });
        }
        if !self.word_labels.is_empty() && self.word_labels.len() != self.word_count {
            return Err(Error::AnnotationInvalid {
                row,
                message: format!(
                    "{} word labels for word_count {}",
                    self.word_labels.len(),
                    self.word_count
                ),
            });
        }
        if self.word_labels.iter().any(|l| l.is_empty() || l.contains('|')) {
            return Err(Error::AnnotationInvalid {
                row,
                message: "word labels must be non-empty and free of '|'".into(),
            });
        }
        Ok(())
    }
}

pub fn parse_annotations(reader: impl Read) -> Result<Vec<StressAnnotation>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r?,
        None => {
            return Err(Error::HeaderMismatch {
                expected: ANNOTATION_HEADER.join(","),
                found: String::new(),
            })
        }
    };
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != ANNOTATION_HEADER {
        return Err(Error::HeaderMismatch {
            expected: ANNOTATION_HEADER.join(","),
            found: found.join(","),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 2;
        let rec = rec?;
        if rec.len() != ANNOTATION_HEADER.len() {
            return Err(Error::RowArity {
                row,
                expected: ANNOTATION_HEADER.len(),
                found: rec.len(),
            });
        }
        let count = |k: usize| -> Result<usize> {
            rec[k].trim().parse().map_err(|_| Error::AnnotationInvalid {
                row,
                message: format!("{} is not a nonnegative integer: {:?}", ANNOTATION_HEADER[k], &rec[k]),
            })
        };
        let labels = rec[4].trim();
        let a = StressAnnotation {
            filename: rec[0].to_string(),
            word_count: count(1)?,
            label_count: count(2)?,
            correct_count: count(3)?,
            word_labels: if labels.is_empty() {
                Vec::new()
            } else {
                labels.split('|').map(str::to_string).collect()
            },
        };
        a.check(row)?;
        out.push(a);
    }
    Ok(out)
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<StressAnnotation>> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(file)
}

pub fn write_annotations(writer: impl Write, rows: &[StressAnnotation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ANNOTATION_HEADER)?;
    for (i, a) in rows.iter().enumerate() {
        a.check(i + 2)?;
        w.write_record([
            a.filename.clone(),
            a.word_count.to_string(),
            a.label_count.to_string(),
            a.correct_count.to_string(),
            a.word_labels.join("|"),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<annotation writer>", e))
}

pub fn annotations_to_csv(rows: &[StressAnnotation]) -> Result<String> {
    let mut buf = Vec::new();
    write_annotations(&mut buf, rows)?;
    String::from_utf8(buf).map_err(|e| Error::InvariantViolation(e.to_string()))
}

/// Discrepancies injected into the synthetic corpus. Each "TTS" file is its
/// human partner detuned by `pitch_offset_hz`, stretched in time by
/// `duration_factor` and scaled in amplitude by `energy_factor`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub pairs: usize,
    pub pitch_offset_hz: f64,
    pub duration_factor: f64,
    pub energy_factor: f64,
    pub human_secs: f64,
    /// Relative depth of the slow F0 contour on each utterance.
    pub intonation: f64,
    /// Relative per-pair jitter on the three injected discrepancies.
    pub perturbation: f64,
    pub base_f0_range: (f64, f64),
    pub language_tag: String,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            pairs: 8,
            pitch_offset_hz: 30.0,
            duration_factor: 1.0 / 0.85,
            energy_factor: 0.8,
            human_secs: 1.0,
            intonation: 0.05,
            perturbation: 0.05,
            base_f0_range: (150.0, 300.0),
            language_tag: "FIX".into(),
        }
    }
}

impl FixtureSpec {
    /// Same construction with nothing injected: every pair is self-identical.
    pub fn identical() -> Self {
        Self {
            pitch_offset_hz: 0.0,
            duration_factor: 1.0,
            energy_factor: 1.0,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.base_f0_range;
        if self.pairs == 0
            || !(self.duration_factor > 0.0)
            || !(self.energy_factor > 0.0)
            || !(self.human_secs > 0.0)
            || !(lo > 0.0 && lo <= hi)
            || !(0.0..1.0).contains(&self.intonation)
            || !(0.0..1.0).contains(&self.perturbation)
        {
            return Err(Error::InvalidConfig(format!("fixture spec {self:?}")));
        }
        Ok(())
    }
}

const FIXTURE_RMS: f64 = 0.1;

fn render_voice(contour: impl Fn(f64) -> f64, secs: f64, target_rms: f64) -> Vec<f64> {
    let rate = CANONICAL_RATE;
    let len = (secs * rate as f64).round() as usize;
    let source = harmonic_source(contour, rate, len, 1.0);
    let mut y = vowel_filter(&source, &VOWEL_FORMANTS, rate);
    let r = rms(&y);
    if r > 0.0 {
        y.iter_mut().for_each(|v| *v *= target_rms / r);
    }
    y
}

/// Writes `spec.pairs` human/TTS WAV pairs plus `manifest.json` under
/// `out_dir`. Output is bit-identical for a given seed and spec.
pub fn generate_fixture_corpus(
    out_dir: impl AsRef<Path>,
    seed: u64,
    spec: &FixtureSpec,
) -> Result<CorpusManifest> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    for sub in ["human", "tts"] {
        let d = out_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(spec.pairs);
    for i in 0..spec.pairs {
        let base = rng.random_range(spec.base_f0_range.0..=spec.base_f0_range.1);
        let cycles = rng.random_range(0.5..1.5);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let mut jitter = || 1.0 + spec.perturbation * rng.random_range(-1.0..=1.0);
        let offset = spec.pitch_offset_hz * jitter();
        let stretch = spec.duration_factor.powf(jitter());
        let gain = spec.energy_factor.powf(jitter());

        let secs = spec.human_secs;
        let depth = spec.intonation;
        let contour = move |t: f64| {
            base * (1.0 + depth * (std::f64::consts::TAU * cycles * t / secs + phase).sin())
        };
        let human = render_voice(contour, secs, FIXTURE_RMS);
        let tts = render_voice(
            |t| contour(t / stretch) - offset,
            secs * stretch,
            FIXTURE_RMS * gain,
        );

        let id = format!("pair_{i:02}");
        let human_rel = PathBuf::from("human").join(format!("{id}.wav"));
        let tts_rel = PathBuf::from("tts").join(format!("{id}.wav"));
        write_wav(out_dir.join(&human_rel), &AudioBuffer::new(human, CANONICAL_RATE)?)?;
        write_wav(out_dir.join(&tts_rel), &AudioBuffer::new(tts, CANONICAL_RATE)?)?;
        pairs.push(PairEntry {
            id,
            human_path: human_rel,
            tts_path: tts_rel,
            annotation_id: None,
        });
    }
    let manifest = CorpusManifest {
        language_tag: spec.language_tag.clone(),
        pairs,
        annotations: None,
        root: out_dir.to_path_buf(),
    };
    manifest.save(out_dir.join("manifest.json"))?;
    manifest.validate()?;
    Ok(manifest)
}
