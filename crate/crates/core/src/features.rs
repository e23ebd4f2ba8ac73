//! Frame-level prosodic analysis: F0 with voicing confidence, RMS energy,
//! smoothed power spectral envelope and band-constant aperiodicity.

use std::path::Path;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio_io::AudioBuffer;
use crate::dsp::{frame_at, hann, FftPair};
use crate::error::{Error, Result};
use crate::real::Real;

/// Normalized-autocorrelation peak a frame needs to count as voiced.
pub const VOICING_THRESHOLD: f64 = 0.45;
/// Frames quieter than this RMS are never voiced.
pub const SILENCE_GATE: f64 = 1e-4;
/// Lower bound applied to every spectral envelope bin.
pub const SP_FLOOR: f64 = 1e-12;
/// Lower clamp on voiced-frame aperiodicity.
pub const AP_MIN: f64 = 0.01;
/// A later autocorrelation peak only wins over an earlier one if the earlier
/// one falls below this fraction of the best peak.
const OCTAVE_GUARD: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig<T> {
    pub frame_period_ms: T,
    pub f0_floor: T,
    pub f0_ceil: T,
    pub fft_size: usize,
}

impl<T: Real> Default for AnalysisConfig<T> {
    fn default() -> Self {
        Self {
            frame_period_ms: T::lit(5.0),
            f0_floor: T::lit(71.0),
            f0_ceil: T::lit(800.0),
            fft_size: 1024,
        }
    }
}

impl<T: Real> AnalysisConfig<T> {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let sr = sample_rate as f64;
        let (fp, lo, hi) = (
            self.frame_period_ms.as_f64(),
            self.f0_floor.as_f64(),
            self.f0_ceil.as_f64(),
        );
        if !(fp > 0.0 && fp.is_finite()) {
            return Err(Error::InvalidConfig(format!("frame period {fp} ms")));
        }
        if !(lo > 0.0 && lo < hi && hi < sr / 2.0) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < f0_floor < f0_ceil < {}; got [{lo}, {hi}]",
                sr / 2.0
            )));
        }
        if !self.fft_size.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "fft_size {} is not a power of two",
                self.fft_size
            )));
        }
        if (self.fft_size as f64) < 2.0 * sr / lo {
            return Err(Error::InvalidConfig(format!(
                "fft_size {} holds fewer than two periods of {lo} Hz",
                self.fft_size
            )));
        }
        Ok(())
    }

    pub fn hop_samples(&self, sample_rate: u32) -> f64 {
        sample_rate as f64 * self.frame_period_ms.as_f64() / 1000.0
    }
}

/// Frame instants shared by all extractors. Frame `i` is centered on sample
/// `round(i · hop)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FrameGrid {
    pub hop: f64,
    pub frames: usize,
}

impl FrameGrid {
    pub fn new<T: Real>(len: usize, sample_rate: u32, cfg: &AnalysisConfig<T>) -> Result<Self> {
        let hop = cfg.hop_samples(sample_rate);
        let frames = frame_count(len, hop);
        if frames == 0 {
            return Err(Error::BufferTooShort {
                samples: len,
                needed: hop.ceil() as usize,
            });
        }
        Ok(Self { hop, frames })
    }

    pub fn center(&self, i: usize) -> isize {
        (i as f64 * self.hop).round() as isize
    }

    pub fn hop_len(&self) -> usize {
        self.hop.round().max(1.0) as usize
    }
}

/// `floor(len / hop)`, tolerant of the rounding in `hop` itself.
pub fn frame_count(len: usize, hop: f64) -> usize {
    (len as f64 / hop + 1e-9).floor() as usize
}

/// Frame-aligned prosodic features of one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProsodicFeatures<T> {
    /// Hz; 0 marks an unvoiced frame.
    pub f0: Vec<T>,
    pub periodicity: Vec<T>,
    /// Power envelope, one row of `fft_size / 2 + 1` bins per frame.
    pub sp: Vec<Vec<T>>,
    /// Aperiodicity in [0, 1], same shape as `sp`.
    pub ap: Vec<Vec<T>>,
    pub energy: Vec<T>,
    pub frame_period_ms: T,
    pub sample_rate: u32,
    pub fft_size: usize,
}

impl<T: Real> ProsodicFeatures<T> {
    pub fn frames(&self) -> usize {
        self.f0.len()
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn is_voiced(&self, i: usize) -> bool {
        self.f0[i] > T::zero()
    }

    pub fn voiced_count(&self) -> usize {
        self.f0.iter().filter(|&&f| f > T::zero()).count()
    }

    pub fn voiced_f0(&self) -> impl Iterator<Item = T> + '_ {
        self.f0.iter().copied().filter(|&f| f > T::zero())
    }

    pub fn hop_samples(&self) -> f64 {
        self.sample_rate as f64 * self.frame_period_ms.as_f64() / 1000.0
    }

    pub fn duration_secs(&self) -> f64 {
        self.frames() as f64 * self.frame_period_ms.as_f64() / 1000.0
    }

    /// Structural invariants: shared frame count, matrix shapes, value
    /// ranges, finiteness, and `ap = 1` on unvoiced frames.
    pub fn validate(&self) -> Result<()> {
        let n = self.f0.len();
        let bins = self.bins();
        let bad = |msg: String| Err(Error::InvariantViolation(msg));
        if n == 0 {
            return bad("feature set has no frames".into());
        }
        if self.sample_rate == 0 || !(self.frame_period_ms > T::zero()) || self.fft_size < 2 {
            return bad("invalid frame geometry".into());
        }
        for (name, len) in [
            ("periodicity", self.periodicity.len()),
            ("sp", self.sp.len()),
            ("ap", self.ap.len()),
            ("energy", self.energy.len()),
        ] {
            if len != n {
                return bad(format!("{name} has {len} frames, f0 has {n}"));
            }
        }
        for i in 0..n {
            let f0 = self.f0[i];
            if !f0.is_finite() || f0 < T::zero() {
                return bad(format!("f0[{i}] = {f0}"));
            }
            let p = self.periodicity[i];
            if !(p >= T::zero() && p <= T::one()) {
                return bad(format!("periodicity[{i}] = {p}"));
            }
            let e = self.energy[i];
            if !e.is_finite() || e < T::zero() {
                return bad(format!("energy[{i}] = {e}"));
            }
            if self.sp[i].len() != bins || self.ap[i].len() != bins {
                return bad(format!("frame {i} has wrong bin count"));
            }
            if let Some(v) = self.sp[i].iter().find(|v| !v.is_finite() || **v < T::zero()) {
                return bad(format!("sp[{i}] contains {v}"));
            }
            if let Some(v) = self.ap[i].iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
                return bad(format!("ap[{i}] contains {v}"));
            }
            if f0 == T::zero() && self.ap[i].iter().any(|&v| v != T::one()) {
                return bad(format!("unvoiced frame {i} has ap below 1"));
            }
        }
        Ok(())
    }

    /// Checks voiced F0 values against an analysis range.
    pub fn validate_f0_range(&self, f0_floor: T, f0_ceil: T) -> Result<()> {
        match self
            .f0
            .iter()
            .position(|&f| f > T::zero() && (f < f0_floor || f > f0_ceil))
        {
            Some(i) => Err(Error::InvariantViolation(format!(
                "voiced f0[{i}] = {} outside [{f0_floor}, {f0_ceil}]",
                self.f0[i]
            ))),
            None => Ok(()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::json("features", e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(text).map_err(|e| Error::json("features", e))?;
        f.validate()?;
        Ok(f)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Per-frame F0 (0 = unvoiced) and voicing confidence from a normalized
/// cross-correlation pitch tracker.
///
/// Each frame correlates a fixed-length integration window against lagged
/// copies of itself over `[sr / f0_ceil, sr / f0_floor]`. The earliest local
/// maximum within [`OCTAVE_GUARD`] of the best one is refined by parabolic
/// interpolation; a frame is voiced when that peak reaches
/// [`VOICING_THRESHOLD`] and the frame is louder than [`SILENCE_GATE`].
pub fn estimate_f0<T: Real>(
    audio: &AudioBuffer<T>,
    cfg: &AnalysisConfig<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    cfg.validate(audio.sample_rate)?;
    let grid = FrameGrid::new(audio.len(), audio.sample_rate, cfg)?;
    let sr = audio.sample_rate as f64;
    let floor = cfg.f0_floor.as_f64();
    let ceil = cfg.f0_ceil.as_f64();
    let lag_min = ((sr / ceil).floor() as usize).max(2);
    let lag_max = (sr / floor).ceil() as usize;
    let win = cfg.fft_size;
    let integ = win - lag_max - 2;

    let mut seg = vec![T::zero(); win];
    let mut seg64 = vec![0.0f64; win];
    let mut prefix = vec![0.0f64; win + 1];
    let mut corr = vec![0.0f64; lag_max + 2];
    let mut f0 = Vec::with_capacity(grid.frames);
    let mut periodicity = Vec::with_capacity(grid.frames);

    for i in 0..grid.frames {
        frame_at(&audio.samples, grid.center(i) - (win / 2) as isize, &mut seg);
        for (d, s) in seg64.iter_mut().zip(&seg) {
            *d = s.as_f64();
        }
        for n in 0..win {
            prefix[n + 1] = prefix[n] + seg64[n] * seg64[n];
        }
        let rms = (prefix[win] / win as f64).sqrt();
        let e0 = prefix[integ];
        let tiny = integ as f64 * 1e-14;

        for lag in lag_min - 1..=lag_max + 1 {
            let el = prefix[lag + integ] - prefix[lag];
            corr[lag] = if e0 > tiny && el > tiny {
                let num: f64 = seg64[..integ]
                    .iter()
                    .zip(&seg64[lag..lag + integ])
                    .map(|(a, b)| a * b)
                    .sum();
                num / (e0 * el).sqrt()
            } else {
                0.0
            };
        }

        let peaks: Vec<usize> = (lag_min..=lag_max)
            .filter(|&l| corr[l] > corr[l - 1] && corr[l] >= corr[l + 1])
            .collect();
        let best = peaks.iter().map(|&l| corr[l]).fold(f64::NEG_INFINITY, f64::max);

        let (freq, peak) = match peaks
            .iter()
            .copied()
            .find(|&l| best > 0.0 && corr[l] >= OCTAVE_GUARD * best)
        {
            Some(l) => {
                let (a, b, c) = (corr[l - 1], corr[l], corr[l + 1]);
                let denom = a - 2.0 * b + c;
                let (delta, value) = if denom < 0.0 {
                    let d = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
                    (d, b - 0.25 * (a - c) * d)
                } else {
                    (0.0, b)
                };
                (sr / (l as f64 + delta), value)
            }
            None => (0.0, corr[lag_min..=lag_max].iter().copied().fold(0.0, f64::max)),
        };

        let confidence = peak.clamp(0.0, 1.0);
        let voiced = freq > 0.0 && peak >= VOICING_THRESHOLD && rms >= SILENCE_GATE;
        f0.push(T::lit(if voiced { freq.clamp(floor, ceil) } else { 0.0 }));
        periodicity.push(T::lit(confidence));
    }
    Ok((f0, periodicity))
}

/// Per-frame RMS over a Hann window of two hops centered on each frame
/// instant, weighted so that a constant-amplitude signal reports its own
/// RMS: `sqrt(Σ w²x² / Σ w²)`.
pub fn frame_energy<T: Real>(audio: &AudioBuffer<T>, cfg: &AnalysisConfig<T>) -> Result<Vec<T>> {
    cfg.validate(audio.sample_rate)?;
    let grid = FrameGrid::new(audio.len(), audio.sample_rate, cfg)?;
    let len = 2 * grid.hop_len();
    let window: Vec<T> = hann(len);
    let norm: T = window.iter().map(|&w| w * w).sum();
    let mut seg = vec![T::zero(); len];
    Ok((0..grid.frames)
        .map(|i| {
            frame_at(&audio.samples, grid.center(i) - (len / 2) as isize, &mut seg);
            let acc: T = seg
                .iter()
                .zip(&window)
                .map(|(&x, &w)| (w * x) * (w * x))
                .sum();
            (acc / norm).sqrt()
        })
        .collect())
}

/// Smoothed STFT power envelope. Each frame's `|FFT(hann · x)|² / fft_size`
/// is averaged over a band of `max(f0, f0_floor)` Hz around every bin, then
/// floored at [`SP_FLOOR`].
pub fn spectral_envelope<T: Real>(
    audio: &AudioBuffer<T>,
    f0: &[T],
    cfg: &AnalysisConfig<T>,
) -> Result<Vec<Vec<T>>> {
    cfg.validate(audio.sample_rate)?;
    let grid = FrameGrid::new(audio.len(), audio.sample_rate, cfg)?;
    if f0.len() != grid.frames {
        return Err(Error::FrameMismatch {
            expected: grid.frames,
            actual: f0.len(),
        });
    }
    let size = cfg.fft_size;
    let bins = size / 2 + 1;
    let sr = audio.sample_rate as f64;
    let window: Vec<T> = hann(size);
    let mut planner = FftPlanner::new();
    let fft = FftPair::new(&mut planner, size);
    let mut seg = vec![T::zero(); size];
    let mut power = vec![0.0f64; bins];
    let mut prefix = vec![0.0f64; bins + 1];
    let inv_size = 1.0 / size as f64;

    Ok((0..grid.frames)
        .map(|i| {
            frame_at(&audio.samples, grid.center(i) - (size / 2) as isize, &mut seg);
            for (s, &w) in seg.iter_mut().zip(&window) {
                *s = *s * w;
            }
            let spec = fft.forward_real(&seg);
            for k in 0..bins {
                power[k] = spec[k].norm_sqr().as_f64() * inv_size;
                prefix[k + 1] = prefix[k] + power[k];
            }
            let bandwidth = f0[i].as_f64().max(cfg.f0_floor.as_f64());
            let half = ((bandwidth * size as f64 / sr) / 2.0).floor() as usize;
            (0..bins)
                .map(|k| {
                    let lo = k.saturating_sub(half);
                    let hi = (k + half).min(bins - 1);
                    let avg = (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64;
                    T::lit(avg.max(SP_FLOOR))
                })
                .collect()
        })
        .collect())
}

/// Band-constant aperiodicity: `clamp(1 − periodicity, AP_MIN, 1)` on voiced
/// frames, 1 on unvoiced frames.
pub fn aperiodicity<T: Real>(
    audio: &AudioBuffer<T>,
    f0: &[T],
    periodicity: &[T],
    cfg: &AnalysisConfig<T>,
) -> Result<Vec<Vec<T>>> {
    let grid = FrameGrid::new(audio.len(), audio.sample_rate, cfg)?;
    for len in [f0.len(), periodicity.len()] {
        if len != grid.frames {
            return Err(Error::FrameMismatch {
                expected: grid.frames,
                actual: len,
            });
        }
    }
    let bins = cfg.fft_size / 2 + 1;
    Ok(f0
        .iter()
        .zip(periodicity)
        .map(|(&f, &p)| vec![band_aperiodicity(f, p); bins])
        .collect())
}

pub(crate) fn band_aperiodicity<T: Real>(f0: T, periodicity: T) -> T {
    if f0 > T::zero() {
        (T::one() - periodicity).max(T::lit(AP_MIN)).min(T::one())
    } else {
        T::one()
    }
}

/// Runs all four extractors on one buffer.
pub fn extract_features<T: Real>(
    audio: &AudioBuffer<T>,
    cfg: &AnalysisConfig<T>,
) -> Result<ProsodicFeatures<T>> {
    cfg.validate(audio.sample_rate)?;
    if let Some((index, value)) = audio
        .samples
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite())
    {
        return Err(Error::Precondition(format!(
            "non-finite sample {value} at index {index}"
        )));
    }
    let (f0, periodicity) = estimate_f0(audio, cfg)?;
    let energy = frame_energy(audio, cfg)?;
    let sp = spectral_envelope(audio, &f0, cfg)?;
    let ap = aperiodicity(audio, &f0, &periodicity, cfg)?;
    Ok(ProsodicFeatures {
        f0,
        periodicity,
        sp,
        ap,
        energy,
        frame_period_ms: cfg.frame_period_ms,
        sample_rate: audio.sample_rate,
        fft_size: cfg.fft_size,
    })
}
