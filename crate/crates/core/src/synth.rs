//! Pulse-plus-noise source-filter vocoder.
//!
//! The excitation is a global pulse train (one pulse per F0 period, phase
//! integrated sample by sample) plus seeded white noise. Each sample of the
//! excitation is split between its two nearest frames with complementary
//! Hann weights of length two hops, so the pieces sum back to the original
//! excitation exactly. Every frame filters its piece with two
//! minimum-phase responses derived from the envelope: `sqrt(sp · (1 − ap))`
//! for the pulses and `sqrt(sp · ap)` for the noise. The filtered pieces are
//! overlap-added into the output.
//!
//! Gain is calibrated so that a flat-envelope frame measured with the
//! analysis window reproduces the power it was measured from. The pulse
//! branch is further leveled per frame so that it carries the envelope's
//! mean power whatever the F0.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio_io::AudioBuffer;
use crate::dsp::{hann, minimum_phase_response, FftPair};
use crate::error::{Error, Result};
use crate::features::{extract_features, AnalysisConfig, ProsodicFeatures};
use crate::manipulate::{manipulate_features, ManipulationParams};
use crate::real::Real;

/// Floor for the harmonic/noise power fractions before taking logs.
const MIX_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SynthConfig {
    pub noise_seed: u64,
}

/// Partition of the output timeline into per-frame Hann weights.
struct Partition {
    hop: f64,
    half: usize,
    frames: usize,
}

impl Partition {
    fn center(&self, i: usize) -> isize {
        (i as f64 * self.hop).round() as isize
    }

    fn window(&self, offset: isize) -> f64 {
        // offset relative to the frame center, support [-half, half)
        let len = 2 * self.half;
        let pos = offset + self.half as isize;
        if pos < 0 || pos as usize >= len {
            return 0.0;
        }
        let s = (std::f64::consts::PI * (pos as f64 + 0.5) / len as f64).sin();
        s * s
    }

    /// The (at most two) frames sharing sample `n` and their normalized
    /// weights. Frames past either end fold onto the edge frames.
    fn weights(&self, n: usize) -> [(usize, f64); 2] {
        let n = n as isize;
        let mut i0 = ((n as f64) / self.hop).floor() as isize;
        while i0 > 0 && self.center(i0 as usize) > n {
            i0 -= 1;
        }
        while self.center((i0 + 1) as usize) <= n {
            i0 += 1;
        }
        let i0u = i0 as usize;
        let w0 = self.window(n - self.center(i0u));
        let w1 = self.window(n - self.center(i0u + 1));
        let total = w0 + w1;
        let last = self.frames - 1;
        if total <= 0.0 {
            return [(i0u.min(last), 1.0), ((i0u + 1).min(last), 0.0)];
        }
        [(i0u.min(last), w0 / total), ((i0u + 1).min(last), w1 / total)]
    }
}

/// Renders a waveform of `frames · hop` samples from F0, SP and AP.
pub fn synthesize<T: Real>(f: &ProsodicFeatures<T>, cfg: &SynthConfig) -> Result<AudioBuffer<T>> {
    f.validate()?;
    let frames = f.frames();
    let hop = f.hop_samples();
    let sr = f.sample_rate as f64;
    let out_len = (frames as f64 * hop).round() as usize;
    if out_len == 0 {
        return Err(Error::InvariantViolation("zero-length synthesis".into()));
    }
    let size = f.fft_size;
    let bins = f.bins();
    let part = Partition {
        hop,
        half: hop.round().max(1.0) as usize,
        frames,
    };

    let analysis_window: Vec<f64> = hann(size);
    let gain = size as f64 / analysis_window.iter().map(|w| w * w).sum::<f64>();

    let f0_at = |n: usize| -> f64 {
        let x = n as f64 / hop;
        let i0 = (x.floor() as usize).min(frames - 1);
        let i1 = (i0 + 1).min(frames - 1);
        let frac = x - i0 as f64;
        let a = f.f0[i0].as_f64();
        let b = f.f0[i1].as_f64();
        match (a > 0.0, b > 0.0) {
            (true, true) => a + (b - a) * frac.min(1.0),
            (true, false) if frac < 0.5 => a,
            (false, true) if frac >= 0.5 => b,
            _ => 0.0,
        }
    };

    // pulse train: (sample, amplitude); amplitude sqrt(period) gives unit power
    let mut pulses: Vec<(usize, f64)> = Vec::new();
    let mut phase = 1.0f64;
    for n in 0..out_len {
        let f0 = f0_at(n);
        if f0 <= 0.0 {
            phase = 1.0;
            continue;
        }
        if phase >= 1.0 {
            pulses.push((n, (sr / f0).sqrt()));
            phase -= 1.0;
        }
        phase += f0 / sr;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.noise_seed);
    let noise: Vec<f64> = (0..out_len)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();

    let seg_len = 2 * part.half + 2;
    let conv_size = (seg_len + size).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let env_fft = FftPair::new(&mut planner, size);
    let conv_fft = FftPair::new(&mut planner, conv_size);

    let mut out = vec![0.0f64; out_len + conv_size];
    let mut pulse_idx = 0usize;
    let mut noise_seg = vec![0.0f64; seg_len];
    let mut log_mag = vec![0.0f64; bins];

    for i in 0..frames {
        let seg_start = part.center(i) - part.half as isize - 1;
        let lo = seg_start.max(0) as usize;
        let hi = ((seg_start + seg_len as isize).max(0) as usize).min(out_len);

        noise_seg.iter_mut().for_each(|v| *v = 0.0);
        let mut frame_pulses: Vec<(usize, f64)> = Vec::new();
        while pulse_idx < pulses.len() && pulses[pulse_idx].0 < lo {
            pulse_idx += 1;
        }
        let mut p = pulse_idx;
        for n in lo..hi {
            let weight: f64 = part
                .weights(n)
                .iter()
                .filter(|(frame, _)| *frame == i)
                .map(|(_, w)| w)
                .sum();
            if weight == 0.0 {
                continue;
            }
            let local = (n as isize - seg_start) as usize;
            noise_seg[local] = weight * noise[n];
            while p < pulses.len() && pulses[p].0 < n {
                p += 1;
            }
            if p < pulses.len() && pulses[p].0 == n {
                frame_pulses.push((local, weight * pulses[p].1));
            }
        }

        let sp = &f.sp[i];
        let ap = &f.ap[i];
        let base = seg_start;

        if f.is_voiced(i) && !frame_pulses.is_empty() {
            for k in 0..bins {
                let harmonic = (1.0 - ap[k].as_f64()).max(MIX_FLOOR);
                log_mag[k] = 0.5 * (gain * sp[k].as_f64() * harmonic).ln();
            }
            let level = line_power_correction(&log_mag, f.f0[i].as_f64(), sr);
            let h = minimum_phase_response(&env_fft, &log_mag);
            for &(local, amp) in &frame_pulses {
                let amp = amp * level;
                let start = seg_start + local as isize;
                for (m, &hv) in h.iter().enumerate() {
                    let idx = start + m as isize;
                    if idx >= 0 && (idx as usize) < out.len() {
                        out[idx as usize] += amp * hv;
                    }
                }
            }
        }

        for k in 0..bins {
            let aperiodic = ap[k].as_f64().max(MIX_FLOOR);
            log_mag[k] = 0.5 * (gain * sp[k].as_f64() * aperiodic).ln();
        }
        let h = minimum_phase_response(&env_fft, &log_mag);
        let mut hs = conv_fft.forward_real(&h);
        let xs = conv_fft.forward_real(&noise_seg);
        for (a, b) in hs.iter_mut().zip(&xs) {
            *a *= *b;
        }
        conv_fft.inverse(&mut hs);
        for (m, c) in hs.iter().enumerate() {
            let idx = base + m as isize;
            if idx >= 0 && (idx as usize) < out.len() {
                out[idx as usize] += c.re;
            }
        }
    }

    out.truncate(out_len);
    if let Some(pos) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvariantViolation(format!(
            "non-finite output sample at {pos}"
        )));
    }
    AudioBuffer::new(out.into_iter().map(T::lit).collect(), f.sample_rate)
}

/// Amplitude factor that gives a pulse train at `f0` the same output power
/// through the envelope as unit white noise.
///
/// A unit-power pulse train only samples the power response at its
/// harmonics, while the envelope describes power density. Without this
/// correction the output level would depend on where the harmonics fall
/// relative to envelope peaks, so a pitch shift would also change loudness.
fn line_power_correction(log_mag: &[f64], f0: f64, sr: f64) -> f64 {
    let bins = log_mag.len();
    let size = 2 * (bins - 1);
    let power = |k: usize| (2.0 * log_mag[k]).exp();
    let two_sided = |k: usize, p: f64| if k == 0 || k == bins - 1 { p } else { 2.0 * p };
    let flat: f64 = (0..bins).map(|k| two_sided(k, power(k))).sum::<f64>() / size as f64;

    let bin_hz = sr / size as f64;
    let mut lines = power(0);
    let mut j = 1usize;
    loop {
        let x = j as f64 * f0 / bin_hz;
        if x >= (bins - 1) as f64 {
            break;
        }
        let k = x.floor() as usize;
        let frac = x - k as f64;
        lines += 2.0 * (power(k) * (1.0 - frac) + power(k + 1) * frac);
        j += 1;
    }
    lines *= f0 / sr;
    if lines > 0.0 && flat > 0.0 {
        (flat / lines).sqrt()
    } else {
        1.0
    }
}

/// Analysis, manipulation and synthesis in one call.
pub fn resynthesize<T: Real>(
    audio: &AudioBuffer<T>,
    params: &ManipulationParams<T>,
    analysis: &AnalysisConfig<T>,
    cfg: &SynthConfig,
) -> Result<AudioBuffer<T>> {
    let features = extract_features(audio, analysis)?;
    let manipulated = manipulate_features(&features, params, analysis)?;
    synthesize(&manipulated, cfg)
}
