//! Deterministic test-signal generators: band-limited sawtooth sources,
//! formant resonators and seeded Gaussian noise.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Band-limited sawtooth at a fixed frequency, peak amplitude about `amp`.
pub fn sawtooth(freq: f64, rate: u32, len: usize, amp: f64) -> Vec<f64> {
    harmonic_source(|_| freq, rate, len, amp)
}

/// Band-limited sawtooth following an instantaneous frequency contour
/// `freq_at(t_seconds)`. Harmonics fade out over the top 10% below Nyquist so
/// a moving contour never switches partials on abruptly.
pub fn harmonic_source(freq_at: impl Fn(f64) -> f64, rate: u32, len: usize, amp: f64) -> Vec<f64> {
    let sr = rate as f64;
    let nyquist = sr / 2.0;
    let fade_start = 0.9 * nyquist;
    let mut phase = 0.0f64;
    let mut out = Vec::with_capacity(len);
    for n in 0..len {
        let f = freq_at(n as f64 / sr);
        let mut acc = 0.0;
        let mut k = 1usize;
        while (k as f64) * f < nyquist {
            let fk = k as f64 * f;
            let gain = if fk <= fade_start {
                1.0
            } else {
                (nyquist - fk) / (nyquist - fade_start)
            };
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * gain * (k as f64 * phase).sin() / k as f64;
            k += 1;
        }
        out.push(amp * 2.0 / PI * acc);
        phase += 2.0 * PI * f / sr;
        if phase > 2.0 * PI {
            phase -= 2.0 * PI;
        }
    }
    out
}

/// Zero-mean Gaussian noise with standard deviation `std`.
pub fn white_noise(len: usize, std: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            std * z
        })
        .collect()
}

/// Two-pole resonator with unit gain at DC.
#[derive(Debug, Clone, Copy)]
pub struct Resonator {
    a1: f64,
    a2: f64,
    gain: f64,
}

impl Resonator {
    pub fn new(center_hz: f64, bandwidth_hz: f64, rate: u32) -> Self {
        let sr = rate as f64;
        let r = (-PI * bandwidth_hz / sr).exp();
        let a1 = 2.0 * r * (2.0 * PI * center_hz / sr).cos();
        let a2 = -r * r;
        Self {
            a1,
            a2,
            gain: 1.0 - a1 - a2,
        }
    }

    pub fn filter(&self, input: &[f64]) -> Vec<f64> {
        let (mut y1, mut y2) = (0.0, 0.0);
        input
            .iter()
            .map(|&x| {
                let y = self.gain * x + self.a1 * y1 + self.a2 * y2;
                y2 = y1;
                y1 = y;
                y
            })
            .collect()
    }
}

/// Formants of an open /a/-like vowel: (center Hz, bandwidth Hz).
pub const VOWEL_FORMANTS: [(f64, f64); 3] = [(730.0, 90.0), (1090.0, 110.0), (2440.0, 170.0)];

/// Passes `source` through a cascade of resonators.
pub fn vowel_filter(source: &[f64], formants: &[(f64, f64)], rate: u32) -> Vec<f64> {
    formants
        .iter()
        .fold(source.to_vec(), |sig, &(f, bw)| Resonator::new(f, bw, rate).filter(&sig))
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}
