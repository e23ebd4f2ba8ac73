//! Shared DSP building blocks: windows, real-signal FFT helpers and the
//! cepstral minimum-phase construction.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::real::Real;

/// Hann window of length `len` sampled at half-sample offsets,
/// `w[n] = sin²(π (n + ½) / len)`. Shifted copies at a hop of `len / 2`
/// sum to exactly one.
pub fn hann<T: Real>(len: usize) -> Vec<T> {
    let l = len as f64;
    (0..len)
        .map(|n| {
            let s = (std::f64::consts::PI * (n as f64 + 0.5) / l).sin();
            T::lit(s * s)
        })
        .collect()
}

/// Copies `out.len()` samples of `signal` starting at `start` (which may be
/// negative or run past the end); out-of-range positions read as zero.
pub fn frame_at<T: Real>(signal: &[T], start: isize, out: &mut [T]) {
    for (k, slot) in out.iter_mut().enumerate() {
        let idx = start + k as isize;
        *slot = if idx >= 0 && (idx as usize) < signal.len() {
            signal[idx as usize]
        } else {
            T::zero()
        };
    }
}

/// Forward/inverse FFT pair of a fixed size, planned once and reused.
pub struct FftPair<T: Real> {
    size: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> FftPair<T> {
    pub fn new(planner: &mut FftPlanner<T>, size: usize) -> Self {
        Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn forward(&self, buf: &mut [Complex<T>]) {
        self.forward.process(buf);
    }

    /// Inverse transform including the `1/size` normalization.
    pub fn inverse(&self, buf: &mut [Complex<T>]) {
        self.inverse.process(buf);
        let scale = T::one() / T::of_usize(self.size);
        for c in buf.iter_mut() {
            *c = *c * scale;
        }
    }

    /// Spectrum of a real signal zero-padded to the transform size.
    pub fn forward_real(&self, signal: &[T]) -> Vec<Complex<T>> {
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.size];
        for (slot, &x) in buf.iter_mut().zip(signal) {
            slot.re = x;
        }
        self.forward(&mut buf);
        buf
    }
}

/// Minimum-phase impulse response (length `fft.size()`) whose magnitude
/// response is `exp(log_mag)`. `log_mag` holds the natural-log magnitude on
/// the one-sided grid of `size / 2 + 1` bins.
///
/// Built by folding the real cepstrum onto positive quefrencies.
pub fn minimum_phase_response<T: Real>(fft: &FftPair<T>, log_mag: &[T]) -> Vec<T> {
    let n = fft.size();
    let half = n / 2;
    debug_assert_eq!(log_mag.len(), half + 1);
    let zero = Complex::new(T::zero(), T::zero());

    let mut buf = vec![zero; n];
    for k in 0..=half {
        buf[k] = Complex::new(log_mag[k], T::zero());
    }
    for k in half + 1..n {
        buf[k] = buf[n - k];
    }
    fft.inverse(&mut buf);

    // fold: keep c[0] and c[n/2], double the causal part, zero the rest
    let two = T::lit(2.0);
    for (q, c) in buf.iter_mut().enumerate() {
        let re = c.re;
        *c = if q == 0 || q == half {
            Complex::new(re, T::zero())
        } else if q < half {
            Complex::new(re * two, T::zero())
        } else {
            zero
        };
    }
    fft.forward(&mut buf);
    for c in buf.iter_mut() {
        *c = c.exp();
    }
    fft.inverse(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// Linear interpolation of `values` at fractional index `x`, clamped to the
/// valid range.
pub fn lerp_at<T: Real>(values: &[T], x: f64) -> T {
    let last = values.len() - 1;
    if x <= 0.0 {
        return values[0];
    }
    let i0 = x.floor() as usize;
    if i0 >= last {
        return values[last];
    }
    let frac = T::lit(x - i0 as f64);
    values[i0] + (values[i0 + 1] - values[i0]) * frac
}

pub fn mean<T: Real>(values: &[T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    values.iter().copied().sum::<T>() / T::of_usize(values.len())
}
