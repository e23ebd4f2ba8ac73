//! Builders for hand-made feature sets, for tests and examples that need
//! features without running the analyzer.

use crate::features::{band_aperiodicity, ProsodicFeatures};
use crate::real::Real;

/// Feature set at 16 kHz / 5 ms with the given F0 track (0 = unvoiced),
/// constant energy 0.1, a gently tilted envelope and aperiodicity derived
/// from a fixed periodicity (0.95 voiced, 0.1 unvoiced).
pub fn synthetic_features<T: Real>(f0: &[T], fft_size: usize) -> ProsodicFeatures<T> {
    let bins = fft_size / 2 + 1;
    let periodicity: Vec<T> = f0
        .iter()
        .map(|&f| T::lit(if f > T::zero() { 0.95 } else { 0.1 }))
        .collect();
    let sp_row: Vec<T> = (0..bins)
        .map(|k| T::lit(1e-3 / (1.0 + k as f64 / 4.0)))
        .collect();
    ProsodicFeatures {
        f0: f0.to_vec(),
        ap: f0
            .iter()
            .zip(&periodicity)
            .map(|(&f, &p)| vec![band_aperiodicity(f, p); bins])
            .collect(),
        periodicity,
        sp: vec![sp_row; f0.len()],
        energy: vec![T::lit(0.1); f0.len()],
        frame_period_ms: T::lit(5.0),
        sample_rate: 16_000,
        fft_size,
    }
}
