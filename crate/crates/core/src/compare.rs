//! Human-vs-TTS discrepancy metrics, global length alignment and log-domain
//! normalization statistics.

use serde::{Deserialize, Serialize};

use crate::dsp::{lerp_at, mean};
use crate::error::{Error, Result};
use crate::features::ProsodicFeatures;
use crate::real::Real;

/// Mean energy below this counts as silence.
pub const SILENT_ENERGY: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport<T> {
    /// Mean voiced F0 of the human side minus that of the TTS side.
    pub pitch_diff_hz: T,
    /// Human frame count over TTS frame count.
    pub duration_ratio: T,
    /// Mean human energy over mean TTS energy.
    pub energy_ratio: T,
    pub voiced_frames_human: usize,
    pub voiced_frames_tts: usize,
    /// RMS F0 error over frames voiced on both sides after aligning the TTS
    /// track to the human length; 0 when no frame is voiced on both.
    pub aligned_f0_rmse_hz: T,
}

impl<T: Real> ComparisonReport<T> {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("comparison report", e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("comparison report", e))
    }
}

pub fn compare_features<T: Real>(
    human: &ProsodicFeatures<T>,
    tts: &ProsodicFeatures<T>,
) -> Result<ComparisonReport<T>> {
    if human.frame_period_ms != tts.frame_period_ms || human.sample_rate != tts.sample_rate {
        return Err(Error::ConfigMismatch(format!(
            "human {} ms @ {} Hz vs tts {} ms @ {} Hz",
            human.frame_period_ms, human.sample_rate, tts.frame_period_ms, tts.sample_rate
        )));
    }
    let mean_f0_h = mean_voiced_f0(human).ok_or(Error::NoVoicedFrames("human"))?;
    let mean_f0_t = mean_voiced_f0(tts).ok_or(Error::NoVoicedFrames("tts"))?;
    let energy_h = mean(&human.energy);
    let energy_t = mean(&tts.energy);
    let silent = T::lit(SILENT_ENERGY);
    if energy_h < silent {
        return Err(Error::SilentInput("human"));
    }
    if energy_t < silent {
        return Err(Error::SilentInput("tts"));
    }

    let aligned = align_length(tts, human.frames())?;
    let (sq, count) = human
        .f0
        .iter()
        .zip(&aligned.f0)
        .filter(|(&h, &t)| h > T::zero() && t > T::zero())
        .fold((T::zero(), 0usize), |(acc, n), (&h, &t)| (acc + (h - t) * (h - t), n + 1));
    let rmse = if count == 0 {
        T::zero()
    } else {
        (sq / T::of_usize(count)).sqrt()
    };

    Ok(ComparisonReport {
        pitch_diff_hz: mean_f0_h - mean_f0_t,
        duration_ratio: T::of_usize(human.frames()) / T::of_usize(tts.frames()),
        energy_ratio: energy_h / energy_t,
        voiced_frames_human: human.voiced_count(),
        voiced_frames_tts: tts.voiced_count(),
        aligned_f0_rmse_hz: rmse,
    })
}

fn mean_voiced_f0<T: Real>(f: &ProsodicFeatures<T>) -> Option<T> {
    let (sum, n) = f
        .voiced_f0()
        .fold((T::zero(), 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / T::of_usize(n))
}

/// Resamples every track onto `target_frames` frames spanning the same
/// first-to-last extent (source position `j · (N − 1) / (M − 1)`).
///
/// Energy, periodicity, SP and AP interpolate linearly. Voicing follows the
/// nearest source frame, and F0 only interpolates between two voiced
/// neighbours; otherwise it copies the nearest voiced value.
pub fn align_length<T: Real>(
    f: &ProsodicFeatures<T>,
    target_frames: usize,
) -> Result<ProsodicFeatures<T>> {
    if target_frames == 0 {
        return Err(Error::Precondition("target frame count must be positive".into()));
    }
    let n = f.frames();
    if target_frames == n {
        return Ok(f.clone());
    }
    let position = |j: usize| -> f64 {
        if target_frames == 1 {
            (n - 1) as f64 / 2.0
        } else {
            j as f64 * (n - 1) as f64 / (target_frames - 1) as f64
        }
    };
    let bins = f.bins();

    let mut out = ProsodicFeatures {
        f0: Vec::with_capacity(target_frames),
        periodicity: Vec::with_capacity(target_frames),
        sp: Vec::with_capacity(target_frames),
        ap: Vec::with_capacity(target_frames),
        energy: Vec::with_capacity(target_frames),
        frame_period_ms: f.frame_period_ms,
        sample_rate: f.sample_rate,
        fft_size: f.fft_size,
    };

    for j in 0..target_frames {
        let x = position(j);
        let lo = (x.floor() as usize).min(n - 1);
        let hi = (lo + 1).min(n - 1);
        let frac = x - lo as f64;
        let nearest = if frac < 0.5 { lo } else { hi };
        let t = T::lit(frac);
        let mix = |a: T, b: T| a + (b - a) * t;

        out.energy.push(lerp_at(&f.energy, x));
        out.periodicity.push(lerp_at(&f.periodicity, x));
        out.sp.push((0..bins).map(|k| mix(f.sp[lo][k], f.sp[hi][k])).collect());

        if f.is_voiced(nearest) {
            let both = f.is_voiced(lo) && f.is_voiced(hi);
            if both {
                out.f0.push(mix(f.f0[lo], f.f0[hi]));
                out.ap.push((0..bins).map(|k| mix(f.ap[lo][k], f.ap[hi][k])).collect());
            } else {
                out.f0.push(f.f0[nearest]);
                out.ap.push(f.ap[nearest].clone());
            }
        } else {
            out.f0.push(T::zero());
            out.ap.push(vec![T::one(); bins]);
        }
    }
    Ok(out)
}

/// Log-domain location/scale statistics used for scale-free comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSummary<T> {
    pub mean_log_f0: T,
    pub std_log_f0: T,
    pub mean_log_energy: T,
    pub std_log_energy: T,
}

/// Mean and population standard deviation of log F0 over voiced frames and
/// of log energy over frames louder than [`SILENT_ENERGY`].
pub fn normalize_for_loss<T: Real>(f: &ProsodicFeatures<T>) -> Result<NormalizedSummary<T>> {
    let log_f0: Vec<T> = f.voiced_f0().map(|v| v.ln()).collect();
    if log_f0.is_empty() {
        return Err(Error::NoVoicedFrames("input"));
    }
    let silent = T::lit(SILENT_ENERGY);
    let log_e: Vec<T> = f
        .energy
        .iter()
        .filter(|&&e| e > silent)
        .map(|e| e.ln())
        .collect();
    if log_e.is_empty() {
        return Err(Error::SilentInput("input"));
    }
    let (mean_log_f0, std_log_f0) = mean_std(&log_f0);
    let (mean_log_energy, std_log_energy) = mean_std(&log_e);
    Ok(NormalizedSummary {
        mean_log_f0,
        std_log_f0,
        mean_log_energy,
        std_log_energy,
    })
}

fn mean_std<T: Real>(x: &[T]) -> (T, T) {
    let m = mean(x);
    if x.iter().all(|&v| v == x[0]) {
        return (m, T::zero());
    }
    let var = x.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / T::of_usize(x.len());
    (m, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::synthetic_features;
    use proptest::prelude::*;

    fn with_energy(energy: Vec<f64>) -> ProsodicFeatures<f64> {
        let n = energy.len();
        let mut f = synthetic_features(&vec![200.0; n], 8);
        f.energy = energy;
        f
    }

    #[test]
    fn self_comparison_is_identity() {
        let f = synthetic_features(&[0.0, 180.0, 190.0, 200.0, 0.0, 210.0], 8);
        let r = compare_features(&f, &f).unwrap();
        assert_eq!(r.pitch_diff_hz, 0.0);
        assert_eq!(r.duration_ratio, 1.0);
        assert_eq!(r.energy_ratio, 1.0);
        assert_eq!(r.aligned_f0_rmse_hz, 0.0);
        assert_eq!(r.voiced_frames_human, 4);
    }

    #[test]
    fn detuned_stretched_quieter_pair() {
        let human = synthetic_features(&vec![200.0f64; 200], 8);
        let mut tts = synthetic_features(&vec![170.0; 235], 8);
        for e in tts.energy.iter_mut() {
            *e *= 0.8;
        }
        let r = compare_features(&human, &tts).unwrap();
        assert!((r.pitch_diff_hz - 30.0).abs() < 1e-9);
        assert!((r.duration_ratio - 200.0 / 235.0).abs() < 1e-12);
        assert!((r.energy_ratio - 1.25).abs() < 1e-9);
        assert!((r.aligned_f0_rmse_hz - 30.0).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        let voiced = synthetic_features(&[200.0; 4], 8);
        let unvoiced = synthetic_features(&[0.0; 4], 8);
        assert!(matches!(compare_features(&voiced, &unvoiced), Err(Error::NoVoicedFrames("tts"))));
        assert!(matches!(compare_features(&unvoiced, &voiced), Err(Error::NoVoicedFrames("human"))));
        let silent = with_energy(vec![0.0; 4]);
        assert!(matches!(compare_features(&voiced, &silent), Err(Error::SilentInput("tts"))));
        let mut other_rate = voiced.clone();
        other_rate.sample_rate = 22_050;
        assert!(matches!(compare_features(&voiced, &other_rate), Err(Error::ConfigMismatch(_))));
    }

    #[test]
    fn align_identity_and_constant() {
        let f = synthetic_features(&[0.0, 180.0, 190.0, 0.0, 210.0], 8);
        assert_eq!(align_length(&f, 5).unwrap(), f);
        let c = synthetic_features(&[200.0; 9], 8);
        for m in [1, 2, 5, 17, 40] {
            let a = align_length(&c, m).unwrap();
            assert_eq!(a.frames(), m);
            assert!(a.f0.iter().all(|&v| v == 200.0));
        }
        assert!(align_length(&f, 0).is_err());
    }

    #[test]
    fn align_energy_hand_computed() {
        let f = with_energy(vec![0.0, 1.0, 2.0, 3.0]);
        let a = align_length(&f, 7).unwrap();
        assert_eq!(a.energy, vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
    }

    #[test]
    fn align_does_not_glide_into_unvoiced() {
        let f = synthetic_features(&[200.0, 0.0, 0.0, 100.0], 8);
        let a = align_length(&f, 10).unwrap();
        for (j, &v) in a.f0.iter().enumerate() {
            assert!(v == 0.0 || v == 200.0 || v == 100.0, "frame {j}: {v}");
        }
        for j in 0..a.frames() {
            if !a.is_voiced(j) {
                assert!(a.ap[j].iter().all(|&x| x == 1.0));
            }
        }
        a.validate().unwrap();
    }

    #[test]
    fn normalize_constant_track() {
        let f = synthetic_features(&[0.0, 200.0, 200.0, 200.0], 8);
        let s = normalize_for_loss(&f).unwrap();
        assert!((s.mean_log_f0 - 200f64.ln()).abs() < 1e-12);
        assert_eq!(s.std_log_f0, 0.0);
    }

    #[test]
    fn normalize_energy_scaling_shifts_mean_only() {
        let f = with_energy(vec![0.1, 0.2, 0.4, 0.3]);
        let mut g = f.clone();
        for e in g.energy.iter_mut() {
            *e *= 3.0;
        }
        let a = normalize_for_loss(&f).unwrap();
        let b = normalize_for_loss(&g).unwrap();
        assert!((b.mean_log_energy - a.mean_log_energy - 3f64.ln()).abs() < 1e-12);
        assert!((b.std_log_energy - a.std_log_energy).abs() < 1e-12);
    }

    #[test]
    fn normalize_errors() {
        assert!(matches!(
            normalize_for_loss(&synthetic_features(&[0.0; 3], 8)),
            Err(Error::NoVoicedFrames(_))
        ));
        assert!(matches!(normalize_for_loss(&with_energy(vec![0.0; 3])), Err(Error::SilentInput(_))));
    }

    fn source_position(j: usize, n: usize, m: usize) -> f64 {
        if m == 1 {
            (n - 1) as f64 / 2.0
        } else {
            j as f64 * (n - 1) as f64 / (m - 1) as f64
        }
    }

    fn arb_features() -> impl Strategy<Value = ProsodicFeatures<f64>> {
        (
            prop::collection::vec(prop_oneof![Just(0.0), 80.0f64..600.0], 2..60),
            0.01f64..2.0,
        )
            .prop_filter("needs a voiced frame", |(f0, _)| f0.iter().any(|&v| v > 0.0))
            .prop_map(|(f0, gain)| {
                let mut f = synthetic_features(&f0, 4);
                for (i, e) in f.energy.iter_mut().enumerate() {
                    *e = gain * (1.0 + (i as f64 * 0.7).sin().abs());
                }
                f
            })
    }

    proptest! {
        #[test]
        fn compare_self_is_identity(f in arb_features()) {
            let r = compare_features(&f, &f).unwrap();
            prop_assert_eq!(r.pitch_diff_hz, 0.0);
            prop_assert_eq!(r.duration_ratio, 1.0);
            prop_assert_eq!(r.energy_ratio, 1.0);
            prop_assert_eq!(r.aligned_f0_rmse_hz, 0.0);
        }

        #[test]
        fn compare_is_antisymmetric(a in arb_features(), b in arb_features()) {
            let ab = compare_features(&a, &b).unwrap();
            let ba = compare_features(&b, &a).unwrap();
            let tol = 1e-9 * ab.pitch_diff_hz.abs().max(1.0);
            prop_assert!((ab.pitch_diff_hz + ba.pitch_diff_hz).abs() <= tol);
            prop_assert!((ab.duration_ratio * ba.duration_ratio - 1.0).abs() <= 1e-9);
            prop_assert!((ab.energy_ratio * ba.energy_ratio - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn align_never_invents_voicing(f in arb_features(), m in 1usize..120) {
            let a = align_length(&f, m).unwrap();
            prop_assert_eq!(a.frames(), m);
            a.validate().unwrap();
            let n = f.frames();
            for j in 0..m {
                let x = source_position(j, n, m);
                let lo = x.floor() as usize;
                let nearest = if x - (lo as f64) < 0.5 { lo } else { (lo + 1).min(n - 1) };
                prop_assert_eq!(a.is_voiced(j), f.is_voiced(nearest));
            }
        }
    }
}
