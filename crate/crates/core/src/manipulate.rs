//! Pitch shifting, duration modification and energy scaling of a feature
//! set.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compare::align_length;
use crate::error::{Error, Result};
use crate::features::{AnalysisConfig, ProsodicFeatures};
use crate::real::Real;

pub const DURATION_RATIO_BOUNDS: (f64, f64) = (0.1, 10.0);
pub const ENERGY_SCALE_BOUNDS: (f64, f64) = (1e-4, 1e4);

/// One prosodic correction: additive F0 shift, output/input frame-count
/// ratio, and a multiplier on envelope power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManipulationParams<T> {
    pub pitch_shift_hz: T,
    pub duration_ratio: T,
    pub energy_scale: T,
}

impl<T: Real> ManipulationParams<T> {
    pub fn new(pitch_shift_hz: T, duration_ratio: T, energy_scale: T) -> Result<Self> {
        let p = Self {
            pitch_shift_hz,
            duration_ratio,
            energy_scale,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn identity() -> Self {
        Self {
            pitch_shift_hz: T::zero(),
            duration_ratio: T::one(),
            energy_scale: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.pitch_shift_hz.is_finite() {
            return Err(Error::OutOfBounds(format!(
                "pitch shift {} Hz",
                self.pitch_shift_hz
            )));
        }
        check_duration_ratio(self.duration_ratio)?;
        check_energy_scale(self.energy_scale)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("manipulation params", e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self =
            serde_json::from_str(text).map_err(|e| Error::json("manipulation params", e))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn check_duration_ratio<T: Real>(ratio: T) -> Result<()> {
    let (lo, hi) = DURATION_RATIO_BOUNDS;
    let r = ratio.as_f64();
    if r > lo && r < hi {
        Ok(())
    } else {
        Err(Error::OutOfBounds(format!("duration ratio {r} outside ({lo}, {hi})")))
    }
}

fn check_energy_scale<T: Real>(scale: T) -> Result<()> {
    let (lo, hi) = ENERGY_SCALE_BOUNDS;
    let s = scale.as_f64();
    if s > lo && s < hi {
        Ok(())
    } else {
        Err(Error::OutOfBounds(format!("energy scale {s} outside ({lo}, {hi})")))
    }
}

/// Adds `delta_hz` to every voiced frame, clamped to `[f0_floor, f0_ceil]`.
/// Unvoiced frames stay at 0.
pub fn shift_pitch<T: Real>(f0: &[T], delta_hz: T, f0_floor: T, f0_ceil: T) -> Vec<T> {
    f0.iter()
        .map(|&f| {
            if f > T::zero() {
                (f + delta_hz).max(f0_floor).min(f0_ceil)
            } else {
                f
            }
        })
        .collect()
}

/// Multiplicative variant: scales voiced F0 by `2^(semitones / 12)`.
pub fn shift_pitch_semitones<T: Real>(f0: &[T], semitones: T, f0_floor: T, f0_ceil: T) -> Vec<T> {
    let factor = T::lit(2.0).powf(semitones / T::lit(12.0));
    f0.iter()
        .map(|&f| {
            if f > T::zero() {
                (f * factor).max(f0_floor).min(f0_ceil)
            } else {
                f
            }
        })
        .collect()
}

/// Output frame count for a duration change: `max(1, round(frames · ratio))`.
pub fn scaled_frame_count<T: Real>(frames: usize, ratio: T) -> usize {
    ((frames as f64 * ratio.as_f64()).round() as usize).max(1)
}

/// Resamples all tracks to `max(1, round(N · ratio))` frames at an unchanged
/// frame period, so the rendered duration scales by `ratio`.
pub fn modify_duration<T: Real>(
    f: &ProsodicFeatures<T>,
    ratio: T,
) -> Result<ProsodicFeatures<T>> {
    check_duration_ratio(ratio)?;
    align_length(f, scaled_frame_count(f.frames(), ratio))
}

/// Multiplies every envelope entry by `scale` (power domain).
pub fn scale_energy<T: Real>(sp: &[Vec<T>], scale: T) -> Result<Vec<Vec<T>>> {
    check_energy_scale(scale)?;
    if sp.iter().flatten().any(|&v| !(v >= T::zero())) {
        return Err(Error::InvariantViolation("negative spectral envelope entry".into()));
    }
    Ok(sp
        .iter()
        .map(|row| row.iter().map(|&v| v * scale).collect())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PitchShift<T> {
    /// Hz added to voiced F0.
    Additive(T),
    /// Semitones, applied as a ratio.
    Semitones(T),
}

/// Duration change, then pitch shift, then energy scaling. The energy track
/// follows the envelope, scaling by `sqrt(energy_scale)`.
pub fn apply_manipulation<T: Real>(
    f: &ProsodicFeatures<T>,
    pitch: PitchShift<T>,
    duration_ratio: T,
    energy_scale: T,
    cfg: &AnalysisConfig<T>,
) -> Result<ProsodicFeatures<T>> {
    check_energy_scale(energy_scale)?;
    let mut out = if duration_ratio == T::one() {
        f.clone()
    } else {
        modify_duration(f, duration_ratio)?
    };
    out.f0 = match pitch {
        PitchShift::Additive(delta) if delta == T::zero() => out.f0,
        PitchShift::Additive(delta) => shift_pitch(&out.f0, delta, cfg.f0_floor, cfg.f0_ceil),
        PitchShift::Semitones(st) if st == T::zero() => out.f0,
        PitchShift::Semitones(st) => shift_pitch_semitones(&out.f0, st, cfg.f0_floor, cfg.f0_ceil),
    };
    if energy_scale != T::one() {
        out.sp = scale_energy(&out.sp, energy_scale)?;
        let gain = energy_scale.sqrt();
        for e in out.energy.iter_mut() {
            *e = *e * gain;
        }
    }
    Ok(out)
}

pub fn manipulate_features<T: Real>(
    f: &ProsodicFeatures<T>,
    params: &ManipulationParams<T>,
    cfg: &AnalysisConfig<T>,
) -> Result<ProsodicFeatures<T>> {
    params.validate()?;
    apply_manipulation(
        f,
        PitchShift::Additive(params.pitch_shift_hz),
        params.duration_ratio,
        params.energy_scale,
        cfg,
    )
}
