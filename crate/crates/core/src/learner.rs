//! Corpus-level prosody corrector: three global parameters fitted by
//! gradient descent on a per-pair discrepancy loss, plus a grid-search
//! oracle that shares no code with the gradient path.
//!
//! Parameters live in the same domain as [`ComparisonReport`]: an additive
//! pitch shift in Hz, a human/TTS frame-count ratio and a human/TTS mean
//! energy ratio. [`Correction::manipulation`] converts to
//! [`ManipulationParams`], whose energy scale acts on envelope power and is
//! therefore the square of the energy ratio.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compare::ComparisonReport;
use crate::error::{Error, Result};
use crate::manipulate::ManipulationParams;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights<T> {
    pub w_pitch: T,
    pub w_duration: T,
    pub w_energy: T,
}

impl<T: Real> Default for LossWeights<T> {
    fn default() -> Self {
        Self {
            w_pitch: T::one(),
            w_duration: T::one(),
            w_energy: T::one(),
        }
    }
}

impl<T: Real> LossWeights<T> {
    pub fn new(w_pitch: T, w_duration: T, w_energy: T) -> Result<Self> {
        let w = Self {
            w_pitch,
            w_duration,
            w_energy,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.w_pitch, self.w_duration, self.w_energy];
        if all.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::InvalidConfig(format!(
                "loss weights must be finite and nonnegative, got {all:?}"
            )));
        }
        if all.iter().all(|w| *w == T::zero()) {
            return Err(Error::InvalidConfig("all loss weights are zero".into()));
        }
        Ok(())
    }
}

/// Learned correction, in report units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correction<T> {
    pub pitch_shift_hz: T,
    pub duration_ratio: T,
    pub energy_ratio: T,
}

impl<T: Real> Correction<T> {
    pub fn identity() -> Self {
        Self {
            pitch_shift_hz: T::zero(),
            duration_ratio: T::one(),
            energy_ratio: T::one(),
        }
    }

    /// The correction that exactly cancels one pair's discrepancies.
    pub fn from_report(report: &ComparisonReport<T>) -> Self {
        Self {
            pitch_shift_hz: report.pitch_diff_hz,
            duration_ratio: report.duration_ratio,
            energy_ratio: report.energy_ratio,
        }
    }

    pub fn as_array(&self) -> [T; 3] {
        [self.pitch_shift_hz, self.duration_ratio, self.energy_ratio]
    }

    pub fn manipulation(&self) -> Result<ManipulationParams<T>> {
        ManipulationParams::new(
            self.pitch_shift_hz,
            self.duration_ratio,
            self.energy_ratio * self.energy_ratio,
        )
    }

    pub fn from_manipulation(p: &ManipulationParams<T>) -> Self {
        Self {
            pitch_shift_hz: p.pitch_shift_hz,
            duration_ratio: p.duration_ratio,
            energy_ratio: p.energy_scale.sqrt(),
        }
    }

    fn check(&self) -> Result<()> {
        if !self.pitch_shift_hz.is_finite() {
            return Err(Error::OutOfBounds(format!("pitch shift {}", self.pitch_shift_hz)));
        }
        for (name, v) in [("duration ratio", self.duration_ratio), ("energy ratio", self.energy_ratio)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::OutOfBounds(format!("{name} {v} must be positive")));
            }
        }
        Ok(())
    }
}

/// Partial derivatives of the loss in each parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gradient<T> {
    pub pitch: T,
    pub duration: T,
    pub energy: T,
}

pub fn pair_loss<T: Real>(
    params: &Correction<T>,
    report: &ComparisonReport<T>,
    w: &LossWeights<T>,
    f0_scale: T,
) -> Result<T> {
    params.check()?;
    let p = (report.pitch_diff_hz - params.pitch_shift_hz) / f0_scale;
    let d = report.duration_ratio / params.duration_ratio - T::one();
    let e = report.energy_ratio / params.energy_ratio - T::one();
    Ok(w.w_pitch * p * p + w.w_duration * d * d + w.w_energy * e * e)
}

pub fn loss_gradient<T: Real>(
    params: &Correction<T>,
    report: &ComparisonReport<T>,
    w: &LossWeights<T>,
    f0_scale: T,
) -> Result<Gradient<T>> {
    params.check()?;
    let two = T::lit(2.0);
    let ratio_term = |weight: T, r: T, theta: T| {
        let q = r / theta;
        -two * weight * (q - T::one()) * q / theta
    };
    Ok(Gradient {
        pitch: -two * w.w_pitch * (report.pitch_diff_hz - params.pitch_shift_hz)
            / (f0_scale * f0_scale),
        duration: ratio_term(w.w_duration, report.duration_ratio, params.duration_ratio),
        energy: ratio_term(w.w_energy, report.energy_ratio, params.energy_ratio),
    })
}

/// Mean loss over a set of reports.
pub fn corpus_loss<T: Real>(
    params: &Correction<T>,
    reports: &[ComparisonReport<T>],
    w: &LossWeights<T>,
    f0_scale: T,
) -> Result<T> {
    if reports.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut total = T::zero();
    for r in reports {
        total = total + pair_loss(params, r, w, f0_scale)?;
    }
    Ok(total / T::of_usize(reports.len()))
}

/// One full-batch descent step; returns the updated parameters and the
/// average loss before the update.
///
/// The pitch step is taken in units of `f0_scale` (the raw gradient times
/// `f0_scale²`), so one learning rate suits all three terms. The ratios
/// step in log domain and stay positive.
pub fn train_step<T: Real>(
    params: &Correction<T>,
    batch: &[ComparisonReport<T>],
    lr: T,
    w: &LossWeights<T>,
    f0_scale: T,
) -> Result<(Correction<T>, T)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = T::of_usize(batch.len());
    let mut loss = T::zero();
    let mut g = [T::zero(); 3];
    for r in batch {
        loss = loss + pair_loss(params, r, w, f0_scale)?;
        let grad = loss_gradient(params, r, w, f0_scale)?;
        g[0] = g[0] + grad.pitch;
        g[1] = g[1] + grad.duration;
        g[2] = g[2] + grad.energy;
    }
    let [gp, gd, ge] = g.map(|v| v / n);
    let next = Correction {
        pitch_shift_hz: params.pitch_shift_hz - lr * f0_scale * f0_scale * gp,
        duration_ratio: params.duration_ratio
            * (-lr * params.duration_ratio * gd).exp(),
        energy_ratio: params.energy_ratio * (-lr * params.energy_ratio * ge).exp(),
    };
    next.check()
        .map_err(|e| Error::InvariantViolation(format!("training diverged: {e}")))?;
    Ok((next, loss / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig<T> {
    pub epochs: usize,
    /// Descent steps per epoch; the reported epoch loss is their mean.
    pub steps_per_epoch: usize,
    pub learning_rate: T,
    pub weights: LossWeights<T>,
    pub f0_scale: T,
}

impl<T: Real> Default for TrainingConfig<T> {
    fn default() -> Self {
        Self {
            epochs: 5,
            steps_per_epoch: 40,
            learning_rate: T::lit(0.05),
            weights: LossWeights::default(),
            f0_scale: T::lit(100.0),
        }
    }
}

impl<T: Real> TrainingConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.steps_per_epoch == 0 {
            return Err(Error::InvalidConfig("epochs and steps per epoch must be >= 1".into()));
        }
        if !(self.learning_rate > T::zero()) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(self.f0_scale > T::zero()) || !self.f0_scale.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "f0 scale {} must be positive",
                self.f0_scale
            )));
        }
        self.weights.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats<T> {
    pub epoch: usize,
    pub avg_loss: T,
}

/// Full-batch gradient descent from the identity correction.
pub fn train_model<T: Real>(
    reports: &[ComparisonReport<T>],
    cfg: &TrainingConfig<T>,
) -> Result<(Correction<T>, Vec<EpochStats<T>>)> {
    if reports.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    cfg.validate()?;
    let mut params = Correction::identity();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let mut total = T::zero();
        for _ in 0..cfg.steps_per_epoch {
            let (next, loss) =
                train_step(&params, reports, cfg.learning_rate, &cfg.weights, cfg.f0_scale)?;
            params = next;
            total = total + loss;
        }
        history.push(EpochStats {
            epoch,
            avg_loss: total / T::of_usize(cfg.steps_per_epoch),
        });
    }
    Ok((params, history))
}

/// Search bounds for [`brute_force_optimum`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub pitch_hz: (T, T),
    pub duration_ratio: (T, T),
    pub energy_ratio: (T, T),
    /// Grid points per axis before refinement.
    pub points: usize,
}

impl<T: Real> GridSpec<T> {
    /// Bounds spanning every report's discrepancies with a margin.
    pub fn covering(reports: &[ComparisonReport<T>]) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let span = |get: fn(&ComparisonReport<T>) -> T| {
            reports.iter().map(get).fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
        };
        let (plo, phi) = span(|r| r.pitch_diff_hz);
        let (dlo, dhi) = span(|r| r.duration_ratio);
        let (elo, ehi) = span(|r| r.energy_ratio);
        let one = T::one();
        let half = T::lit(0.5);
        Ok(Self {
            pitch_hz: (plo.min(T::zero()) - one, phi.max(T::zero()) + one),
            duration_ratio: (dlo.min(one) * half, dhi.max(one) * T::lit(2.0)),
            energy_ratio: (elo.min(one) * half, ehi.max(one) * T::lit(2.0)),
            points: 201,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.points < 3 {
            return Err(Error::DegenerateGrid(format!("{} points per axis", self.points)));
        }
        for (name, (lo, hi), positive) in [
            ("pitch", self.pitch_hz, false),
            ("duration", self.duration_ratio, true),
            ("energy", self.energy_ratio, true),
        ] {
            if !lo.is_finite() || !hi.is_finite() || !(lo < hi) || (positive && !(lo > T::zero())) {
                return Err(Error::DegenerateGrid(format!("{name} bounds [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// Corpus-loss minimizer by exhaustive grid scan followed by ternary
/// refinement around the best grid point.
///
/// The loss separates into one term per parameter, so each axis is searched
/// on its own. A parameter whose weight is zero does not affect the loss and
/// is returned at its identity value.
pub fn brute_force_optimum<T: Real>(
    reports: &[ComparisonReport<T>],
    w: &LossWeights<T>,
    f0_scale: T,
    grid: &GridSpec<T>,
) -> Result<Correction<T>> {
    if reports.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    grid.validate()?;
    w.validate()?;

    let pitch = if w.w_pitch == T::zero() {
        T::zero()
    } else {
        minimize_axis(grid.pitch_hz, grid.points, |t| {
            reports
                .iter()
                .map(|r| {
                    let e = (r.pitch_diff_hz - t) / f0_scale;
                    e * e
                })
                .sum()
        })
    };
    let ratio_axis = |weight: T, bounds: (T, T), get: fn(&ComparisonReport<T>) -> T| {
        if weight == T::zero() {
            return T::one();
        }
        minimize_axis(bounds, grid.points, |t| {
            reports
                .iter()
                .map(|r| {
                    let e = get(r) / t - T::one();
                    e * e
                })
                .sum()
        })
    };
    Ok(Correction {
        pitch_shift_hz: pitch,
        duration_ratio: ratio_axis(w.w_duration, grid.duration_ratio, |r| r.duration_ratio),
        energy_ratio: ratio_axis(w.w_energy, grid.energy_ratio, |r| r.energy_ratio),
    })
}

fn minimize_axis<T: Real>(bounds: (T, T), points: usize, f: impl Fn(T) -> T) -> T {
    let (lo, hi) = bounds;
    let step = (hi - lo) / T::of_usize(points - 1);
    let at = |i: usize| lo + step * T::of_usize(i);
    let best = (0..points)
        .min_by(|&a, &b| f(at(a)).partial_cmp(&f(at(b))).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(0);
    let mut a = if best == 0 { lo } else { at(best - 1) };
    let mut b = if best + 1 >= points { hi } else { at(best + 1) };
    let third = T::lit(1.0 / 3.0);
    for _ in 0..200 {
        let m1 = a + (b - a) * third;
        let m2 = b - (b - a) * third;
        if f(m1) <= f(m2) {
            b = m2;
        } else {
            a = m1;
        }
        if !(b - a > T::zero()) {
            break;
        }
    }
    (a + b) * T::lit(0.5)
}

/// Serialized form of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel<T> {
    pub pitch_shift_hz: T,
    pub duration_ratio: T,
    /// Envelope power multiplier (square of the learned energy ratio).
    pub energy_scale: T,
    pub weights: LossWeights<T>,
    pub f0_scale: T,
    pub epochs_run: usize,
    pub final_loss: T,
}

impl<T: Real> TrainedModel<T> {
    pub fn new(
        params: &Correction<T>,
        cfg: &TrainingConfig<T>,
        reports: &[ComparisonReport<T>],
    ) -> Result<Self> {
        let m = params.manipulation()?;
        Ok(Self {
            pitch_shift_hz: m.pitch_shift_hz,
            duration_ratio: m.duration_ratio,
            energy_scale: m.energy_scale,
            weights: cfg.weights,
            f0_scale: cfg.f0_scale,
            epochs_run: cfg.epochs,
            final_loss: corpus_loss(params, reports, &cfg.weights, cfg.f0_scale)?,
        })
    }

    pub fn manipulation(&self) -> Result<ManipulationParams<T>> {
        ManipulationParams::new(self.pitch_shift_hz, self.duration_ratio, self.energy_scale)
    }

    pub fn correction(&self) -> Result<Correction<T>> {
        Ok(Correction::from_manipulation(&self.manipulation()?))
    }

    pub fn validate(&self) -> Result<()> {
        self.manipulation()?;
        self.weights.validate()?;
        if !(self.f0_scale > T::zero()) || !(self.final_loss >= T::zero()) {
            return Err(Error::SchemaViolation(format!(
                "model f0_scale {} / final_loss {}",
                self.f0_scale, self.final_loss
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("trained model", e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).map_err(|e| Error::json("trained model", e))?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
