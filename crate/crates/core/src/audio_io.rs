//! WAV input/output, channel down-mixing and sample-rate conversion.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};
use crate::real::Real;

/// Sample rate every analysis path works at.
pub const CANONICAL_RATE: u32 = 16_000;

/// Taps of the windowed-sinc resampling kernel.
const RESAMPLE_TAPS: usize = 16;

/// Mono PCM audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer<T> {
    pub samples: Vec<T>,
    pub sample_rate: u32,
}

impl<T: Real> AudioBuffer<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Precondition("sample rate must be positive".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> T {
        if self.samples.is_empty() {
            return T::zero();
        }
        let power = self.samples.iter().map(|&x| x * x).sum::<T>() / T::of_usize(self.len());
        power.sqrt()
    }

    /// Resamples to [`CANONICAL_RATE`] if needed.
    pub fn into_canonical(self) -> Result<Self> {
        if self.sample_rate == CANONICAL_RATE {
            Ok(self)
        } else {
            resample(&self, CANONICAL_RATE)
        }
    }
}

/// Reads a PCM-16 or float-32 WAV file with one or two channels. Stereo is
/// averaged to mono; 16-bit samples are scaled by 1/32768.
pub fn read_wav<T: Real>(path: impl AsRef<Path>) -> Result<AudioBuffer<T>> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(Error::UnsupportedEncoding(format!(
            "{} channels (only mono and stereo are accepted)",
            spec.channels
        )));
    }
    let interleaved: Vec<T> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => read_samples::<i16, T>(path, &mut reader, |s| {
            T::lit(s as f64 / 32768.0)
        })?,
        (SampleFormat::Float, 32) => {
            let samples = read_samples::<f32, T>(path, &mut reader, |s| T::lit(s as f64))?;
            if let Some((index, v)) = samples
                .iter()
                .enumerate()
                .find(|(_, v)| !(v.abs() <= T::one()))
            {
                return Err(Error::SampleOutOfRange {
                    index,
                    value: v.as_f64(),
                });
            }
            samples
        }
        (format, bits) => {
            return Err(Error::UnsupportedEncoding(format!(
                "{bits}-bit {format:?} samples"
            )))
        }
    };

    let channels = spec.channels as usize;
    if !interleaved.len().is_multiple_of(channels) {
        return Err(Error::MalformedHeader(
            "data chunk does not hold a whole number of frames".into(),
        ));
    }
    let samples = if channels == 1 {
        interleaved
    } else {
        let half = T::lit(0.5);
        interleaved
            .chunks_exact(2)
            .map(|lr| (lr[0] + lr[1]) * half)
            .collect()
    };
    AudioBuffer::new(samples, spec.sample_rate)
}

fn read_samples<S, T>(
    path: &Path,
    reader: &mut WavReader<BufReader<File>>,
    convert: impl Fn(S) -> T,
) -> Result<Vec<T>>
where
    S: hound::Sample,
{
    let expected = reader.len() as usize;
    let mut out = Vec::with_capacity(expected);
    for sample in reader.samples::<S>() {
        // hound reports a short data chunk as an I/O error mid-stream
        let sample = sample.map_err(|e| match e {
            hound::Error::IoError(io) => {
                Error::MalformedHeader(format!("data chunk truncated: {io}"))
            }
            other => map_hound(path, other),
        })?;
        out.push(convert(sample));
    }
    if out.len() != expected {
        return Err(Error::MalformedHeader(format!(
            "data chunk declares {expected} samples but holds {}",
            out.len()
        )));
    }
    Ok(out)
}

fn map_hound(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::MalformedHeader("file truncated".into())
        }
        hound::Error::IoError(e) => Error::io(path, e),
        hound::Error::FormatError(msg) => Error::MalformedHeader(msg.into()),
        hound::Error::Unsupported => Error::UnsupportedEncoding("compressed or unknown format".into()),
        hound::Error::TooWide => Error::UnsupportedEncoding("sample width".into()),
        other => Error::MalformedHeader(other.to_string()),
    }
}

/// Writes 16-bit PCM mono. Samples outside [-1, 1] are hard-clipped.
pub fn write_wav<T: Real>(path: impl AsRef<Path>, audio: &AudioBuffer<T>) -> Result<()> {
    let path = path.as_ref();
    if audio.is_empty() {
        return Err(Error::Precondition("cannot write an empty buffer".into()));
    }
    let spec = WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let to_io = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(other.to_string())),
    };
    let mut writer = WavWriter::create(path, spec).map_err(to_io)?;
    for &x in &audio.samples {
        writer.write_sample(quantize(x)).map_err(to_io)?;
    }
    writer.finalize().map_err(to_io)
}

/// 16-bit quantization used by [`write_wav`]: `round(x · 32768)` clamped to
/// the representable range.
pub fn quantize<T: Real>(x: T) -> i16 {
    let v = x.as_f64();
    if v.is_nan() {
        return 0;
    }
    (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Averages one or two equally long channels into a mono buffer.
pub fn to_mono<T: Real>(channels: &[&[T]], sample_rate: u32) -> Result<AudioBuffer<T>> {
    match channels {
        [mono] => AudioBuffer::new(mono.to_vec(), sample_rate),
        [left, right] => {
            if left.len() != right.len() {
                return Err(Error::Precondition(format!(
                    "channel lengths differ ({} vs {})",
                    left.len(),
                    right.len()
                )));
            }
            let half = T::lit(0.5);
            let samples = left.iter().zip(*right).map(|(&l, &r)| (l + r) * half).collect();
            AudioBuffer::new(samples, sample_rate)
        }
        _ => Err(Error::UnsupportedEncoding(format!(
            "{} channels (only mono and stereo are accepted)",
            channels.len()
        ))),
    }
}

/// Band-limited sample-rate conversion with a 16-tap Hann-windowed sinc.
///
/// Output length is `round(len · target / source)`. The kernel cutoff drops
/// to the target Nyquist when downsampling, and taps are renormalized to unit
/// DC gain.
pub fn resample<T: Real>(audio: &AudioBuffer<T>, target_rate: u32) -> Result<AudioBuffer<T>> {
    if target_rate == 0 {
        return Err(Error::Precondition("target rate must be positive".into()));
    }
    if target_rate == audio.sample_rate {
        return Ok(audio.clone());
    }
    let src = audio.sample_rate as f64;
    let dst = target_rate as f64;
    let out_len = (audio.len() as f64 * dst / src).round() as usize;
    let step = src / dst;
    let cutoff = (dst / src).min(1.0);
    let half = (RESAMPLE_TAPS / 2) as isize;
    let half_width = half as f64;
    let x = &audio.samples;

    let samples = (0..out_len)
        .map(|m| {
            let t = m as f64 * step;
            let base = t.floor() as isize;
            let mut acc = 0.0;
            let mut norm = 0.0;
            for k in (base - half + 1)..=(base + half) {
                let d = t - k as f64;
                if d.abs() >= half_width {
                    continue;
                }
                let w = 0.5 * (1.0 + (std::f64::consts::PI * d / half_width).cos());
                let tap = w * cutoff * sinc(cutoff * d);
                norm += tap;
                if k >= 0 && (k as usize) < x.len() {
                    acc += tap * x[k as usize].as_f64();
                }
            }
            T::lit(if norm.abs() > 1e-12 { acc / norm } else { 0.0 })
        })
        .collect();
    AudioBuffer::new(samples, target_rate)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}
