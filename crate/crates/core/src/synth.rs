//! Additive synthesis and WAV output.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::entropy::{EntropyError, EntropySource};
use crate::mapping::{
    quantize_quarter_tone, quarter_tone_frequency, GaussianSoundSpec, MappingError, Partial,
    TimbreEvent, Waveform, MAX_AUDIBLE_HZ, MIN_AUDIBLE_HZ,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("{0} partials exceed the limit of {MAX_PARTIALS}")]
    TooManyPartials(usize),
    #[error("{frequency} Hz is at or above Nyquist for {sample_rate} Hz sampling")]
    NyquistExceeded { frequency: f64, sample_rate: u32 },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed WAV data: {0}")]
    BadWav(String),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

pub const DEFAULT_SAMPLE_RATE: u32 = 44_100;
pub const MAX_PARTIALS: usize = 4096;
/// −1 dBFS.
pub const PEAK_LEVEL: f64 = 0.891;
pub const FADE_SECONDS: f64 = 0.010;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub sample_rate: u32,
    pub samples: Vec<f64>,
}

impl AudioBuffer {
    pub fn silent(sample_rate: u32, len: usize) -> Self {
        AudioBuffer {
            sample_rate,
            samples: vec![0.0; len],
        }
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Scales to peak [`PEAK_LEVEL`]; silent buffers stay silent.
    pub fn normalize(&mut self) {
        let peak = self.peak();
        if peak > 0.0 {
            let gain = PEAK_LEVEL / peak;
            for s in &mut self.samples {
                *s = (*s * gain).clamp(-1.0, 1.0);
            }
        }
    }
}

/// Unit triangle with the sine's phase convention: 0 at phase 0, +1 at ¼.
fn triangle(cycle: f64) -> f64 {
    let f = cycle - cycle.floor();
    if f < 0.25 {
        4.0 * f
    } else if f < 0.75 {
        2.0 - 4.0 * f
    } else {
        4.0 * f - 4.0
    }
}

fn oscillator(p: &Partial, t: f64) -> f64 {
    let cycle = (p.frequency * t).fract() + p.phase;
    match p.waveform {
        Waveform::Sine => (TAU * cycle).sin(),
        Waveform::Triangle => triangle(cycle),
        Waveform::PulsedSine { rate } => {
            if (rate * t).fract() < 0.5 {
                (TAU * cycle).sin()
            } else {
                0.0
            }
        }
    }
}

fn check_partials(partials: &[Partial], sample_rate: u32) -> Result<(), SynthError> {
    if partials.len() > MAX_PARTIALS {
        return Err(SynthError::TooManyPartials(partials.len()));
    }
    if sample_rate == 0 {
        return Err(SynthError::InvalidParam("sample rate must be > 0".into()));
    }
    let nyquist = sample_rate as f64 / 2.0;
    if let Some(p) = partials.iter().find(|p| p.frequency >= nyquist) {
        return Err(SynthError::NyquistExceeded {
            frequency: p.frequency,
            sample_rate,
        });
    }
    Ok(())
}

fn sample_count(duration: f64, sample_rate: u32) -> Result<usize, SynthError> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(SynthError::InvalidParam(format!("duration {duration}")));
    }
    Ok((duration * sample_rate as f64).round() as usize)
}

/// Sum of oscillators without normalization. Linear in the partial set.
pub fn mix_partials(partials: &[Partial], duration: f64, sample_rate: u32) -> Result<AudioBuffer, SynthError> {
    check_partials(partials, sample_rate)?;
    let n = sample_count(duration, sample_rate)?;
    let rate = sample_rate as f64;
    let mut out = AudioBuffer::silent(sample_rate, n);
    for p in partials.iter().filter(|p| p.amplitude != 0.0) {
        for (k, s) in out.samples.iter_mut().enumerate() {
            *s += p.amplitude * oscillator(p, k as f64 / rate);
        }
    }
    Ok(out)
}

pub fn render_partials(partials: &[Partial], duration: f64, sample_rate: u32) -> Result<AudioBuffer, SynthError> {
    let mut buf = mix_partials(partials, duration, sample_rate)?;
    buf.normalize();
    Ok(buf)
}

/// Raised-cosine envelope: fade in over `fade`, hold until `hold`, fade out
/// over the following `fade`.
fn envelope(t: f64, hold: f64, fade: f64) -> f64 {
    if t < fade {
        0.5 * (1.0 - (PI * t / fade).cos())
    } else if t <= hold {
        1.0
    } else if t < hold + fade {
        0.5 * (1.0 + (PI * (t - hold) / fade).cos())
    } else {
        0.0
    }
}

fn render_event(event: &TimbreEvent, sample_rate: u32) -> Result<(usize, Vec<f64>), SynthError> {
    check_partials(&event.partials, sample_rate)?;
    if !(event.duration > 0.0 && event.start >= 0.0) {
        return Err(SynthError::InvalidParam(format!(
            "event at {} with duration {}",
            event.start, event.duration
        )));
    }
    let rate = sample_rate as f64;
    let fade = FADE_SECONDS.min(event.duration / 2.0);
    let offset = (event.start * rate).round() as usize;
    let len = ((event.duration + fade) * rate).round() as usize;
    let mut samples = vec![0.0; len];
    for (k, s) in samples.iter_mut().enumerate() {
        let t = k as f64 / rate;
        let env = envelope(t, event.duration, fade);
        if env == 0.0 {
            continue;
        }
        let sum: f64 = event
            .partials
            .iter()
            .map(|p| p.amplitude * oscillator(p, t))
            .sum();
        *s = env * sum;
    }
    Ok((offset, samples))
}

/// Mixes events (overlaps add) without the final normalization.
pub fn mix_sequence(events: &[TimbreEvent], sample_rate: u32) -> Result<AudioBuffer, SynthError> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .clamp(1, events.len().max(1));
    let chunk = events.len().div_ceil(workers).max(1);
    let rendered: Vec<Result<(usize, Vec<f64>), SynthError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = events
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|e| render_event(e, sample_rate))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    let mut out = AudioBuffer::silent(sample_rate, 0);
    for piece in rendered {
        let (offset, samples) = piece?;
        let end = offset + samples.len();
        if out.samples.len() < end {
            out.samples.resize(end, 0.0);
        }
        for (dst, src) in out.samples[offset..end].iter_mut().zip(samples) {
            *dst += src;
        }
    }
    Ok(out)
}

pub fn render_sequence(events: &[TimbreEvent], sample_rate: u32) -> Result<AudioBuffer, SynthError> {
    let mut buf = mix_sequence(events, sample_rate)?;
    buf.normalize();
    Ok(buf)
}

/// Quarter-tone partials spanning `mean ± 3·spread` (clipped to the audible
/// band) with Gaussian amplitudes and random phases. If no quarter tone falls
/// inside the span, the one nearest the mean is used alone.
pub fn gaussian_partials(spec: &GaussianSoundSpec, src: &mut EntropySource) -> Result<Vec<Partial>, SynthError> {
    let audible = MIN_AUDIBLE_HZ..MAX_AUDIBLE_HZ;
    if !(audible.contains(&spec.mean_frequency) && spec.spread > 0.0) {
        return Err(SynthError::InvalidParam(format!(
            "gaussian spec mean {} spread {}",
            spec.mean_frequency, spec.spread
        )));
    }
    // nudged inward so the edge quarter tones stay strictly inside the band
    let lo = (spec.mean_frequency - 3.0 * spec.spread).max(MIN_AUDIBLE_HZ * (1.0 + 1e-12));
    let hi = (spec.mean_frequency + 3.0 * spec.spread).min(MAX_AUDIBLE_HZ * (1.0 - 1e-12));
    let first = (24.0 * (lo / 440.0).log2()).ceil() as i32;
    let last = (24.0 * (hi / 440.0).log2()).floor() as i32;
    let mut steps: Vec<i32> = (first..=last).collect();
    if steps.is_empty() {
        steps.push(quantize_quarter_tone(spec.mean_frequency)?.step);
    }
    steps
        .into_iter()
        .map(|step| {
            let f = quarter_tone_frequency(step);
            let z = (f - spec.mean_frequency) / spec.spread;
            let phase = src.next_uniform()?;
            Ok(Partial::new(f, (-0.5 * z * z).exp(), phase, Waveform::Sine)?)
        })
        .collect()
}

pub fn render_gaussian_sound(
    spec: &GaussianSoundSpec,
    duration: f64,
    sample_rate: u32,
    src: &mut EntropySource,
) -> Result<AudioBuffer, SynthError> {
    let partials = gaussian_partials(spec, src)?;
    render_partials(&partials, duration, sample_rate)
}

/// 16-bit mono PCM RIFF/WAVE with only `fmt ` and `data` chunks.
pub fn encode_wav(buffer: &AudioBuffer) -> Vec<u8> {
    let data_len = (buffer.samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&buffer.sample_rate.to_le_bytes());
    out.extend_from_slice(&(buffer.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &buffer.samples {
        let v = (32767.0 * s.clamp(-1.0, 1.0)).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_wav(buffer: &AudioBuffer, path: impl AsRef<Path>) -> Result<(), SynthError> {
    let path = path.as_ref();
    fs::write(path, encode_wav(buffer)).map_err(|source| SynthError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads back the layout produced by [`encode_wav`].
pub fn decode_wav(bytes: &[u8]) -> Result<AudioBuffer, SynthError> {
    let bad = |m: &str| SynthError::BadWav(m.to_string());
    if bytes.len() < 44 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("missing RIFF/WAVE header"));
    }
    if &bytes[12..16] != b"fmt " || u16::from_le_bytes([bytes[20], bytes[21]]) != 1 {
        return Err(bad("expected PCM fmt chunk"));
    }
    if u16::from_le_bytes([bytes[22], bytes[23]]) != 1 || u16::from_le_bytes([bytes[34], bytes[35]]) != 16 {
        return Err(bad("expected 16-bit mono"));
    }
    let sample_rate = u32::from_le_bytes(bytes[24..28].try_into().unwrap());
    if &bytes[36..40] != b"data" {
        return Err(bad("missing data chunk"));
    }
    let len = u32::from_le_bytes(bytes[40..44].try_into().unwrap()) as usize;
    let data = bytes.get(44..44 + len).ok_or_else(|| bad("truncated data"))?;
    let samples = data
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32767.0)
        .collect();
    Ok(AudioBuffer { sample_rate, samples })
}
