//! Mappings from quantum data to sound parameters.
//!
//! * method (a) [`map_pointwise`]: every grid node `(x, p, W)` becomes one
//!   oscillator with phase from `x`, frequency from `p`, amplitude from `W`;
//! * method (b) [`map_extrema`]: field minimum and maximum through a
//!   quadratic frequency map;
//! * method (c) [`map_chunks`]: four equal-height value slabs, each with a
//!   frequency and a signed volume ranked into an intensity;
//! * method (d) [`map_moments`]: mean and spread of `x` mapped onto piano keys
//!   to specify a Gaussian-profile sound;
//! * [`rabi_palette`]: emission waiting times become a harmonic series that
//!   grows one partial per emission.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qdynamics::{EmissionTrajectory, WaitingTimeHistogram};
use crate::wigner::{WignerError, WignerField};

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("field has {nodes} nodes, above the {budget}-oscillator budget")]
    BudgetExceeded { nodes: usize, budget: usize },
    #[error("field has no nodes")]
    EmptyField,
    #[error("quadratic anchors need w_min < 0 < w_max (got {w_min}, {w_max})")]
    DegenerateAnchors { w_min: f64, w_max: f64 },
    #[error("field is flat (min = max = {0})")]
    FlatField(f64),
    #[error("key window must satisfy 1 <= lo < hi <= 88 (got {0}, {1})")]
    InvalidWindow(f64, f64),
    #[error("frequency {0} Hz outside the audible range (20, 20000)")]
    InvalidFrequency(f64),
    #[error("highest harmonic {0} Hz reaches 20 kHz")]
    NyquistExceeded(f64),
    #[error("trajectory has no emissions")]
    EmptyTrajectory,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Wigner(#[from] WignerError),
}

pub const MIN_AUDIBLE_HZ: f64 = 20.0;
pub const MAX_AUDIBLE_HZ: f64 = 20_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Waveform {
    Sine,
    Triangle,
    /// Sine gated by a 50%-duty square at `rate` Hz.
    PulsedSine { rate: f64 },
}

/// One additive-synthesis voice. `phase` is a cycle fraction in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Partial {
    pub frequency: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub waveform: Waveform,
}

impl Partial {
    pub fn new(frequency: f64, amplitude: f64, phase: f64, waveform: Waveform) -> Result<Self, MappingError> {
        if !(frequency > MIN_AUDIBLE_HZ && frequency < MAX_AUDIBLE_HZ) {
            return Err(MappingError::InvalidFrequency(frequency));
        }
        if !amplitude.is_finite() {
            return Err(MappingError::InvalidParam(format!("amplitude {amplitude}")));
        }
        if !(0.0..1.0).contains(&phase) {
            return Err(MappingError::InvalidParam(format!("phase {phase} outside [0, 1)")));
        }
        Ok(Partial {
            frequency,
            amplitude,
            phase,
            waveform,
        })
    }

    pub fn sine(frequency: f64, amplitude: f64) -> Result<Self, MappingError> {
        Partial::new(frequency, amplitude, 0.0, Waveform::Sine)
    }
}

/// Affine map of `[from.0, from.1]` onto `[to.0, to.1]`, exact at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearMap {
    pub from: (f64, f64),
    pub to: (f64, f64),
}

impl LinearMap {
    pub fn new(from: (f64, f64), to: (f64, f64)) -> Self {
        LinearMap { from, to }
    }

    pub fn apply(&self, x: f64) -> f64 {
        let (lo, hi) = self.from;
        let (a, b) = self.to;
        if hi == lo {
            return a;
        }
        if x == hi {
            return b;
        }
        let y = a + (x - lo) / (hi - lo) * (b - a);
        if b >= a {
            y.min(b)
        } else {
            y.max(b)
        }
    }
}

pub const PHASE_SPAN_RADIANS: f64 = std::f64::consts::TAU;
/// Phase units of a triangle oscillator whose period spans `[0, 4)`.
pub const PHASE_SPAN_TRIANGLE: f64 = 4.0;
pub const POINTWISE_LOW_HZ: f64 = 440.0;
pub const POINTWISE_HIGH_HZ: f64 = 1760.0;
pub const PULSE_RATE_HZ: f64 = 0.5;
pub const OSCILLATOR_BUDGET: usize = 900;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativeMode {
    #[default]
    Triangle,
    PulsedSine,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointwiseOptions {
    pub negative_mode: NegativeMode,
    /// Lifts the 900-oscillator budget.
    pub allow_over_budget: bool,
}

fn wrap_cycle(fraction: f64) -> f64 {
    let f = fraction.rem_euclid(1.0);
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Method (a): one partial per node.
///
/// Phase: `x` linearly onto `[0, 2π)` radians for sines or `[0, 4)` units
/// for triangles, stored as a cycle fraction (the right end wraps to 0).
/// Frequency: `p` linearly onto `[440, 1760]` Hz. Nodes with `W ≥ 0` are
/// sines with amplitude `W`; negative nodes use `negative_mode` with
/// amplitude `|W|`.
pub fn map_pointwise(field: &WignerField, opts: PointwiseOptions) -> Result<Vec<Partial>, MappingError> {
    let nodes = field.values.len();
    if nodes == 0 {
        return Err(MappingError::EmptyField);
    }
    if nodes > OSCILLATOR_BUDGET && !opts.allow_over_budget {
        return Err(MappingError::BudgetExceeded {
            nodes,
            budget: OSCILLATOR_BUDGET,
        });
    }
    let sine_phase = LinearMap::new(field.grid.x_range(), (0.0, PHASE_SPAN_RADIANS));
    let tri_phase = LinearMap::new(field.grid.x_range(), (0.0, PHASE_SPAN_TRIANGLE));
    let freq = LinearMap::new(field.grid.p_range(), (POINTWISE_LOW_HZ, POINTWISE_HIGH_HZ));
    field
        .nodes()
        .map(|(x, p, w, _)| {
            let frequency = freq.apply(p);
            let (waveform, phase, amplitude) = if w >= 0.0 {
                (Waveform::Sine, sine_phase.apply(x) / PHASE_SPAN_RADIANS, w)
            } else {
                match opts.negative_mode {
                    NegativeMode::Triangle => (
                        Waveform::Triangle,
                        tri_phase.apply(x) / PHASE_SPAN_TRIANGLE,
                        w.abs(),
                    ),
                    NegativeMode::PulsedSine => (
                        Waveform::PulsedSine { rate: PULSE_RATE_HZ },
                        sine_phase.apply(x) / PHASE_SPAN_RADIANS,
                        w.abs(),
                    ),
                }
            };
            Partial::new(frequency, amplitude, wrap_cycle(phase), waveform)
        })
        .collect()
}

pub const QUADRATIC_LOW_HZ: f64 = 146.83;
pub const QUADRATIC_ZERO_HZ: f64 = 466.16;
pub const QUADRATIC_HIGH_HZ: f64 = 1318.5;

/// `f(w) = a·w² + b·w + c` through `(w_min, 146.83)`, `(0, 466.16)` and
/// `(w_max, 1318.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticMap {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub w_min: f64,
    pub w_max: f64,
}

impl QuadraticMap {
    pub fn apply(&self, w: f64) -> f64 {
        if w == self.w_min {
            return QUADRATIC_LOW_HZ;
        }
        if w == self.w_max {
            return QUADRATIC_HIGH_HZ;
        }
        (self.a * w + self.b) * w + self.c
    }
}

pub fn fit_quadratic(w_min: f64, w_max: f64) -> Result<QuadraticMap, MappingError> {
    if !(w_min < 0.0 && w_max > 0.0) || !w_min.is_finite() || !w_max.is_finite() {
        return Err(MappingError::DegenerateAnchors { w_min, w_max });
    }
    let c = QUADRATIC_ZERO_HZ;
    // a·w² + b·w = f − c at both outer anchors
    let (lo, hi) = (QUADRATIC_LOW_HZ - c, QUADRATIC_HIGH_HZ - c);
    let det = w_min * w_max * (w_min - w_max);
    let a = (lo * w_max - hi * w_min) / det;
    let b = (hi * w_min * w_min - lo * w_max * w_max) / det;
    Ok(QuadraticMap { a, b, c, w_min, w_max })
}

/// Method (b) output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrema {
    pub w_min: f64,
    pub w_max: f64,
    pub f_min: f64,
    pub f_max: f64,
}

pub fn map_extrema(field: &WignerField, qmap: &QuadraticMap) -> Result<Extrema, MappingError> {
    if field.values.is_empty() {
        return Err(MappingError::EmptyField);
    }
    let (w_min, w_max) = (field.min(), field.max());
    Ok(Extrema {
        w_min,
        w_max,
        f_min: qmap.apply(w_min),
        f_max: qmap.apply(w_max),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub level_lo: f64,
    pub level_hi: f64,
    pub half_height_level: f64,
    pub frequency: f64,
    pub signed_volume: f64,
    pub intensity: i8,
}

/// Method (c) output; `chunks[0]` is the lowest slab.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkAnalysis {
    pub chunks: [Chunk; 4],
    /// Level the volumes are measured from: 0 clamped into `[W_min, W_max]`.
    pub baseline: f64,
}

/// Length of `[a, b] ∩ [c, d]`.
fn overlap(a: f64, b: f64, c: f64, d: f64) -> f64 {
    (b.min(d) - a.max(c)).max(0.0)
}

/// Ranks signed volumes into intensities `{−2, −1, 1, …, 6}`.
///
/// Negative volumes split `[0, V⁻]` into two equal intervals (−1, −2),
/// positive ones split `[0, V⁺]` into six (1 … 6).
pub fn rank_intensities(volumes: &[f64]) -> Vec<i8> {
    let v_neg = volumes.iter().filter(|v| **v < 0.0).map(|v| v.abs()).fold(0.0, f64::max);
    let v_pos = volumes.iter().filter(|v| **v > 0.0).copied().fold(0.0, f64::max);
    volumes
        .iter()
        .map(|&v| {
            if v < 0.0 {
                if v.abs() > 0.5 * v_neg {
                    -2
                } else {
                    -1
                }
            } else if v_pos > 0.0 {
                ((6.0 * v / v_pos).ceil() as i8).clamp(1, 6)
            } else {
                1
            }
        })
        .collect()
}

/// Method (c): four value slabs of equal height `Δ = (W_max − W_min)/4`.
///
/// The solid between the baseline `b = clamp(0, W_min, W_max)` and the
/// surface `W` is cut at the slab levels. Each slab's signed volume sums,
/// over cells, the weight times the length of the cell's column inside the
/// slab, negative where the column lies below `b`. The four volumes add up
/// to `∫W − b·area`.
pub fn map_chunks(field: &WignerField, qmap: &QuadraticMap) -> Result<ChunkAnalysis, MappingError> {
    if field.values.is_empty() {
        return Err(MappingError::EmptyField);
    }
    let (w_min, w_max) = (field.min(), field.max());
    if !(w_max > w_min) {
        return Err(MappingError::FlatField(w_min));
    }
    let delta = (w_max - w_min) / 4.0;
    let baseline = 0.0_f64.clamp(w_min, w_max);
    let bounds: Vec<(f64, f64)> = (0..4)
        .map(|k| {
            let lo = w_min + k as f64 * delta;
            let hi = if k == 3 { w_max } else { w_min + (k + 1) as f64 * delta };
            (lo, hi)
        })
        .collect();
    let mut volumes = [0.0f64; 4];
    for (_, _, w, weight) in field.nodes() {
        for (k, &(lo, hi)) in bounds.iter().enumerate() {
            if w >= baseline {
                volumes[k] += weight * overlap(baseline, w, lo, hi);
            } else {
                volumes[k] -= weight * overlap(w, baseline, lo, hi);
            }
        }
    }
    let intensities = rank_intensities(&volumes);
    let chunks = std::array::from_fn(|k| {
        let (lo, hi) = bounds[k];
        let half = w_min + (k as f64 + 0.5) * delta;
        Chunk {
            level_lo: lo,
            level_hi: hi,
            half_height_level: half,
            frequency: qmap.apply(half),
            signed_volume: volumes[k],
            intensity: intensities[k],
        }
    });
    Ok(ChunkAnalysis { chunks, baseline })
}

/// Specification of a sound whose spectrum has a Gaussian profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSoundSpec {
    pub mean_frequency: f64,
    pub spread: f64,
}

pub const DEFAULT_KEY_WINDOW: (f64, f64) = (25.0, 73.0);

/// Frequency of piano key `n` in 12-TET with key 49 at 440 Hz.
pub fn piano_key_frequency(n: f64) -> f64 {
    440.0 * ((n - 49.0) / 12.0).exp2()
}

/// Method (d).
///
/// The x-mean is mapped linearly from the grid's x-range onto keys
/// `[k_lo, k_hi]`; the x-spread is scaled by the same factor into a key
/// spread `s`, and `spread = f·(2^{s/12} − 1)`.
pub fn map_moments(field: &WignerField, key_window: (f64, f64)) -> Result<GaussianSoundSpec, MappingError> {
    let (k_lo, k_hi) = key_window;
    if !(1.0 <= k_lo && k_lo < k_hi && k_hi <= 88.0) {
        return Err(MappingError::InvalidWindow(k_lo, k_hi));
    }
    let (mean, std) = field.moments_x()?;
    let (x_lo, x_hi) = field.grid.x_range();
    let key = LinearMap::new((x_lo, x_hi), (k_lo, k_hi)).apply(mean);
    let key_spread = if x_hi > x_lo {
        std * (k_hi - k_lo) / (x_hi - x_lo)
    } else {
        0.0
    };
    let mean_frequency = piano_key_frequency(key);
    let spread = mean_frequency * ((key_spread / 12.0).exp2() - 1.0);
    if !(spread > 0.0) {
        return Err(MappingError::InvalidParam(format!(
            "x-spread {std} gives no spectral spread"
        )));
    }
    Ok(GaussianSoundSpec {
        mean_frequency,
        spread,
    })
}

/// A timbre held from `start` for `duration` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimbreEvent {
    pub start: f64,
    pub duration: f64,
    pub partials: Vec<Partial>,
    /// Harmonic number (2 = first overtone) that the opening emission raised.
    #[serde(default)]
    pub added_harmonic: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaletteOptions {
    pub fundamental: f64,
    /// Performance seconds per simulated second.
    pub dilation: f64,
}

/// Dilation that makes the mean spacing between events `seconds` long.
pub fn dilation_for_spacing(trajectory: &EmissionTrajectory, seconds: f64) -> f64 {
    let n = trajectory.len().max(1) as f64;
    let mean = trajectory.emission_times.last().copied().unwrap_or(trajectory.duration) / n;
    seconds / mean
}

pub const DEFAULT_EVENT_SPACING_S: f64 = 2.0;

/// Turns an emission record into a timbre progression.
///
/// Event 0 covers `[0, t₁)` and holds only the fundamental. Event `i ≥ 1`
/// covers `[tᵢ, tᵢ₊₁)` (the last one ends at `T`) and adds harmonics
/// `k·f0`, `k = 2 … bins+1`, whose amplitudes are the counts of all
/// waiting times up to emission `i` in bin `k − 2` of `hist`, divided by the
/// largest final count. Harmonics with zero count are omitted.
pub fn rabi_palette(
    hist: &WaitingTimeHistogram,
    trajectory: &EmissionTrajectory,
    opts: PaletteOptions,
) -> Result<Vec<TimbreEvent>, MappingError> {
    if trajectory.is_empty() {
        return Err(MappingError::EmptyTrajectory);
    }
    let bins = hist.bin_count();
    let top = opts.fundamental * (bins + 1) as f64;
    if top >= MAX_AUDIBLE_HZ {
        return Err(MappingError::NyquistExceeded(top));
    }
    if !(opts.dilation > 0.0 && opts.dilation.is_finite()) {
        return Err(MappingError::InvalidParam(format!("dilation {}", opts.dilation)));
    }
    let fundamental = Partial::sine(opts.fundamental, 1.0)?;
    let landed: Vec<Option<usize>> = trajectory.intervals().map(|iv| hist.bin_of(iv)).collect();
    let mut counts = vec![0u64; bins];
    for bin in landed.iter().flatten() {
        counts[*bin] += 1;
    }
    let norm = counts.iter().copied().max().unwrap_or(0).max(1) as f64;

    let mut boundaries = vec![0.0];
    boundaries.extend(trajectory.emission_times.iter().copied());
    boundaries.push(trajectory.duration);

    let mut running = vec![0u64; bins];
    let mut events = Vec::with_capacity(trajectory.len() + 1);
    for i in 0..=trajectory.len() {
        let added = if i == 0 { None } else { landed[i - 1] };
        if let Some(bin) = added {
            running[bin] += 1;
        }
        let (start, end) = (boundaries[i], boundaries[i + 1]);
        if end <= start {
            continue;
        }
        let mut partials = vec![fundamental];
        for (bin, &count) in running.iter().enumerate() {
            if count > 0 {
                partials.push(Partial::sine(
                    opts.fundamental * (bin + 2) as f64,
                    count as f64 / norm,
                )?);
            }
        }
        events.push(TimbreEvent {
            start: start * opts.dilation,
            duration: (end - start) * opts.dilation,
            partials,
            added_harmonic: added.map(|b| b + 2),
        });
    }
    Ok(events)
}

/// A frequency rounded onto the quarter-tone grid around A4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarterTone {
    /// 24-TET steps from A4 = 440 Hz.
    pub step: i32,
    pub quantized: f64,
    pub exact: f64,
}

pub fn quarter_tone_frequency(step: i32) -> f64 {
    440.0 * (step as f64 / 24.0).exp2()
}

/// Nearest quarter tone (ties round up); the input survives as `exact`.
pub fn quantize_quarter_tone(freq: f64) -> Result<QuarterTone, MappingError> {
    if !(freq > 0.0 && freq.is_finite()) {
        return Err(MappingError::InvalidFrequency(freq));
    }
    let step = (24.0 * (freq / 440.0).log2() + 0.5).floor() as i32;
    Ok(QuarterTone {
        step,
        quantized: quarter_tone_frequency(step),
        exact: freq,
    })
}
