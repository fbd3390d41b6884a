//! Driven two-level atom with spontaneous emission.
//!
//! The atom starts in the ground state, Rabi-oscillates under resonant
//! driving, and emits a photon at random times; each emission resets it to
//! the ground state. Waiting times between emissions follow
//! `w(τ) = Γ·P_e(τ)·exp(−Γ·∫₀^τ P_e)`.
//!
//! Internally everything is evaluated in the dimensionless time `s = Ω·τ`
//! with the single shape parameter `g = Γ/Ω`, so rescaling `Ω`, `Γ` and the
//! duration by a common factor only rescales the physical times.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::{EntropyError, EntropySource};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("damped model requires Ω > Γ/4 (got Ω = {omega}, Γ = {gamma})")]
    ModelDomain { omega: f64, gamma: f64 },
    #[error("bin edges must be strictly increasing with at least two entries")]
    InvalidBins,
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PopulationModel {
    /// `P_e = sin²(Ωτ/2)`.
    #[default]
    Ideal,
    /// Resonant optical-Bloch (Torrey) solution with decay:
    /// `P_e = Ω²/(2Ω²+Γ²)·[1 − e^{−3Γτ/4}(cos Ω_Rτ + 3Γ/(4Ω_R) sin Ω_Rτ)]`.
    Damped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiParams {
    /// Ω in rad/s.
    pub rabi_frequency: f64,
    /// Γ in 1/s.
    pub decay_rate: f64,
    /// T in s.
    pub duration: f64,
    pub model: PopulationModel,
}

impl RabiParams {
    pub fn new(
        rabi_frequency: f64,
        decay_rate: f64,
        duration: f64,
        model: PopulationModel,
    ) -> Result<Self, DynamicsError> {
        let params = RabiParams {
            rabi_frequency,
            decay_rate,
            duration,
            model,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.rabi_frequency > 0.0 && self.rabi_frequency.is_finite()) {
            return Err(DynamicsError::InvalidParam(format!(
                "Rabi frequency must be > 0, got {}",
                self.rabi_frequency
            )));
        }
        if !(self.decay_rate >= 0.0 && self.decay_rate.is_finite()) {
            return Err(DynamicsError::InvalidParam(format!(
                "decay rate must be >= 0, got {}",
                self.decay_rate
            )));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(DynamicsError::InvalidParam(format!(
                "duration must be > 0, got {}",
                self.duration
            )));
        }
        if self.model == PopulationModel::Damped && self.rabi_frequency <= self.decay_rate / 4.0 {
            return Err(DynamicsError::ModelDomain {
                omega: self.rabi_frequency,
                gamma: self.decay_rate,
            });
        }
        Ok(())
    }

    fn shape(&self) -> Result<Shape, DynamicsError> {
        self.validate()?;
        Ok(Shape::new(self.decay_rate / self.rabi_frequency, self.model))
    }

    fn require_decay(&self) -> Result<(), DynamicsError> {
        if self.decay_rate == 0.0 {
            return Err(DynamicsError::InvalidParam(
                "decay rate Γ = 0: no emission possible".into(),
            ));
        }
        Ok(())
    }
}

/// Population dynamics in dimensionless time `s = Ωτ`.
#[derive(Debug, Clone, Copy)]
struct Shape {
    g: f64,
    model: PopulationModel,
    // damped-model constants
    k: f64,
    a: f64,
    w: f64,
}

impl Shape {
    fn new(g: f64, model: PopulationModel) -> Self {
        let k = 0.5 / (1.0 + g * g / 2.0);
        let a = 0.75 * g;
        let w = (1.0 - g * g / 16.0).max(0.0).sqrt();
        Shape { g, model, k, a, w }
    }

    fn population(&self, s: f64) -> f64 {
        match self.model {
            PopulationModel::Ideal => {
                let h = (0.5 * s).sin();
                h * h
            }
            PopulationModel::Damped => {
                let decay = (-self.a * s).exp();
                let osc = (self.w * s).cos() + self.a / self.w * (self.w * s).sin();
                (self.k * (1.0 - decay * osc)).clamp(0.0, 1.0)
            }
        }
    }

    /// `∫₀^s P(s′) ds′`.
    fn integrated(&self, s: f64) -> f64 {
        match self.model {
            PopulationModel::Ideal => 0.5 * (s - s.sin()),
            PopulationModel::Damped => {
                let (a, w) = (self.a, self.w);
                let norm = a * a + w * w;
                let decay = (-a * s).exp();
                let (sin, cos) = (w * s).sin_cos();
                let cos_part = (decay * (w * sin - a * cos) + a) / norm;
                let sin_part = (decay * (-a * sin - w * cos) + w) / norm;
                self.k * (s - cos_part - a / w * sin_part)
            }
        }
    }

    /// Cumulative hazard `Γ∫₀^τ P_e dτ′ = g·∫₀^s P ds′`.
    fn hazard(&self, s: f64) -> f64 {
        self.g * self.integrated(s)
    }
}

pub fn excited_population(params: &RabiParams, tau: f64) -> Result<f64, DynamicsError> {
    if !(tau >= 0.0) {
        return Err(DynamicsError::InvalidParam(format!("τ must be >= 0, got {tau}")));
    }
    let shape = params.shape()?;
    Ok(shape.population(params.rabi_frequency * tau))
}

/// `∫₀^τ P_e(s) ds` in seconds.
pub fn integrated_population(params: &RabiParams, tau: f64) -> Result<f64, DynamicsError> {
    if !(tau >= 0.0) {
        return Err(DynamicsError::InvalidParam(format!("τ must be >= 0, got {tau}")));
    }
    let shape = params.shape()?;
    Ok(shape.integrated(params.rabi_frequency * tau) / params.rabi_frequency)
}

pub fn waiting_time_density(params: &RabiParams, tau: f64) -> Result<f64, DynamicsError> {
    params.require_decay()?;
    if !(tau >= 0.0) {
        return Err(DynamicsError::InvalidParam(format!("τ must be >= 0, got {tau}")));
    }
    let shape = params.shape()?;
    let s = params.rabi_frequency * tau;
    Ok(params.decay_rate * shape.population(s) * (-shape.hazard(s)).exp())
}

pub fn waiting_time_cdf(params: &RabiParams, tau: f64) -> Result<f64, DynamicsError> {
    params.require_decay()?;
    if !(tau >= 0.0) {
        return Err(DynamicsError::InvalidParam(format!("τ must be >= 0, got {tau}")));
    }
    let shape = params.shape()?;
    Ok(-(-shape.hazard(params.rabi_frequency * tau)).exp_m1())
}

const TABLE_NODES: usize = 4096;
const TAIL_MASS: f64 = 1e-9;
const BISECTION_RTOL: f64 = 1e-9;

/// Inverse-CDF sampler over a precomputed monotone table of the cumulative
/// hazard.
///
/// Nodes are `0` followed by 4095 log-spaced points up to the time where the
/// CDF exceeds `1 − 1e−9`; each draw locates its cell by binary search and
/// refines by bisection to relative tolerance `1e−9`.
#[derive(Debug, Clone)]
pub struct WaitingTimeSampler {
    params: RabiParams,
    shape: Shape,
    nodes: Vec<f64>,
    hazards: Vec<f64>,
}

impl WaitingTimeSampler {
    pub fn new(params: &RabiParams) -> Result<Self, DynamicsError> {
        params.require_decay()?;
        let shape = params.shape()?;
        let target = -TAIL_MASS.ln();
        let mut s_max = 1.0;
        while shape.hazard(s_max) <= target {
            s_max *= 2.0;
        }
        let s_min = s_max * 1e-6;
        let ratio = (s_max / s_min).ln();
        let mut nodes = Vec::with_capacity(TABLE_NODES);
        nodes.push(0.0);
        let last = (TABLE_NODES - 2) as f64;
        for k in 0..TABLE_NODES - 1 {
            nodes.push(s_min * (ratio * k as f64 / last).exp());
        }
        let hazards = nodes.iter().map(|&s| shape.hazard(s)).collect();
        Ok(WaitingTimeSampler {
            params: *params,
            shape,
            nodes,
            hazards,
        })
    }

    pub fn params(&self) -> &RabiParams {
        &self.params
    }

    /// Dimensionless quantile `s(u)` solving `CDF(s) = u`.
    fn quantile_scaled(&self, u: f64) -> f64 {
        let target = -(-u).ln_1p();
        if target <= 0.0 {
            return 0.0;
        }
        let mut hi_idx = self.hazards.partition_point(|&h| h < target);
        let (mut lo, mut hi);
        if hi_idx >= self.nodes.len() {
            lo = *self.nodes.last().unwrap();
            hi = lo * 2.0;
            while self.shape.hazard(hi) < target {
                lo = hi;
                hi *= 2.0;
            }
        } else {
            if hi_idx == 0 {
                hi_idx = 1;
            }
            lo = self.nodes[hi_idx - 1];
            hi = self.nodes[hi_idx];
        }
        while hi - lo > BISECTION_RTOL * hi {
            let mid = 0.5 * (lo + hi);
            if self.shape.hazard(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Waiting time (s) at CDF level `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        self.quantile_scaled(u) / self.params.rabi_frequency
    }

    pub fn sample(&self, src: &mut EntropySource) -> Result<f64, DynamicsError> {
        Ok(self.quantile(src.next_uniform()?))
    }
}

/// Draws one waiting time. Builds a fresh table; reuse a
/// [`WaitingTimeSampler`] when drawing many.
pub fn sample_waiting_time(
    params: &RabiParams,
    src: &mut EntropySource,
) -> Result<f64, DynamicsError> {
    WaitingTimeSampler::new(params)?.sample(src)
}

/// Emission times of one simulated atom over `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionTrajectory {
    pub emission_times: Vec<f64>,
    /// The simulated window `T`.
    pub duration: f64,
}

impl EmissionTrajectory {
    pub fn len(&self) -> usize {
        self.emission_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emission_times.is_empty()
    }

    /// Intervals between consecutive emissions, the first measured from 0.
    pub fn intervals(&self) -> impl Iterator<Item = f64> + '_ {
        let starts = std::iter::once(0.0).chain(self.emission_times.iter().copied());
        self.emission_times.iter().zip(starts).map(|(t, prev)| t - prev)
    }
}

// Redraws guard the measure-zero case of a zero (or sub-ulp) waiting time.
const MAX_REDRAWS: usize = 64;

pub fn simulate_with(
    sampler: &WaitingTimeSampler,
    src: &mut EntropySource,
) -> Result<EmissionTrajectory, DynamicsError> {
    let params = sampler.params();
    let mut times = Vec::new();
    let mut t = 0.0_f64;
    'outer: loop {
        for _ in 0..MAX_REDRAWS {
            let next = t + sampler.sample(src)?;
            if next > params.duration {
                break 'outer;
            }
            if next > t {
                times.push(next);
                t = next;
                continue 'outer;
            }
        }
        return Err(DynamicsError::InvalidParam(
            "waiting times vanish relative to elapsed time".into(),
        ));
    }
    Ok(EmissionTrajectory {
        emission_times: times,
        duration: params.duration,
    })
}

pub fn simulate_trajectory(
    params: &RabiParams,
    src: &mut EntropySource,
) -> Result<EmissionTrajectory, DynamicsError> {
    let sampler = WaitingTimeSampler::new(params)?;
    simulate_with(&sampler, src)
}

/// Simulates `count` trajectories, trajectory `i` drawing from
/// `src.split(i, bytes_per_trajectory)`. Results are in index order
/// regardless of thread scheduling.
pub fn simulate_batch(
    params: &RabiParams,
    src: &EntropySource,
    count: usize,
    bytes_per_trajectory: usize,
) -> Result<Vec<EmissionTrajectory>, DynamicsError> {
    let sampler = WaitingTimeSampler::new(params)?;
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(count.max(1));
    let chunk = count.div_ceil(workers.max(1)).max(1);
    let results: Vec<Result<Vec<EmissionTrajectory>, DynamicsError>> =
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..count)
                .step_by(chunk)
                .map(|start| {
                    let sampler = &sampler;
                    scope.spawn(move || {
                        (start..(start + chunk).min(count))
                            .map(|i| {
                                let mut worker = src.split(i as u64, bytes_per_trajectory);
                                simulate_with(sampler, &mut worker)
                            })
                            .collect()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
    let mut out = Vec::with_capacity(count);
    for part in results {
        out.extend(part?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaitingTimeHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Every interval seen, including those outside the edges.
    pub total: u64,
}

impl WaitingTimeHistogram {
    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    /// Index of the bin holding `value`; the last bin is closed on the right.
    pub fn bin_of(&self, value: f64) -> Option<usize> {
        locate_bin(&self.bin_edges, value)
    }

    /// Counts divided by `total · bin width`, comparable to a density.
    pub fn normalized(&self) -> Vec<f64> {
        if self.total == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(&c, e)| c as f64 / (self.total as f64 * (e[1] - e[0])))
            .collect()
    }

    /// `bin_lo,bin_hi,count` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (e, c) in self.bin_edges.windows(2).zip(&self.counts) {
            out.push_str(&format!("{:e},{:e},{}\n", e[0], e[1], c));
        }
        out
    }
}

fn locate_bin(edges: &[f64], value: f64) -> Option<usize> {
    let last = *edges.last()?;
    if value < edges[0] || value > last || value.is_nan() {
        return None;
    }
    if value == last {
        return Some(edges.len() - 2);
    }
    Some(edges.partition_point(|&e| e <= value) - 1)
}

pub fn validate_edges(bin_edges: &[f64]) -> Result<(), DynamicsError> {
    if bin_edges.len() < 2
        || bin_edges.iter().any(|e| !e.is_finite())
        || bin_edges.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(DynamicsError::InvalidBins);
    }
    Ok(())
}

pub fn uniform_bin_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins)
        .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
        .collect()
}

/// Bins every inter-emission interval of every trajectory. Intervals outside
/// the edges are counted in `total` only.
pub fn accumulate_histogram(
    trajectories: &[EmissionTrajectory],
    bin_edges: &[f64],
) -> Result<WaitingTimeHistogram, DynamicsError> {
    validate_edges(bin_edges)?;
    let mut counts = vec![0u64; bin_edges.len() - 1];
    let mut total = 0;
    for interval in trajectories.iter().flat_map(|t| t.intervals()) {
        total += 1;
        if let Some(bin) = locate_bin(bin_edges, interval) {
            counts[bin] += 1;
        }
    }
    Ok(WaitingTimeHistogram {
        bin_edges: bin_edges.to_vec(),
        counts,
        total,
    })
}

/// Default histogram span: the waiting time below which 99% of emissions
/// fall.
pub fn default_histogram_span(params: &RabiParams) -> Result<f64, DynamicsError> {
    Ok(WaitingTimeSampler::new(params)?.quantile(0.99))
}
