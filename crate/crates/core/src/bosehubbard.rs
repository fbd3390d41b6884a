//! Gutzwiller mean-field solver for the Bose-Hubbard model in a harmonic trap.
//!
//! Energies are in units of the interaction `U` unless stated otherwise.
//! Sites are stored x-major: site `(x, y)` has index `x * ly + y`, which is
//! also the node order of [`WignerField`], so snapshots can be reinterpreted
//! as fields without copying.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::{EntropyError, EntropySource};
use crate::wigner::{FieldSource, Grid, WignerError, WignerField};

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("invalid lattice spec: {0}")]
    InvalidSpec(String),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error(
        "no convergence after {iterations} sweeps (max |Δφ| = {max_phi_change:e}, max |Δn| = {max_mean_change:e})"
    )]
    NoConvergence {
        iterations: usize,
        max_phi_change: f64,
        max_mean_change: f64,
        state: Box<GutzwillerState>,
    },
    #[error("sweep point {index} failed: {source}")]
    SweepFailed {
        index: usize,
        #[source]
        source: Box<LatticeError>,
    },
    #[error("empty sweep schedule")]
    EmptySchedule,
    #[error("cannot reach {target} atoms: {reason}")]
    TargetUnreachable { target: f64, reason: String },
    #[error("cannot parse dims {0:?} (expected L or LxxLy)")]
    ParseDims(String),
    #[error("expected {expected} sites, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Wigner(#[from] WignerError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

pub const DEFAULT_N_MAX: usize = 8;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Order-parameter seed used to break the U(1) symmetry of Fock starts.
pub const SYMMETRY_SEED: f64 = 1e-6;
/// Largest acceptable weight in the top occupation level at convergence.
pub const TRUNCATION_WARN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Dims {
    Chain { length: usize },
    Square { lx: usize, ly: usize },
}

impl Default for Dims {
    fn default() -> Self {
        Dims::Square { lx: 20, ly: 20 }
    }
}

impl Dims {
    /// `(lx, ly)`; a chain is `L × 1`.
    pub fn shape(&self) -> (usize, usize) {
        match *self {
            Dims::Chain { length } => (length, 1),
            Dims::Square { lx, ly } => (lx, ly),
        }
    }

    pub fn sites(&self) -> usize {
        let (lx, ly) = self.shape();
        lx * ly
    }

    pub fn coords(&self, site: usize) -> (usize, usize) {
        let ly = self.shape().1;
        (site / ly, site % ly)
    }

    fn neighbors(&self, site: usize) -> impl Iterator<Item = usize> {
        let (lx, ly) = self.shape();
        let (x, y) = self.coords(site);
        let candidates = [
            (x > 0).then(|| site - ly),
            (x + 1 < lx).then(|| site + ly),
            (y > 0).then(|| site - 1),
            (y + 1 < ly).then(|| site + 1),
        ];
        candidates.into_iter().flatten()
    }

    /// Squared distance from the lattice center in site units.
    pub fn radius_sq(&self, site: usize) -> f64 {
        let (lx, ly) = self.shape();
        let (x, y) = self.coords(site);
        let dx = x as f64 - (lx as f64 - 1.0) / 2.0;
        let dy = y as f64 - (ly as f64 - 1.0) / 2.0;
        dx * dx + dy * dy
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dims::Chain { length } => write!(f, "{length}"),
            Dims::Square { lx, ly } => write!(f, "{lx}x{ly}"),
        }
    }
}

impl FromStr for Dims {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || LatticeError::ParseDims(s.to_string());
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        match s.split_once(['x', 'X']) {
            Some((a, b)) => Ok(Dims::Square { lx: num(a)?, ly: num(b)? }),
            None => Ok(Dims::Chain { length: num(s)? }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub dims: Dims,
    pub hopping: f64,
    pub interaction: f64,
    pub chemical_potential: f64,
    pub trap_curvature: f64,
    pub n_max: usize,
}

impl LatticeSpec {
    /// `U = 1`, `t = 0`, `μ = 0.5`, no trap.
    pub fn new(dims: Dims) -> Self {
        LatticeSpec {
            dims,
            hopping: 0.0,
            interaction: 1.0,
            chemical_potential: 0.5,
            trap_curvature: 0.0,
            n_max: DEFAULT_N_MAX,
        }
    }

    /// Sets `t` and `μ` from ratios to the current `U`.
    pub fn with_ratios(mut self, t_over_u: f64, mu_over_u: f64) -> Self {
        self.hopping = t_over_u * self.interaction;
        self.chemical_potential = mu_over_u * self.interaction;
        self
    }

    pub fn with_trap(mut self, v_over_u: f64) -> Self {
        self.trap_curvature = v_over_u * self.interaction;
        self
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn ratios(&self) -> SnapshotParams {
        SnapshotParams {
            t_over_u: self.hopping / self.interaction,
            mu_over_u: self.chemical_potential / self.interaction,
            v_over_u: self.trap_curvature / self.interaction,
        }
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        let bad = |m: String| Err(LatticeError::InvalidSpec(m));
        let (lx, ly) = self.dims.shape();
        let too_small = match self.dims {
            Dims::Chain { length } => length < 2,
            Dims::Square { .. } => lx < 2 || ly < 2,
        };
        if too_small {
            return bad(format!("lattice {} has fewer than 2 sites per side", self.dims));
        }
        if !(self.interaction > 0.0 && self.interaction.is_finite()) {
            return bad(format!("U = {} must be > 0", self.interaction));
        }
        if self.n_max < 3 {
            return bad(format!("n_max = {} must be >= 3", self.n_max));
        }
        if !(self.trap_curvature >= 0.0 && self.trap_curvature.is_finite()) {
            return bad(format!("trap curvature {} must be >= 0", self.trap_curvature));
        }
        if !(self.hopping.is_finite() && self.chemical_potential.is_finite()) {
            return bad("non-finite t or μ".into());
        }
        Ok(())
    }

    pub fn local_chemical_potential(&self, site: usize) -> f64 {
        self.chemical_potential - self.trap_curvature * self.dims.radius_sq(site)
    }

    fn onsite(&self, site: usize, n: usize) -> f64 {
        let n = n as f64;
        0.5 * self.interaction * n * (n - 1.0) - self.local_chemical_potential(site) * n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Init {
    UniformFock(usize),
    Random(u64),
}

/// Product state `Π_i Σ_n f_i(n)|n⟩_i` with its order parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GutzwillerState {
    pub spec: LatticeSpec,
    pub amplitudes: Vec<Vec<Complex64>>,
    pub order_parameter: Vec<Complex64>,
    /// Sweeps performed by the last solve.
    pub iterations: usize,
    /// Total energy after each sweep of the last solve.
    pub energy_trace: Vec<f64>,
}

fn order_parameter(f: &[Complex64]) -> Complex64 {
    f.windows(2)
        .enumerate()
        .map(|(n, w)| ((n + 1) as f64).sqrt() * w[0].conj() * w[1])
        .sum()
}

fn site_moments(f: &[Complex64]) -> (f64, f64) {
    let (m1, m2) = f.iter().enumerate().fold((0.0, 0.0), |(a, b), (n, c)| {
        let p = c.norm_sqr();
        let n = n as f64;
        (a + n * p, b + n * n * p)
    });
    (m1, (m2 - m1 * m1).max(0.0).sqrt())
}

fn normalize(f: &mut [Complex64]) {
    let norm = f.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in f.iter_mut() {
        *c /= norm;
    }
}

fn fock(n: usize, n_max: usize) -> Vec<Complex64> {
    let mut f = vec![Complex64::new(0.0, 0.0); n_max + 1];
    f[n] = Complex64::new(1.0, 0.0);
    f
}

/// Adds a small `|n+1⟩` (or `|n−1⟩` at the cutoff) admixture to the dominant
/// level so that `|φ| ≈ SYMMETRY_SEED`.
fn inject_seed(f: &mut [Complex64]) {
    let n_max = f.len() - 1;
    let n0 = (0..=n_max)
        .max_by(|&a, &b| f[a].norm_sqr().total_cmp(&f[b].norm_sqr()))
        .unwrap();
    let (target, scale) = if n0 < n_max {
        (n0 + 1, ((n0 + 1) as f64).sqrt())
    } else {
        (n0 - 1, (n0 as f64).sqrt())
    };
    f[target] += SYMMETRY_SEED / scale;
    normalize(f);
}

/// Ground state of `−t(Φ b† + Φ* b) + (U/2)n(n−1) − μ_i n`.
///
/// The phase of `Φ` is gauged out, leaving a real tridiagonal matrix whose
/// ground vector `g` is chosen with non-negative sum; then `f(n) = e^{inθ} g(n)`.
fn local_ground_state(spec: &LatticeSpec, site: usize, field: Complex64) -> Vec<Complex64> {
    let dim = spec.n_max + 1;
    let coupling = spec.hopping * field.norm();
    if coupling == 0.0 {
        let n = (0..dim)
            .min_by(|&a, &b| spec.onsite(site, a).total_cmp(&spec.onsite(site, b)))
            .unwrap();
        return fock(n, spec.n_max);
    }
    let h = DMatrix::from_fn(dim, dim, |r, c| {
        if r == c {
            spec.onsite(site, r)
        } else if r + 1 == c || c + 1 == r {
            -coupling * (r.max(c) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(h);
    let k = eig.eigenvalues.imin();
    let g = eig.eigenvectors.column(k);
    let sign = if g.sum() < 0.0 { -1.0 } else { 1.0 };
    let theta = field.arg();
    let mut f: Vec<Complex64> = g
        .iter()
        .enumerate()
        .map(|(n, &v)| Complex64::from_polar(sign * v, n as f64 * theta))
        .collect();
    normalize(&mut f);
    f
}

impl GutzwillerState {
    pub fn initial(spec: &LatticeSpec, init: Init) -> Result<Self, LatticeError> {
        spec.validate()?;
        let sites = spec.dims.sites();
        let amplitudes = match init {
            Init::UniformFock(n) => {
                if n > spec.n_max {
                    return Err(LatticeError::InvalidSpec(format!(
                        "initial Fock level {n} above n_max {}",
                        spec.n_max
                    )));
                }
                (0..sites)
                    .map(|_| {
                        let mut f = fock(n, spec.n_max);
                        inject_seed(&mut f);
                        f
                    })
                    .collect()
            }
            Init::Random(seed) => {
                let mut src = EntropySource::seeded(seed);
                let mut all = Vec::with_capacity(sites);
                for _ in 0..sites {
                    let mut f = Vec::with_capacity(spec.n_max + 1);
                    for _ in 0..=spec.n_max {
                        f.push(Complex64::new(src.next_uniform()? - 0.5, src.next_uniform()? - 0.5));
                    }
                    normalize(&mut f);
                    all.push(f);
                }
                all
            }
        };
        Ok(Self::from_amplitudes(*spec, amplitudes))
    }

    fn from_amplitudes(spec: LatticeSpec, amplitudes: Vec<Vec<Complex64>>) -> Self {
        let order_parameter = amplitudes.iter().map(|f| order_parameter(f)).collect();
        GutzwillerState {
            spec,
            amplitudes,
            order_parameter,
            iterations: 0,
            energy_trace: Vec::new(),
        }
    }

    /// `E = Σ_i ⟨(U/2)n(n−1) − μ_i n⟩ − t Σ_⟨ij⟩ 2 Re(φ_i* φ_j)`.
    pub fn energy(&self) -> f64 {
        let spec = &self.spec;
        let onsite: f64 = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, f)| {
                f.iter()
                    .enumerate()
                    .map(|(n, c)| c.norm_sqr() * spec.onsite(i, n))
                    .sum::<f64>()
            })
            .sum();
        let mut bonds = 0.0;
        for i in 0..self.order_parameter.len() {
            for j in spec.dims.neighbors(i).filter(|&j| j > i) {
                bonds += 2.0 * (self.order_parameter[i].conj() * self.order_parameter[j]).re;
            }
        }
        onsite - spec.hopping * bonds
    }

    /// Largest weight found in the top (cutoff) occupation level.
    pub fn top_level_weight(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|f| f.last().unwrap().norm_sqr())
            .fold(0.0, f64::max)
    }

    pub fn truncation_ok(&self) -> bool {
        self.top_level_weight() < TRUNCATION_WARN
    }

    pub fn max_order_parameter(&self) -> f64 {
        self.order_parameter.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    /// Largest deviation of any site norm from 1.
    pub fn norm_drift(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|f| (f.iter().map(|c| c.norm_sqr()).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Iterates red-black sweeps from `state` until both the order parameters
/// and the mean occupations change by less than `tol`.
pub fn solve_from(
    spec: &LatticeSpec,
    mut state: GutzwillerState,
    tol: f64,
    max_iter: usize,
) -> Result<GutzwillerState, LatticeError> {
    spec.validate()?;
    if !(tol > 0.0) {
        return Err(LatticeError::InvalidTolerance(tol));
    }
    let sites = spec.dims.sites();
    if state.amplitudes.len() != sites {
        return Err(LatticeError::DimMismatch {
            expected: sites,
            found: state.amplitudes.len(),
        });
    }
    state.spec = *spec;
    state.energy_trace.clear();
    let (_, ly) = spec.dims.shape();
    let colors: [Vec<usize>; 2] = [0, 1].map(|c| {
        (0..sites)
            .filter(|&s| (s / ly + s % ly) % 2 == c)
            .collect()
    });
    let mut d_phi = f64::INFINITY;
    let mut d_mean = f64::INFINITY;
    for iter in 1..=max_iter {
        d_phi = 0.0;
        d_mean = 0.0;
        for color in &colors {
            // sites of one color never neighbor each other, so each
            // half-sweep only reads the other color's order parameters
            let updates: Vec<(usize, Vec<Complex64>)> = color
                .iter()
                .map(|&i| {
                    let field: Complex64 = spec.dims.neighbors(i).map(|j| state.order_parameter[j]).sum();
                    (i, local_ground_state(spec, i, field))
                })
                .collect();
            for (i, f) in updates {
                let phi = order_parameter(&f);
                let mean = site_moments(&f).0;
                d_phi = d_phi.max((phi - state.order_parameter[i]).norm());
                d_mean = d_mean.max((mean - site_moments(&state.amplitudes[i]).0).abs());
                state.order_parameter[i] = phi;
                state.amplitudes[i] = f;
            }
        }
        state.iterations = iter;
        state.energy_trace.push(state.energy());
        if d_phi < tol && d_mean < tol {
            return Ok(state);
        }
    }
    Err(LatticeError::NoConvergence {
        iterations: max_iter,
        max_phi_change: d_phi,
        max_mean_change: d_mean,
        state: Box::new(state),
    })
}

pub fn solve_gutzwiller(spec: &LatticeSpec, init: Init, tol: f64) -> Result<GutzwillerState, LatticeError> {
    let state = GutzwillerState::initial(spec, init)?;
    solve_from(spec, state, tol, DEFAULT_MAX_ITER)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotParams {
    pub t_over_u: f64,
    pub mu_over_u: f64,
    pub v_over_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSnapshot {
    pub dims: Dims,
    pub params: SnapshotParams,
    pub mean_n: Vec<f64>,
    pub std_n: Vec<f64>,
    pub total_atoms: f64,
}

pub fn occupation_stats(state: &GutzwillerState) -> LatticeSnapshot {
    let (mean_n, std_n): (Vec<f64>, Vec<f64>) = state.amplitudes.iter().map(|f| site_moments(f)).unzip();
    LatticeSnapshot {
        dims: state.spec.dims,
        params: state.spec.ratios(),
        total_atoms: mean_n.iter().sum(),
        mean_n,
        std_n,
    }
}

impl LatticeSnapshot {
    pub fn mean_std(&self) -> f64 {
        self.std_n.iter().sum::<f64>() / self.std_n.len() as f64
    }

    /// `site_x,site_y,mean,std` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("site_x,site_y,mean,std\n");
        for (k, (m, s)) in self.mean_n.iter().zip(&self.std_n).enumerate() {
            let (x, y) = self.dims.coords(k);
            out.push_str(&format!("{x},{y},{m:e},{s:e}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Mean,
    Std,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Mean => "mean",
            Channel::Std => "std",
        })
    }
}

/// Solves each `(t/U, μ/U)` point in order, warm-starting from the previous
/// solution. Sites whose order parameter has collapsed below the symmetry
/// seed get the seed re-injected so the superfluid branch stays reachable.
pub fn sweep(
    spec: &LatticeSpec,
    schedule: &[(f64, f64)],
    init: Init,
    tol: f64,
) -> Result<Vec<LatticeSnapshot>, LatticeError> {
    if schedule.is_empty() {
        return Err(LatticeError::EmptySchedule);
    }
    let mut snapshots = Vec::with_capacity(schedule.len());
    let mut state = GutzwillerState::initial(spec, init)?;
    for (index, &(t_u, mu_u)) in schedule.iter().enumerate() {
        let point = spec.with_ratios(t_u, mu_u);
        if index > 0 {
            for (f, phi) in state.amplitudes.iter_mut().zip(&mut state.order_parameter) {
                if phi.norm() < SYMMETRY_SEED {
                    inject_seed(f);
                    *phi = order_parameter(f);
                }
            }
        }
        state = solve_from(&point, state, tol, DEFAULT_MAX_ITER).map_err(|e| LatticeError::SweepFailed {
            index,
            source: Box::new(e),
        })?;
        snapshots.push(occupation_stats(&state));
    }
    Ok(snapshots)
}

/// Bisects `μ` (with `t`, `U`, trap fixed) until the total atom number is
/// within `atom_tol` of `target`. Returns the tuned spec and its solution.
pub fn tune_chemical_potential(
    spec: &LatticeSpec,
    target: f64,
    atom_tol: f64,
    tol: f64,
) -> Result<(LatticeSpec, GutzwillerState), LatticeError> {
    let sites = spec.dims.sites() as f64;
    if !(target > 0.0 && target < sites * spec.n_max as f64) {
        return Err(LatticeError::TargetUnreachable {
            target,
            reason: format!("outside (0, {})", sites * spec.n_max as f64),
        });
    }
    let solve_at = |mu: f64| -> Result<(LatticeSpec, GutzwillerState, f64), LatticeError> {
        let s = LatticeSpec {
            chemical_potential: mu,
            ..*spec
        };
        let state = solve_gutzwiller(&s, Init::UniformFock(1), tol)?;
        let n = occupation_stats(&state).total_atoms;
        Ok((s, state, n))
    };
    let mut lo = 0.0;
    let mut hi = spec.interaction;
    let mut best = solve_at(hi)?;
    while best.2 < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 * spec.interaction {
            return Err(LatticeError::TargetUnreachable {
                target,
                reason: "μ bracket diverged".into(),
            });
        }
        best = solve_at(hi)?;
    }
    for _ in 0..60 {
        if (best.2 - target).abs() <= atom_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let cand = solve_at(mid)?;
        if cand.2 < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (cand.2 - target).abs() < (best.2 - target).abs() {
            best = cand;
        }
    }
    Ok((best.0, best.1))
}

/// Reinterprets the chosen channel as a field on the integer site lattice
/// (unit weights). Values are occupations, not quasi-probabilities, and are
/// left unnormalized. Chains become `L × 1` grids.
pub fn snapshot_to_field(snap: &LatticeSnapshot, channel: Channel) -> Result<WignerField, LatticeError> {
    let (lx, ly) = snap.dims.shape();
    let values = match channel {
        Channel::Mean => &snap.mean_n,
        Channel::Std => &snap.std_n,
    };
    if values.len() != lx * ly {
        return Err(LatticeError::DimMismatch {
            expected: lx * ly,
            found: values.len(),
        });
    }
    Ok(WignerField::new(
        Grid::lattice(lx, ly),
        values.clone(),
        FieldSource::LatticeImport {
            channel: channel.to_string(),
        },
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chain(l: usize) -> LatticeSpec {
        LatticeSpec::new(Dims::Chain { length: l })
    }

    #[test]
    fn dims_parse_and_shape() {
        assert_eq!("20x20".parse::<Dims>().unwrap(), Dims::Square { lx: 20, ly: 20 });
        assert_eq!("60".parse::<Dims>().unwrap(), Dims::Chain { length: 60 });
        assert!("ax3".parse::<Dims>().is_err());
        let d = Dims::Square { lx: 3, ly: 4 };
        assert_eq!(d.coords(7), (1, 3));
        let mut n: Vec<usize> = d.neighbors(5).collect();
        n.sort();
        assert_eq!(n, vec![1, 4, 6, 9]);
        assert_eq!(d.neighbors(0).count(), 2);
    }

    #[test]
    fn spec_validation() {
        assert!(chain(1).validate().is_err());
        assert!(chain(4).with_n_max(2).validate().is_err());
        let mut s = chain(4);
        s.interaction = 0.0;
        assert!(s.validate().is_err());
        assert!(chain(4).with_trap(-1.0).validate().is_err());
    }

    fn decoupled_level(mu: f64) -> usize {
        (0..=8)
            .min_by(|&a, &b| {
                let e = |n: usize| 0.5 * (n * n.saturating_sub(1)) as f64 - mu * n as f64;
                e(a).total_cmp(&e(b))
            })
            .unwrap()
    }

    #[test]
    fn zero_hopping_is_decoupled_fock() {
        for (mu, n) in [(0.3, 1), (0.5, 1), (1.5, 2), (2.7, 3)] {
            assert_eq!(decoupled_level(mu), n);
            let s = chain(6).with_ratios(0.0, mu);
            let state = solve_gutzwiller(&s, Init::UniformFock(0), 1e-12).unwrap();
            let snap = occupation_stats(&state);
            assert!(snap.mean_n.iter().all(|&m| m == n as f64));
            assert!(snap.std_n.iter().all(|&v| v == 0.0));
            assert_eq!(state.max_order_parameter(), 0.0);
        }
    }

    #[test]
    fn cutoff_insensitive_deep_in_mott() {
        let a = solve_gutzwiller(&chain(5).with_ratios(0.0, 0.5).with_n_max(3), Init::UniformFock(1), 1e-12).unwrap();
        let b = solve_gutzwiller(&chain(5).with_ratios(0.0, 0.5).with_n_max(8), Init::UniformFock(1), 1e-12).unwrap();
        assert_eq!(occupation_stats(&a).mean_n, occupation_stats(&b).mean_n);
        assert_eq!(occupation_stats(&a).std_n, occupation_stats(&b).std_n);
    }

    #[test]
    fn fock_and_poisson_site_statistics() {
        assert_eq!(site_moments(&fock(1, 8)), (1.0, 0.0));
        // truncated coherent state with |α|² = 1
        let mut f: Vec<Complex64> = (0..=12)
            .map(|n| {
                let fact: f64 = (1..=n).map(|k| k as f64).product();
                Complex64::new(1.0 / fact.sqrt(), 0.0)
            })
            .collect();
        normalize(&mut f);
        let (mean, std) = site_moments(&f);
        assert!((mean - 1.0).abs() < 0.02);
        assert!((std - 1.0).abs() < 0.02);
        assert!((order_parameter(&f).re - 1.0).abs() < 0.02);
    }

    #[test]
    fn gauge_phase_is_restored() {
        let s = chain(4).with_ratios(0.1, 0.5);
        let field = Complex64::from_polar(0.7, 1.1);
        let f = local_ground_state(&s, 0, field);
        let phi = order_parameter(&f);
        assert!(phi.norm() > 1e-3);
        assert!((phi.arg() - 1.1).abs() < 1e-12);
        // the vector is an eigenvector of the complex local Hamiltonian
        let dim = s.n_max + 1;
        let mut hf = vec![Complex64::new(0.0, 0.0); dim];
        for n in 0..dim {
            hf[n] += s.onsite(0, n) * f[n];
            if n + 1 < dim {
                let amp = ((n + 1) as f64).sqrt();
                hf[n + 1] += -s.hopping * field * amp * f[n];
                hf[n] += -s.hopping * field.conj() * amp * f[n + 1];
            }
        }
        let e: Complex64 = f.iter().zip(&hf).map(|(a, b)| a.conj() * b).sum();
        for n in 0..dim {
            assert!((hf[n] - e * f[n]).norm() < 1e-12);
        }
    }

    #[test]
    fn superfluid_energy_decreases_monotonically() {
        let s = LatticeSpec::new(Dims::Square { lx: 6, ly: 5 })
            .with_ratios(0.08, 0.6)
            .with_trap(0.01);
        let state = solve_gutzwiller(&s, Init::Random(11), 1e-11).unwrap();
        assert!(state.max_order_parameter() > 0.1);
        for w in state.energy_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "{} -> {}", w[0], w[1]);
        }
        assert!(state.norm_drift() < 1e-12);
        assert!(state.truncation_ok());
    }

    #[test]
    fn no_convergence_carries_diagnostics() {
        let s = chain(8).with_ratios(0.2, 0.5);
        let state = GutzwillerState::initial(&s, Init::UniformFock(1)).unwrap();
        match solve_from(&s, state, 1e-14, 3) {
            Err(LatticeError::NoConvergence { iterations, state, .. }) => {
                assert_eq!(iterations, 3);
                assert_eq!(state.iterations, 3);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
        assert!(matches!(
            solve_gutzwiller(&s, Init::UniformFock(1), 0.0),
            Err(LatticeError::InvalidTolerance(_))
        ));
    }

    #[test]
    fn single_point_sweep_matches_solve() {
        let s = chain(10).with_ratios(0.05, 0.5);
        let solved = occupation_stats(&solve_gutzwiller(&s, Init::UniformFock(1), 1e-12).unwrap());
        let swept = sweep(&s, &[(0.05, 0.5)], Init::UniformFock(1), 1e-12).unwrap();
        assert_eq!(swept, vec![solved]);
        assert!(matches!(sweep(&s, &[], Init::UniformFock(1), 1e-12), Err(LatticeError::EmptySchedule)));
    }

    #[test]
    fn ramp_increases_fluctuations() {
        let s = LatticeSpec::new(Dims::Square { lx: 6, ly: 6 });
        let schedule: Vec<(f64, f64)> = (0..8).map(|k| (0.01 + 0.01 * k as f64, 0.4)).collect();
        let snaps = sweep(&s, &schedule, Init::UniformFock(1), 1e-11).unwrap();
        for w in snaps.windows(2) {
            assert!(w[1].mean_std() >= w[0].mean_std() - 1e-6);
        }
        assert!(snaps.last().unwrap().mean_std() > snaps[0].mean_std());
    }

    #[test]
    fn snapshot_shapes() {
        let s = LatticeSpec::new(Dims::Square { lx: 20, ly: 20 });
        let snap = occupation_stats(&solve_gutzwiller(&s, Init::UniformFock(1), 1e-12).unwrap());
        assert_eq!(snap.mean_n.len() + snap.std_n.len(), 800);
        let field = snapshot_to_field(&snap, Channel::Mean).unwrap();
        assert_eq!(field.values.len(), 400);
        assert_eq!(field.grid.area(), 400.0);
        let csv = snap.to_csv();
        assert_eq!(csv.lines().count(), 401);
        assert!(csv.lines().nth(2).unwrap().starts_with("0,1,"));

        let line = occupation_stats(&solve_gutzwiller(&chain(5), Init::UniformFock(1), 1e-12).unwrap());
        let f = snapshot_to_field(&line, Channel::Std).unwrap();
        assert_eq!((f.grid.nx(), f.grid.np()), (5, 1));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn local_solutions_stay_normalized(
            t in 0.0f64..0.3,
            mu in -0.5f64..3.0,
            re in -2.0f64..2.0,
            im in -2.0f64..2.0,
        ) {
            let s = chain(3).with_ratios(t, mu);
            let f = local_ground_state(&s, 1, Complex64::new(re, im));
            let norm: f64 = f.iter().map(|c| c.norm_sqr()).sum();
            prop_assert!((norm - 1.0).abs() < 1e-12);
            prop_assert!(site_moments(&f).1 >= 0.0);
        }
    }
}
