//! Wigner quasi-probability functions of Fock and optical cat states,
//! sampled on phase-space grids.
//!
//! Conventions: Fock states use `W_m(x,p) = (−1)^m/π · e^{−(x²+p²)} ·
//! L_m(2(x²+p²))`; cat states are evaluated at `β − α = x + ip`. Both are
//! normalized to unit integral over the plane.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::{EntropyError, EntropySource};

#[derive(Debug, Error)]
pub enum WignerError {
    #[error("cat state evaluation has imaginary residue {imag:e} (real part {real:e})")]
    NumericalInconsistency { real: f64, imag: f64 },
    #[error("field integral {0:e} too small for moments")]
    DegenerateField(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("cannot parse state {input:?}: {reason}")]
    ParseState { input: String, reason: String },
    #[error("malformed field data: {0}")]
    ParseField(String),
    #[error("gaussian-interval grids need an entropy source")]
    MissingEntropy,
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

/// Laguerre polynomial `L_m(x)` by the three-term recurrence.
pub fn laguerre(m: u32, x: f64) -> f64 {
    let mut prev = 1.0;
    if m == 0 {
        return prev;
    }
    let mut cur = 1.0 - x;
    for k in 1..m {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 - x) * cur - k * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockState {
    pub m: u32,
}

pub fn wigner_fock(state: FockState, x: f64, p: f64) -> f64 {
    let r2 = x * x + p * p;
    let sign = if state.m.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign / PI * (-r2).exp() * laguerre(state.m, 2.0 * r2)
}

/// Below this `|δα|` the cat formula is 0/0 and the coherent limit is used.
pub const CAT_DEGENERACY: f64 = 1e-6;
const CAT_IMAG_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatState {
    pub alpha: Complex64,
    pub delta_alpha: Complex64,
}

impl CatState {
    pub fn new(alpha: Complex64, delta_alpha: Complex64) -> Self {
        CatState { alpha, delta_alpha }
    }

    pub fn is_coherent_limit(&self) -> bool {
        self.delta_alpha.norm() < CAT_DEGENERACY
    }
}

pub fn wigner_cat(state: CatState, x: f64, p: f64) -> Result<f64, WignerError> {
    let gamma = Complex64::new(x, p);
    let g2 = gamma.norm_sqr();
    if state.is_coherent_limit() {
        return Ok(2.0 / PI * (-2.0 * g2).exp());
    }
    let d = state.delta_alpha;
    let d2 = d.norm_sqr();
    let prefactor = 2.0 / (PI * -(-d2).exp_m1());
    let shifted = (-2.0 * (gamma - d).norm_sqr()).exp();
    let centred = (-d2 - 2.0 * g2).exp();
    // e^{−|δα|²} e^{−2|γ|²} (e^{2γδα*} + e^{2γ*δα}), exponents merged to avoid overflow
    let base = Complex64::new(-d2 - 2.0 * g2, 0.0);
    let cross = (base + 2.0 * gamma * d.conj()).exp() + (base + 2.0 * gamma.conj() * d).exp();
    let sum = Complex64::new(shifted + centred, 0.0) - cross;
    let scale = shifted + centred + cross.norm();
    if sum.im.abs() > CAT_IMAG_RTOL * scale.max(f64::MIN_POSITIVE) {
        return Err(WignerError::NumericalInconsistency {
            real: prefactor * sum.re,
            imag: prefactor * sum.im,
        });
    }
    Ok(prefactor * sum.re)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StateSpec {
    Fock(FockState),
    Cat(CatState),
}

impl StateSpec {
    pub fn fock(m: u32) -> Self {
        StateSpec::Fock(FockState { m })
    }

    pub fn cat(alpha: Complex64, delta_alpha: Complex64) -> Self {
        StateSpec::Cat(CatState::new(alpha, delta_alpha))
    }

    pub fn evaluate(&self, x: f64, p: f64) -> Result<f64, WignerError> {
        match *self {
            StateSpec::Fock(s) => Ok(wigner_fock(s, x, p)),
            StateSpec::Cat(s) => wigner_cat(s, x, p),
        }
    }

    /// Half-width of a square that holds all but a negligible tail of `|W|`.
    fn reference_extent(&self) -> f64 {
        match self {
            StateSpec::Fock(s) => (2.0 * s.m as f64 + 1.0).sqrt() + 5.0,
            StateSpec::Cat(s) => s.delta_alpha.norm() + 4.0,
        }
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Fock(s) => write!(f, "fock:m={}", s.m),
            StateSpec::Cat(s) => write!(
                f,
                "cat:alpha={},dalpha={}",
                format_complex(s.alpha),
                format_complex(s.delta_alpha)
            ),
        }
    }
}

fn format_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im < 0.0 {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

/// Parses `a`, `bi`, `a+bi` or `a-bi`.
pub fn parse_complex(text: &str) -> Option<Complex64> {
    let t = text.trim();
    if let Some(body) = t.strip_suffix('i') {
        // split at the last sign that is not an exponent sign or leading sign
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        return match split {
            Some(k) => {
                let re: f64 = body[..k].parse().ok()?;
                let im_text = &body[k..];
                let im: f64 = match im_text {
                    "+" => 1.0,
                    "-" => -1.0,
                    s => s.parse().ok()?,
                };
                Some(Complex64::new(re, im))
            }
            None => {
                let im: f64 = match body {
                    "" | "+" => 1.0,
                    "-" => -1.0,
                    s => s.parse().ok()?,
                };
                Some(Complex64::new(0.0, im))
            }
        };
    }
    t.parse().ok().map(|re| Complex64::new(re, 0.0))
}

impl FromStr for StateSpec {
    type Err = WignerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fail = |reason: &str| WignerError::ParseState {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let (kind, rest) = s.split_once(':').ok_or_else(|| fail("expected kind:params"))?;
        let mut pairs = Vec::new();
        for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| fail("expected key=value"))?;
            pairs.push((k.trim(), v.trim()));
        }
        let lookup = |key: &str| pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        match kind.trim() {
            "fock" => {
                let m = lookup("m")
                    .ok_or_else(|| fail("missing m"))?
                    .parse()
                    .map_err(|_| fail("m must be a non-negative integer"))?;
                Ok(StateSpec::fock(m))
            }
            "cat" => {
                let alpha = match lookup("alpha") {
                    Some(v) => parse_complex(v).ok_or_else(|| fail("bad alpha"))?,
                    None => Complex64::new(0.0, 0.0),
                };
                let dalpha = lookup("dalpha")
                    .ok_or_else(|| fail("missing dalpha"))
                    .and_then(|v| parse_complex(v).ok_or_else(|| fail("bad dalpha")))?;
                Ok(StateSpec::cat(alpha, dalpha))
            }
            _ => Err(fail("kind must be fock or cat")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridScheme {
    #[default]
    Regular,
    GaussianIntervals,
    /// Site lattice of an imported occupation snapshot.
    Lattice,
}

/// Rectilinear phase-space grid with trapezoidal quadrature weights.
///
/// Node `(i, j)` sits at `(axis_x[i], axis_p[j])` and carries weight
/// `weights_x[i] * weights_p[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub axis_x: Vec<f64>,
    pub axis_p: Vec<f64>,
    pub weights_x: Vec<f64>,
    pub weights_p: Vec<f64>,
    pub scheme: GridScheme,
}

/// Trapezoid weights for a strictly increasing axis.
pub fn trapezoid_weights(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    if n < 2 {
        return vec![1.0; n];
    }
    (0..n)
        .map(|i| {
            let lo = axis[i.saturating_sub(1)];
            let hi = axis[(i + 1).min(n - 1)];
            0.5 * (hi - lo)
        })
        .collect()
}

impl Grid {
    /// Builds a grid with trapezoid weights from two strictly increasing axes.
    pub fn from_axes(axis_x: Vec<f64>, axis_p: Vec<f64>, scheme: GridScheme) -> Result<Self, WignerError> {
        for (name, axis) in [("x", &axis_x), ("p", &axis_p)] {
            if axis.len() < 2 {
                return Err(WignerError::InvalidGrid(format!("{name} axis needs >= 2 nodes")));
            }
            if axis.windows(2).any(|w| !(w[1] > w[0])) || axis.iter().any(|v| !v.is_finite()) {
                return Err(WignerError::InvalidGrid(format!("{name} axis not strictly increasing")));
            }
        }
        Ok(Grid {
            weights_x: trapezoid_weights(&axis_x),
            weights_p: trapezoid_weights(&axis_p),
            axis_x,
            axis_p,
            scheme,
        })
    }

    /// Integer site lattice `0..nx × 0..np` with unit weight per site.
    pub fn lattice(nx: usize, np: usize) -> Self {
        Grid {
            axis_x: (0..nx).map(|i| i as f64).collect(),
            axis_p: (0..np).map(|j| j as f64).collect(),
            weights_x: vec![1.0; nx],
            weights_p: vec![1.0; np],
            scheme: GridScheme::Lattice,
        }
    }

    pub fn nx(&self) -> usize {
        self.axis_x.len()
    }

    pub fn np(&self) -> usize {
        self.axis_p.len()
    }

    pub fn len(&self) -> usize {
        self.nx() * self.np()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights_x[i] * self.weights_p[j]
    }

    /// Sum of all node weights: the covered rectangle's area (or site count
    /// for lattice grids).
    pub fn area(&self) -> f64 {
        self.weights_x.iter().sum::<f64>() * self.weights_p.iter().sum::<f64>()
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.axis_x[0], *self.axis_x.last().unwrap())
    }

    pub fn p_range(&self) -> (f64, f64) {
        (self.axis_p[0], *self.axis_p.last().unwrap())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    pub points_per_side: usize,
    pub scheme: GridScheme,
    /// Fraction of `∫|W|` the grid must hold.
    pub coverage: f64,
}

pub const DEFAULT_COVERAGE: f64 = 0.99;

impl GridOptions {
    pub fn new(points_per_side: usize, scheme: GridScheme) -> Self {
        GridOptions {
            points_per_side,
            scheme,
            coverage: DEFAULT_COVERAGE,
        }
    }

    pub fn with_coverage(mut self, coverage: f64) -> Self {
        self.coverage = coverage;
        self
    }
}

const REFERENCE_NODES: usize = 801;

/// Smallest disk radius `R` (resolved on an 801×801 reference lattice)
/// holding `coverage` of the absolute mass `∫|W|`.
pub fn coverage_radius(state: &StateSpec, coverage: f64) -> Result<f64, WignerError> {
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(WignerError::InvalidGrid(format!(
            "coverage must lie in (0, 1), got {coverage}"
        )));
    }
    let extent = state.reference_extent();
    let h = 2.0 * extent / (REFERENCE_NODES - 1) as f64;
    let rings = REFERENCE_NODES;
    let ring_width = extent * std::f64::consts::SQRT_2 / rings as f64;
    let mut mass = vec![0.0; rings + 1];
    for i in 0..REFERENCE_NODES {
        let x = -extent + i as f64 * h;
        for j in 0..REFERENCE_NODES {
            let p = -extent + j as f64 * h;
            let w = state.evaluate(x, p)?.abs();
            let r = (x * x + p * p).sqrt();
            let ring = ((r / ring_width) as usize).min(rings);
            mass[ring] += w;
        }
    }
    let total: f64 = mass.iter().sum();
    let mut acc = 0.0;
    for (k, m) in mass.iter().enumerate() {
        acc += m;
        if acc >= coverage * total {
            return Ok((k + 1) as f64 * ring_width);
        }
    }
    Ok(extent)
}

const MAX_INTERVAL_REDRAWS: usize = 10_000;

fn gaussian_axis(
    radius: f64,
    points: usize,
    src: &mut EntropySource,
) -> Result<Vec<f64>, WignerError> {
    let intervals = points - 1;
    let mean = 2.0 * radius / intervals as f64;
    let sigma = 0.5 * mean;
    let mut lengths = Vec::with_capacity(intervals);
    for _ in 0..intervals {
        let mut draws = 0;
        let len = loop {
            let l = mean + sigma * src.next_standard_normal()?;
            if l > 0.0 {
                break l;
            }
            draws += 1;
            if draws > MAX_INTERVAL_REDRAWS {
                return Err(WignerError::InvalidGrid("interval redraw limit hit".into()));
            }
        };
        lengths.push(len);
    }
    let scale = 2.0 * radius / lengths.iter().sum::<f64>();
    let mut axis = Vec::with_capacity(points);
    let mut pos = -radius;
    axis.push(pos);
    for len in &lengths[..intervals - 1] {
        pos += len * scale;
        axis.push(pos);
    }
    axis.push(radius);
    Ok(axis)
}

/// Grid on `[−R, R]²` with `R = coverage_radius(state, opts.coverage)`.
pub fn build_grid(
    state: &StateSpec,
    opts: &GridOptions,
    src: Option<&mut EntropySource>,
) -> Result<Grid, WignerError> {
    if opts.points_per_side < 2 {
        return Err(WignerError::InvalidGrid("points_per_side must be >= 2".into()));
    }
    let radius = coverage_radius(state, opts.coverage)?;
    build_grid_with_radius(radius, opts, src)
}

pub fn build_grid_with_radius(
    radius: f64,
    opts: &GridOptions,
    src: Option<&mut EntropySource>,
) -> Result<Grid, WignerError> {
    let n = opts.points_per_side;
    if n < 2 {
        return Err(WignerError::InvalidGrid("points_per_side must be >= 2".into()));
    }
    match opts.scheme {
        GridScheme::Regular => {
            let axis: Vec<f64> = (0..n)
                .map(|i| {
                    if i + 1 == n {
                        radius
                    } else {
                        -radius + 2.0 * radius * i as f64 / (n - 1) as f64
                    }
                })
                .collect();
            Grid::from_axes(axis.clone(), axis, GridScheme::Regular)
        }
        GridScheme::GaussianIntervals => {
            let src = src.ok_or(WignerError::MissingEntropy)?;
            let ax = gaussian_axis(radius, n, src)?;
            let ap = gaussian_axis(radius, n, src)?;
            Grid::from_axes(ax, ap, GridScheme::GaussianIntervals)
        }
        GridScheme::Lattice => Err(WignerError::InvalidGrid(
            "lattice grids come from snapshots".into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldSource {
    Fock { m: u32 },
    Cat { alpha: Complex64, delta_alpha: Complex64 },
    LatticeImport { channel: String },
    Imported,
}

impl From<&StateSpec> for FieldSource {
    fn from(s: &StateSpec) -> Self {
        match *s {
            StateSpec::Fock(f) => FieldSource::Fock { m: f.m },
            StateSpec::Cat(c) => FieldSource::Cat {
                alpha: c.alpha,
                delta_alpha: c.delta_alpha,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    P,
}

/// Function values on a grid; `values[i * np + j] = W(x_i, p_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub source: FieldSource,
}

pub fn evaluate_field(state: &StateSpec, grid: &Grid) -> Result<WignerField, WignerError> {
    let mut values = Vec::with_capacity(grid.len());
    for &x in &grid.axis_x {
        for &p in &grid.axis_p {
            values.push(state.evaluate(x, p)?);
        }
    }
    Ok(WignerField {
        grid: grid.clone(),
        values,
        source: state.into(),
    })
}

impl WignerField {
    pub fn new(grid: Grid, values: Vec<f64>, source: FieldSource) -> Result<Self, WignerError> {
        if values.len() != grid.len() {
            return Err(WignerError::InvalidGrid(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(WignerError::InvalidGrid("non-finite field value".into()));
        }
        Ok(WignerField { grid, values, source })
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.np() + j]
    }

    /// `(x, p, W, weight)` for every node in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        let np = self.grid.np();
        self.values.iter().enumerate().map(move |(k, &w)| {
            let (i, j) = (k / np, k % np);
            (self.grid.axis_x[i], self.grid.axis_p[j], w, self.grid.weight(i, j))
        })
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn integrate(&self) -> f64 {
        self.nodes().map(|(_, _, w, wt)| w * wt).sum()
    }

    /// Density along `axis` after integrating out the other coordinate.
    pub fn marginal(&self, axis: Axis) -> (Vec<f64>, Vec<f64>) {
        let g = &self.grid;
        match axis {
            Axis::X => {
                let d = (0..g.nx())
                    .map(|i| (0..g.np()).map(|j| g.weights_p[j] * self.value(i, j)).sum())
                    .collect();
                (g.axis_x.clone(), d)
            }
            Axis::P => {
                let d = (0..g.np())
                    .map(|j| (0..g.nx()).map(|i| g.weights_x[i] * self.value(i, j)).sum())
                    .collect();
                (g.axis_p.clone(), d)
            }
        }
    }

    /// Mean and standard deviation of `x` under the x-marginal.
    pub fn moments_x(&self) -> Result<(f64, f64), WignerError> {
        let (nodes, density) = self.marginal(Axis::X);
        let w = &self.grid.weights_x;
        let total: f64 = density.iter().zip(w).map(|(d, w)| d * w).sum();
        if total.abs() < 1e-6 {
            return Err(WignerError::DegenerateField(total));
        }
        let mean = nodes
            .iter()
            .zip(&density)
            .zip(w)
            .map(|((x, d), w)| x * d * w)
            .sum::<f64>()
            / total;
        let var = nodes
            .iter()
            .zip(&density)
            .zip(w)
            .map(|((x, d), w)| (x - mean).powi(2) * d * w)
            .sum::<f64>()
            / total;
        Ok((mean, var.max(0.0).sqrt()))
    }

    /// `x,p,w` rows with a header, x-major.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 40 + 8);
        out.push_str("x,p,w\n");
        for (x, p, w, _) in self.nodes() {
            out.push_str(&format!("{x:e},{p:e},{w:e}\n"));
        }
        out
    }

    /// Reads `x,p,w` rows (any order) into a field with trapezoid weights.
    pub fn from_csv(text: &str) -> Result<Self, WignerError> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (n == 0 && line.starts_with('x')) {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(WignerError::ParseField(format!("line {}: expected 3 columns", n + 1)));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| WignerError::ParseField(format!("line {}: bad number {s:?}", n + 1)))
            };
            rows.push((parse(cols[0])?, parse(cols[1])?, parse(cols[2])?));
        }
        let mut xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut ps: Vec<f64> = rows.iter().map(|r| r.1).collect();
        for v in [&mut xs, &mut ps] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        if xs.len() * ps.len() != rows.len() {
            return Err(WignerError::ParseField(format!(
                "{} rows do not form a {}x{} grid",
                rows.len(),
                xs.len(),
                ps.len()
            )));
        }
        let grid = Grid::from_axes(xs, ps, GridScheme::Regular)?;
        let mut values = vec![f64::NAN; grid.len()];
        for (x, p, w) in rows {
            let i = grid.axis_x.partition_point(|&v| v < x);
            let j = grid.axis_p.partition_point(|&v| v < p);
            values[i * grid.np() + j] = w;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(WignerError::ParseField("duplicate grid nodes".into()));
        }
        WignerField::new(grid, values, FieldSource::Imported)
    }

    /// Binary 8-bit PGM, min → 0 and max → 255. The top row is the largest
    /// `p`, columns run along increasing `x`.
    pub fn to_pgm(&self) -> Vec<u8> {
        let (nx, np) = (self.grid.nx(), self.grid.np());
        let mut out = format!("P5\n{nx} {np}\n255\n").into_bytes();
        let (lo, hi) = (self.min(), self.max());
        let span = hi - lo;
        for j in (0..np).rev() {
            for i in 0..nx {
                let v = self.value(i, j);
                let level = if span > 0.0 {
                    ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
                } else {
                    0
                };
                out.push(level);
            }
        }
        out
    }
}
