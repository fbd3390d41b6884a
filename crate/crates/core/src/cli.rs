//! Command-line front end.
//!
//! Every subcommand writes its artifacts inside `--out-dir` together with a
//! `manifest.json` holding the full configuration, so a run can be repeated
//! byte for byte.

use std::ffi::OsString;
use std::fs;
use std::path::{Component, Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bosehubbard::{
    self, snapshot_to_field, sweep, tune_chemical_potential, Channel, Dims, Init, LatticeError,
    LatticeSnapshot, LatticeSpec,
};
use crate::entropy::{EntropyError, EntropySource};
use crate::mapping::{
    self, fit_quadratic, map_chunks, map_extrema, map_moments, map_pointwise, rabi_palette, ChunkAnalysis, Extrema,
    GaussianSoundSpec, MappingError, NegativeMode, PaletteOptions, Partial, PointwiseOptions, QuadraticMap,
    TimbreEvent,
};
use crate::qdynamics::{
    accumulate_histogram, default_histogram_span, simulate_batch, uniform_bin_edges, DynamicsError,
    EmissionTrajectory, PopulationModel, RabiParams, WaitingTimeHistogram,
};
use crate::score::{self, Doubling, IntensityMarking, ScoreError};
use crate::synth::{self, AudioBuffer, SynthError};
use crate::wigner::{build_grid, evaluate_field, GridOptions, GridScheme, StateSpec, WignerError, WignerField};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Wigner(#[from] WignerError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

impl CliError {
    /// Name of the module the failure came from.
    pub fn module(&self) -> &'static str {
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Json(_) => "cli",
            CliError::Entropy(_)
            | CliError::Dynamics(DynamicsError::Entropy(_))
            | CliError::Wigner(WignerError::Entropy(_))
            | CliError::Synth(SynthError::Entropy(_))
            | CliError::Lattice(LatticeError::Entropy(_)) => "entropy",
            CliError::Dynamics(_) => "qdynamics",
            CliError::Wigner(_) => "wigner",
            CliError::Mapping(_) => "mapping",
            CliError::Synth(_) => "synth",
            CliError::Lattice(_) => "bosehubbard",
            CliError::Score(_) => "score",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser, Serialize)]
#[command(name = "qsonify", version, about = "Sonify quantum trajectories, Wigner functions and lattice gases")]
#[command(arg_required_else_help = true, allow_negative_numbers = true)]
pub struct Cli {
    #[command(flatten)]
    #[serde(skip)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for the pseudo-random stream (default 0).
    #[arg(long, global = true, conflicts_with = "entropy_file")]
    pub seed: Option<u64>,
    /// Raw random bytes to consume instead of the seeded stream.
    #[arg(long, global = true)]
    pub entropy_file: Option<PathBuf>,
    /// Directory for every artifact (created if absent).
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Simulate emission trajectories and histogram the waiting times.
    RabiSim(RabiSimArgs),
    /// Evaluate a Wigner function on a grid.
    Wigner(WignerArgs),
    /// Map fields or emission records to sound descriptions.
    Map(MapArgs),
    /// Render a sound description to WAV.
    Synth(SynthArgs),
    /// Solve the Bose-Hubbard model across a parameter ramp.
    BhSim(BhSimArgs),
    /// Turn mapping output into a score (JSON, MIDI) or a cue list.
    Score(ScoreArgs),
    /// Trajectories → timbre palette → WAV and cue list.
    DemoRabi(DemoRabiArgs),
    /// Cat state → extrema mapping → score and WAV.
    DemoCat(DemoCatArgs),
    /// Lattice ramp → pointwise mapping → WAV.
    DemoBh(DemoBhArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    Ideal,
    Damped,
}

impl From<ModelArg> for PopulationModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Ideal => PopulationModel::Ideal,
            ModelArg::Damped => PopulationModel::Damped,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct RabiSimArgs {
    /// Rabi frequency Ω.
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    /// Decay rate Γ.
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    /// Observation window T per trajectory.
    #[arg(long, default_value_t = 200.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 1000)]
    pub trajectories: usize,
    #[arg(long, default_value_t = 12)]
    pub bins: usize,
    /// Upper histogram edge (default: 99% quantile of the waiting time).
    #[arg(long)]
    pub span: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModelArg::Ideal)]
    pub model: ModelArg,
    #[arg(long, default_value = "rabi_hist.csv")]
    pub out_csv: PathBuf,
    /// Full record (parameters, histogram, trajectories) for `map --method palette`.
    #[arg(long, default_value = "rabi.json")]
    pub out_json: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeArg {
    Regular,
    Gauss,
}

#[derive(Debug, Args, Serialize)]
pub struct WignerArgs {
    /// `fock:m=1` or `cat:alpha=0,dalpha=-1` (complex values as `a+bi`).
    #[arg(long)]
    pub state: String,
    #[arg(long, default_value_t = 30)]
    pub points: usize,
    #[arg(long, value_enum, default_value_t = SchemeArg::Regular)]
    pub scheme: SchemeArg,
    /// Fraction of ∫|W| the grid must cover.
    #[arg(long, default_value_t = crate::wigner::DEFAULT_COVERAGE)]
    pub coverage: f64,
    #[arg(long, default_value = "wigner.csv")]
    pub out_csv: PathBuf,
    #[arg(long)]
    pub out_pgm: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum MapMethod {
    /// One partial per node.
    A,
    /// Extrema through the quadratic map.
    B,
    /// Four value slabs.
    C,
    /// Moments as a Gaussian sound.
    D,
    /// Emission record as a timbre progression.
    Palette,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativeArg {
    Triangle,
    Pulse,
}

#[derive(Debug, Args, Serialize)]
pub struct MapArgs {
    #[arg(long, value_enum)]
    pub method: MapMethod,
    #[arg(long, value_enum, default_value_t = NegativeArg::Triangle)]
    pub negative_mode: NegativeArg,
    /// Field CSV (`x,p,w`); repeat for a sweep (methods b and c).
    #[arg(long)]
    pub in_csv: Vec<PathBuf>,
    /// Record written by `rabi-sim` (method palette).
    #[arg(long)]
    pub in_json: Option<PathBuf>,
    /// Quadratic-map anchors `w_min,w_max` (default: sweep extrema).
    #[arg(long)]
    pub anchors: Option<String>,
    /// Piano-key window `k_lo,k_hi` for method d.
    #[arg(long, default_value = "25,73")]
    pub key_window: String,
    /// Palette fundamental in Hz.
    #[arg(long, default_value_t = 110.0)]
    pub fundamental: f64,
    /// Mean seconds between palette events.
    #[arg(long, default_value_t = mapping::DEFAULT_EVENT_SPACING_S)]
    pub spacing: f64,
    /// Lift the 900-oscillator budget of method a.
    #[arg(long)]
    pub allow_over_budget: bool,
    #[arg(long, default_value = "sound.json")]
    pub out_json: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub in_json: PathBuf,
    /// Seconds, for partial sets and Gaussian sounds.
    #[arg(long, default_value_t = 5.0)]
    pub duration: f64,
    /// Seconds per sweep step, for extrema and chunk documents.
    #[arg(long, default_value_t = 1.0)]
    pub step_seconds: f64,
    #[arg(long, default_value_t = synth::DEFAULT_SAMPLE_RATE)]
    pub rate: u32,
    #[arg(long, default_value = "sound.wav")]
    pub out_wav: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitArg {
    Fock,
    Random,
}

#[derive(Debug, Args, Serialize)]
pub struct BhSimArgs {
    /// `L` for a chain or `LxxLy` for a square lattice.
    #[arg(long, default_value = "20x20")]
    pub dims: String,
    #[arg(long = "tU", default_value_t = 0.02)]
    pub t_u: f64,
    #[arg(long = "muU", default_value_t = 0.5)]
    pub mu_u: f64,
    /// Trap curvature V/U per site².
    #[arg(long, default_value_t = 0.0)]
    pub trap: f64,
    /// `t0:t1:steps` ramp of t/U at fixed μ/U (overrides --tU).
    #[arg(long)]
    pub ramp: Option<String>,
    #[arg(long, default_value_t = bosehubbard::DEFAULT_N_MAX)]
    pub nmax: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = InitArg::Fock)]
    pub init: InitArg,
    /// Tune μ at the first ramp point to this total atom number.
    #[arg(long)]
    pub target_atoms: Option<f64>,
    /// Snapshot CSV prefix; files are `<prefix>_NNN.csv`.
    #[arg(long, default_value = "bh")]
    pub out_csv: String,
    /// Also write `<prefix>_{mean,std}_NNN.pgm` heatmaps.
    #[arg(long)]
    pub out_pgm: bool,
    #[arg(long, default_value = "bh.json")]
    pub out_json: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMethod {
    B,
    C,
    Timeline,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DoublingArg {
    QuarterTone,
    Unison,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long, value_enum)]
    pub method: ScoreMethod,
    /// Sound document from `map` (extrema, chunks or events).
    #[arg(long)]
    pub in_json: PathBuf,
    #[arg(long, default_value = "score.json")]
    pub out_json: PathBuf,
    #[arg(long, default_value = "score.mid")]
    pub out_midi: PathBuf,
    /// Cue list for `--method timeline`.
    #[arg(long, default_value = "timeline.csv")]
    pub out_csv: PathBuf,
    #[arg(long, default_value_t = score::DEFAULT_TEMPO)]
    pub tempo: f64,
    /// Mark chunk intensities by tremolo type instead of dynamics.
    #[arg(long)]
    pub tremolo: bool,
    #[arg(long, value_enum, default_value_t = DoublingArg::QuarterTone)]
    pub doubling: DoublingArg,
}

#[derive(Debug, Args, Serialize)]
pub struct DemoRabiArgs {
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    #[arg(long, default_value_t = 200.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 500)]
    pub trajectories: usize,
    #[arg(long, default_value_t = 12)]
    pub bins: usize,
    #[arg(long, default_value_t = 110.0)]
    pub fundamental: f64,
    #[arg(long, default_value_t = mapping::DEFAULT_EVENT_SPACING_S)]
    pub spacing: f64,
    #[arg(long, default_value_t = synth::DEFAULT_SAMPLE_RATE)]
    pub rate: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct DemoCatArgs {
    #[arg(long, default_value = "0")]
    pub alpha: String,
    /// Final δα of the sweep (the only one when --steps is 1).
    #[arg(long, default_value = "-1")]
    pub dalpha: String,
    /// Sweep δα from -3 to --dalpha in this many steps.
    #[arg(long, default_value_t = 1)]
    pub steps: usize,
    #[arg(long, default_value_t = 30)]
    pub points: usize,
    #[arg(long, default_value_t = synth::DEFAULT_SAMPLE_RATE)]
    pub rate: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct DemoBhArgs {
    #[arg(long, default_value = "20x20")]
    pub dims: String,
    #[arg(long = "muU", default_value_t = 0.5)]
    pub mu_u: f64,
    #[arg(long, default_value_t = 0.002)]
    pub trap: f64,
    #[arg(long, default_value = "0.01:0.08:4")]
    pub ramp: String,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Seconds per snapshot in the rendered sweep.
    #[arg(long, default_value_t = 1.0)]
    pub step_seconds: f64,
    #[arg(long, default_value_t = synth::DEFAULT_SAMPLE_RATE)]
    pub rate: u32,
}

/// Output of the `map` subcommand and input of `synth`/`score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SoundDocument {
    Partials { partials: Vec<Partial> },
    Events { events: Vec<TimbreEvent> },
    Extrema { quadratic: QuadraticMap, steps: Vec<Extrema> },
    Chunks { quadratic: QuadraticMap, steps: Vec<ChunkAnalysis> },
    Gaussian { spec: GaussianSoundSpec },
}

/// Record written by `rabi-sim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiRecord {
    pub params: RabiParams,
    pub histogram: WaitingTimeHistogram,
    pub trajectories: Vec<EmissionTrajectory>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum EntropyMode {
    Seed(u64),
    File(PathBuf),
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    entropy: EntropyMode,
    command: &'a Command,
    artifacts: &'a [String],
}

struct Context {
    out_dir: PathBuf,
    verbose: bool,
    entropy: EntropySource,
    artifacts: Vec<String>,
}

impl Context {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("qsonify: {}", msg.as_ref());
        }
    }

    /// Resolves an artifact name inside the output directory.
    fn resolve(&self, name: &Path) -> Result<PathBuf> {
        let inside = name.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
        if !inside || name.as_os_str().is_empty() {
            return Err(CliError::Usage(format!(
                "output path {} must be relative and stay inside --out-dir",
                name.display()
            )));
        }
        Ok(self.out_dir.join(name))
    }

    fn write(&mut self, name: impl AsRef<Path>, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let name = name.as_ref();
        let path = self.resolve(name)?;
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_error(parent))?;
        }
        fs::write(&path, bytes).map_err(io_error(&path))?;
        self.log(format!("wrote {}", path.display()));
        self.artifacts.push(name.to_string_lossy().replace('\\', "/"));
        Ok(path)
    }

    fn write_json<T: Serialize>(&mut self, name: impl AsRef<Path>, value: &T) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.write(name, text)
    }

    fn write_wav(&mut self, name: impl AsRef<Path>, buffer: &AudioBuffer) -> Result<PathBuf> {
        self.write(name, synth::encode_wav(buffer))
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_error(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

fn read_field(path: &Path) -> Result<WignerField> {
    Ok(WignerField::from_csv(&read_text(path)?)?)
}

fn parse_pair(text: &str, what: &str) -> Result<(f64, f64)> {
    let bad = || CliError::Usage(format!("{what}: expected two comma-separated numbers, got {text:?}"));
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn parse_ramp(text: &str) -> Result<Vec<f64>> {
    let bad = || CliError::Usage(format!("--ramp: expected t0:t1:steps, got {text:?}"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let t0: f64 = parts[0].parse().map_err(|_| bad())?;
    let t1: f64 = parts[1].parse().map_err(|_| bad())?;
    let steps: usize = parts[2].parse().map_err(|_| bad())?;
    match steps {
        0 => Err(bad()),
        1 => Ok(vec![t0]),
        n => Ok((0..n).map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64).collect()),
    }
}

fn parse_dims(text: &str) -> Result<Dims> {
    text.parse::<Dims>().map_err(|e| CliError::Usage(e.to_string()))
}

fn parse_state(text: &str) -> Result<StateSpec> {
    text.parse::<StateSpec>().map_err(|e| CliError::Usage(e.to_string()))
}

fn parse_complex_arg(text: &str, flag: &str) -> Result<Complex64> {
    crate::wigner::parse_complex(text).ok_or_else(|| CliError::Usage(format!("{flag}: bad complex number {text:?}")))
}

/// Parses `args` and runs the chosen subcommand; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("qsonify: error[{}]: {e}", e.module());
            e.exit_code()
        }
    }
}

/// Runs an already parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    let (entropy, mode) = match (&g.entropy_file, g.seed) {
        (Some(path), _) => (EntropySource::from_file(path)?, EntropyMode::File(path.clone())),
        (None, seed) => {
            let seed = seed.unwrap_or(0);
            (EntropySource::seeded(seed), EntropyMode::Seed(seed))
        }
    };
    fs::create_dir_all(&g.out_dir).map_err(io_error(&g.out_dir))?;
    let mut ctx = Context {
        out_dir: g.out_dir.clone(),
        verbose: g.verbose,
        entropy,
        artifacts: Vec::new(),
    };
    match &cli.command {
        Command::RabiSim(a) => rabi_sim(&mut ctx, a)?,
        Command::Wigner(a) => wigner(&mut ctx, a)?,
        Command::Map(a) => map(&mut ctx, a)?,
        Command::Synth(a) => synth_cmd(&mut ctx, a)?,
        Command::BhSim(a) => bh_sim(&mut ctx, a)?,
        Command::Score(a) => score_cmd(&mut ctx, a)?,
        Command::DemoRabi(a) => demo_rabi(&mut ctx, a)?,
        Command::DemoCat(a) => demo_cat(&mut ctx, a)?,
        Command::DemoBh(a) => demo_bh(&mut ctx, a)?,
    }
    let artifacts = ctx.artifacts.clone();
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        entropy: mode,
        command: &cli.command,
        artifacts: &artifacts,
    };
    ctx.write_json("manifest.json", &manifest)?;
    Ok(())
}

fn simulate_record(
    ctx: &mut Context,
    params: RabiParams,
    count: usize,
    bins: usize,
    span: Option<f64>,
) -> Result<RabiRecord> {
    let bytes_per = match ctx.entropy.remaining_bytes() {
        Some(n) => (n / count.max(1)) / 8 * 8,
        None => 0,
    };
    let trajectories = simulate_batch(&params, &ctx.entropy, count, bytes_per)?;
    let hi = match span {
        Some(s) => s,
        None => default_histogram_span(&params)?,
    };
    let histogram = accumulate_histogram(&trajectories, &uniform_bin_edges(0.0, hi, bins))?;
    ctx.log(format!(
        "{} trajectories, {} waiting times",
        trajectories.len(),
        histogram.total
    ));
    Ok(RabiRecord {
        params,
        histogram,
        trajectories,
    })
}

fn rabi_sim(ctx: &mut Context, a: &RabiSimArgs) -> Result<()> {
    let params = RabiParams::new(a.omega, a.gamma, a.duration, a.model.into())?;
    let record = simulate_record(ctx, params, a.trajectories, a.bins, a.span)?;
    ctx.write(&a.out_csv, record.histogram.to_csv())?;
    ctx.write_json(&a.out_json, &record)?;
    Ok(())
}

fn field_for(ctx: &mut Context, state: &StateSpec, points: usize, scheme: SchemeArg, coverage: f64) -> Result<WignerField> {
    let scheme = match scheme {
        SchemeArg::Regular => GridScheme::Regular,
        SchemeArg::Gauss => GridScheme::GaussianIntervals,
    };
    let opts = GridOptions::new(points, scheme).with_coverage(coverage);
    let grid = build_grid(state, &opts, Some(&mut ctx.entropy))?;
    Ok(evaluate_field(state, &grid)?)
}

fn wigner(ctx: &mut Context, a: &WignerArgs) -> Result<()> {
    let state = parse_state(&a.state)?;
    let field = field_for(ctx, &state, a.points, a.scheme, a.coverage)?;
    ctx.log(format!("{state}: W in [{:e}, {:e}], ∫W = {:.6}", field.min(), field.max(), field.integrate()));
    ctx.write(&a.out_csv, field.to_csv())?;
    if let Some(pgm) = &a.out_pgm {
        ctx.write(pgm, field.to_pgm())?;
    }
    Ok(())
}

/// Quadratic map over a sweep: explicit anchors, else the sweep extrema.
/// A sweep without negative values is anchored symmetrically at `±max|W|`.
fn sweep_quadratic(fields: &[WignerField], anchors: Option<&str>) -> Result<QuadraticMap> {
    if let Some(text) = anchors {
        let (lo, hi) = parse_pair(text, "--anchors")?;
        return Ok(fit_quadratic(lo, hi)?);
    }
    let lo = fields.iter().map(|f| f.min()).fold(f64::INFINITY, f64::min);
    let hi = fields.iter().map(|f| f.max()).fold(f64::NEG_INFINITY, f64::max);
    if lo < 0.0 && hi > 0.0 {
        return Ok(fit_quadratic(lo, hi)?);
    }
    let m = lo.abs().max(hi.abs());
    Ok(fit_quadratic(-m, m)?)
}

fn map_document(ctx: &mut Context, a: &MapArgs) -> Result<SoundDocument> {
    if a.method == MapMethod::Palette {
        let path = a
            .in_json
            .as_ref()
            .ok_or_else(|| CliError::Usage("--method palette needs --in-json (from rabi-sim)".into()))?;
        let record: RabiRecord = read_json(path)?;
        return Ok(SoundDocument::Events {
            events: palette_events(&record, a.fundamental, a.spacing)?,
        });
    }
    if a.in_csv.is_empty() {
        return Err(CliError::Usage(format!("--method {:?} needs --in-csv", a.method).to_lowercase()));
    }
    let fields: Vec<WignerField> = a.in_csv.iter().map(|p| read_field(p)).collect::<Result<_>>()?;
    ctx.log(format!("read {} field(s)", fields.len()));
    let single = || -> Result<&WignerField> {
        match fields.as_slice() {
            [f] => Ok(f),
            _ => Err(CliError::Usage("this method takes exactly one --in-csv".into())),
        }
    };
    Ok(match a.method {
        MapMethod::A => {
            let opts = PointwiseOptions {
                negative_mode: match a.negative_mode {
                    NegativeArg::Triangle => NegativeMode::Triangle,
                    NegativeArg::Pulse => NegativeMode::PulsedSine,
                },
                allow_over_budget: a.allow_over_budget,
            };
            SoundDocument::Partials {
                partials: map_pointwise(single()?, opts)?,
            }
        }
        MapMethod::B => {
            let quadratic = sweep_quadratic(&fields, a.anchors.as_deref())?;
            let steps = fields.iter().map(|f| map_extrema(f, &quadratic)).collect::<std::result::Result<_, _>>()?;
            SoundDocument::Extrema { quadratic, steps }
        }
        MapMethod::C => {
            let quadratic = sweep_quadratic(&fields, a.anchors.as_deref())?;
            let steps = fields.iter().map(|f| map_chunks(f, &quadratic)).collect::<std::result::Result<_, _>>()?;
            SoundDocument::Chunks { quadratic, steps }
        }
        MapMethod::D => SoundDocument::Gaussian {
            spec: map_moments(single()?, parse_pair(&a.key_window, "--key-window")?)?,
        },
        MapMethod::Palette => unreachable!(),
    })
}

fn map(ctx: &mut Context, a: &MapArgs) -> Result<()> {
    let doc = map_document(ctx, a)?;
    ctx.write_json(&a.out_json, &doc)?;
    Ok(())
}

/// Palette of the first trajectory with at least one emission.
fn palette_events(record: &RabiRecord, fundamental: f64, spacing: f64) -> Result<Vec<TimbreEvent>> {
    let trajectory = record
        .trajectories
        .iter()
        .find(|t| !t.is_empty())
        .ok_or(MappingError::EmptyTrajectory)?;
    let opts = PaletteOptions {
        fundamental,
        dilation: mapping::dilation_for_spacing(trajectory, spacing),
    };
    Ok(rabi_palette(&record.histogram, trajectory, opts)?)
}

/// Sweep steps as consecutive events of `seconds` each.
fn step_events(steps: Vec<Vec<Partial>>, seconds: f64) -> Vec<TimbreEvent> {
    steps
        .into_iter()
        .enumerate()
        .map(|(k, partials)| TimbreEvent {
            start: k as f64 * seconds,
            duration: seconds,
            partials,
            added_harmonic: None,
        })
        .collect()
}

fn render_document(ctx: &mut Context, doc: &SoundDocument, duration: f64, step_seconds: f64, rate: u32) -> Result<AudioBuffer> {
    Ok(match doc {
        SoundDocument::Partials { partials } => synth::render_partials(partials, duration, rate)?,
        SoundDocument::Events { events } => synth::render_sequence(events, rate)?,
        SoundDocument::Extrema { steps, .. } => {
            let parts = steps
                .iter()
                .map(|e| Ok(vec![Partial::sine(e.f_min, 1.0)?, Partial::sine(e.f_max, 1.0)?]))
                .collect::<std::result::Result<Vec<_>, MappingError>>()?;
            synth::render_sequence(&step_events(parts, step_seconds), rate)?
        }
        SoundDocument::Chunks { steps, .. } => {
            let parts = steps
                .iter()
                .map(|s| {
                    s.chunks
                        .iter()
                        .map(|c| Partial::sine(c.frequency, c.intensity.unsigned_abs() as f64 / 6.0))
                        .collect()
                })
                .collect::<std::result::Result<Vec<_>, MappingError>>()?;
            synth::render_sequence(&step_events(parts, step_seconds), rate)?
        }
        SoundDocument::Gaussian { spec } => synth::render_gaussian_sound(spec, duration, rate, &mut ctx.entropy)?,
    })
}

fn synth_cmd(ctx: &mut Context, a: &SynthArgs) -> Result<()> {
    let doc: SoundDocument = read_json(&a.in_json)?;
    let buffer = render_document(ctx, &doc, a.duration, a.step_seconds, a.rate)?;
    ctx.log(format!("{:.3} s at {} Hz", buffer.duration(), buffer.sample_rate));
    ctx.write_wav(&a.out_wav, &buffer)?;
    Ok(())
}

fn run_lattice(
    ctx: &mut Context,
    spec: LatticeSpec,
    schedule: &[(f64, f64)],
    init: Init,
    tol: f64,
    target_atoms: Option<f64>,
) -> Result<Vec<LatticeSnapshot>> {
    let mut spec = spec;
    let mut schedule = schedule.to_vec();
    if let Some(target) = target_atoms {
        let first = spec.with_ratios(schedule[0].0, schedule[0].1);
        let (tuned, _) = tune_chemical_potential(&first, target, 0.5, tol)?;
        let mu_u = tuned.chemical_potential / tuned.interaction;
        ctx.log(format!("tuned μ/U = {mu_u} for {target} atoms"));
        for point in &mut schedule {
            point.1 = mu_u;
        }
        spec = tuned;
    }
    let snaps = sweep(&spec, &schedule, init, tol)?;
    for (k, s) in snaps.iter().enumerate() {
        ctx.log(format!(
            "point {k}: t/U = {:.4}, N = {:.3}, mean std = {:.4}",
            s.params.t_over_u,
            s.total_atoms,
            s.mean_std()
        ));
    }
    Ok(snaps)
}

fn lattice_spec(dims: &str, trap: f64, nmax: usize) -> Result<LatticeSpec> {
    let spec = LatticeSpec::new(parse_dims(dims)?).with_trap(trap).with_n_max(nmax);
    spec.validate()?;
    Ok(spec)
}

fn warn_truncation(spec: &LatticeSpec, schedule: &[(f64, f64)], tol: f64) -> Result<()> {
    // the last point is the most superfluid one along a forward ramp
    let &(t_u, mu_u) = schedule.last().unwrap();
    let state = bosehubbard::solve_gutzwiller(&spec.with_ratios(t_u, mu_u), Init::UniformFock(1), tol)?;
    if !state.truncation_ok() {
        eprintln!(
            "qsonify: warning[bosehubbard]: top occupation level carries weight {:e}; raise --nmax",
            state.top_level_weight()
        );
    }
    Ok(())
}

fn bh_sim(ctx: &mut Context, a: &BhSimArgs) -> Result<()> {
    let spec = lattice_spec(&a.dims, a.trap, a.nmax)?;
    let ts = match &a.ramp {
        Some(r) => parse_ramp(r)?,
        None => vec![a.t_u],
    };
    let schedule: Vec<(f64, f64)> = ts.iter().map(|&t| (t, a.mu_u)).collect();
    let init = match a.init {
        InitArg::Fock => Init::UniformFock(1),
        InitArg::Random => Init::Random(ctx.entropy.next_u64()?),
    };
    let snaps = run_lattice(ctx, spec, &schedule, init, a.tol, a.target_atoms)?;
    if a.target_atoms.is_none() {
        warn_truncation(&spec, &schedule, a.tol)?;
    }
    for (k, snap) in snaps.iter().enumerate() {
        ctx.write(format!("{}_{k:03}.csv", a.out_csv), snap.to_csv())?;
        if a.out_pgm {
            for ch in [Channel::Mean, Channel::Std] {
                let field = snapshot_to_field(snap, ch)?;
                ctx.write(format!("{}_{ch}_{k:03}.pgm", a.out_csv), field.to_pgm())?;
            }
        }
    }
    ctx.write_json(&a.out_json, &snaps)?;
    Ok(())
}

fn score_cmd(ctx: &mut Context, a: &ScoreArgs) -> Result<()> {
    let doc: SoundDocument = read_json(&a.in_json)?;
    if a.method == ScoreMethod::Timeline {
        let SoundDocument::Events { events } = &doc else {
            return Err(CliError::Usage("--method timeline needs an events document".into()));
        };
        ctx.write(&a.out_csv, score::timeline_csv(events)?)?;
        return Ok(());
    }
    let mut score = match (a.method, &doc) {
        (ScoreMethod::B, SoundDocument::Extrema { steps, .. }) => {
            let pairs: Vec<(f64, f64)> = steps.iter().map(|e| (e.f_min, e.f_max)).collect();
            let doubling = match a.doubling {
                DoublingArg::QuarterTone => Doubling::QuarterToneUp,
                DoublingArg::Unison => Doubling::Unison,
            };
            score::score_method_b(&pairs, doubling)?
        }
        (ScoreMethod::C, SoundDocument::Chunks { steps, .. }) => {
            let slices: Vec<&[mapping::Chunk]> = steps.iter().map(|s| &s.chunks[..]).collect();
            let marking = if a.tremolo {
                IntensityMarking::Tremolo
            } else {
                IntensityMarking::Dynamics
            };
            score::score_method_c(&slices, marking)?
        }
        _ => {
            return Err(CliError::Usage(format!(
                "--method {:?} does not accept this document kind",
                a.method
            ).to_lowercase()))
        }
    };
    score.tempo = a.tempo;
    score.metadata.parameters.insert("source".into(), a.in_json.display().to_string());
    ctx.write(&a.out_json, score::score_to_json(&score)?)?;
    ctx.write(&a.out_midi, score::score_to_midi(&score)?)?;
    Ok(())
}

fn demo_rabi(ctx: &mut Context, a: &DemoRabiArgs) -> Result<()> {
    let params = RabiParams::new(a.omega, a.gamma, a.duration, PopulationModel::Ideal)?;
    let record = simulate_record(ctx, params, a.trajectories, a.bins, None)?;
    ctx.write("rabi_hist.csv", record.histogram.to_csv())?;
    let record_path = ctx.write_json("rabi.json", &record)?;
    let record: RabiRecord = read_json(&record_path)?;
    let events = palette_events(&record, a.fundamental, a.spacing)?;
    let doc = SoundDocument::Events { events };
    ctx.write_json("palette.json", &doc)?;
    let SoundDocument::Events { events } = &doc else { unreachable!() };
    ctx.write("timeline.csv", score::timeline_csv(events)?)?;
    let buffer = synth::render_sequence(events, a.rate)?;
    ctx.write_wav("rabi.wav", &buffer)?;
    Ok(())
}

fn demo_cat(ctx: &mut Context, a: &DemoCatArgs) -> Result<()> {
    let alpha = parse_complex_arg(&a.alpha, "--alpha")?;
    let end = parse_complex_arg(&a.dalpha, "--dalpha")?;
    if a.steps == 0 {
        return Err(CliError::Usage("--steps must be >= 1".into()));
    }
    let start = Complex64::new(-3.0, 0.0);
    let mut fields = Vec::with_capacity(a.steps);
    for k in 0..a.steps {
        let d = if a.steps == 1 {
            end
        } else {
            start + (end - start) * (k as f64 / (a.steps - 1) as f64)
        };
        let state = StateSpec::cat(alpha, d);
        let field = field_for(ctx, &state, a.points, SchemeArg::Regular, crate::wigner::DEFAULT_COVERAGE)?;
        let csv = ctx.write(format!("wigner_{k:03}.csv"), field.to_csv())?;
        ctx.write(format!("wigner_{k:03}.pgm"), field.to_pgm())?;
        fields.push(read_field(&csv)?);
    }
    let quadratic = sweep_quadratic(&fields, None)?;
    let steps = fields.iter().map(|f| map_extrema(f, &quadratic)).collect::<std::result::Result<Vec<_>, _>>()?;
    let doc = SoundDocument::Extrema { quadratic, steps };
    ctx.write_json("extrema.json", &doc)?;
    let SoundDocument::Extrema { steps, .. } = &doc else { unreachable!() };
    let pairs: Vec<(f64, f64)> = steps.iter().map(|e| (e.f_min, e.f_max)).collect();
    let mut score = score::score_method_b(&pairs, Doubling::QuarterToneUp)?;
    score.metadata.state = Some(StateSpec::cat(alpha, end).to_string());
    ctx.write("score.json", score::score_to_json(&score)?)?;
    ctx.write("score.mid", score::score_to_midi(&score)?)?;
    let buffer = render_document(ctx, &doc, 0.0, 60.0 / score.tempo, a.rate)?;
    ctx.write_wav("cat.wav", &buffer)?;
    Ok(())
}

fn demo_bh(ctx: &mut Context, a: &DemoBhArgs) -> Result<()> {
    let spec = lattice_spec(&a.dims, a.trap, bosehubbard::DEFAULT_N_MAX)?;
    let schedule: Vec<(f64, f64)> = parse_ramp(&a.ramp)?.into_iter().map(|t| (t, a.mu_u)).collect();
    let snaps = run_lattice(ctx, spec, &schedule, Init::UniformFock(1), a.tol, None)?;
    let mut steps = Vec::with_capacity(snaps.len());
    for (k, snap) in snaps.iter().enumerate() {
        ctx.write(format!("bh_{k:03}.csv"), snap.to_csv())?;
        let field = snapshot_to_field(snap, Channel::Mean)?;
        ctx.write(format!("bh_mean_{k:03}.pgm"), field.to_pgm())?;
        ctx.write(format!("bh_std_{k:03}.pgm"), snapshot_to_field(snap, Channel::Std)?.to_pgm())?;
        steps.push(map_pointwise(&field, PointwiseOptions::default())?);
    }
    let doc = SoundDocument::Events {
        events: step_events(steps, a.step_seconds),
    };
    ctx.write_json("sound.json", &doc)?;
    let buffer = render_document(ctx, &doc, 0.0, a.step_seconds, a.rate)?;
    ctx.write_wav("bh.wav", &buffer)?;
    Ok(())
}
