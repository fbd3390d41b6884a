//! Photon emissions of a driven two-level atom, binned and turned into an
//! evolving harmonic timbre.
//!
//! ```text
//! cargo run --example rabi_emissions -- [out-dir]
//! ```

use std::error::Error;
use std::path::PathBuf;

use qsonify::entropy::EntropySource;
use qsonify::mapping::{dilation_for_spacing, rabi_palette, PaletteOptions};
use qsonify::qdynamics::{
    accumulate_histogram, default_histogram_span, simulate_batch, uniform_bin_edges, waiting_time_cdf,
    PopulationModel, RabiParams,
};
use qsonify::synth::{render_sequence, write_wav, DEFAULT_SAMPLE_RATE};

fn main() -> Result<(), Box<dyn Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&out)?;

    let params = RabiParams::new(1.0, 0.1, 200.0, PopulationModel::Ideal)?;
    let src = EntropySource::seeded(42);
    let trajectories = simulate_batch(&params, &src, 500, 0)?;
    let emitted: usize = trajectories.iter().map(|t| t.len()).sum();
    println!("{} trajectories, {emitted} emissions", trajectories.len());

    let span = default_histogram_span(&params)?;
    let hist = accumulate_histogram(&trajectories, &uniform_bin_edges(0.0, span, 12))?;
    for (center, count) in hist.bin_centers().iter().zip(&hist.counts) {
        let bar = "#".repeat((*count as usize * 60) / hist.total.max(1) as usize);
        println!("{center:7.2} s {count:6} {bar}");
    }
    println!("P(wait < 10 s) = {:.4}", waiting_time_cdf(&params, 10.0)?);

    let first = trajectories.iter().find(|t| !t.is_empty()).ok_or("no emissions")?;
    let opts = PaletteOptions {
        fundamental: 110.0,
        dilation: dilation_for_spacing(first, 2.0),
    };
    let events = rabi_palette(&hist, first, opts)?;
    let audio = render_sequence(&events, DEFAULT_SAMPLE_RATE)?;
    let path = out.join("rabi_palette.wav");
    write_wav(&audio, &path)?;
    println!("{} events, {:.1} s -> {}", events.len(), audio.duration(), path.display());
    Ok(())
}
