//! The four ways a Wigner function becomes sound: one oscillator per node,
//! the extrema pair, level-set chunks, and a Gaussian cluster from the
//! position moments.
//!
//! ```text
//! cargo run --example phase_space_sound -- [out-dir]
//! ```

use std::error::Error;
use std::path::PathBuf;

use num_complex::Complex64;
use qsonify::entropy::EntropySource;
use qsonify::mapping::{
    fit_quadratic, map_chunks, map_extrema, map_moments, map_pointwise, NegativeMode, Partial, PointwiseOptions,
    DEFAULT_KEY_WINDOW,
};
use qsonify::synth::{render_gaussian_sound, render_partials, write_wav, DEFAULT_SAMPLE_RATE};
use qsonify::wigner::{build_grid, evaluate_field, GridOptions, GridScheme, StateSpec};

fn main() -> Result<(), Box<dyn Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&out)?;

    let state = StateSpec::cat(Complex64::new(0.0, 0.0), Complex64::new(-2.0, 0.0));
    let grid = build_grid(&state, &GridOptions::new(30, GridScheme::Regular), None)?;
    let field = evaluate_field(&state, &grid)?;

    let opts = PointwiseOptions {
        negative_mode: NegativeMode::Triangle,
        ..PointwiseOptions::default()
    };
    let nodes = map_pointwise(&field, opts)?;
    let negative = nodes.iter().filter(|p| p.waveform != qsonify::mapping::Waveform::Sine).count();
    println!("pointwise: {} oscillators, {negative} triangle", nodes.len());
    write_wav(&render_partials(&nodes, 3.0, DEFAULT_SAMPLE_RATE)?, out.join("pointwise.wav"))?;

    let qmap = fit_quadratic(field.min(), field.max())?;
    let ext = map_extrema(&field, &qmap)?;
    println!(
        "extrema: W ∈ [{:+.4}, {:+.4}] -> {:.2} Hz / {:.2} Hz",
        ext.w_min, ext.w_max, ext.f_min, ext.f_max
    );

    let chunks = map_chunks(&field, &qmap)?;
    let voices: Vec<Partial> = chunks
        .chunks
        .iter()
        .map(|c| Partial::sine(c.frequency, f64::from(c.intensity.unsigned_abs()) / 6.0))
        .collect::<Result<_, _>>()?;
    for c in &chunks.chunks {
        println!(
            "chunk [{:+.4}, {:+.4}] {:8.2} Hz  V = {:+.5}  intensity {:+}",
            c.level_lo, c.level_hi, c.frequency, c.signed_volume, c.intensity
        );
    }
    write_wav(&render_partials(&voices, 3.0, DEFAULT_SAMPLE_RATE)?, out.join("chunks.wav"))?;

    let spec = map_moments(&field, DEFAULT_KEY_WINDOW)?;
    println!("moments: mean {:.2} Hz, spread {:.2} Hz", spec.mean_frequency, spec.spread);
    let mut src = EntropySource::seeded(7);
    let cluster = render_gaussian_sound(&spec, 3.0, DEFAULT_SAMPLE_RATE, &mut src)?;
    write_wav(&cluster, out.join("moments.wav"))?;
    println!("audio in {}", out.display());
    Ok(())
}
