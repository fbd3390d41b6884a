//! Quartet scores from a sweep of cat states: extrema pairs for method (b)
//! and level-set chunks for method (c), exported as JSON and MIDI.
//!
//! ```text
//! cargo run --example string_quartet -- [out-dir]
//! ```

use std::error::Error;
use std::path::PathBuf;

use num_complex::Complex64;
use qsonify::mapping::{fit_quadratic, map_chunks, map_extrema};
use qsonify::score::{
    decode_midi_notes, export_midi, export_score_json, score_method_b, score_method_c, score_to_midi, Doubling,
    IntensityMarking,
};
use qsonify::wigner::{build_grid, evaluate_field, GridOptions, GridScheme, StateSpec, WignerField};

fn main() -> Result<(), Box<dyn Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&out)?;

    let fields: Vec<WignerField> = (0..7)
        .map(|k| {
            let d = -3.0 + 0.5 * k as f64;
            let state = StateSpec::cat(Complex64::new(0.0, 0.0), Complex64::new(d, 0.0));
            let grid = build_grid(&state, &GridOptions::new(30, GridScheme::Regular), None)?;
            evaluate_field(&state, &grid)
        })
        .collect::<Result<_, _>>()?;
    // one quadratic for the whole sweep keeps pitches comparable across steps
    let w_min = fields.iter().map(|f| f.min()).fold(f64::INFINITY, f64::min);
    let w_max = fields.iter().map(|f| f.max()).fold(f64::NEG_INFINITY, f64::max);
    let qmap = fit_quadratic(w_min, w_max)?;

    let pairs = fields
        .iter()
        .map(|f| map_extrema(f, &qmap).map(|e| (e.f_min, e.f_max)))
        .collect::<Result<Vec<_>, _>>()?;
    let b = score_method_b(&pairs, Doubling::QuarterToneUp)?;
    export_score_json(&b, out.join("quartet_b.json"))?;
    export_midi(&b, out.join("quartet_b.mid"))?;

    let analyses = fields.iter().map(|f| map_chunks(f, &qmap)).collect::<Result<Vec<_>, _>>()?;
    let steps: Vec<&[_]> = analyses.iter().map(|a| &a.chunks[..]).collect();
    let c = score_method_c(&steps, IntensityMarking::Dynamics)?;
    export_score_json(&c, out.join("quartet_c.json"))?;
    export_midi(&c, out.join("quartet_c.mid"))?;

    for e in c.events.iter().take(8) {
        let technique = e.technique.map(|t| t.to_string()).unwrap_or_default();
        println!(
            "{:?} beat {:.0}: step {:+4} ({:7.2} Hz) {} {technique}",
            e.voice,
            e.start,
            e.pitch_step,
            e.quantized_freq(),
            e.dynamic.mark()
        );
    }
    let notes = decode_midi_notes(&score_to_midi(&c)?)?;
    println!("method b: {} notes, method c: {} notes ({} in MIDI)", b.events.len(), c.events.len(), notes.len());
    println!("scores in {}", out.display());
    Ok(())
}
