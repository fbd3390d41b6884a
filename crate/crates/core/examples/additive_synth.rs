//! Oscillator bank basics: waveforms, sequencing with crossfades, and a
//! WAV round trip.
//!
//! ```text
//! cargo run --example additive_synth -- [out-dir]
//! ```

use std::error::Error;
use std::path::PathBuf;

use qsonify::mapping::{quantize_quarter_tone, Partial, TimbreEvent, Waveform};
use qsonify::synth::{decode_wav, encode_wav, render_sequence, DEFAULT_SAMPLE_RATE};

fn main() -> Result<(), Box<dyn Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&out)?;

    let waves = [Waveform::Sine, Waveform::Triangle, Waveform::PulsedSine { rate: 2.0 }];
    let mut events = Vec::new();
    for (k, wave) in waves.into_iter().enumerate() {
        // a quarter-tone arpeggio above A3 per waveform
        for (j, step) in [-24, -16, -10, -4].into_iter().enumerate() {
            let f = 440.0 * 2f64.powf(f64::from(step) / 24.0);
            let q = quantize_quarter_tone(f)?;
            events.push(TimbreEvent {
                start: (4 * k + j) as f64 * 0.5,
                duration: 0.5,
                partials: vec![Partial::new(q.quantized, 1.0, 0.0, wave)?, Partial::sine(2.0 * q.quantized, 0.3)?],
                added_harmonic: None,
            });
        }
    }
    let audio = render_sequence(&events, DEFAULT_SAMPLE_RATE)?;
    let bytes = encode_wav(&audio);
    let back = decode_wav(&bytes)?;
    let err = audio
        .samples
        .iter()
        .zip(&back.samples)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let path = out.join("waveforms.wav");
    std::fs::write(&path, &bytes)?;
    println!(
        "{} events, {:.2} s, peak {:.3}, 16-bit round-trip error {err:.1e} -> {}",
        events.len(),
        audio.duration(),
        audio.peak(),
        path.display()
    );
    Ok(())
}
