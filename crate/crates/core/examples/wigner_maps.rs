//! Wigner functions of Fock and cat states on auto-sized grids.
//!
//! ```text
//! cargo run --example wigner_maps -- [out-dir]
//! ```

use std::error::Error;
use std::path::PathBuf;

use num_complex::Complex64;
use qsonify::entropy::EntropySource;
use qsonify::wigner::{build_grid, evaluate_field, GridOptions, GridScheme, StateSpec};

fn main() -> Result<(), Box<dyn Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&out)?;

    let zero = Complex64::new(0.0, 0.0);
    let states = [
        ("fock0", StateSpec::fock(0)),
        ("fock1", StateSpec::fock(1)),
        ("fock5", StateSpec::fock(5)),
        ("cat_d-2", StateSpec::cat(zero, Complex64::new(-2.0, 0.0))),
        ("cat_d-3", StateSpec::cat(zero, Complex64::new(-3.0, 0.0))),
    ];
    // the Gaussian-interval scheme draws its node spacings from a seeded source
    let mut src = EntropySource::seeded(5);
    for scheme in [GridScheme::Regular, GridScheme::GaussianIntervals] {
        println!("{scheme:?}");
        for (name, state) in &states {
            let grid = build_grid(state, &GridOptions::new(60, scheme), Some(&mut src))?;
            let field = evaluate_field(state, &grid)?;
            let (lo, hi) = grid.x_range();
            println!(
                "  {name:8} x∈[{lo:6.2}, {hi:5.2}]  ∫W = {:.6}  min {:+.4}  max {:+.4}",
                field.integrate(),
                field.min(),
                field.max()
            );
            if scheme == GridScheme::Regular {
                std::fs::write(out.join(format!("{name}.pgm")), field.to_pgm())?;
            }
        }
    }
    println!("images in {}", out.display());
    Ok(())
}
