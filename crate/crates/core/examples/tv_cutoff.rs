//! Fits the two-piece quadratic to a TV profile with a planted change point.
//!
//! cargo run --release --example tv_cutoff

use dynoct::separation::{fit_breakpoint, FitConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> dynoct::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let planted = 30.0;
    let s: Vec<f64> = (1..=120)
        .map(|i| {
            let x = i as f64;
            let clean = if x < planted {
                2.0 + 0.004 * (planted - x).powi(2)
            } else {
                2.0 + 0.01 * (x - planted)
            };
            clean * (1.0 + 0.01 * rng.random_range(-1.0..1.0))
        })
        .collect();

    let fit = fit_breakpoint(&s, &FitConfig::default())?;
    println!("planted {planted}, recovered {} (normalized residual {:.3e})", fit.breakpoint, fit.normalized_residual);
    println!("\nbreakpoint  residual");
    for (b, r) in fit.candidates.iter().filter(|(b, _)| (20..=40).contains(b)) {
        let mark = if *b == fit.breakpoint { " <" } else { "" };
        println!("{b:>10}  {r:.4e}{mark}");
    }
    Ok(())
}
