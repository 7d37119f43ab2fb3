//! Generates the collagen medium of a single pixel and compares its empirical autocovariance
//! with the Gaussian model. Also prints the built-in metabolic phantom.
//!
//! cargo run --release --example random_medium

use dynoct::medium::{generate_collagen_field, MetabolicMap, PixelGrid};

fn main() -> dynoct::Result<()> {
    let grid = PixelGrid::square(1)?;
    let corr_len = 0.5;
    let z_step = 1.0 / 64.0;
    let field = generate_collagen_field(grid, 16385, z_step, corr_len, 0.0, 7)?;
    let q = field.pixel_samples(0);
    let n = q.len() as f64;
    let mean = q.iter().sum::<f64>() / n;

    println!("lag      empirical  model");
    for lag_steps in [0usize, 8, 16, 32, 48, 64] {
        let cov = q
            .iter()
            .zip(&q[lag_steps..])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / (q.len() - lag_steps) as f64;
        let dz = lag_steps as f64 * z_step;
        let model = (-dz * dz / (2.0 * corr_len * corr_len)).exp();
        println!("{dz:<8.4} {cov:>9.4}  {model:.4}");
    }

    let phantom = MetabolicMap::phantom(PixelGrid::square(21)?, 0.0)?;
    println!("\nbuilt-in phantom (21x21):");
    for r in 0..21 {
        let row: String = (0..21)
            .map(|c| match phantom.intensities()[r * 21 + c] {
                v if v >= 1.0 => '#',
                v if v >= 0.8 => '+',
                v if v > 0.0 => '.',
                _ => ' ',
            })
            .collect();
        println!("|{row}|");
    }
    Ok(())
}
