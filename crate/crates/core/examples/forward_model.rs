//! Simulates a small drifting medium and shows the effect of the dominance calibration.
//!
//! cargo run --release --example forward_model

use dynoct::forward::{
    apply_collagen_scale, calibrate_dominance, dominance_ratio, simulate_signals, OpticsConfig,
    TimeGrid,
};
use dynoct::medium::{
    generate_collagen_field, padded_half_extent, z_count_for, MediumState, MetabolicMap, PixelGrid,
};

fn main() -> dynoct::Result<()> {
    let grid = PixelGrid::square(6)?;
    let times = TimeGrid::new(200, 1.0)?;
    let optics = OpticsConfig::gaussian(1.4, 1.0, 1.0, 1.0, 0.1, 7)?;
    let (corr_len, v0, z_step) = (2.0, 0.2 / 200.0, 1.0 / 64.0);

    let half = padded_half_extent(1.0, v0, times.duration(), corr_len);
    let field = generate_collagen_field(grid, z_count_for(half, z_step), z_step, corr_len, v0, 11)?;
    let map = MetabolicMap::phantom(grid, 0.02)?;
    let medium = MediumState::new(field, map, 11)?;

    let mut records = simulate_signals(&medium, &optics, &times, 129)?;
    println!("raw RMS ratio collagen/metabolic: {:.3}", dominance_ratio(&records)?);
    let s = calibrate_dominance(&records, 100.0)?;
    apply_collagen_scale(&mut records, s)?;
    println!("collagen scale {s:.4} -> ratio {:.3}", dominance_ratio(&records)?);

    let r = &records[0];
    println!("\npixel 0, first samples (total = collagen + metabolic):");
    if let Some(d) = &r.decomposition {
        for k in 0..5 {
            println!("{:>10.5} = {:>10.5} + {:>9.5}", r.samples[k], d.collagen[k], d.metabolic[k]);
        }
    }
    Ok(())
}
