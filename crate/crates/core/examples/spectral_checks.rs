//! Kernel-level checks on one simulated run: rank-one collagen kernel, trace dominance,
//! cross-term bound and the non-orthogonality of the collagen and metabolic factors.
//!
//! cargo run --release --example spectral_checks

use dynoct::run::{simulate_run, RunConfig};
use dynoct::spectral::{
    correlation_kernel, cross_bound_check, min_relative_eigenvalue, nonorthogonality_check,
    project_out_collagen, rank_one_fraction, trace_dominance, KernelLabel,
};

fn main() -> dynoct::Result<()> {
    let cfg = RunConfig::default();
    let sim = simulate_run(&cfg)?;
    let (ac, am) = (sim.collagen.data(), sim.metabolic.data());

    println!("tr(F_cc)/tr(F_mm)        {:.4e}", trace_dominance(ac, am)?);
    println!("lambda_1/tr of F_cc      {:.6}", rank_one_fraction(ac)?);
    let f_mm = correlation_kernel(am, None, cfg.dt, KernelLabel::MetabolicMetabolic)?;
    println!("min eig/max eig of F_mm  {:.3e}", min_relative_eigenvalue(&f_mm));

    let cross = cross_bound_check(ac, am, cfg.dt)?;
    println!("cross term max ratio     {:.4} ({} violations)", cross.max_ratio, cross.violations);

    println!("|cos(phi_c, phi_m)|      {:.4e}", nonorthogonality_check(ac, am)?);
    let forced = project_out_collagen(ac, am)?;
    println!("  after forcing          {:.4e}", nonorthogonality_check(ac, &forced)?);

    let mut static_cfg = RunConfig::default();
    static_cfg.medium.v0 = 0.0;
    static_cfg.optics.k_m = 0.0;
    let frozen = simulate_run(&static_cfg)?;
    let s = dynoct::separation::compute_svd(&frozen.collagen)?.sigma;
    println!("static run sigma_2/sigma_1 {:.3e}", s[1] / s[0]);
    Ok(())
}
