//! Full simulate -> separate -> verify run written to a directory, as the CLI does.
//!
//! cargo run --release --example pipeline [config] [out-dir]

use std::path::PathBuf;

use dynoct::run::{cmd_pipeline, RunConfig, RunOptions};

fn main() -> dynoct::Result<()> {
    let mut args = std::env::args().skip(1);
    let cfg = match args.next() {
        Some(path) => RunConfig::load(path.as_ref())?,
        None => RunConfig::default(),
    };
    let dir = args.next().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs/example"));
    let v = cmd_pipeline(&cfg, &dir, RunOptions::default())?;
    for c in &v.checks {
        println!("{:<28} {:>12.4e} {:>12.4e} {}", c.name, c.value, c.bound, if c.pass { "pass" } else { "fail" });
    }
    println!("artifacts in {}", dir.display());
    Ok(())
}
