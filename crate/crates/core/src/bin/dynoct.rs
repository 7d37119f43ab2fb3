use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dynoct::run::{cmd_pipeline, cmd_separate, cmd_simulate, cmd_verify, run_dir, RunConfig, RunOptions};
use dynoct::Result;

/// Simulation and SVD separation of dynamic OCT signals.
#[derive(Parser)]
#[command(name = "dynoct", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate total, collagen and metabolic Casorati matrices.
    Simulate(Common),
    /// Separate a Casorati matrix and write the intensity map.
    Separate {
        #[command(flatten)]
        common: Common,
        /// Matrix to separate; defaults to total.cas in the run directory.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Check a simulate run against every spectral bound.
    Verify(Common),
    /// simulate, separate and verify.
    Pipeline(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory; defaults to the config's `out` or runs/seed-N.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate()?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    let dir = run_dir(&cfg);
    Ok((cfg, dir))
}

fn options() -> Result<RunOptions> {
    let threads = match std::env::var("DYNOCT_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| dynoct::Error::Config(format!("DYNOCT_THREADS: cannot parse `{v}`")))?,
        Err(_) => 0,
    };
    Ok(RunOptions { threads })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => {
            let (cfg, dir) = load(&c)?;
            let m = cmd_simulate(&cfg, &dir, options()?)?;
            println!("simulated seed {} into {} ({} artifacts)", cfg.seed, dir.display(), m.artifacts.len());
        }
        Command::Separate { common, input } => {
            let (cfg, dir) = load(&common)?;
            let sep = cmd_separate(&cfg, &dir, input.as_deref())?;
            println!("cutoff {} interval length {}", sep.cutoff(), sep.index_set.len());
        }
        Command::Verify(c) => {
            let (cfg, dir) = load(&c)?;
            let v = cmd_verify(&cfg, &dir)?;
            report(&v);
        }
        Command::Pipeline(c) => {
            let (cfg, dir) = load(&c)?;
            let v = cmd_pipeline(&cfg, &dir, options()?)?;
            report(&v);
        }
    }
    Ok(())
}

fn report(v: &dynoct::run::Verification) {
    for c in &v.checks {
        println!("{:<28} {:>14.6e} bound {:>12.6e}  {}", c.name, c.value, c.bound, if c.pass { "pass" } else { "FAIL" });
    }
    println!("{}/{} checks passed", v.passed(), v.checks.len());
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
