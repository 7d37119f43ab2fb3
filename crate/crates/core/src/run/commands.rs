//! The four batch commands and their in-memory cores.
//!
//! A run directory holds:
//!
//! | file | written by |
//! |------|------------|
//! | `total.cas`, `collagen.cas`, `metabolic.cas` | simulate |
//! | `collagen.field`, `metabolic_map.csv` | simulate |
//! | `intensity.csv`, `intensity.pgm`, `sigma.csv`, `tv.csv`, `cutoff.txt`, `fit.csv` | separate |
//! | `verification.csv`, `spectra.csv`, `best_intensity.csv` | verify |
//! | `manifest.json` | every command |

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::formats::{
    encode_casorati, encode_field, encode_indexed_column, encode_map_csv, encode_pgm16,
    read_casorati, read_map_csv,
};
use crate::forward::{apply_collagen_scale, calibrate_dominance, simulate_signals, SignalRecord};
use crate::medium::{
    generate_collagen_field, padded_half_extent, z_count_for, CollagenField, MediumState,
    MetabolicMap,
};
use crate::separation::{
    best_possible_map, build_component, compute_svd, fit_svd, normalized_error,
    oracle_index, reconstruct_intensity, select_index_set, svd_of, tv_profile, BreakpointFit,
    CasoratiMatrix, Component, FitConfig, IntensityMap, SingularIndexSet, SvdResult,
};
use crate::spectral::{
    correlation_kernel, cross_bound_check, min_relative_eigenvalue, nonorthogonality_check,
    perturbation_report, rank_one_fraction, trace_dominance, KernelLabel, CROSS_BOUND_SLACK,
};

use super::config::{MapSource, RunConfig};
use super::manifest::{RunManifest, MANIFEST_FILE};

pub const TOTAL_FILE: &str = "total.cas";
pub const COLLAGEN_FILE: &str = "collagen.cas";
pub const METABOLIC_FILE: &str = "metabolic.cas";
pub const FIELD_FILE: &str = "collagen.field";
pub const TRUTH_FILE: &str = "metabolic_map.csv";
pub const INTENSITY_CSV: &str = "intensity.csv";
pub const INTENSITY_PGM: &str = "intensity.pgm";
pub const SIGMA_FILE: &str = "sigma.csv";
pub const TV_FILE: &str = "tv.csv";
pub const CUTOFF_FILE: &str = "cutoff.txt";
pub const FIT_FILE: &str = "fit.csv";
pub const VERIFICATION_FILE: &str = "verification.csv";
pub const SPECTRA_FILE: &str = "spectra.csv";
pub const BEST_INTENSITY_CSV: &str = "best_intensity.csv";

/// Execution settings that never change results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Worker threads for pixel-parallel simulation; 0 lets rayon decide.
    pub threads: usize,
}

impl RunOptions {
    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
        Ok(pool.install(f))
    }
}

/// Result of one forward simulation, already calibrated.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub total: CasoratiMatrix,
    pub collagen: CasoratiMatrix,
    pub metabolic: CasoratiMatrix,
    pub field: CollagenField,
    pub truth: MetabolicMap,
    /// Factor applied to the collagen reflectivity by the calibration (1 when skipped).
    pub collagen_scale: f64,
}

impl Simulation {
    /// `RMS(A_c) / RMS(A_m)`; `None` when the metabolic part vanishes.
    pub fn dominance(&self) -> Option<f64> {
        let m = self.metabolic.data().norm();
        (m > 0.0).then(|| self.collagen.data().norm() / m)
    }
}

fn metabolic_map(cfg: &RunConfig) -> Result<MetabolicMap> {
    let grid = cfg.grid()?;
    let bg = cfg.medium.background_noise;
    match &cfg.medium.metabolic_map {
        MapSource::Builtin => MetabolicMap::phantom(grid, bg),
        MapSource::Zero => MetabolicMap::zeros(grid).with_background_noise(bg),
        MapSource::Csv(path) => {
            let (g, values) = read_map_csv(path)?;
            if g != grid {
                return Err(Error::Config(format!(
                    "map {} is {}x{}, config grid is {}x{}",
                    path.display(),
                    g.rows(),
                    g.cols(),
                    grid.rows(),
                    grid.cols()
                )));
            }
            MetabolicMap::new(grid, values, bg)
        }
    }
}

/// Simulates the medium described by `cfg` for `cfg.seed` and calibrates the collagen
/// reflectivity to the configured dominance ratio.
pub fn simulate_run(cfg: &RunConfig) -> Result<Simulation> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let times = cfg.time_grid()?;
    let optics = cfg.optics_config()?;
    let m = &cfg.medium;
    let half = padded_half_extent(optics.coherence_length, m.v0, times.duration(), m.corr_len);
    let z_count = z_count_for(half, m.z_step);
    let field = generate_collagen_field(grid, z_count, m.z_step, m.corr_len, m.v0, cfg.seed)?;
    let truth = metabolic_map(cfg)?;
    let medium = MediumState::new(field, truth, cfg.seed)?;
    let mut records = simulate_signals(&medium, &optics, &times, cfg.z_nodes())?;

    let collagen_scale = if has_metabolic_energy(&records) {
        let s = calibrate_dominance(&records, m.dominance_ratio)?;
        apply_collagen_scale(&mut records, s)?;
        s
    } else {
        1.0
    };
    let MediumState { collagen: field, metabolic: truth, .. } = medium;
    Ok(Simulation {
        total: build_component(&records, grid, Component::Total)?,
        collagen: build_component(&records, grid, Component::Collagen)?,
        metabolic: build_component(&records, grid, Component::Metabolic)?,
        field,
        truth,
        collagen_scale,
    })
}

fn has_metabolic_energy(records: &[SignalRecord]) -> bool {
    records
        .iter()
        .filter_map(|r| r.decomposition.as_ref())
        .any(|d| d.metabolic.iter().any(|v| *v != 0.0))
}

/// Everything the separation stage produces for one matrix.
#[derive(Debug, Clone)]
pub struct Separation {
    pub svd: SvdResult,
    pub tv: Vec<f64>,
    pub fit: BreakpointFit,
    pub index_set: SingularIndexSet,
    pub intensity: IntensityMap,
}

impl Separation {
    pub fn cutoff(&self) -> usize {
        self.index_set.cutoff()
    }
}

/// SVD, TV cut-off and intensity map of `a`. The interval is clipped at the last singular value.
pub fn separate_matrix(a: &CasoratiMatrix, fit_cfg: &FitConfig, length: usize) -> Result<Separation> {
    let svd = compute_svd(a)?;
    let fit = fit_svd(&svd, fit_cfg)?;
    let tv = tv_profile(&svd);
    separation_at(svd, tv, fit, length, a)
}

/// Like [`separate_matrix`] but with a prescribed cut-off instead of the TV fit.
pub fn separate_with_cutoff(a: &CasoratiMatrix, cutoff: usize, length: usize) -> Result<Separation> {
    let svd = compute_svd(a)?;
    let tv = tv_profile(&svd);
    let fit = BreakpointFit { breakpoint: cutoff, normalized_residual: f64::NAN, candidates: vec![] };
    separation_at(svd, tv, fit, length, a)
}

fn separation_at(
    svd: SvdResult,
    tv: Vec<f64>,
    fit: BreakpointFit,
    length: usize,
    a: &CasoratiMatrix,
) -> Result<Separation> {
    let r = svd.rank();
    let cutoff = fit.breakpoint;
    let length = length.min((r + 1).saturating_sub(cutoff));
    let index_set = select_index_set(cutoff, length, r)?;
    let intensity = reconstruct_intensity(&svd, &index_set, a.grid())?;
    Ok(Separation { svd, tv, fit, index_set, intensity })
}

/// One row of the verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, bound: f64) -> Self {
        Self { name, value, bound, pass: value <= bound }
    }

    fn at_least(name: &'static str, value: f64, bound: f64) -> Self {
        Self { name, value, bound, pass: value >= bound }
    }
}

/// What verify learns about one decomposed run.
#[derive(Debug, Clone)]
pub struct Verification {
    pub checks: Vec<Check>,
    pub trace_ratio: f64,
    pub rank_one_fraction: f64,
    pub cross_max_ratio: f64,
    pub weyl_n: f64,
    pub sigma_rel_err: f64,
    pub vec_err: f64,
    pub nonorthogonality: f64,
    pub cutoff: usize,
    pub oracle_index: Option<usize>,
    pub best_error: f64,
    pub achieved_error: f64,
    pub best_map: IntensityMap,
    pub sigma_total: Vec<f64>,
    pub sigma_collagen: Vec<f64>,
    pub sigma_metabolic: Vec<f64>,
}

impl Verification {
    pub fn passed(&self) -> usize {
        self.checks.iter().filter(|c| c.pass).count()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// `seed,check,value,bound,pass` rows.
    pub fn to_csv(&self, seed: u64) -> String {
        let mut out = String::from("seed,check,value,bound,pass\n");
        for c in &self.checks {
            let verdict = if c.pass { "pass" } else { "fail" };
            let _ = writeln!(out, "{seed},{},{},{},{verdict}", c.name, c.value, c.bound);
        }
        out
    }

    /// `index,total,collagen,metabolic` singular values.
    pub fn spectra_csv(&self) -> String {
        let mut out = String::from("index,total,collagen,metabolic\n");
        let cell = |v: &[f64], i: usize| v.get(i).map(|x| x.to_string()).unwrap_or_default();
        for i in 0..self.sigma_total.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                i + 1,
                cell(&self.sigma_total, i),
                cell(&self.sigma_collagen, i),
                cell(&self.sigma_metabolic, i)
            );
        }
        out
    }
}

/// Inputs of [`verify_matrices`].
#[derive(Debug, Clone, Copy)]
pub struct VerifyInputs<'a> {
    pub total: &'a DMatrix<f64>,
    pub collagen: &'a DMatrix<f64>,
    pub metabolic: &'a DMatrix<f64>,
    /// Ground-truth metabolic map, flattened like the matrix rows.
    pub truth: &'a [f64],
    pub dt: f64,
    /// Calibration target for RMS(A_c)/RMS(A_m), if the run was calibrated.
    pub dominance_target: Option<f64>,
}

pub const DOMINANCE_TOLERANCE: f64 = 0.01;
pub const TRACE_RATIO_RANGE: (f64, f64) = (1e3, 1e5);
pub const RANK_ONE_FRACTION_MIN: f64 = 0.99;
pub const EIGENVALUE_FLOOR: f64 = -1e-10;
pub const VECTOR_ERROR_CONSTANT: f64 = 3.0;
pub const NONORTHOGONALITY_MIN: f64 = 1e-3;
pub const BEST_ERROR_MAX: f64 = 0.02;
pub const ACHIEVED_ERROR_MAX: f64 = 0.05;
pub const CUTOFF_OFFSET_MAX: f64 = 10.0;

/// Runs every spectral check and both reconstruction errors on one decomposed run.
///
/// The perturbation checks compare `A` with the best rank-one approximation of `A_c`, because
/// a drifting collagen matrix is only close to rank one.
pub fn verify_matrices(inputs: &VerifyInputs<'_>, separation: &Separation) -> Result<Verification> {
    let VerifyInputs { total, collagen, metabolic, truth, dt, dominance_target } = *inputs;
    if total.shape() != collagen.shape() || total.shape() != metabolic.shape() {
        return Err(Error::invalid("total, collagen and metabolic matrices differ in shape"));
    }
    if truth.len() != total.nrows() {
        return Err(Error::invalid("ground-truth map does not match the number of pixels"));
    }
    if separation.svd.u.nrows() != total.nrows() {
        return Err(Error::invalid("separation was computed on a different matrix"));
    }
    let mut checks = Vec::new();

    if let Some(target) = dominance_target {
        let measured = collagen.norm() / metabolic.norm();
        checks.push(Check {
            name: "dominance_rms",
            value: measured,
            bound: target,
            pass: (measured - target).abs() <= DOMINANCE_TOLERANCE * target,
        });
    }

    let trace_ratio = trace_dominance(collagen, metabolic)?;
    checks.push(Check::at_least("trace_ratio_min", trace_ratio, TRACE_RATIO_RANGE.0));
    checks.push(Check::at_most("trace_ratio_max", trace_ratio, TRACE_RATIO_RANGE.1));

    let rank_one = rank_one_fraction(collagen)?;
    checks.push(Check::at_least("collagen_rank_one_fraction", rank_one, RANK_ONE_FRACTION_MIN));

    let f_mm = correlation_kernel(metabolic, None, dt, KernelLabel::MetabolicMetabolic)?;
    checks.push(Check::at_least("mm_min_relative_eigenvalue", min_relative_eigenvalue(&f_mm), EIGENVALUE_FLOOR));

    let cross = cross_bound_check(collagen, metabolic, dt)?;
    checks.push(Check::at_most("cross_term_ratio", cross.max_ratio, 1.0 + CROSS_BOUND_SLACK));
    checks.push(Check::at_most("cross_term_violations", cross.violations as f64, 0.0));

    let svd_c = svd_of(collagen)?;
    let sigma_m = svd_of(metabolic)?.sigma;
    let u1 = svd_c.u.column(0);
    let ac1 = u1 * svd_c.v.column(0).transpose() * svd_c.sigma[0];
    let pert = perturbation_report(total, &ac1)?;
    let inv_n = if pert.exact { 0.0 } else { 1.0 / pert.n };
    checks.push(Check::at_most("weyl_sigma_rel_err", pert.sigma_rel_err, inv_n * (1.0 + 1e-10)));
    checks.push(Check::at_most("vector_err", pert.vec_err, VECTOR_ERROR_CONSTANT * inv_n));

    let cosine = nonorthogonality_check(collagen, metabolic)?;
    checks.push(Check::at_least("nonorthogonality_cosine", cosine, NONORTHOGONALITY_MIN));

    let length = separation.index_set.len();
    let best_map = best_possible_map(metabolic, length, separation.intensity.grid)?;
    let best_error = normalized_error(&best_map.values, truth)?;
    let achieved_error = normalized_error(&separation.intensity.values, truth)?;
    checks.push(Check::at_most("best_error", best_error, BEST_ERROR_MAX));
    checks.push(Check::at_most("achieved_error", achieved_error, ACHIEVED_ERROR_MAX));

    let cutoff = separation.cutoff();
    let oracle = oracle_index(&separation.svd.sigma, sigma_m[0]);
    let offset = oracle.map(|o| (cutoff as f64 - o as f64).abs()).unwrap_or(f64::INFINITY);
    checks.push(Check::at_most("cutoff_offset", offset, CUTOFF_OFFSET_MAX));

    Ok(Verification {
        checks,
        trace_ratio,
        rank_one_fraction: rank_one,
        cross_max_ratio: cross.max_ratio,
        weyl_n: pert.n,
        sigma_rel_err: pert.sigma_rel_err,
        vec_err: pert.vec_err,
        nonorthogonality: cosine,
        cutoff,
        oracle_index: oracle,
        best_error,
        achieved_error,
        best_map,
        sigma_total: separation.svd.sigma.clone(),
        sigma_collagen: svd_c.sigma,
        sigma_metabolic: sigma_m,
    })
}

/// Simulate, separate and verify in memory.
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub simulation: Simulation,
    pub separation: Separation,
    pub verification: Verification,
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineResult> {
    let simulation = simulate_run(cfg)?;
    let separation = separate_matrix(&simulation.total, &cfg.fit_config(), cfg.interval_length())?;
    let verification = verify_simulation(cfg, &simulation, &separation)?;
    Ok(PipelineResult { simulation, separation, verification })
}

fn verify_simulation(cfg: &RunConfig, sim: &Simulation, sep: &Separation) -> Result<Verification> {
    let inputs = VerifyInputs {
        total: sim.total.data(),
        collagen: sim.collagen.data(),
        metabolic: sim.metabolic.data(),
        truth: sim.truth.intensities(),
        dt: cfg.dt,
        dominance_target: sim.dominance().map(|_| cfg.medium.dominance_ratio),
    };
    verify_matrices(&inputs, sep)
}

/// Output directory for `cfg`: its `out` entry, else `runs/seed-<seed>`.
pub fn run_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from(format!("runs/seed-{}", cfg.seed)))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_or_new_manifest(dir: &Path, cfg: &RunConfig) -> Result<RunManifest> {
    if dir.join(MANIFEST_FILE).exists() {
        RunManifest::load(dir)
    } else {
        Ok(RunManifest::new(cfg.seed, cfg.experiment_hash(), cfg.to_text()))
    }
}

/// Writes the three Casorati matrices, the collagen field and the ground-truth map into `dir`
/// together with a fresh manifest.
pub fn cmd_simulate(cfg: &RunConfig, dir: &Path, opts: RunOptions) -> Result<RunManifest> {
    let sim = opts.install(|| simulate_run(cfg))??;
    ensure_dir(dir)?;
    let mut manifest = RunManifest::new(cfg.seed, cfg.experiment_hash(), cfg.to_text());
    manifest.write_artifact(dir, TOTAL_FILE, &encode_casorati(&sim.total))?;
    manifest.write_artifact(dir, COLLAGEN_FILE, &encode_casorati(&sim.collagen))?;
    manifest.write_artifact(dir, METABOLIC_FILE, &encode_casorati(&sim.metabolic))?;
    let field = &sim.field;
    manifest.write_artifact(
        dir,
        FIELD_FILE,
        &encode_field(field.grid().len(), field.z_count(), field.samples()),
    )?;
    let truth = encode_map_csv(sim.truth.grid(), sim.truth.intensities());
    manifest.write_artifact(dir, TRUTH_FILE, truth.as_bytes())?;
    manifest.set("collagen_scale", sim.collagen_scale);
    if let Some(d) = sim.dominance() {
        manifest.set("dominance_ratio", d);
    }
    manifest.save(dir)?;
    Ok(manifest)
}

/// Separates `input` (default `dir/total.cas`) and writes the map and tables into `dir`.
///
/// A degenerate cut-off fit writes nothing.
pub fn cmd_separate(cfg: &RunConfig, dir: &Path, input: Option<&Path>) -> Result<Separation> {
    let input = input.map(Path::to_path_buf).unwrap_or_else(|| dir.join(TOTAL_FILE));
    let a = read_casorati(&input)?;
    let sep = separate_matrix(&a, &cfg.fit_config(), cfg.interval_length())?;
    ensure_dir(dir)?;
    let mut manifest = load_or_new_manifest(dir, cfg)?;
    let grid = sep.intensity.grid;
    manifest.write_artifact(dir, INTENSITY_CSV, encode_map_csv(grid, &sep.intensity.values).as_bytes())?;
    manifest.write_artifact(dir, INTENSITY_PGM, &encode_pgm16(grid, &sep.intensity.values))?;
    manifest.write_artifact(dir, SIGMA_FILE, encode_indexed_column("sigma", &sep.svd.sigma).as_bytes())?;
    manifest.write_artifact(dir, TV_FILE, encode_indexed_column("tv", &sep.tv).as_bytes())?;
    let cutoff = format!("{}\n", sep.cutoff());
    manifest.write_artifact(dir, CUTOFF_FILE, cutoff.as_bytes())?;
    let mut fit = String::from("breakpoint,normalized_residual\n");
    for (b, res) in &sep.fit.candidates {
        let _ = writeln!(fit, "{b},{res}");
    }
    manifest.write_artifact(dir, FIT_FILE, fit.as_bytes())?;
    manifest.set("cutoff", sep.cutoff() as f64);
    manifest.set("interval_length", sep.index_set.len() as f64);
    manifest.save(dir)?;
    Ok(sep)
}

/// Checks the manifest hashes, reloads the three matrices of a simulate run and writes the
/// verification report.
pub fn cmd_verify(cfg: &RunConfig, dir: &Path) -> Result<Verification> {
    let mut manifest = RunManifest::load(dir)?;
    manifest.validate(dir)?;
    let total = read_casorati(&dir.join(TOTAL_FILE))?;
    let collagen = read_casorati(&dir.join(COLLAGEN_FILE))?;
    let metabolic = read_casorati(&dir.join(METABOLIC_FILE))?;
    let (grid, truth) = read_map_csv(&dir.join(TRUTH_FILE))?;
    if grid != total.grid() {
        return Err(Error::invalid("ground-truth map grid differs from the matrix grid"));
    }
    let sep = separate_matrix(&total, &cfg.fit_config(), cfg.interval_length())?;
    let scale = manifest.summary.get("collagen_scale").copied();
    let calibrated = metabolic.data().norm() > 0.0 && scale.is_some();
    let inputs = VerifyInputs {
        total: total.data(),
        collagen: collagen.data(),
        metabolic: metabolic.data(),
        truth: &truth,
        dt: cfg.dt,
        dominance_target: calibrated.then_some(cfg.medium.dominance_ratio),
    };
    let ver = verify_matrices(&inputs, &sep)?;

    manifest.write_artifact(dir, VERIFICATION_FILE, ver.to_csv(manifest.seed).as_bytes())?;
    manifest.write_artifact(dir, SPECTRA_FILE, ver.spectra_csv().as_bytes())?;
    let best = encode_map_csv(grid, &ver.best_map.values);
    manifest.write_artifact(dir, BEST_INTENSITY_CSV, best.as_bytes())?;
    manifest.set("trace_ratio", ver.trace_ratio);
    manifest.set("rank_one_fraction", ver.rank_one_fraction);
    manifest.set("cutoff", ver.cutoff as f64);
    manifest.set("oracle_index", ver.oracle_index.map(|o| o as f64).unwrap_or(f64::NAN));
    manifest.set("best_error", ver.best_error);
    manifest.set("achieved_error", ver.achieved_error);
    manifest.set("nonorthogonality_cosine", ver.nonorthogonality);
    manifest.set("checks_passed", ver.passed() as f64);
    manifest.set("checks_total", ver.checks.len() as f64);
    manifest.save(dir)?;
    Ok(ver)
}

/// simulate + separate + verify in one directory.
pub fn cmd_pipeline(cfg: &RunConfig, dir: &Path, opts: RunOptions) -> Result<Verification> {
    cmd_simulate(cfg, dir, opts)?;
    cmd_separate(cfg, dir, None)?;
    cmd_verify(cfg, dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        let mut cfg = RunConfig { rows: 8, cols: 8, time_samples: 120, ..RunConfig::default() };
        cfg.medium.v0 = 0.2 / 120.0;
        cfg
    }

    #[test]
    fn simulation_is_calibrated() {
        let sim = simulate_run(&small()).unwrap();
        let d = sim.dominance().unwrap();
        assert!((d - 100.0).abs() < 1e-9 * 100.0, "{d}");
        let sum = sim.collagen.data() + sim.metabolic.data();
        assert!((sum - sim.total.data()).norm() < 1e-12 * sim.total.data().norm());
    }

    #[test]
    fn silent_map_skips_calibration() {
        let mut cfg = small();
        cfg.medium.metabolic_map = MapSource::Zero;
        cfg.medium.background_noise = 0.0;
        let sim = simulate_run(&cfg).unwrap();
        assert_eq!(sim.collagen_scale, 1.0);
        assert!(sim.dominance().is_none());
        assert_eq!(sim.metabolic.data().norm(), 0.0);
    }

    #[test]
    fn separation_clips_interval() {
        let sim = simulate_run(&small()).unwrap();
        let sep = separate_with_cutoff(&sim.total, 60, 1000).unwrap();
        assert_eq!(sep.index_set.cutoff(), 60);
        assert_eq!(sep.index_set.len(), 5);
    }

    #[test]
    fn verify_rejects_shape_mismatch() {
        let sim = simulate_run(&small()).unwrap();
        let sep = separate_with_cutoff(&sim.total, 2, 4).unwrap();
        let short = sim.metabolic.data().columns(0, 10).into_owned();
        let inputs = VerifyInputs {
            total: sim.total.data(),
            collagen: sim.collagen.data(),
            metabolic: &short,
            truth: sim.truth.intensities(),
            dt: 1.0,
            dominance_target: None,
        };
        assert!(matches!(verify_matrices(&inputs, &sep), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn metabolic_against_itself_matches_best() {
        let sim = simulate_run(&small()).unwrap();
        let am = &sim.metabolic;
        let sep = separate_with_cutoff(am, 1, 16).unwrap();
        let inputs = VerifyInputs {
            total: am.data(),
            collagen: sim.collagen.data(),
            metabolic: am.data(),
            truth: sim.truth.intensities(),
            dt: 1.0,
            dominance_target: None,
        };
        let v = verify_matrices(&inputs, &sep).unwrap();
        assert!((v.achieved_error - v.best_error).abs() < 1e-12);
    }

    #[test]
    fn report_csv_layout() {
        let v = Verification {
            checks: vec![Check::at_most("x", 1.0, 2.0), Check::at_least("y", 1.0, 2.0)],
            trace_ratio: 0.0,
            rank_one_fraction: 0.0,
            cross_max_ratio: 0.0,
            weyl_n: 0.0,
            sigma_rel_err: 0.0,
            vec_err: 0.0,
            nonorthogonality: 0.0,
            cutoff: 1,
            oracle_index: None,
            best_error: 0.0,
            achieved_error: 0.0,
            best_map: IntensityMap::new(crate::medium::PixelGrid::new(1, 1).unwrap(), vec![0.0]).unwrap(),
            sigma_total: vec![2.0, 1.0],
            sigma_collagen: vec![2.0],
            sigma_metabolic: vec![1.0, 0.5],
        };
        assert_eq!(v.to_csv(7), "seed,check,value,bound,pass\n7,x,1,2,pass\n7,y,1,2,fail\n");
        assert_eq!(v.spectra_csv(), "index,total,collagen,metabolic\n1,2,2,1\n2,1,,0.5\n");
        assert_eq!(v.passed(), 1);
    }
}
