//! Forward model: ODT signals from the particle densities.
//!
//! The broadband source is a finite set of spectral lines, the z-integral over the coherence
//! window `[-L, L]` is a trapezoid rule, and only the real part of the interferometric sum is
//! kept since that is the physical measurement.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::medium::MediumState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceLine {
    pub omega: f64,
    /// Spectral density `S0(omega)` of the line.
    pub weight: f64,
}

/// Per-pixel reflectivity amplitude.
#[derive(Debug, Clone, PartialEq)]
pub enum Amplitude {
    Uniform(f64),
    PerPixel(Vec<f64>),
}

impl Amplitude {
    pub fn at(&self, pixel: usize) -> f64 {
        match self {
            Amplitude::Uniform(a) => *a,
            Amplitude::PerPixel(v) => v[pixel],
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        match self {
            Amplitude::Uniform(a) => Amplitude::Uniform(a * s),
            Amplitude::PerPixel(v) => Amplitude::PerPixel(v.iter().map(|a| a * s).collect()),
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        let ok = match self {
            Amplitude::Uniform(a) => a.is_finite(),
            Amplitude::PerPixel(v) => v.iter().all(|a| a.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("{what} reflectivity must be finite")))
        }
    }
}

/// Physical constants, source model and reflectivities.
///
/// The collagen reflectivity separates as `K_c1(x) K_c2(omega)`. The metabolic reflectivity is
/// `K_m(x) K_m2(omega)` with `K_m2 = 1` by default. The reference mirror reflectivity is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticsConfig {
    pub n_bar: f64,
    pub c: f64,
    pub coherence_length: f64,
    pub lines: Vec<SourceLine>,
    pub k_c1: Amplitude,
    /// One factor per source line.
    pub k_c2: Vec<f64>,
    pub k_m: Amplitude,
    /// One factor per source line.
    pub k_m2: Vec<f64>,
}

impl OpticsConfig {
    /// Gaussian source sampled by `n_lines` equally spaced lines over `center ± 2 std`, each
    /// weighted by the Gaussian density at its frequency. Reflectivities default to 1.
    pub fn gaussian(
        n_bar: f64,
        c: f64,
        coherence_length: f64,
        center: f64,
        std: f64,
        n_lines: usize,
    ) -> Result<Self> {
        if n_lines == 0 {
            return Err(Error::invalid("at least one source line is required"));
        }
        if std.is_nan() || std < 0.0 {
            return Err(Error::invalid("source bandwidth must be non-negative"));
        }
        let lines = (0..n_lines)
            .map(|k| {
                let omega = if n_lines == 1 {
                    center
                } else {
                    center - 2.0 * std + 4.0 * std * k as f64 / (n_lines - 1) as f64
                };
                let weight = if std == 0.0 {
                    1.0
                } else {
                    let d = (omega - center) / std;
                    (-0.5 * d * d).exp() / (std * (2.0 * PI).sqrt())
                };
                SourceLine { omega, weight }
            })
            .collect();
        Self::from_lines(n_bar, c, coherence_length, lines)
    }

    pub fn from_lines(
        n_bar: f64,
        c: f64,
        coherence_length: f64,
        lines: Vec<SourceLine>,
    ) -> Result<Self> {
        let n = lines.len();
        let optics = Self {
            n_bar,
            c,
            coherence_length,
            lines,
            k_c1: Amplitude::Uniform(1.0),
            k_c2: vec![1.0; n],
            k_m: Amplitude::Uniform(1.0),
            k_m2: vec![1.0; n],
        };
        optics.validate()?;
        Ok(optics)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lines.is_empty() {
            return Err(Error::invalid("at least one source line is required"));
        }
        if let Some(l) = self.lines.iter().find(|l| !(l.weight >= 0.0 && l.omega.is_finite())) {
            return Err(Error::invalid(format!("invalid source line {l:?}")));
        }
        if !(self.coherence_length > 0.0 && self.coherence_length.is_finite()) {
            return Err(Error::invalid("coherence length must be positive"));
        }
        if !(self.n_bar > 0.0 && self.c > 0.0) {
            return Err(Error::invalid("refractive index and light speed must be positive"));
        }
        if self.k_c2.len() != self.lines.len() || self.k_m2.len() != self.lines.len() {
            return Err(Error::invalid("spectral reflectivity factors need one entry per line"));
        }
        self.k_c1.validate("collagen")?;
        self.k_m.validate("metabolic")?;
        Ok(())
    }

    /// Phase wavenumber `2 pi omega (2 n_bar / c)` of a line: the signal phase per unit z.
    pub fn wavenumber(&self, omega: f64) -> f64 {
        2.0 * PI * omega * 2.0 * self.n_bar / self.c
    }

    /// Doppler frequency `2 n_bar v omega / c` of a reflector moving at speed `v`.
    pub fn doppler_frequency(&self, v: f64, omega: f64) -> f64 {
        2.0 * self.n_bar * v * omega / self.c
    }

    // Re sum_k S0 K2 exp(i kappa_k z) for each quadrature node, times the trapezoid weight.
    fn spectral_kernel(&self, spectral: &[f64], nodes: &[f64], weights: &[f64]) -> Vec<f64> {
        nodes
            .iter()
            .zip(weights)
            .map(|(&z, &w)| {
                let s: f64 = self
                    .lines
                    .iter()
                    .zip(spectral)
                    .map(|(l, k2)| l.weight * k2 * (self.wavenumber(l.omega) * z).cos())
                    .sum();
                s * w
            })
            .collect()
    }
}

/// Uniform sampling times `t_k = k dt`, `k = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub count: usize,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(count: usize, dt: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("time grid needs at least one sample"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        Ok(Self { count, dt })
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.time(k)).collect()
    }

    /// Total acquisition window `count * dt`.
    pub fn duration(&self) -> f64 {
        self.count as f64 * self.dt
    }
}

/// Collagen and metabolic parts of a record, kept for verification runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub collagen: Vec<f64>,
    pub metabolic: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    pub pixel: usize,
    pub samples: Vec<f64>,
    pub decomposition: Option<Decomposition>,
}

/// Signal of one reflector at path difference `phi(t)`:
/// `Re sum_k S0(omega_k) K_c2(omega_k) exp(2 pi i omega_k (2 n_bar / c) phi(t))`.
pub fn single_particle_signal(
    optics: &OpticsConfig,
    phi: impl Fn(f64) -> f64,
    times: &[f64],
) -> Vec<f64> {
    times
        .iter()
        .map(|&t| {
            let z = phi(t);
            optics
                .lines
                .iter()
                .zip(&optics.k_c2)
                .map(|(l, k)| l.weight * k * (optics.wavenumber(l.omega) * z).cos())
                .sum()
        })
        .collect()
}

/// Trapezoid nodes and weights on `[-L, L]`.
pub fn quadrature(coherence_length: f64, nodes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if nodes < 2 {
        return Err(Error::invalid(format!("need at least 2 z quadrature nodes, got {nodes}")));
    }
    let h = 2.0 * coherence_length / (nodes - 1) as f64;
    let z = (0..nodes).map(|i| -coherence_length + i as f64 * h).collect();
    let mut w = vec![h; nodes];
    w[0] = 0.5 * h;
    w[nodes - 1] = 0.5 * h;
    Ok((z, w))
}

/// Evaluates `Gamma_c + Gamma_m` for every pixel of the medium at every time of `times`.
///
/// Pixels are evaluated in parallel on the current rayon pool; the result does not depend on
/// the pool size. Records keep their collagen/metabolic decomposition.
pub fn simulate_signals(
    medium: &MediumState,
    optics: &OpticsConfig,
    times: &TimeGrid,
    z_nodes: usize,
) -> Result<Vec<SignalRecord>> {
    optics.validate()?;
    let grid = medium.grid();
    for (what, amp) in [("collagen", &optics.k_c1), ("metabolic", &optics.k_m)] {
        if let Amplitude::PerPixel(v) = amp {
            if v.len() != grid.len() {
                return Err(Error::invalid(format!(
                    "{what} reflectivity has {} entries for {} pixels",
                    v.len(),
                    grid.len()
                )));
            }
        }
    }
    let (nodes, weights) = quadrature(optics.coherence_length, z_nodes)?;
    let kernel_c = optics.spectral_kernel(&optics.k_c2, &nodes, &weights);
    let kernel_m = optics.spectral_kernel(&optics.k_m2, &nodes, &weights);
    let field = &medium.collagen;
    let map = &medium.metabolic;

    (0..grid.len())
        .into_par_iter()
        .map(|pixel| {
            let kc = optics.k_c1.at(pixel);
            let km = optics.k_m.at(pixel);
            let mut collagen = vec![0.0; times.count];
            let mut metabolic = vec![0.0; times.count];
            for k in 0..times.count {
                let t = times.time(k);
                if kc != 0.0 {
                    let mut acc = 0.0;
                    for (z, w) in nodes.iter().zip(&kernel_c) {
                        acc += w * field.density(pixel, *z, t)?;
                    }
                    collagen[k] = kc * acc;
                }
                if km != 0.0 {
                    let column = map.density_column(pixel, k, kernel_m.len(), medium.seed);
                    let acc: f64 = kernel_m.iter().zip(&column).map(|(w, q)| w * q).sum();
                    metabolic[k] = km * acc;
                }
            }
            let samples = collagen.iter().zip(&metabolic).map(|(c, m)| c + m).collect();
            Ok(SignalRecord {
                pixel,
                samples,
                decomposition: Some(Decomposition { collagen, metabolic }),
            })
        })
        .collect()
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

fn decompositions(records: &[SignalRecord]) -> Result<Vec<&Decomposition>> {
    records
        .iter()
        .map(|r| {
            r.decomposition
                .as_ref()
                .ok_or_else(|| Error::invalid(format!("record {} has no decomposition", r.pixel)))
        })
        .collect()
}

/// RMS(collagen) / RMS(metabolic) over all records.
pub fn dominance_ratio(records: &[SignalRecord]) -> Result<f64> {
    let parts = decompositions(records)?;
    let rc = rms(parts.iter().flat_map(|d| d.collagen.iter().copied()));
    let rm = rms(parts.iter().flat_map(|d| d.metabolic.iter().copied()));
    if rm == 0.0 {
        return Err(Error::DegenerateInput("metabolic signal has zero energy".into()));
    }
    Ok(rc / rm)
}

/// Multiplier for `K_c1` that brings RMS(collagen)/RMS(metabolic) to `target_ratio`.
pub fn calibrate_dominance(records: &[SignalRecord], target_ratio: f64) -> Result<f64> {
    if !(target_ratio > 0.0 && target_ratio.is_finite()) {
        return Err(Error::invalid(format!("target ratio must be positive, got {target_ratio}")));
    }
    let measured = dominance_ratio(records)?;
    if measured == 0.0 {
        return Err(Error::DegenerateInput("collagen signal has zero energy".into()));
    }
    Ok(target_ratio / measured)
}

/// Scales the collagen part of every record by `s` and refreshes the totals.
///
/// The collagen signal is linear in `K_c1`, so this equals re-simulating with `K_c1 * s`.
pub fn apply_collagen_scale(records: &mut [SignalRecord], s: f64) -> Result<()> {
    for r in records.iter_mut() {
        let d = r
            .decomposition
            .as_mut()
            .ok_or_else(|| Error::invalid(format!("record {} has no decomposition", r.pixel)))?;
        for c in d.collagen.iter_mut() {
            *c *= s;
        }
        for ((out, c), m) in r.samples.iter_mut().zip(&d.collagen).zip(&d.metabolic) {
            *out = c + m;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::{generate_collagen_field, MetabolicMap, PixelGrid};
    use rustfft::num_complex::Complex64;
    use rustfft::FftPlanner;

    fn optics(n_lines: usize) -> OpticsConfig {
        OpticsConfig::gaussian(1.4, 1.0, 1.0, 1.0, 0.1, n_lines).unwrap()
    }

    fn medium(side: usize, v0: f64, m: f64, seed: u64) -> MediumState {
        let grid = PixelGrid::square(side).unwrap();
        let field = generate_collagen_field(grid, 257, 1.0 / 32.0, 0.5, v0, seed).unwrap();
        let map = MetabolicMap::new(grid, vec![m; grid.len()], 0.0).unwrap();
        MediumState::new(field, map, seed).unwrap()
    }

    #[test]
    fn gaussian_lines_span_two_sigma() {
        let o = optics(7);
        assert_eq!(o.lines.len(), 7);
        assert!((o.lines[0].omega - 0.8).abs() < 1e-12);
        assert!((o.lines[6].omega - 1.2).abs() < 1e-12);
        assert!((o.lines[3].omega - 1.0).abs() < 1e-12);
        assert!(o.lines[3].weight > o.lines[0].weight);
        assert!((o.lines[0].weight - o.lines[6].weight).abs() < 1e-12);
        assert!(OpticsConfig::gaussian(1.4, 1.0, 1.0, 1.0, 0.1, 0).is_err());
    }

    #[test]
    fn zero_path_difference_is_constant() {
        let o = optics(5);
        let expected: f64 = o.lines.iter().map(|l| l.weight).sum();
        let s = single_particle_signal(&o, |_| 0.0, &[0.0, 1.0, 2.5]);
        for v in s {
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn single_line_peaks_at_doppler_frequency() {
        let o = OpticsConfig::from_lines(1.4, 1.0, 1.0, vec![SourceLine { omega: 1.0, weight: 1.0 }])
            .unwrap();
        let v = 0.01;
        let n = 1024;
        let dt = 1.0;
        let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let s = single_particle_signal(&o, |t| v * t, &times);
        let mut buf: Vec<Complex64> = s.iter().map(|x| Complex64::new(*x, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let peak = (1..n / 2)
            .max_by(|a, b| buf[*a].norm().partial_cmp(&buf[*b].norm()).unwrap())
            .unwrap();
        let df = 1.0 / (n as f64 * dt);
        let fd = o.doppler_frequency(v, 1.0);
        assert!((peak as f64 * df - fd).abs() <= df, "peak {} vs {fd}", peak as f64 * df);
    }

    #[test]
    fn two_lines_match_closed_form() {
        let lines = vec![SourceLine { omega: 0.9, weight: 0.5 }, SourceLine { omega: 1.1, weight: 0.5 }];
        let o = OpticsConfig::from_lines(1.33, 1.0, 1.0, lines).unwrap();
        let v = 0.37;
        let times: Vec<f64> = (0..50).map(|k| 0.1 * k as f64).collect();
        let s = single_particle_signal(&o, |t| v * t, &times);
        for (t, got) in times.iter().zip(s) {
            let a = 2.0 * PI * 0.9 * 2.0 * 1.33 * v * t;
            let b = 2.0 * PI * 1.1 * 2.0 * 1.33 * v * t;
            let expected = 0.5 * a.cos() + 0.5 * b.cos();
            assert!((got - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn dark_sample_is_all_zero() {
        let m = medium(2, 0.001, 1.0, 3);
        let mut o = optics(3);
        o.k_c1 = Amplitude::Uniform(0.0);
        o.k_m = Amplitude::Uniform(0.0);
        let recs = simulate_signals(&m, &o, &TimeGrid::new(10, 1.0).unwrap(), 33).unwrap();
        assert!(recs.iter().all(|r| r.samples.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn frozen_collagen_is_constant_in_time() {
        let m = medium(2, 0.0, 1.0, 3);
        let mut o = optics(3);
        o.k_m = Amplitude::Uniform(0.0);
        let recs = simulate_signals(&m, &o, &TimeGrid::new(20, 1.0).unwrap(), 65).unwrap();
        for r in &recs {
            assert!(r.samples.iter().all(|v| *v == r.samples[0]));
            assert!(r.samples[0] != 0.0);
        }
    }

    // Independent brute-force triple loop over (line, z, t) with complex phasors.
    #[test]
    fn matches_brute_force_quadrature() {
        let m = medium(1, 0.003, 0.2, 17);
        let lines = vec![
            SourceLine { omega: 0.9, weight: 0.3 },
            SourceLine { omega: 1.0, weight: 1.0 },
            SourceLine { omega: 1.15, weight: 0.6 },
        ];
        let mut o = OpticsConfig::from_lines(1.4, 1.0, 1.0, lines).unwrap();
        o.k_c2 = vec![1.0, 0.8, 1.2];
        o.k_c1 = Amplitude::Uniform(2.0);
        o.k_m = Amplitude::Uniform(0.5);
        let tg = TimeGrid::new(4, 7.0).unwrap();
        let nz = 16;
        let recs = simulate_signals(&m, &o, &tg, nz).unwrap();

        let h = 2.0 / (nz - 1) as f64;
        for k in 0..4 {
            let t = k as f64 * 7.0;
            let mut c = Complex64::new(0.0, 0.0);
            let mut mm = Complex64::new(0.0, 0.0);
            for (line, k2) in o.lines.iter().zip(&o.k_c2) {
                for i in 0..nz {
                    let z = -1.0 + i as f64 * h;
                    let w = if i == 0 || i == nz - 1 { 0.5 * h } else { h };
                    let phase = Complex64::from_polar(1.0, 2.0 * PI * line.omega * 2.0 * 1.4 * z);
                    let pc = crate::medium::collagen_density(&m.collagen, 0, z, t).unwrap();
                    let pm = crate::medium::metabolic_density(&m.metabolic, 0, i, k, m.seed);
                    c += phase * (line.weight * 2.0 * k2 * pc * w);
                    mm += phase * (line.weight * 0.5 * pm * w);
                }
            }
            let d = recs[0].decomposition.as_ref().unwrap();
            let total = c.re + mm.re;
            assert!((d.collagen[k] - c.re).abs() <= 1e-12 * c.re.abs().max(1e-300));
            assert!((d.metabolic[k] - mm.re).abs() <= 1e-12 * mm.re.abs().max(1e-300));
            assert!((recs[0].samples[k] - total).abs() <= 1e-12 * total.abs());
        }
    }

    #[test]
    fn linear_in_the_two_densities() {
        let m = medium(2, 0.002, 0.3, 5);
        let o = optics(3);
        let tg = TimeGrid::new(12, 1.0).unwrap();
        let full = simulate_signals(&m, &o, &tg, 33).unwrap();
        let mut only_c = o.clone();
        only_c.k_m = Amplitude::Uniform(0.0);
        let mut only_m = o.clone();
        only_m.k_c1 = Amplitude::Uniform(0.0);
        let a = simulate_signals(&m, &only_c, &tg, 33).unwrap();
        let b = simulate_signals(&m, &only_m, &tg, 33).unwrap();
        for ((f, a), b) in full.iter().zip(&a).zip(&b) {
            for k in 0..tg.count {
                let sum = a.samples[k] + b.samples[k];
                assert!((f.samples[k] - sum).abs() <= 1e-12 * f.samples[k].abs().max(1.0));
            }
        }
    }

    #[test]
    fn quadrature_converges_under_refinement() {
        let grid = PixelGrid::square(1).unwrap();
        let field = generate_collagen_field(grid, 1025, 1.0 / 128.0, 0.5, 0.002, 8).unwrap();
        let m = MediumState::new(field, MetabolicMap::zeros(grid), 8).unwrap();
        let mut o = optics(3);
        o.k_m = Amplitude::Uniform(0.0);
        let tg = TimeGrid::new(5, 1.0).unwrap();
        let coarse = simulate_signals(&m, &o, &tg, 129).unwrap();
        let fine = simulate_signals(&m, &o, &tg, 257).unwrap();
        let norm: f64 = fine[0].samples.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff: f64 = coarse[0]
            .samples
            .iter()
            .zip(&fine[0].samples)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(diff < 0.01 * norm, "relative change {}", diff / norm);
    }

    #[test]
    fn out_of_support_propagates() {
        let grid = PixelGrid::square(1).unwrap();
        let field = generate_collagen_field(grid, 65, 1.0 / 32.0, 0.1, 0.1, 1).unwrap();
        let m = MediumState::new(field, MetabolicMap::zeros(grid), 1).unwrap();
        let err = simulate_signals(&m, &optics(1), &TimeGrid::new(100, 1.0).unwrap(), 65);
        assert!(matches!(err, Err(Error::OutOfSupport { .. })));
    }

    fn records(c: &[f64], m: &[f64]) -> Vec<SignalRecord> {
        vec![SignalRecord {
            pixel: 0,
            samples: c.iter().zip(m).map(|(a, b)| a + b).collect(),
            decomposition: Some(Decomposition { collagen: c.to_vec(), metabolic: m.to_vec() }),
        }]
    }

    #[test]
    fn calibration_scaling() {
        let m = [1.0, -1.0, 1.0, -1.0];
        let c100: Vec<f64> = m.iter().map(|v| 100.0 * v).collect();
        assert!((calibrate_dominance(&records(&c100, &m), 100.0).unwrap() - 1.0).abs() < 1e-15);
        let c10: Vec<f64> = m.iter().map(|v| -10.0 * v).collect();
        assert!((calibrate_dominance(&records(&c10, &m), 100.0).unwrap() - 10.0).abs() < 1e-12);
        assert!(matches!(
            calibrate_dominance(&records(&c10, &[0.0; 4]), 100.0),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn calibration_round_trip() {
        let m = medium(3, 0.002, 0.05, 12);
        let tg = TimeGrid::new(30, 1.0).unwrap();
        let mut recs = simulate_signals(&m, &optics(7), &tg, 33).unwrap();
        let s = calibrate_dominance(&recs, 100.0).unwrap();
        apply_collagen_scale(&mut recs, s).unwrap();
        let ratio = dominance_ratio(&recs).unwrap();
        assert!((ratio - 100.0).abs() < 1e-9, "ratio {ratio}");
    }
}
