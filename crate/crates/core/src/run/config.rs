//! Run configuration: a flat `key = value` text format with `[section]` headers.
//!
//! ```text
//! [run]
//! seed = 1
//! [grid]
//! rows = 21
//! cols = 21
//! ```
//!
//! Every key has a default, so an empty file is a valid configuration. Unknown sections or keys
//! are rejected. Serialization always writes every key, and floats use the shortest
//! representation that parses back to the same value.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forward::{OpticsConfig, SourceLine, TimeGrid};
use crate::medium::PixelGrid;
use crate::separation::FitConfig;

/// Above this many time samples the collagen singular values decay more slowly and separation
/// degrades.
pub const TIME_SAMPLES_WARNING: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub enum MapSource {
    Builtin,
    /// No metabolic activity; only the background noise remains.
    Zero,
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpticsSection {
    pub n_bar: f64,
    pub c: f64,
    pub coherence_length: f64,
    pub center_frequency: f64,
    pub bandwidth: f64,
    pub lines: usize,
    /// Explicit `(omega, weight)` lines; overrides the Gaussian source when present.
    pub source_lines: Option<Vec<SourceLine>>,
    pub k_c: f64,
    pub k_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MediumSection {
    pub corr_len: f64,
    pub v0: f64,
    pub z_step: f64,
    pub metabolic_map: MapSource,
    pub background_noise: f64,
    pub dominance_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationSection {
    /// `None` = a quarter of the pixels.
    pub interval_length: Option<usize>,
    pub search_min: usize,
    /// `None` = rank - 4.
    pub search_max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub rows: usize,
    pub cols: usize,
    pub time_samples: usize,
    pub dt: f64,
    pub optics: OpticsSection,
    pub medium: MediumSection,
    pub separation: SeparationSection,
}

impl Default for RunConfig {
    /// 21x21 pixels, 500 samples, 7 Gaussian source lines, slow drift `v0 T = 0.2 L` and a
    /// collagen correlation length of twice the coherence length.
    fn default() -> Self {
        let time_samples = 500;
        let dt = 1.0;
        let coherence_length = 1.0;
        Self {
            seed: 1,
            out: None,
            rows: 21,
            cols: 21,
            time_samples,
            dt,
            optics: OpticsSection {
                n_bar: 1.4,
                c: 1.0,
                coherence_length,
                center_frequency: 1.0,
                bandwidth: 0.1,
                lines: 7,
                source_lines: None,
                k_c: 1.0,
                k_m: 1.0,
            },
            medium: MediumSection {
                corr_len: 2.0 * coherence_length,
                v0: 0.2 * coherence_length / (time_samples as f64 * dt),
                z_step: coherence_length / 64.0,
                metabolic_map: MapSource::Builtin,
                background_noise: 0.02,
                dominance_ratio: 100.0,
            },
            separation: SeparationSection {
                interval_length: None,
                search_min: 4,
                search_max: None,
            },
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_num<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| cfg_err(format!("[{section}] {key}: cannot parse `{value}`")))
}

fn parse_auto(section: &str, key: &str, value: &str) -> Result<Option<usize>> {
    if value == "auto" {
        Ok(None)
    } else {
        parse_num(section, key, value).map(Some)
    }
}

fn parse_lines(value: &str) -> Result<Option<Vec<SourceLine>>> {
    if value.is_empty() || value == "gaussian" {
        return Ok(None);
    }
    value
        .split(',')
        .map(|pair| {
            let (w, s) = pair
                .trim()
                .split_once(':')
                .ok_or_else(|| cfg_err(format!("source line `{pair}` is not omega:weight")))?;
            Ok(SourceLine {
                omega: parse_num("optics", "source_lines", w.trim())?,
                weight: parse_num("optics", "source_lines", s.trim())?,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                if !["run", "grid", "time", "optics", "medium", "separation"].contains(&section.as_str())
                {
                    return Err(cfg_err(format!("line {}: unknown section [{section}]", n + 1)));
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| cfg_err(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(&section, key.trim(), value.trim())
                .map_err(|e| cfg_err(format!("line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if let MapSource::Csv(map) = &cfg.medium.metabolic_map {
            if map.is_relative() {
                let base = path.parent().unwrap_or(Path::new(""));
                cfg.medium.metabolic_map = MapSource::Csv(base.join(map));
            }
        }
        Ok(cfg)
    }

    fn set(&mut self, section: &str, key: &str, v: &str) -> Result<()> {
        let s = section;
        match (s, key) {
            ("run", "seed") => self.seed = parse_num(s, key, v)?,
            ("run", "out") => self.out = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            ("grid", "rows") => self.rows = parse_num(s, key, v)?,
            ("grid", "cols") => self.cols = parse_num(s, key, v)?,
            ("time", "samples") => self.time_samples = parse_num(s, key, v)?,
            ("time", "dt") => self.dt = parse_num(s, key, v)?,
            ("optics", "n_bar") => self.optics.n_bar = parse_num(s, key, v)?,
            ("optics", "c") => self.optics.c = parse_num(s, key, v)?,
            ("optics", "coherence_length") => self.optics.coherence_length = parse_num(s, key, v)?,
            ("optics", "center_frequency") => self.optics.center_frequency = parse_num(s, key, v)?,
            ("optics", "bandwidth") => self.optics.bandwidth = parse_num(s, key, v)?,
            ("optics", "lines") => self.optics.lines = parse_num(s, key, v)?,
            ("optics", "source_lines") => self.optics.source_lines = parse_lines(v)?,
            ("optics", "k_c") => self.optics.k_c = parse_num(s, key, v)?,
            ("optics", "k_m") => self.optics.k_m = parse_num(s, key, v)?,
            ("medium", "corr_len") => self.medium.corr_len = parse_num(s, key, v)?,
            ("medium", "v0") => self.medium.v0 = parse_num(s, key, v)?,
            ("medium", "z_step") => self.medium.z_step = parse_num(s, key, v)?,
            ("medium", "metabolic_map") => {
                self.medium.metabolic_map = match v {
                    "builtin" => MapSource::Builtin,
                    "zero" => MapSource::Zero,
                    "" => return Err(cfg_err("[medium] metabolic_map: empty value")),
                    path => MapSource::Csv(PathBuf::from(path)),
                }
            }
            ("medium", "background_noise") => self.medium.background_noise = parse_num(s, key, v)?,
            ("medium", "dominance_ratio") => self.medium.dominance_ratio = parse_num(s, key, v)?,
            ("separation", "interval_length") => {
                self.separation.interval_length = parse_auto(s, key, v)?
            }
            ("separation", "search_min") => self.separation.search_min = parse_num(s, key, v)?,
            ("separation", "search_max") => self.separation.search_max = parse_auto(s, key, v)?,
            ("", _) => return Err(cfg_err(format!("key `{key}` appears before any section"))),
            _ => return Err(cfg_err(format!("unknown key `{key}` in [{section}]"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(cfg_err(format!("{name} must be positive, got {v}")))
            }
        };
        let non_negative = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(cfg_err(format!("{name} must be non-negative, got {v}")))
            }
        };
        if self.rows == 0 || self.cols == 0 {
            return Err(cfg_err("grid rows and cols must be positive"));
        }
        if self.time_samples == 0 {
            return Err(cfg_err("time samples must be positive"));
        }
        positive("time.dt", self.dt)?;
        positive("optics.n_bar", self.optics.n_bar)?;
        positive("optics.c", self.optics.c)?;
        positive("optics.coherence_length", self.optics.coherence_length)?;
        non_negative("optics.bandwidth", self.optics.bandwidth)?;
        if !self.optics.center_frequency.is_finite() {
            return Err(cfg_err("optics.center_frequency must be finite"));
        }
        if self.optics.lines == 0 {
            return Err(cfg_err("optics.lines must be at least 1"));
        }
        if let Some(lines) = &self.optics.source_lines {
            if lines.is_empty() || lines.iter().any(|l| !(l.weight >= 0.0 && l.omega.is_finite())) {
                return Err(cfg_err("optics.source_lines needs finite frequencies and weights >= 0"));
            }
        }
        for (name, v) in [("optics.k_c", self.optics.k_c), ("optics.k_m", self.optics.k_m)] {
            if !v.is_finite() {
                return Err(cfg_err(format!("{name} must be finite")));
            }
        }
        non_negative("medium.corr_len", self.medium.corr_len)?;
        if !self.medium.v0.is_finite() {
            return Err(cfg_err("medium.v0 must be finite"));
        }
        positive("medium.z_step", self.medium.z_step)?;
        let ratio = self.optics.coherence_length / self.medium.z_step;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(cfg_err(
                "optics.coherence_length must be an integer multiple of medium.z_step",
            ));
        }
        non_negative("medium.background_noise", self.medium.background_noise)?;
        positive("medium.dominance_ratio", self.medium.dominance_ratio)?;
        if self.separation.search_min == 0 {
            return Err(cfg_err("separation.search_min is 1-based and must be >= 1"));
        }
        if let Some(max) = self.separation.search_max {
            if max < self.separation.search_min {
                return Err(cfg_err("separation.search_max is below search_min"));
            }
        }
        Ok(())
    }

    /// Non-fatal advice about the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.time_samples > TIME_SAMPLES_WARNING {
            w.push(format!(
                "{} time samples: above {TIME_SAMPLES_WARNING} the collagen spectrum flattens and \
                 separation degrades; consider averaging reconstructions over shorter windows",
                self.time_samples
            ));
        }
        w
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[run]\nseed = {}", self.seed);
        let _ = writeln!(
            out,
            "out = {}",
            self.out.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
        );
        out.push_str(&self.body_text());
        out
    }

    // Everything except the [run] section: what defines the experiment independent of seed.
    fn body_text(&self) -> String {
        let o = &self.optics;
        let m = &self.medium;
        let s = &self.separation;
        let auto = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_else(|| "auto".into());
        let lines = match &o.source_lines {
            None => "gaussian".to_string(),
            Some(l) => l.iter().map(|l| format!("{}:{}", l.omega, l.weight)).collect::<Vec<_>>().join(", "),
        };
        let map = match &m.metabolic_map {
            MapSource::Builtin => "builtin".to_string(),
            MapSource::Zero => "zero".to_string(),
            MapSource::Csv(p) => p.display().to_string(),
        };
        let mut out = String::new();
        let _ = writeln!(out, "\n[grid]\nrows = {}\ncols = {}", self.rows, self.cols);
        let _ = writeln!(out, "\n[time]\nsamples = {}\ndt = {}", self.time_samples, self.dt);
        let _ = writeln!(
            out,
            "\n[optics]\nn_bar = {}\nc = {}\ncoherence_length = {}\ncenter_frequency = {}\n\
             bandwidth = {}\nlines = {}\nsource_lines = {}\nk_c = {}\nk_m = {}",
            o.n_bar, o.c, o.coherence_length, o.center_frequency, o.bandwidth, o.lines, lines, o.k_c,
            o.k_m
        );
        let _ = writeln!(
            out,
            "\n[medium]\ncorr_len = {}\nv0 = {}\nz_step = {}\nmetabolic_map = {}\n\
             background_noise = {}\ndominance_ratio = {}",
            m.corr_len, m.v0, m.z_step, map, m.background_noise, m.dominance_ratio
        );
        let _ = writeln!(
            out,
            "\n[separation]\ninterval_length = {}\nsearch_min = {}\nsearch_max = {}",
            auto(s.interval_length),
            s.search_min,
            auto(s.search_max)
        );
        out
    }

    /// SHA-256 of the configuration without its `[run]` section, so runs that differ only in
    /// seed or output directory share a hash.
    pub fn experiment_hash(&self) -> String {
        hex::encode(Sha256::digest(self.body_text().as_bytes()))
    }

    pub fn grid(&self) -> Result<PixelGrid> {
        PixelGrid::new(self.rows, self.cols)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.time_samples, self.dt)
    }

    pub fn optics_config(&self) -> Result<OpticsConfig> {
        let o = &self.optics;
        let mut optics = match &o.source_lines {
            Some(lines) => OpticsConfig::from_lines(o.n_bar, o.c, o.coherence_length, lines.clone())?,
            None => OpticsConfig::gaussian(
                o.n_bar,
                o.c,
                o.coherence_length,
                o.center_frequency,
                o.bandwidth,
                o.lines,
            )?,
        };
        optics.k_c1 = crate::forward::Amplitude::Uniform(o.k_c);
        optics.k_m = crate::forward::Amplitude::Uniform(o.k_m);
        Ok(optics)
    }

    /// Trapezoid nodes on `[-L, L]`, aligned with the field grid.
    pub fn z_nodes(&self) -> usize {
        2 * (self.optics.coherence_length / self.medium.z_step).round() as usize + 1
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig { search_min: self.separation.search_min, search_max: self.separation.search_max }
    }

    pub fn interval_length(&self) -> usize {
        self.separation
            .interval_length
            .unwrap_or_else(|| crate::separation::default_interval_length(self.rows * self.cols))
    }
}
