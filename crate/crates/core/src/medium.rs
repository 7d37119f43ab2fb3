//! Particle-density model of the imaged slice.
//!
//! Collagen is a rigid, spatially correlated random medium per pixel that drifts along z at a
//! constant speed. Metabolic activity is zero-mean white noise in (pixel, z, t) whose standard
//! deviation follows a ground-truth intensity map, plus a weaker background noise everywhere.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::rng::{substream, Domain};

/// Rectangular pixel grid, flattened row-major into indices `0..rows*cols`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelGrid {
    rows: usize,
    cols: usize,
}

impl PixelGrid {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!("pixel grid must be non-empty, got {rows}x{cols}")));
        }
        Ok(Self { rows, cols })
    }

    pub fn square(side: usize) -> Result<Self> {
        Self::new(side, side)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn flatten(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.rows && col < self.cols);
        row * self.cols + col
    }

    pub fn unflatten(&self, pixel: usize) -> (usize, usize) {
        debug_assert!(pixel < self.len());
        (pixel / self.cols, pixel % self.cols)
    }
}

/// Discretized collagen density `q_c(pixel, z)` on a uniform z-grid centred on `z = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollagenField {
    grid: PixelGrid,
    /// `grid.len() x z_count`, row-major.
    q: Vec<f64>,
    z_count: usize,
    z_step: f64,
    corr_len: f64,
    v0: f64,
    seed: u64,
}

/// Half-width of the z-support needed so that a drift of `v0` over `duration` never leaves the
/// field while imaging `[-coherence_length, coherence_length]`.
pub fn padded_half_extent(coherence_length: f64, v0: f64, duration: f64, corr_len: f64) -> f64 {
    coherence_length + v0.abs() * duration + 2.0 * corr_len
}

/// Smallest odd node count whose symmetric grid with spacing `z_step` covers `[-half, half]`.
pub fn z_count_for(half_extent: f64, z_step: f64) -> usize {
    let n_half = (half_extent / z_step - 1e-9).ceil().max(1.0) as usize;
    2 * n_half + 1
}

/// Generates one independent stationary Gaussian random medium per pixel.
///
/// Each medium has unit variance and autocovariance `exp(-dz^2 / (2 corr_len^2))`. It is
/// synthesised by filtering white noise on a periodic domain long enough that wrap-around
/// correlations are below `exp(-12)`, then keeping the first `z_count` samples.
pub fn generate_collagen_field(
    grid: PixelGrid,
    z_count: usize,
    z_step: f64,
    corr_len: f64,
    v0: f64,
    seed: u64,
) -> Result<CollagenField> {
    if z_count < 2 {
        return Err(Error::invalid(format!("z_count must be at least 2, got {z_count}")));
    }
    if !(z_step > 0.0 && z_step.is_finite()) {
        return Err(Error::invalid(format!("z_step must be positive, got {z_step}")));
    }
    if !(corr_len >= 0.0 && corr_len.is_finite()) {
        return Err(Error::invalid(format!("corr_len must be non-negative, got {corr_len}")));
    }
    if !v0.is_finite() {
        return Err(Error::invalid("v0 must be finite"));
    }

    let corr_nodes = corr_len / z_step;
    let period = (z_count + (10.0 * corr_nodes).ceil() as usize).next_power_of_two();
    let filter = spectral_filter(period, corr_nodes);

    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(period);
    let inverse = planner.plan_fft_inverse(period);
    let scale = 1.0 / period as f64;

    let mut q = Vec::with_capacity(grid.len() * z_count);
    let mut buf = vec![Complex64::new(0.0, 0.0); period];
    for pixel in 0..grid.len() {
        let mut rng = substream(seed, Domain::Collagen, &[pixel as u64]);
        for b in buf.iter_mut() {
            *b = Complex64::new(rng.sample(StandardNormal), 0.0);
        }
        forward.process(&mut buf);
        for (b, h) in buf.iter_mut().zip(&filter) {
            *b *= *h;
        }
        inverse.process(&mut buf);
        q.extend(buf[..z_count].iter().map(|c| c.re * scale));
    }

    Ok(CollagenField { grid, q, z_count, z_step, corr_len, v0, seed })
}

// Square root of the DFT of the circular Gaussian autocovariance.
fn spectral_filter(period: usize, corr_nodes: f64) -> Vec<f64> {
    let mut cov: Vec<Complex64> = (0..period)
        .map(|m| {
            let lag = m.min(period - m) as f64;
            let c = if corr_nodes == 0.0 {
                if m == 0 { 1.0 } else { 0.0 }
            } else {
                (-(lag * lag) / (2.0 * corr_nodes * corr_nodes)).exp()
            };
            Complex64::new(c, 0.0)
        })
        .collect();
    FftPlanner::<f64>::new().plan_fft_forward(period).process(&mut cov);
    cov.iter().map(|c| c.re.max(0.0).sqrt()).collect()
}

impl CollagenField {
    /// Rebuilds a field from raw samples, e.g. after reading a persisted field file.
    pub fn from_raw(
        grid: PixelGrid,
        z_count: usize,
        q: Vec<f64>,
        z_step: f64,
        corr_len: f64,
        v0: f64,
        seed: u64,
    ) -> Result<Self> {
        if z_count < 2 || q.len() != grid.len() * z_count {
            return Err(Error::invalid(format!(
                "field needs {} x {} samples, got {}",
                grid.len(),
                z_count,
                q.len()
            )));
        }
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("field contains non-finite samples"));
        }
        if z_step.is_nan() || z_step <= 0.0 {
            return Err(Error::invalid("z_step must be positive"));
        }
        Ok(Self { grid, q, z_count, z_step, corr_len, v0, seed })
    }

    pub fn grid(&self) -> PixelGrid {
        self.grid
    }

    pub fn z_count(&self) -> usize {
        self.z_count
    }

    pub fn z_step(&self) -> f64 {
        self.z_step
    }

    pub fn corr_len(&self) -> f64 {
        self.corr_len
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn z_min(&self) -> f64 {
        -((self.z_count - 1) as f64) * 0.5 * self.z_step
    }

    pub fn z_max(&self) -> f64 {
        -self.z_min()
    }

    pub fn z_at(&self, node: usize) -> f64 {
        self.z_min() + node as f64 * self.z_step
    }

    pub fn samples(&self) -> &[f64] {
        &self.q
    }

    pub fn pixel_samples(&self, pixel: usize) -> &[f64] {
        &self.q[pixel * self.z_count..(pixel + 1) * self.z_count]
    }

    /// Returns a copy with the drift speed replaced.
    pub fn with_v0(mut self, v0: f64) -> Self {
        self.v0 = v0;
        self
    }

    /// Collagen density `p_c(pixel, z, t) = q_c(pixel, z - v0 t)`, linearly interpolated in z.
    pub fn density(&self, pixel: usize, z: f64, t: f64) -> Result<f64> {
        let s = z - self.v0 * t;
        let pos = (s - self.z_min()) / self.z_step;
        let last = (self.z_count - 1) as f64;
        let snapped = pos.round();
        let pos = if (pos - snapped).abs() < 1e-9 { snapped } else { pos };
        if !(0.0..=last).contains(&pos) {
            return Err(Error::OutOfSupport { z: s, min: self.z_min(), max: self.z_max() });
        }
        let row = self.pixel_samples(pixel);
        let i0 = pos.floor() as usize;
        let frac = pos - i0 as f64;
        if frac == 0.0 {
            return Ok(row[i0]);
        }
        Ok(row[i0] * (1.0 - frac) + row[i0 + 1] * frac)
    }
}

/// Free-function form of [`CollagenField::density`].
pub fn collagen_density(field: &CollagenField, pixel: usize, z: f64, t: f64) -> Result<f64> {
    field.density(pixel, z, t)
}

/// Ground-truth metabolic intensity `M(x)` plus a uniform background noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct MetabolicMap {
    grid: PixelGrid,
    m: Vec<f64>,
    background_noise: f64,
}

impl MetabolicMap {
    pub fn new(grid: PixelGrid, m: Vec<f64>, background_noise: f64) -> Result<Self> {
        if m.len() != grid.len() {
            return Err(Error::invalid(format!(
                "metabolic map has {} entries for a {}x{} grid",
                m.len(),
                grid.rows(),
                grid.cols()
            )));
        }
        if let Some(bad) = m.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("metabolic intensities must be >= 0, got {bad}")));
        }
        if !(background_noise.is_finite() && background_noise >= 0.0) {
            return Err(Error::invalid(format!(
                "background noise must be >= 0, got {background_noise}"
            )));
        }
        Ok(Self { grid, m, background_noise })
    }

    pub fn zeros(grid: PixelGrid) -> Self {
        Self { grid, m: vec![0.0; grid.len()], background_noise: 0.0 }
    }

    /// Built-in phantom: three disjoint discs of constant intensity (1.0, 0.8, 0.6) on a zero
    /// background. Disc centres and radii scale with the grid so the layout is the same at any
    /// resolution; on a 21x21 grid 87 pixels are active.
    pub fn phantom(grid: PixelGrid, background_noise: f64) -> Result<Self> {
        let (rows, cols) = (grid.rows() as f64, grid.cols() as f64);
        let scale = rows.min(cols) / 21.0;
        // (centre row, centre col, radius) in 21x21 units
        let discs = [(5.0, 5.0, 3.0, 1.0), (10.0, 15.0, 3.5, 0.8), (14.0, 6.0, 2.5, 0.6)];
        let mut m = vec![0.0; grid.len()];
        for (pixel, value) in m.iter_mut().enumerate() {
            let (r, c) = grid.unflatten(pixel);
            for &(cr, cc, rad, amp) in &discs {
                let dr = r as f64 - cr * rows / 21.0;
                let dc = c as f64 - cc * cols / 21.0;
                let rad = rad * scale;
                if dr * dr + dc * dc <= rad * rad {
                    *value = amp;
                }
            }
        }
        Self::new(grid, m, background_noise)
    }

    pub fn grid(&self) -> PixelGrid {
        self.grid
    }

    pub fn intensities(&self) -> &[f64] {
        &self.m
    }

    pub fn background_noise(&self) -> f64 {
        self.background_noise
    }

    pub fn with_background_noise(mut self, background_noise: f64) -> Result<Self> {
        self.background_noise = background_noise;
        Self::new(self.grid, self.m, background_noise)
    }

    /// One draw of the metabolic density at quadrature node `z_index` and time sample `t_index`.
    ///
    /// The value is `M(pixel) * g1 + background * g2` with independent standard normals. Same
    /// value as entry `z_index` of [`MetabolicMap::density_column`].
    pub fn density(&self, pixel: usize, z_index: usize, t_index: usize, seed: u64) -> f64 {
        self.density_column(pixel, t_index, z_index + 1, seed)[z_index]
    }

    /// Metabolic density at quadrature nodes `0..nodes` for one pixel and time sample, drawn in
    /// node order from the substream keyed by `(seed, pixel, t_index)`.
    pub fn density_column(&self, pixel: usize, t_index: usize, nodes: usize, seed: u64) -> Vec<f64> {
        let m = self.m[pixel];
        let bg = self.background_noise;
        if m == 0.0 && bg == 0.0 {
            return vec![0.0; nodes];
        }
        let mut rng = substream(seed, Domain::Metabolic, &[pixel as u64, t_index as u64]);
        (0..nodes)
            .map(|_| {
                let g1: f64 = rng.sample(StandardNormal);
                let g2: f64 = rng.sample(StandardNormal);
                m * g1 + bg * g2
            })
            .collect()
    }
}

/// Free-function form of [`MetabolicMap::density`].
pub fn metabolic_density(
    map: &MetabolicMap,
    pixel: usize,
    z_index: usize,
    t_index: usize,
    seed: u64,
) -> f64 {
    map.density(pixel, z_index, t_index, seed)
}

/// Complete description of the sample for one seeded run.
#[derive(Debug, Clone)]
pub struct MediumState {
    pub collagen: CollagenField,
    pub metabolic: MetabolicMap,
    /// Master seed of the metabolic streams.
    pub seed: u64,
}

impl MediumState {
    pub fn new(collagen: CollagenField, metabolic: MetabolicMap, seed: u64) -> Result<Self> {
        if collagen.grid() != metabolic.grid() {
            return Err(Error::invalid("collagen field and metabolic map use different grids"));
        }
        Ok(Self { collagen, metabolic, seed })
    }

    pub fn grid(&self) -> PixelGrid {
        self.collagen.grid()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> PixelGrid {
        PixelGrid::square(n).unwrap()
    }

    #[test]
    fn flatten_layout_and_inverse() {
        let g = PixelGrid::new(2, 2).unwrap();
        let order: Vec<_> = (0..4).map(|j| g.unflatten(j)).collect();
        assert_eq!(order, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        let g = PixelGrid::new(3, 5).unwrap();
        for j in 0..g.len() {
            let (r, c) = g.unflatten(j);
            assert_eq!(g.flatten(r, c), j);
        }
        assert!(PixelGrid::new(0, 3).is_err());
    }

    #[test]
    fn field_is_deterministic_per_seed() {
        let a = generate_collagen_field(grid(3), 64, 0.1, 0.4, 0.01, 9).unwrap();
        let b = generate_collagen_field(grid(3), 64, 0.1, 0.4, 0.01, 9).unwrap();
        let c = generate_collagen_field(grid(3), 64, 0.1, 0.4, 0.01, 10).unwrap();
        assert_eq!(a.samples(), b.samples());
        assert_ne!(a.samples(), c.samples());
        assert!(a.samples().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn field_rejects_bad_arguments() {
        assert!(generate_collagen_field(grid(2), 0, 0.1, 0.4, 0.0, 1).is_err());
        assert!(generate_collagen_field(grid(2), 1, 0.1, 0.4, 0.0, 1).is_err());
        assert!(generate_collagen_field(grid(2), 8, 0.1, -1.0, 0.0, 1).is_err());
        assert!(generate_collagen_field(grid(2), 8, 0.0, 1.0, 0.0, 1).is_err());
    }

    #[test]
    fn zero_correlation_gives_uncorrelated_samples() {
        let f = generate_collagen_field(grid(1), 200_000, 1.0, 0.0, 0.0, 3).unwrap();
        let q = f.pixel_samples(0);
        let n = q.len() as f64;
        let mean = q.iter().sum::<f64>() / n;
        let var = q.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let lag1 = q.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / (n - 1.0);
        assert!((lag1 / var).abs() < 0.01, "lag-1 autocorrelation {}", lag1 / var);
    }

    // Direct Monte-Carlo estimate of the autocovariance at lag corr_len over 100 seeds,
    // compared to the target kernel exp(-1/2).
    #[test]
    fn autocovariance_matches_gaussian_kernel() {
        let lag = 5;
        let mut acc = 0.0;
        let mut count = 0.0;
        for seed in 0..100 {
            let f = generate_collagen_field(grid(1), 10_000, 1.0, lag as f64, 0.0, seed).unwrap();
            let q = f.pixel_samples(0);
            for i in 0..q.len() - lag {
                acc += q[i] * q[i + lag];
                count += 1.0;
            }
        }
        let target = (-0.5f64).exp();
        let est = acc / count;
        assert!((est - target).abs() < 0.15 * target, "autocovariance {est} vs {target}");
    }

    #[test]
    fn field_is_stationary_in_z() {
        let f = generate_collagen_field(grid(20), 400, 0.1, 0.5, 0.0, 11).unwrap();
        let n_pix = 400.0;
        for node in [0usize, 100, 200, 399] {
            let vals: Vec<f64> = (0..400).map(|p| f.pixel_samples(p)[node]).collect();
            let mean = vals.iter().sum::<f64>() / n_pix;
            let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n_pix;
            assert!(mean.abs() < 4.0 / n_pix.sqrt(), "mean {mean} at node {node}");
            assert!((var - 1.0).abs() < 0.3, "variance {var} at node {node}");
        }
    }

    #[test]
    fn density_at_t0_hits_nodes_exactly() {
        let f = generate_collagen_field(grid(2), 33, 0.125, 0.5, 0.3, 5).unwrap();
        for node in 0..f.z_count() {
            assert_eq!(f.density(3, f.z_at(node), 0.0).unwrap(), f.pixel_samples(3)[node]);
        }
    }

    #[test]
    fn static_medium_is_time_independent() {
        let f = generate_collagen_field(grid(2), 33, 0.125, 0.5, 0.0, 5).unwrap();
        let z = 0.37;
        let d0 = f.density(1, z, 0.0).unwrap();
        for t in [1.0, 17.5, 1e4] {
            assert_eq!(f.density(1, z, t).unwrap(), d0);
        }
    }

    #[test]
    fn drift_shift_identity_on_aligned_grid() {
        // v0 * dt = 2 z-steps
        let f = generate_collagen_field(grid(2), 101, 0.05, 0.3, 0.1, 8).unwrap();
        let dt = 1.0;
        for node in 20..60 {
            let z = f.z_at(node);
            for k in 0..5 {
                let t = k as f64 * dt;
                let a = f.density(2, z + f.v0() * dt, t + dt).unwrap();
                let b = f.density(2, z, t).unwrap();
                assert!((a - b).abs() <= 1e-12, "node {node} k {k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn density_outside_support_is_an_error() {
        let f = generate_collagen_field(grid(1), 11, 0.1, 0.1, 1.0, 5).unwrap();
        assert!(matches!(f.density(0, 0.0, 10.0), Err(Error::OutOfSupport { .. })));
        assert!(f.density(0, 0.5, 0.0).is_ok());
        assert!(f.density(0, 0.51, 0.0).is_err());
    }

    #[test]
    fn padding_covers_the_drift() {
        let (l, v0, dur, corr) = (1.0, 0.0004, 500.0, 2.0);
        let half = padded_half_extent(l, v0, dur, corr);
        let dz = 1.0 / 32.0;
        let f = generate_collagen_field(grid(1), z_count_for(half, dz), dz, corr, v0, 1).unwrap();
        assert!(f.density(0, -l, dur).is_ok());
        assert!(f.density(0, l, 0.0).is_ok());
        assert!(f.z_max() >= half);
    }

    #[test]
    fn silent_pixel_is_zero() {
        let g = grid(2);
        let map = MetabolicMap::zeros(g);
        for z in 0..5 {
            for t in 0..5 {
                assert_eq!(metabolic_density(&map, 1, z, t, 42), 0.0);
            }
        }
    }

    #[test]
    fn metabolic_draws_are_deterministic() {
        let g = grid(2);
        let map = MetabolicMap::new(g, vec![0.5, 1.0, 0.0, 2.0], 0.1).unwrap();
        assert_eq!(map.density(3, 4, 5, 6), map.density(3, 4, 5, 6));
        assert_ne!(map.density(3, 4, 5, 6), map.density(3, 4, 6, 6));
    }

    #[test]
    fn metabolic_variance_matches_intensity() {
        let g = grid(1);
        let map = MetabolicMap::new(g, vec![0.7], 0.2).unwrap();
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|k| map.density(0, k % 50, k / 50, 99)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let target = 0.7f64 * 0.7 + 0.2 * 0.2;
        assert!((var - target).abs() < 0.05 * target, "variance {var} vs {target}");
    }

    #[test]
    fn metabolic_draws_are_uncorrelated() {
        let g = grid(2);
        let map = MetabolicMap::new(g, vec![1.0; 4], 0.0).unwrap();
        let n = 20_000;
        let a: Vec<f64> = (0..n).map(|t| map.density(0, 3, t, 1)).collect();
        let pairs = [
            (0usize, 4usize, 0usize), // other z
            (1, 3, 0),                // other pixel
            (0, 3, 1),                // next time sample
        ];
        for (pixel, z, dt) in pairs {
            let b: Vec<f64> = (0..n).map(|t| map.density(pixel, z, t + dt, 1)).collect();
            let corr = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>()
                / (a.iter().map(|x| x * x).sum::<f64>() * b.iter().map(|y| y * y).sum::<f64>()).sqrt();
            assert!(corr.abs() < 3.0 / (n as f64).sqrt(), "corr {corr} for {pixel},{z},{dt}");
        }
    }

    #[test]
    fn metabolic_map_validation() {
        let g = grid(2);
        assert!(MetabolicMap::new(g, vec![1.0; 3], 0.0).is_err());
        assert!(MetabolicMap::new(g, vec![1.0, -1.0, 0.0, 0.0], 0.0).is_err());
        assert!(MetabolicMap::new(g, vec![1.0; 4], -0.1).is_err());
    }

    #[test]
    fn phantom_has_disjoint_blobs() {
        let map = MetabolicMap::phantom(grid(21), 0.0).unwrap();
        let active = map.intensities().iter().filter(|v| **v > 0.0).count();
        assert_eq!(active, 87);
        let max = map.intensities().iter().cloned().fold(0.0, f64::max);
        assert_eq!(max, 1.0);
    }
}
