use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::medium::PixelGrid;

use super::svd::svd_of;
use super::SvdResult;

/// Contiguous interval `T = {cutoff, ..., cutoff + length - 1}` of 1-based singular indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularIndexSet {
    cutoff: usize,
    length: usize,
}

impl SingularIndexSet {
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    /// 1-based indices.
    pub fn indices(&self) -> impl Iterator<Item = usize> {
        self.cutoff..self.cutoff + self.length
    }

    fn columns(&self) -> std::ops::Range<usize> {
        self.cutoff - 1..self.cutoff - 1 + self.length
    }
}

/// Builds `T` for a decomposition of rank `rank`; requires `cutoff + length <= rank + 1`.
pub fn select_index_set(cutoff: usize, length: usize, rank: usize) -> Result<SingularIndexSet> {
    if cutoff == 0 {
        return Err(Error::invalid("singular indices are 1-based; cut-off 0 is invalid"));
    }
    if cutoff + length > rank + 1 {
        return Err(Error::invalid(format!(
            "interval {cutoff}..{} exceeds rank {rank}",
            cutoff + length - 1
        )));
    }
    Ok(SingularIndexSet { cutoff, length })
}

/// Interval length used when none is configured: a quarter of the pixels, rounded up.
pub fn default_interval_length(n_pixels: usize) -> usize {
    n_pixels.div_ceil(4)
}

fn check(svd: &SvdResult, t: &SingularIndexSet) -> Result<()> {
    if t.length > 0 && t.cutoff + t.length > svd.rank() + 1 {
        return Err(Error::invalid("index set does not fit this decomposition"));
    }
    Ok(())
}

/// `A_T = sum_{i in T} sigma_i u_i v_i^T`.
pub fn filter_matrix(svd: &SvdResult, t: &SingularIndexSet) -> Result<DMatrix<f64>> {
    check(svd, t)?;
    let cols = t.columns();
    let mut us = svd.u.columns(cols.start, cols.len()).into_owned();
    for (c, i) in cols.clone().enumerate() {
        us.column_mut(c).scale_mut(svd.sigma[i]);
    }
    Ok(us * svd.v.columns(cols.start, cols.len()).transpose())
}

/// Per-pixel metabolic intensity on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityMap {
    pub grid: PixelGrid,
    pub values: Vec<f64>,
}

impl IntensityMap {
    pub fn new(grid: PixelGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid("intensity map size does not match its grid"));
        }
        Ok(Self { grid, values })
    }

    pub fn normalized(&self) -> Vec<f64> {
        min_max_normalize(&self.values)
    }
}

/// `I(j) = sqrt(sum_{i in T} sigma_i^2 u_i(j)^2)`, the row energy of the filtered matrix.
pub fn reconstruct_intensity(
    svd: &SvdResult,
    t: &SingularIndexSet,
    grid: PixelGrid,
) -> Result<IntensityMap> {
    check(svd, t)?;
    if svd.u.nrows() != grid.len() {
        return Err(Error::invalid("grid does not match the number of space-vector entries"));
    }
    let values = (0..grid.len())
        .map(|j| {
            t.columns()
                .map(|i| (svd.sigma[i] * svd.u[(j, i)]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    IntensityMap::new(grid, values)
}

/// Linear map of `[min, max]` onto `[0, 1]`; a constant input maps to all zeros.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    values
        .iter()
        .map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 })
        .collect()
}

/// `||norm(estimate) - norm(truth)||_2 / ||norm(truth)||_2` with min-max normalization of both.
pub fn normalized_error(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::invalid("maps have different sizes"));
    }
    let e = min_max_normalize(estimate);
    let t = min_max_normalize(truth);
    let denom = t.iter().map(|v| v * v).sum::<f64>().sqrt();
    if denom == 0.0 {
        return Err(Error::DegenerateInput("reference map is constant".into()));
    }
    let num = e.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok(num / denom)
}

/// Reconstruction from the isolated metabolic matrix: its own leading `length` components.
pub fn best_possible_map(
    metabolic: &DMatrix<f64>,
    length: usize,
    grid: PixelGrid,
) -> Result<IntensityMap> {
    let svd = svd_of(metabolic)?;
    let length = length.min(svd.rank());
    let t = select_index_set(1, length, svd.rank())?;
    reconstruct_intensity(&svd, &t, grid)
}

/// 1-based first index `j` with `sigma_j(A) < sigma_1(A_m)`, if any.
pub fn oracle_index(sigma_total: &[f64], sigma1_metabolic: f64) -> Option<usize> {
    sigma_total.iter().position(|s| *s < sigma1_metabolic).map(|p| p + 1)
}
