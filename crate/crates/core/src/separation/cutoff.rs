//! Cut-off selection from the regularity of the singular time-vectors.
//!
//! The total variation of `v_i` is small for the smooth collagen components and jumps to a
//! slowly rising plateau once the components are dominated by the white metabolic signal. A
//! continuous two-piece quadratic is fitted to the TV profile and the breakpoint with the least
//! squared residual is the cut-off.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::SvdResult;

/// `sum_i |v(i+1) - v(i)|`.
pub fn tv_seminorm(v: &[f64]) -> f64 {
    v.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// TV of every numerically significant time-vector, in singular-value order.
pub fn tv_profile(svd: &SvdResult) -> Vec<f64> {
    (0..svd.numerical_rank())
        .map(|i| tv_seminorm(svd.v.column(i).as_slice()))
        .collect()
}

/// Breakpoint search bounds, 1-based and inclusive. `None` for the upper bound means `r - 4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitConfig {
    pub search_min: usize,
    pub search_max: Option<usize>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { search_min: 4, search_max: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakpointFit {
    /// 1-based index where the two quadratic pieces meet.
    pub breakpoint: usize,
    /// Squared residual of the best fit divided by `sum s_i^2`.
    pub normalized_residual: f64,
    /// `(breakpoint, normalized residual)` for every candidate.
    pub candidates: Vec<(usize, f64)>,
}

pub const MIN_PROFILE_LEN: usize = 8;

/// Fits a continuous two-piece quadratic to `s` (indexed from 1) for every breakpoint in the
/// search range and returns the one with minimal residual.
///
/// Continuity is built into the basis `1, d-, d-^2, d+, d+^2` with `d = i - b` split at zero, so
/// each candidate is a plain 5-parameter least-squares problem.
pub fn fit_breakpoint(s: &[f64], cfg: &FitConfig) -> Result<BreakpointFit> {
    let r = s.len();
    if r < MIN_PROFILE_LEN {
        return Err(Error::invalid(format!(
            "need at least {MIN_PROFILE_LEN} values to fit two quadratics, got {r}"
        )));
    }
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("TV profile has non-finite values"));
    }
    let energy: f64 = s.iter().map(|x| x * x).sum();
    let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    });
    if hi - lo <= 1e-12 * hi.abs().max(lo.abs()) || energy == 0.0 {
        return Err(Error::DegenerateFit("total-variation profile is flat".into()));
    }

    let first = cfg.search_min.max(1);
    let last = cfg.search_max.unwrap_or(r.saturating_sub(4)).min(r);
    if first > last {
        return Err(Error::invalid(format!("empty breakpoint search range [{first}, {last}]")));
    }

    let y = DVector::from_column_slice(s);
    let scale = r as f64;
    let mut candidates = Vec::with_capacity(last - first + 1);
    for b in first..=last {
        let design = DMatrix::from_fn(r, 5, |row, col| {
            let d = ((row + 1) as f64 - b as f64) / scale;
            let (left, right) = if d < 0.0 { (d, 0.0) } else { (0.0, d) };
            match col {
                0 => 1.0,
                1 => left,
                2 => left * left,
                3 => right,
                _ => right * right,
            }
        });
        let coef = design
            .clone()
            .svd(true, true)
            .solve(&y, 1e-14)
            .map_err(|e| Error::DegenerateFit(e.to_string()))?;
        let residual = (&design * coef - &y).norm_squared() / energy;
        candidates.push((b, residual));
    }
    let &(breakpoint, normalized_residual) = candidates
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("non-empty search range");
    Ok(BreakpointFit { breakpoint, normalized_residual, candidates })
}

/// 1-based cut-off index `l` for the total-signal SVD.
pub fn select_cutoff(svd: &SvdResult, cfg: &FitConfig) -> Result<usize> {
    Ok(fit_svd(svd, cfg)?.breakpoint)
}

/// [`fit_breakpoint`] on the TV profile of `svd`, rejecting decompositions with too few
/// significant components as degenerate.
pub fn fit_svd(svd: &SvdResult, cfg: &FitConfig) -> Result<BreakpointFit> {
    if svd.rank() < MIN_PROFILE_LEN {
        return Err(Error::invalid(format!(
            "need at least {MIN_PROFILE_LEN} singular time-vectors, got {}",
            svd.rank()
        )));
    }
    let profile = tv_profile(svd);
    if profile.len() < MIN_PROFILE_LEN {
        return Err(Error::DegenerateFit(format!(
            "only {} numerically significant components; no metabolic subspace to separate",
            profile.len()
        )));
    }
    fit_breakpoint(&profile, cfg)
}
