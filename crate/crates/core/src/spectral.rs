//! Numerical checks of the spectral structure behind the separation.
//!
//! Correlation kernels are discretized as `F = A B^T dt`. Every check here is a ratio or an
//! inequality, so the overall constant of the time integral never matters.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::separation::svd_of;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelLabel {
    Total,
    CollagenCollagen,
    CollagenMetabolic,
    MetabolicCollagen,
    MetabolicMetabolic,
}

impl KernelLabel {
    /// Auto-correlation kernels are symmetric positive semi-definite.
    pub fn is_auto(&self) -> bool {
        matches!(self, Self::Total | Self::CollagenCollagen | Self::MetabolicMetabolic)
    }
}

/// Pixel-by-pixel correlation kernel `F(x, y)`.
#[derive(Debug, Clone)]
pub struct CorrelationKernel {
    pub f: DMatrix<f64>,
    pub label: KernelLabel,
}

impl CorrelationKernel {
    pub fn trace(&self) -> f64 {
        self.f.trace()
    }

    /// Eigenvalues in descending order; only meaningful for auto-correlation kernels.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.f.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    pub fn symmetry_defect(&self) -> f64 {
        (&self.f - self.f.transpose()).norm()
    }
}

/// `F[j, j'] = dt * sum_k A[j, k] B[j', k]`, with `B = A` when absent.
pub fn correlation_kernel(
    a: &DMatrix<f64>,
    b: Option<&DMatrix<f64>>,
    dt: f64,
    label: KernelLabel,
) -> Result<CorrelationKernel> {
    let b = b.unwrap_or(a);
    if a.ncols() != b.ncols() {
        return Err(Error::invalid(format!(
            "kernels need matching time samples, got {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    Ok(CorrelationKernel { f: a * b.transpose() * dt, label })
}

/// `tr(F_cc) / tr(F_mm) = ||A_c||_F^2 / ||A_m||_F^2`.
pub fn trace_dominance(ac: &DMatrix<f64>, am: &DMatrix<f64>) -> Result<f64> {
    if ac.shape() != am.shape() {
        return Err(Error::invalid("collagen and metabolic matrices differ in shape"));
    }
    let em = am.norm_squared();
    if em == 0.0 {
        return Err(Error::DegenerateInput("metabolic matrix has zero energy".into()));
    }
    Ok(ac.norm_squared() / em)
}

/// `lambda_1(F_cc) / tr(F_cc)`: how close the collagen kernel is to rank one.
pub fn rank_one_fraction(ac: &DMatrix<f64>) -> Result<f64> {
    let total = ac.norm_squared();
    if total == 0.0 {
        return Err(Error::DegenerateInput("collagen matrix has zero energy".into()));
    }
    let s1 = svd_of(ac)?.sigma[0];
    Ok(s1 * s1 / total)
}

/// Smallest eigenvalue of an auto-correlation kernel relative to its spectral norm.
pub fn min_relative_eigenvalue(kernel: &CorrelationKernel) -> f64 {
    let ev = kernel.eigenvalues();
    let top = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if top == 0.0 {
        0.0
    } else {
        ev.last().copied().unwrap_or(0.0) / top
    }
}

/// Cross-term singular values against `sqrt(lambda(F_cc) lambda_1(F_mm))`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossBoundReport {
    pub cross_singular_values: Vec<f64>,
    pub bound: f64,
    /// `max_i sigma_i / bound`, defined as 0 when the bound is 0.
    pub max_ratio: f64,
    pub violations: usize,
}

pub const CROSS_BOUND_SLACK: f64 = 1e-10;

pub fn cross_bound_check(ac: &DMatrix<f64>, am: &DMatrix<f64>, dt: f64) -> Result<CrossBoundReport> {
    let cross = correlation_kernel(ac, Some(am), dt, KernelLabel::CollagenMetabolic)?;
    let cross_sv = svd_of(&cross.f)?.sigma;
    let lambda_c = dt * svd_of(ac)?.sigma[0].powi(2);
    let lambda_m = dt * svd_of(am)?.sigma[0].powi(2);
    let bound = (lambda_c * lambda_m).sqrt();
    let top = cross_sv.first().copied().unwrap_or(0.0);
    let max_ratio = if bound > 0.0 { top / bound } else { 0.0 };
    let limit = bound * (1.0 + CROSS_BOUND_SLACK);
    let violations = cross_sv.iter().filter(|s| **s > limit).count();
    Ok(CrossBoundReport { cross_singular_values: cross_sv, bound, max_ratio, violations })
}

/// Distance between the leading singular pair of `A` and of its rank-one part `A_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationReport {
    /// Dominance ratio `||A_c||_op / ||A - A_c||_op`; infinite when `A = A_c`.
    pub n: f64,
    pub exact: bool,
    pub sigma_rel_err: f64,
    pub vec_err: f64,
    /// Smallest `C` with both errors `<= C / N`.
    pub bound_constant: f64,
}

pub fn perturbation_report(a: &DMatrix<f64>, ac: &DMatrix<f64>) -> Result<PerturbationReport> {
    if a.shape() != ac.shape() {
        return Err(Error::invalid("A and A_c differ in shape"));
    }
    let svd_c = svd_of(ac)?;
    let sigma_c = svd_c.sigma[0];
    if sigma_c == 0.0 || svd_c.sigma.get(1).is_some_and(|s| *s / sigma_c >= 1e-8) {
        return Err(Error::invalid("A_c must be numerically rank one"));
    }
    let svd_a = svd_of(a)?;
    let pert = svd_of(&(a - ac))?.sigma[0];
    let u_c = svd_c.space_vector(0);
    let mut u_1 = svd_a.space_vector(0);
    if u_c.dot(&u_1) < 0.0 {
        u_1.neg_mut();
    }
    let sigma_rel_err = (sigma_c - svd_a.sigma[0]).abs() / sigma_c;
    let vec_err = (&u_c - &u_1).norm();
    if pert == 0.0 {
        return Ok(PerturbationReport {
            n: f64::INFINITY,
            exact: true,
            sigma_rel_err,
            vec_err,
            bound_constant: 0.0,
        });
    }
    let n = sigma_c / pert;
    Ok(PerturbationReport {
        n,
        exact: false,
        sigma_rel_err,
        vec_err,
        bound_constant: sigma_rel_err.max(vec_err) * n,
    })
}

/// Random `A = A_c + E` with `A_c = s u v^T` (unit `u`, `v`) and `E` Gaussian rescaled so that
/// `||A_c||_op / ||E||_op = n` exactly. Returns `(A, A_c)`.
pub fn rank_one_plus_noise<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    n: f64,
    rng: &mut R,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let mut gauss = |len: usize| DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal));
    let u = gauss(rows).normalize();
    let v = gauss(cols).normalize();
    let s = 10.0;
    let ac = &u * v.transpose() * s;
    let e = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let e_op = svd_of(&e)?.sigma[0];
    let e = e * (s / (n * e_op));
    Ok((&ac + e, ac))
}

/// Leading eigenvector of `F_cc` (the collagen factor). Sign is arbitrary.
pub fn collagen_factor(ac: &DMatrix<f64>) -> Result<DVector<f64>> {
    let svd = svd_of(ac)?;
    if svd.sigma[0] == 0.0 {
        return Err(Error::DegenerateInput("collagen kernel vanishes".into()));
    }
    Ok(svd.space_vector(0))
}

/// `|cos|` of the angle between the collagen factor of `F_cc` and the pixel factor of `F_mc`.
///
/// The pixel factor of `F_mc = A_m A_c^T dt` is its leading left singular vector.
pub fn nonorthogonality_check(ac: &DMatrix<f64>, am: &DMatrix<f64>) -> Result<f64> {
    if ac.shape() != am.shape() {
        return Err(Error::invalid("collagen and metabolic matrices differ in shape"));
    }
    let phi_c = collagen_factor(ac)?;
    let f_mc = am * ac.transpose();
    let scale = ac.norm() * am.norm();
    let svd = svd_of(&f_mc)?;
    if scale == 0.0 || svd.sigma[0] <= 1e-14 * scale {
        return Err(Error::DegenerateInput("cross kernel F_mc vanishes".into()));
    }
    let phi_m = svd.space_vector(0);
    Ok(phi_c.dot(&phi_m).abs() / (phi_c.norm() * phi_m.norm()))
}

/// `A_m` with the collagen factor projected out of every column, making `F_mc` orthogonal to it.
pub fn project_out_collagen(ac: &DMatrix<f64>, am: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let phi = collagen_factor(ac)?;
    let coeffs = phi.transpose() * am;
    Ok(am - &phi * coeffs)
}
