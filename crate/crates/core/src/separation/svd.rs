use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};

use super::CasoratiMatrix;

/// Thin SVD `A = sum_i sigma_i u_i v_i^T` with `sigma` non-increasing.
///
/// Columns of `u` are the pixel-indexed space-vectors and columns of `v` the time-vectors. Each
/// `u_i` is signed so that its largest-magnitude entry is positive.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub sigma: Vec<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Number of singular values above `max(n_x, n_t) * eps * sigma_1`.
    pub fn numerical_rank(&self) -> usize {
        let Some(&s1) = self.sigma.first() else { return 0 };
        let tol = self.u.nrows().max(self.v.nrows()) as f64 * f64::EPSILON * s1;
        self.sigma.iter().take_while(|s| **s > tol).count()
    }

    pub fn space_vector(&self, i: usize) -> DVector<f64> {
        self.u.column(i).into_owned()
    }

    pub fn time_vector(&self, i: usize) -> DVector<f64> {
        self.v.column(i).into_owned()
    }

    /// `U diag(sigma) V^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (i, s) in self.sigma.iter().enumerate() {
            us.column_mut(i).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

pub fn compute_svd(a: &CasoratiMatrix) -> Result<SvdResult> {
    svd_of(a.data())
}

/// SVD of an arbitrary finite matrix, with the same conventions as [`compute_svd`].
///
/// The LAPACK-style bidiagonal solver is tried first. Its output is checked against the
/// values-only decomposition and the reconstruction residual; when the check fails (which happens
/// on some exactly low-rank inputs) a one-sided Jacobi SVD is used instead.
pub fn svd_of(a: &DMatrix<f64>) -> Result<SvdResult> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("cannot decompose a matrix with non-finite entries"));
    }
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::invalid("cannot decompose an empty matrix"));
    }
    let svd = SVD::new(a.clone(), true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v = svd.v_t.expect("right singular vectors requested").transpose();
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    let mut out = SvdResult { sigma, u, v };
    if !is_consistent(a, &out) {
        out = jacobi_svd(a);
    }
    fix_signs(&mut out);
    Ok(out)
}

fn is_consistent(a: &DMatrix<f64>, svd: &SvdResult) -> bool {
    let scale = a.norm();
    if scale == 0.0 {
        return true;
    }
    let tol = 1e-10 * scale;
    let reference = SVD::new(a.clone(), false, false).singular_values;
    let mut sorted = reference.as_slice().to_vec();
    sorted.sort_by(|x, y| y.total_cmp(x));
    let values_ok = svd.sigma.len() == sorted.len()
        && svd.sigma.windows(2).all(|w| w[0] >= w[1])
        && svd.sigma.iter().zip(&sorted).all(|(s, r)| (s - r).abs() <= tol);
    values_ok && (svd.reconstruct() - a).norm() <= tol
}

fn fix_signs(svd: &mut SvdResult) {
    for i in 0..svd.sigma.len() {
        let col = svd.u.column(i);
        let lead = col.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if lead < 0.0 {
            svd.u.column_mut(i).neg_mut();
            svd.v.column_mut(i).neg_mut();
        }
    }
}

/// One-sided (Hestenes) Jacobi SVD.
fn jacobi_svd(a: &DMatrix<f64>) -> SvdResult {
    let wide = a.nrows() < a.ncols();
    let mut w = if wide { a.transpose() } else { a.clone() };
    let (m, n) = w.shape();
    let mut q = DMatrix::<f64>::identity(n, n);

    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for r in (p + 1)..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(r).norm_squared();
                let gamma = w.column(p).dot(&w.column(r));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, r, c, s);
                rotate(&mut q, p, r, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    order.sort_by(|i, j| norms[*j].total_cmp(&norms[*i]));

    let mut left = DMatrix::zeros(m, n);
    let mut right = DMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    let tol = norms.iter().copied().fold(0.0, f64::max) * (m.max(n) as f64) * f64::EPSILON;
    for (k, &j) in order.iter().enumerate() {
        let s = norms[j];
        right.set_column(k, &q.column(j));
        if s > tol {
            left.set_column(k, &(w.column(j) / s));
            sigma.push(s);
        } else {
            sigma.push(0.0);
        }
    }
    complete_basis(&mut left, sigma.iter().take_while(|s| **s > 0.0).count());

    if wide {
        SvdResult { sigma, u: right, v: left }
    } else {
        SvdResult { sigma, u: left, v: right }
    }
}

fn rotate(m: &mut DMatrix<f64>, p: usize, r: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let x = m[(i, p)];
        let y = m[(i, r)];
        m[(i, p)] = c * x - s * y;
        m[(i, r)] = s * x + c * y;
    }
}

/// Fills columns `from..` with an orthonormal complement of the first `from` columns.
fn complete_basis(m: &mut DMatrix<f64>, from: usize) {
    let rows = m.nrows();
    let mut k = from;
    for e in 0..rows {
        if k >= m.ncols() {
            break;
        }
        let mut x = DVector::<f64>::zeros(rows);
        x[e] = 1.0;
        for _ in 0..2 {
            for j in 0..k {
                let proj = m.column(j).dot(&x);
                x -= m.column(j) * proj;
            }
        }
        let norm = x.norm();
        if norm > 1e-8 {
            m.set_column(k, &(x / norm));
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::PixelGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    fn cas(m: DMatrix<f64>) -> CasoratiMatrix {
        CasoratiMatrix::from_matrix(m).unwrap()
    }

    #[test]
    fn exact_rank_one() {
        let mut u = DVector::from_fn(12, |i, _| (i as f64 + 1.0).sin());
        u.normalize_mut();
        let mut v = DVector::from_fn(20, |i, _| (0.3 * i as f64).cos());
        v.normalize_mut();
        let s = 7.5;
        let svd = compute_svd(&cas(&u * v.transpose() * s)).unwrap();
        assert!((svd.sigma[0] - s).abs() < 1e-12 * s);
        assert!(svd.sigma[1..].iter().all(|x| *x <= 1e-12 * s));
        assert_eq!(svd.numerical_rank(), 1);
    }

    #[test]
    fn diagonal_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        let svd = compute_svd(&cas(a)).unwrap();
        assert!((svd.sigma[0] - 3.0).abs() < 1e-14 && (svd.sigma[1] - 1.0).abs() < 1e-14);
        assert!((svd.u[(1, 0)] - 1.0).abs() < 1e-14 && svd.u[(0, 0)].abs() < 1e-14);
        assert!((svd.v[(1, 0)] - 1.0).abs() < 1e-14);
        assert!((svd.u[(0, 1)] - 1.0).abs() < 1e-14);
    }

    // Direct triple-loop multiplication as the reconstruction oracle.
    #[test]
    fn random_reconstruction() {
        let a = random(40, 60, 1);
        let svd = compute_svd(&cas(a.clone())).unwrap();
        let mut err = 0.0;
        for j in 0..40 {
            for k in 0..60 {
                let mut s = 0.0;
                for i in 0..svd.rank() {
                    s += svd.sigma[i] * svd.u[(j, i)] * svd.v[(k, i)];
                }
                err += (a[(j, k)] - s).powi(2);
            }
        }
        assert!(err.sqrt() / a.norm() < 1e-12);
        assert!(svd.sigma.windows(2).all(|w| w[0] >= w[1]));
        let eye = DMatrix::<f64>::identity(40, 40);
        assert!((svd.u.transpose() * &svd.u - &eye).amax() < 1e-10);
        assert!((svd.v.transpose() * &svd.v - eye).amax() < 1e-10);
    }

    #[test]
    fn sign_convention() {
        let svd = compute_svd(&cas(random(15, 9, 4))).unwrap();
        for i in 0..svd.rank() {
            let col = svd.space_vector(i);
            let lead = col.iter().copied().max_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
            assert!(lead.unwrap() > 0.0);
        }
        assert!((svd.reconstruct() - random(15, 9, 4)).norm() < 1e-12 * svd.sigma[0]);
    }

    #[test]
    fn rejects_non_finite() {
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(svd_of(&a).is_err());
        assert!(CasoratiMatrix::new(a, PixelGrid::new(2, 1).unwrap()).is_err());
    }

    fn assert_valid(a: &DMatrix<f64>, svd: &SvdResult) {
        let k = svd.rank();
        assert!((svd.reconstruct() - a).norm() < 1e-11 * a.norm().max(1.0));
        assert!((svd.u.transpose() * &svd.u - DMatrix::identity(k, k)).norm() < 1e-11);
        assert!((svd.v.transpose() * &svd.v - DMatrix::identity(k, k)).norm() < 1e-11);
        assert!(svd.sigma.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn jacobi_matches_reference() {
        for (r, c, seed) in [(12, 7, 1), (7, 12, 2), (9, 9, 3)] {
            let a = random(r, c, seed);
            let j = jacobi_svd(&a);
            assert_valid(&a, &j);
            let reference = SVD::new(a.clone(), false, false).singular_values;
            for (x, y) in j.sigma.iter().zip(reference.iter()) {
                assert!((x - y).abs() < 1e-12 * reference[0]);
            }
        }
    }

    #[test]
    fn jacobi_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b: DMatrix<f64> = DMatrix::from_fn(10, 2, |_, _| rng.sample(StandardNormal));
        let c: DMatrix<f64> = DMatrix::from_fn(2, 15, |_, _| rng.sample(StandardNormal));
        let a = b * c;
        let j = jacobi_svd(&a);
        assert_valid(&a, &j);
        assert!(j.sigma[2..].iter().all(|s| *s == 0.0));
    }

    #[test]
    fn exact_rank_one_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let u = DVector::<f64>::from_fn(20, |_, _| rng.sample(StandardNormal)).normalize();
            let v = DVector::<f64>::from_fn(30, |_, _| rng.sample(StandardNormal)).normalize();
            let a = &u * v.transpose() * 10.0;
            let svd = svd_of(&a).unwrap();
            assert!((svd.sigma[0] - 10.0).abs() < 1e-12);
            assert!(svd.sigma[1] < 1e-12);
            assert!((svd.space_vector(0).dot(&u).abs() - 1.0).abs() < 1e-12);
            assert_valid(&a, &svd);
        }
    }
}
