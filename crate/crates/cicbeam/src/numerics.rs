//! Dense complex linear algebra used by the beamforming and benchmark code.
//!
//! Matrices here are small (tens of rows at most), so everything is backed by
//! `nalgebra`'s dense SVD. The only non-trivial convention is [`null_space`],
//! which treats the columns of its argument as constraint vectors: it returns
//! an orthonormal basis of `{w : A^H w = 0}`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative rank tolerance used throughout the crate.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Thin SVD with singular values sorted in descending order.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub singular_values: Vec<f64>,
    /// `rows x min(rows, cols)`
    pub u: CMatrix,
    /// `cols x min(rows, cols)`; the factorization is `u * diag(s) * v^H`.
    pub v: CMatrix,
}

impl SvdResult {
    pub fn largest(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn reconstruct(&self) -> CMatrix {
        let mut us = self.u.clone();
        for (k, s) in self.singular_values.iter().enumerate() {
            us.column_mut(k).scale_mut(*s);
        }
        us * self.v.adjoint()
    }
}

fn check_finite(a: &CMatrix) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidMatrix)
    }
}

fn sorted_svd(a: &CMatrix) -> SvdResult {
    let (rows, cols) = a.shape();
    let k = rows.min(cols);
    if k == 0 {
        return SvdResult {
            singular_values: Vec::new(),
            u: CMatrix::zeros(rows, 0),
            v: CMatrix::zeros(cols, 0),
        };
    }
    let svd = a.clone().svd_unordered(true, true);
    let u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v_t requested").adjoint();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

    let singular_values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = CMatrix::from_fn(rows, k, |r, c| u[(r, order[c])]);
    let v = CMatrix::from_fn(cols, k, |r, c| v[(r, order[c])]);
    SvdResult { singular_values, u, v }
}

pub fn svd(a: &CMatrix) -> Result<SvdResult> {
    check_finite(a)?;
    Ok(sorted_svd(a))
}

fn rank_of(singular_values: &[f64], tol: f64) -> usize {
    let largest = singular_values.first().copied().unwrap_or(0.0);
    if largest <= 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s > tol * largest).count()
}

/// Number of singular values above `tol` times the largest one.
pub fn rank(a: &CMatrix, tol: f64) -> usize {
    match svd(a) {
        Ok(s) => rank_of(&s.singular_values, tol),
        Err(_) => 0,
    }
}

/// Orthonormal basis (`rows x d`) of the vectors orthogonal to every column of
/// `a`, with `d = rows - rank(a, tol)`.
pub fn null_space(a: &CMatrix, tol: f64) -> Result<CMatrix> {
    check_finite(a)?;
    let (rows, cols) = a.shape();
    if cols == 0 {
        return Ok(CMatrix::identity(rows, rows));
    }
    // Pad to at least square so that the left singular basis is complete.
    let padded = if cols < rows {
        let mut p = CMatrix::zeros(rows, rows);
        p.columns_mut(0, cols).copy_from(a);
        p
    } else {
        a.clone()
    };
    let s = sorted_svd(&padded);
    let r = rank_of(&s.singular_values, tol);
    Ok(s.u.columns(r, rows - r).into_owned())
}

/// Stack column vectors into a matrix with `rows` rows (needed when the list
/// is empty).
pub fn hstack(rows: usize, cols: &[&CVector]) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols.len());
    for (k, c) in cols.iter().enumerate() {
        m.set_column(k, c);
    }
    m
}

/// `h^H w`
pub fn inner(h: &CVector, w: &CVector) -> Complex64 {
    h.dotc(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn svd_of_identity_and_zero() {
        let s = svd(&CMatrix::identity(2, 2)).unwrap();
        assert_eq!(s.singular_values.len(), 2);
        for v in &s.singular_values {
            assert!((v - 1.0).abs() < 1e-14);
        }
        let z = svd(&CMatrix::zeros(3, 2)).unwrap();
        assert_eq!(z.singular_values, vec![0.0, 0.0]);
    }

    #[test]
    fn svd_of_diagonal_is_sorted() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)]);
        let s = svd(&a).unwrap();
        assert!((s.singular_values[0] - 3.0).abs() < 1e-14);
        assert!((s.singular_values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn svd_rejects_nan() {
        let mut a = CMatrix::identity(2, 2);
        a[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(svd(&a), Err(Error::InvalidMatrix)));
        assert!(matches!(null_space(&a, DEFAULT_RANK_TOL), Err(Error::InvalidMatrix)));
    }

    #[test]
    fn svd_reconstructs_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (r, k) in [(4, 2), (2, 5), (6, 6), (1, 3)] {
            let a = random_matrix(&mut rng, r, k);
            let s = svd(&a).unwrap();
            let err = (s.reconstruct() - &a).norm();
            assert!(err <= 1e-10 * s.largest(), "{r}x{k}: {err}");
            assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn null_space_of_e1_is_e2() {
        let a = CMatrix::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let n = null_space(&a, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(n.shape(), (2, 1));
        assert!(n[(0, 0)].norm() < 1e-14);
        assert!((n[(1, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn null_space_of_full_rank_is_empty() {
        let a = CMatrix::from_column_slice(2, 2, &[c(1.0, 0.0), c(1.0, 1.0), c(0.0, 2.0), c(-1.0, 0.0)]);
        assert_eq!(null_space(&a, 1e-9).unwrap().ncols(), 0);
    }

    #[test]
    fn null_space_residual_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 4, 2);
        let n = null_space(&a, 1e-9).unwrap();
        assert_eq!(n.ncols(), 2);
        let residual = a.adjoint() * &n;
        assert!(residual.iter().all(|z| z.norm() <= 1e-9));
        let gram = n.adjoint() * &n;
        assert!((gram - CMatrix::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn null_space_without_constraints_is_identity() {
        let n = null_space(&CMatrix::zeros(3, 0), 1e-9).unwrap();
        assert_eq!(n, CMatrix::identity(3, 3));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&CMatrix::identity(3, 3), 1e-9), 3);
        assert_eq!(rank(&CMatrix::zeros(3, 3), 1e-9), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a = random_matrix(&mut rng, 4, 3);
        let col = a.column(0).into_owned();
        a.set_column(2, &col);
        assert_eq!(rank(&a, 1e-9), 2);
    }

    proptest::proptest! {
        #[test]
        fn rank_nullity(seed in 0u64..500, rows in 1usize..7, cols in 0usize..7, dup in proptest::bool::ANY) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut a = random_matrix(&mut rng, rows, cols);
            if dup && cols >= 2 {
                let col = a.column(0).into_owned();
                a.set_column(cols - 1, &col);
            }
            let n = null_space(&a, DEFAULT_RANK_TOL).unwrap();
            proptest::prop_assert_eq!(rank(&a, DEFAULT_RANK_TOL) + n.ncols(), rows);
            let gram = n.adjoint() * &n;
            proptest::prop_assert!((gram - CMatrix::identity(n.ncols(), n.ncols())).norm() < 1e-10);
        }
    }
}
