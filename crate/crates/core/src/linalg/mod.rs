//! Dense linear-algebra kernels.
//!
//! Everything here is a pure function of its inputs and generic over
//! [`Scalar`]. Matrices are row-major (see [`Matrix`]).

mod decomp;
mod matrix;

pub use decomp::{cholesky, qr_thin, solve_lower, solve_lower_transpose, svd, sym_eig, Svd};
pub use matrix::{axpy, dot, norm2, Matrix};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Eigenvalues sorted descending, paired column-wise with `vectors`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigPair<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

/// Removes the column means. Returns the centered matrix and the means.
pub fn center_columns<T: Scalar>(x: &Matrix<T>) -> Result<(Matrix<T>, Vec<T>)> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(invalid("center_columns: empty matrix"));
    }
    let mean = x.column_means();
    Ok((x.sub_row_vector(&mean), mean))
}

/// Solves `A v = λ B v` for symmetric `A` and symmetric positive definite `B`.
///
/// `B = L Lᵀ` whitens the problem into the standard symmetric eigenproblem of
/// `L⁻¹ A L⁻ᵀ`; eigenvectors are mapped back with `L⁻ᵀ`, so the returned
/// columns satisfy `Vᵀ B V = I`.
pub fn gev_solve<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<EigPair<T>> {
    if a.shape() != b.shape() || !a.is_square() {
        return Err(invalid(format!("gev_solve: shapes {:?} and {:?}", a.shape(), b.shape())));
    }
    if a.asymmetry() > T::tol(1e-10) {
        return Err(invalid("gev_solve: A is not symmetric"));
    }
    let l = cholesky(b)?;
    let left = solve_lower(&l, a);
    let whitened = solve_lower(&l, &left.transpose()).symmetrized();
    let eig = sym_eig(&whitened)?;
    let vectors = solve_lower_transpose(&l, &eig.vectors);
    Ok(EigPair { values: eig.values, vectors })
}

/// Number of singular values above `1e-10 σ_max` (or the type's resolution).
pub fn numerical_rank<T: Scalar>(singular_values: &[T]) -> usize {
    let smax = singular_values.iter().fold(T::zero(), |m, &s| m.max(s));
    if smax == T::zero() {
        return 0;
    }
    let cutoff = T::tol(1e-10) * smax;
    singular_values.iter().filter(|&&s| s > cutoff).count()
}

/// Orthonormal basis of the column space of `x`, one column per numerically
/// nonzero singular value.
pub fn orthonormal_basis<T: Scalar>(x: &Matrix<T>) -> Result<Matrix<T>> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(invalid("orthonormal_basis: empty matrix"));
    }
    let s = svd(x)?;
    let rank = numerical_rank(&s.singular_values);
    if rank == 0 {
        return Err(Error::RankZero);
    }
    Ok(s.u.leading_columns(rank))
}

/// `rows × cols` matrix with orthonormal columns drawn from the Haar measure:
/// QR of a standard-normal matrix with the signs fixed by a positive `R` diagonal.
pub fn random_orthonormal<T: Scalar, R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<Matrix<T>> {
    if cols > rows {
        return Err(invalid(format!("random_orthonormal: cols {cols} > rows {rows}")));
    }
    if cols == 0 {
        return Err(invalid("random_orthonormal: zero columns"));
    }
    let g = Matrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        T::lit(z)
    });
    Ok(qr_thin(&g)?.0)
}

/// Cosines of the principal angles between the spans of two orthonormal
/// bases: singular values of `Uᵀ V`, clipped to `[0, 1]`, descending.
pub fn principal_angle_cosines<T: Scalar>(u: &Matrix<T>, v: &Matrix<T>) -> Result<Vec<T>> {
    if u.rows() != v.rows() {
        return Err(invalid(format!(
            "principal_angle_cosines: row counts {} and {} differ",
            u.rows(),
            v.rows()
        )));
    }
    let cross = u.t_matmul(v);
    let mut sv = svd(&cross)?.singular_values;
    for s in &mut sv {
        *s = s.max(T::zero()).min(T::one());
    }
    Ok(sv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn projector(u: &Matrix<f64>) -> Matrix<f64> {
        u.matmul_t(u)
    }

    #[test]
    fn center_columns_examples() {
        let x = Matrix::from_rows(&[[1.0, 3.0], [3.0, 5.0]]).unwrap();
        let (c, m) = center_columns(&x).unwrap();
        assert_eq!(c, Matrix::from_rows(&[[-1.0, -1.0], [1.0, 1.0]]).unwrap());
        assert_eq!(m, vec![2.0, 4.0]);

        let z = Matrix::from_rows(&[[1.0, -2.0], [-1.0, 2.0]]).unwrap();
        let (c, m) = center_columns(&z).unwrap();
        assert_eq!(c, z);
        assert_eq!(m, vec![0.0, 0.0]);

        let r = gaussian(100, 8, 1).map(|v| v + 3.0);
        let (c, _) = center_columns(&r).unwrap();
        for j in 0..8 {
            let s: f64 = c.col(j).iter().sum();
            assert!(s.abs() < 1e-10);
        }
        assert!(center_columns(&Matrix::<f64>::zeros(0, 3)).is_err());
    }

    #[test]
    fn gev_examples() {
        let a = Matrix::<f64>::from_diag(&[2.0, 1.0]);
        let e = gev_solve(&a, &Matrix::identity(2)).unwrap();
        assert_eq!(e.values, vec![2.0, 1.0]);
        assert!((e.vectors[(0, 0)].abs() - 1.0).abs() < 1e-15);
        assert!((e.vectors[(1, 1)].abs() - 1.0).abs() < 1e-15);

        let b = Matrix::from_diag(&[1.0, 4.0, 2.0]);
        let e = gev_solve(&Matrix::zeros(3, 3), &b).unwrap();
        assert!(e.values.iter().all(|&v| v == 0.0));
        let vbv = e.vectors.t_matmul(&b.matmul(&e.vectors));
        assert!(vbv.max_abs_diff(&Matrix::identity(3)) < 1e-12);
    }

    #[test]
    fn gev_propagates_cholesky_failure() {
        let b = Matrix::from_diag(&[1.0, -1.0]);
        assert!(matches!(
            gev_solve(&Matrix::identity(2), &b),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
    }

    #[test]
    fn orthonormal_basis_examples() {
        let q = random_orthonormal::<f64, _>(20, 3, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let u = orthonormal_basis(&q).unwrap();
        assert_eq!(u.cols(), 3);
        assert!(projector(&u).sub(&projector(&q)).frobenius_norm() < 1e-8);

        let c = [1.0, 2.0, -1.0, 0.5, 3.0];
        let x = Matrix::from_fn(5, 2, |i, j| c[i] * (j + 1) as f64);
        let u = orthonormal_basis(&x).unwrap();
        assert_eq!(u.cols(), 1);
        let cc: f64 = c.iter().map(|v| v * v).sum();
        let target = Matrix::from_fn(5, 5, |i, j| c[i] * c[j] / cc);
        assert!(projector(&u).max_abs_diff(&target) < 1e-12);

        let x = gaussian(50, 5, 9);
        let u = orthonormal_basis(&x).unwrap();
        assert!(u.t_matmul(&u).max_abs_diff(&Matrix::identity(5)) < 1e-10);
        let resid = x.sub(&u.matmul(&u.t_matmul(&x)));
        assert!(resid.frobenius_norm() < 1e-8);

        assert!(matches!(orthonormal_basis(&Matrix::<f64>::zeros(4, 2)), Err(Error::RankZero)));
    }

    #[test]
    fn random_orthonormal_examples() {
        let q = random_orthonormal::<f64, _>(3, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let det = q[(0, 0)] * (q[(1, 1)] * q[(2, 2)] - q[(1, 2)] * q[(2, 1)])
            - q[(0, 1)] * (q[(1, 0)] * q[(2, 2)] - q[(1, 2)] * q[(2, 0)])
            + q[(0, 2)] * (q[(1, 0)] * q[(2, 1)] - q[(1, 1)] * q[(2, 0)]);
        assert!((det.abs() - 1.0).abs() < 1e-8);

        let a = random_orthonormal::<f64, _>(64, 8, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = random_orthonormal::<f64, _>(64, 8, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());

        let big = random_orthonormal::<f64, _>(1024, 10, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!(big.t_matmul(&big).sub(&Matrix::identity(10)).frobenius_norm() < 1e-10);

        assert!(random_orthonormal::<f64, _>(2, 3, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn principal_angle_examples() {
        let u = random_orthonormal::<f64, _>(10, 4, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let cos = principal_angle_cosines(&u, &u).unwrap();
        assert!(cos.iter().all(|&c| (c - 1.0).abs() < 1e-12));

        let e = |cols: &[usize]| Matrix::from_fn(5, cols.len(), |i, j| if i == cols[j] { 1.0 } else { 0.0 });
        let cos = principal_angle_cosines(&e(&[0, 1]), &e(&[2, 3, 4])).unwrap();
        assert!(cos.iter().all(|&c| c == 0.0));

        let plane = e(&[0, 1]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let line = Matrix::from_fn(5, 1, |i, _| if i < 2 { h } else { 0.0 });
        let cos = principal_angle_cosines(&plane, &line).unwrap();
        assert_eq!(cos.len(), 1);
        assert!((cos[0] - 1.0).abs() < 1e-15);

        assert!(principal_angle_cosines(&plane, &Matrix::identity(3)).is_err());
    }
}
