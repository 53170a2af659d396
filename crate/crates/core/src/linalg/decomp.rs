//! Factorizations: Cholesky, cyclic Jacobi eigendecomposition, one-sided
//! Jacobi SVD and Householder QR.

use super::matrix::{axpy, dot, Matrix};
use super::EigPair;
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

const MAX_JACOBI_SWEEPS: usize = 100;

fn check_symmetric<T: Scalar>(s: &Matrix<T>, what: &str) -> Result<()> {
    if !s.is_square() {
        return Err(invalid(format!("{what}: expected a square matrix, got {:?}", s.shape())));
    }
    if !s.is_finite() {
        return Err(Error::NonFinite(format!("{what}: input contains NaN or Inf")));
    }
    let asym = s.asymmetry();
    if asym > T::tol(1e-10) {
        return Err(invalid(format!("{what}: matrix is not symmetric (relative asymmetry {asym:e})")));
    }
    Ok(())
}

/// Lower-triangular `L` with `L Lᵀ = S` and a positive diagonal.
pub fn cholesky<T: Scalar>(s: &Matrix<T>) -> Result<Matrix<T>> {
    check_symmetric(s, "cholesky")?;
    let n = s.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let lj = &l.row(j)[..j];
        let pivot = s[(j, j)] - dot(lj, lj);
        if pivot.is_nan() || pivot <= T::zero() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: pivot.as_f64() });
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let v = (s[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j])) / d;
            l[(i, j)] = v;
        }
    }
    Ok(l)
}

/// Solves `L X = B` for lower-triangular `L`.
pub fn solve_lower<T: Scalar>(l: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    assert_eq!(l.rows(), b.rows());
    let n = l.rows();
    let mut x = b.clone();
    for i in 0..n {
        for k in 0..i {
            let lik = l[(i, k)];
            if lik != T::zero() {
                let (head, tail) = x.as_mut_slice().split_at_mut(i * b.cols());
                axpy(&mut tail[..b.cols()], -lik, &head[k * b.cols()..(k + 1) * b.cols()]);
            }
        }
        let inv = T::one() / l[(i, i)];
        for v in x.row_mut(i) {
            *v = *v * inv;
        }
    }
    x
}

/// Solves `Lᵀ X = B` for lower-triangular `L`.
pub fn solve_lower_transpose<T: Scalar>(l: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    assert_eq!(l.rows(), b.rows());
    let n = l.rows();
    let cols = b.cols();
    let mut x = b.clone();
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            // (Lᵀ)_{ik} = L_{ki}
            let lki = l[(k, i)];
            if lki != T::zero() {
                let (head, tail) = x.as_mut_slice().split_at_mut(k * cols);
                axpy(&mut head[i * cols..(i + 1) * cols], -lki, &tail[..cols]);
            }
        }
        let inv = T::one() / l[(i, i)];
        for v in x.row_mut(i) {
            *v = *v * inv;
        }
    }
    x
}

/// Rotation `(c, s)` annihilating the off-diagonal entry of the 2x2
/// symmetric block `[[app, apq], [apq, aqq]]`.
#[inline]
fn jacobi_rotation<T: Scalar>(app: T, aqq: T, apq: T) -> (T, T) {
    let theta = (aqq - app) / (apq + apq);
    let t = if theta.abs() > T::one() / T::epsilon().sqrt() {
        T::lit(0.5) / theta
    } else {
        let sign = if theta >= T::zero() { T::one() } else { -T::one() };
        sign / (theta.abs() + (theta * theta + T::one()).sqrt())
    };
    let c = T::one() / (t * t + T::one()).sqrt();
    (c, t * c)
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Iterates until the off-diagonal Frobenius norm drops below `1e-12 ‖S‖_F`
/// (or the type's resolution), at most 100 sweeps. Eigenvalues come back in
/// descending order with orthonormal eigenvectors as columns.
pub fn sym_eig<T: Scalar>(s: &Matrix<T>) -> Result<EigPair<T>> {
    check_symmetric(s, "sym_eig")?;
    let n = s.rows();
    let mut a = s.symmetrized();
    let mut v = Matrix::identity(n);
    let norm = a.frobenius_norm();
    let tol = T::tol(1e-12) * norm;

    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off + a[(i, j)] * a[(i, j)];
            }
        }
        if (off + off).sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let (c, sn) = jacobi_rotation(a[(p, p)], a[(q, q)], apq);
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                {
                    let (head, tail) = a.as_mut_slice().split_at_mut(q * n);
                    let row_p = &mut head[p * n..(p + 1) * n];
                    let row_q = &mut tail[..n];
                    for (x, y) in row_p.iter_mut().zip(row_q.iter_mut()) {
                        let (xp, yq) = (*x, *y);
                        *x = c * xp - sn * yq;
                        *y = sn * xp + c * yq;
                    }
                }
                a[(p, q)] = T::zero();
                a[(q, p)] = T::zero();
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(EigPair { values, vectors })
}

/// Thin singular value decomposition `A = U diag(σ) Vᵀ` with `p = min(m, n)`
/// components, singular values descending.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    pub u: Matrix<T>,
    pub singular_values: Vec<T>,
    pub v: Matrix<T>,
}

/// One-sided (Hestenes) Jacobi SVD. Accurate for small singular values,
/// which makes it suitable for rank decisions.
pub fn svd<T: Scalar>(a: &Matrix<T>) -> Result<Svd<T>> {
    if a.is_empty() {
        return Err(invalid("svd of an empty matrix"));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("svd input contains NaN or Inf".into()));
    }
    if a.rows() < a.cols() {
        let t = svd(&a.transpose())?;
        return Ok(Svd { u: t.v, singular_values: t.singular_values, v: t.u });
    }
    let (m, n) = a.shape();
    // Columns of A stored as rows for contiguous access.
    let mut cols = a.transpose();
    let mut vt = Matrix::<T>::identity(n);
    let eps = T::epsilon() * T::from_usize_lossy(m).sqrt();

    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let up = cols.row(p);
                    let uq = cols.row(q);
                    (dot(up, up), dot(uq, uq), dot(up, uq))
                };
                if alpha == T::zero() || beta == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let (c, s) = jacobi_rotation(alpha, beta, gamma);
                rotate_rows(&mut cols, p, q, c, s);
                rotate_rows(&mut vt, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<T> = (0..n).map(|j| dot(cols.row(j), cols.row(j)).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));

    let mut u = Matrix::zeros(m, n);
    let mut v = Matrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        singular_values.push(sigma);
        if sigma > T::zero() {
            for (i, &x) in cols.row(j).iter().enumerate() {
                u[(i, k)] = x / sigma;
            }
        }
        for (i, &x) in vt.row(j).iter().enumerate() {
            v[(i, k)] = x;
        }
    }
    Ok(Svd { u, singular_values, v })
}

/// Applies `row_p ← c row_p − s row_q`, `row_q ← s row_p + c row_q`.
fn rotate_rows<T: Scalar>(m: &mut Matrix<T>, p: usize, q: usize, c: T, s: T) {
    debug_assert!(p < q);
    let n = m.cols();
    let (head, tail) = m.as_mut_slice().split_at_mut(q * n);
    let row_p = &mut head[p * n..(p + 1) * n];
    let row_q = &mut tail[..n];
    for (x, y) in row_p.iter_mut().zip(row_q.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Thin Householder QR of an `m × n` matrix (`m ≥ n`), normalized so that
/// `R` has a non-negative diagonal. Returns `(Q, R)` with `Q` of shape `m × n`.
pub fn qr_thin<T: Scalar>(a: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>)> {
    let (m, n) = a.shape();
    if n > m {
        return Err(invalid(format!("qr_thin needs rows >= cols, got {m}x{n}")));
    }
    let mut w = a.clone();
    let mut reflectors: Vec<Vec<T>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v: Vec<T> = (j..m).map(|i| w[(i, j)]).collect();
        let norm_x = dot(&v, &v).sqrt();
        if norm_x == T::zero() {
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if v[0] > T::zero() { -norm_x } else { norm_x };
        v[0] = v[0] - alpha;
        let vnorm2 = dot(&v, &v);
        if vnorm2 == T::zero() {
            reflectors.push(Vec::new());
            continue;
        }
        let scale = T::lit(2.0) / vnorm2;
        for c in j..n {
            let proj: T = (j..m).map(|i| v[i - j] * w[(i, c)]).sum::<T>() * scale;
            for i in j..m {
                w[(i, c)] = w[(i, c)] - proj * v[i - j];
            }
        }
        reflectors.push(v);
    }

    let mut q = Matrix::zeros(m, n);
    for j in 0..n {
        q[(j, j)] = T::one();
    }
    for j in (0..n).rev() {
        let v = &reflectors[j];
        if v.is_empty() {
            continue;
        }
        let scale = T::lit(2.0) / dot(v, v);
        let mut proj = vec![T::zero(); n];
        for i in j..m {
            axpy(&mut proj, v[i - j], q.row(i));
        }
        for i in j..m {
            let f = -scale * v[i - j];
            axpy(q.row_mut(i), f, &proj);
        }
    }

    let mut r = Matrix::from_fn(n, n, |i, c| if i <= c { w[(i, c)] } else { T::zero() });
    for j in 0..n {
        if r[(j, j)] < T::zero() {
            for c in j..n {
                r[(j, c)] = -r[(j, c)];
            }
            for i in 0..m {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok((q, r))
}
