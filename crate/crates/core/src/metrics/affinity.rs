//! Normalized subspace affinity and the reconstruction / inter-set aggregates.

use crate::error::{invalid, Result};
use crate::linalg::{center_columns, orthonormal_basis, principal_angle_cosines, Matrix};
use crate::scalar::Scalar;

/// Root-mean-square of the principal-angle cosines between the column spaces
/// of `x` and `x_hat`, over `min(r, r')` angles where `r`, `r'` are the
/// numerical ranks. 1 when one space contains the other, 0 when orthogonal.
pub fn subspace_affinity<T: Scalar>(x: &Matrix<T>, x_hat: &Matrix<T>) -> Result<f64> {
    if x.rows() != x_hat.rows() {
        return Err(invalid(format!("affinity: row counts {} and {} differ", x.rows(), x_hat.rows())));
    }
    let u = orthonormal_basis(x)?;
    let v = orthonormal_basis(x_hat)?;
    let cos = principal_angle_cosines(&u, &v)?;
    let m = u.cols().min(v.cols());
    let sum_sq: f64 = cos.iter().take(m).map(|c| c.as_f64() * c.as_f64()).sum();
    Ok((sum_sq / m as f64).sqrt().clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffinityReport {
    /// Mean affinity between each modality's reconstruction and its source.
    pub r_a: f64,
    /// Mean affinity over unordered pairs of distinct reconstructions.
    pub r_s: f64,
    pub per_modality: Vec<f64>,
    /// `((l, k), affinity)` for `l < k`.
    pub per_pair: Vec<((usize, usize), f64)>,
}

/// Whether columns are mean-centered before basis extraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Centering {
    Centered,
    Raw,
}

fn prepare<T: Scalar>(m: &Matrix<T>, centering: Centering) -> Result<Matrix<T>> {
    match centering {
        Centering::Centered => Ok(center_columns(m)?.0),
        Centering::Raw => Ok(m.clone()),
    }
}

pub fn affinity_report<T: Scalar>(
    source: &[Matrix<T>],
    recon: &[Matrix<T>],
    centering: Centering,
) -> Result<AffinityReport> {
    if source.len() != recon.len() || recon.len() < 2 {
        return Err(invalid(format!(
            "affinity report needs equal lists of >= 2 matrices, got {} and {}",
            source.len(),
            recon.len()
        )));
    }
    let source: Vec<Matrix<T>> = source.iter().map(|m| prepare(m, centering)).collect::<Result<_>>()?;
    let recon: Vec<Matrix<T>> = recon.iter().map(|m| prepare(m, centering)).collect::<Result<_>>()?;
    let per_modality = source
        .iter()
        .zip(&recon)
        .map(|(s, r)| subspace_affinity(s, r))
        .collect::<Result<Vec<f64>>>()?;
    let n = recon.len();
    let mut per_pair = Vec::with_capacity(n * (n - 1) / 2);
    for l in 0..n {
        for k in (l + 1)..n {
            per_pair.push(((l, k), subspace_affinity(&recon[l], &recon[k])?));
        }
    }
    let r_a = per_modality.iter().sum::<f64>() / n as f64;
    let r_s = per_pair.iter().map(|p| p.1).sum::<f64>() / per_pair.len() as f64;
    Ok(AffinityReport { r_a, r_s, per_modality, per_pair })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
    }

    fn basis(n: usize, idx: &[usize]) -> Matrix<f64> {
        Matrix::from_fn(n, idx.len(), |i, j| if i == idx[j] { 1.0 } else { 0.0 })
    }

    #[test]
    fn affinity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = gaussian(30, 4, &mut rng);
        assert!((subspace_affinity(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!(subspace_affinity(&basis(5, &[0, 1]), &basis(5, &[2, 3])).unwrap() < 1e-15);
        let a = subspace_affinity(&basis(4, &[0, 1]), &basis(4, &[0, 2])).unwrap();
        assert!((a - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-10);
        assert!(matches!(subspace_affinity(&Matrix::<f64>::zeros(5, 2), &x.select_rows(&[0, 1, 2, 3, 4])), Err(Error::RankZero)));
    }

    #[test]
    fn report_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = gaussian(100, 3, &mut rng);
        let rep = affinity_report(&vec![s.clone(); 3], &vec![s.clone(); 3], Centering::Centered).unwrap();
        assert!((rep.r_a - 1.0).abs() < 1e-12 && (rep.r_s - 1.0).abs() < 1e-12);

        let recon = vec![gaussian(100, 3, &mut rng), gaussian(100, 3, &mut rng)];
        let rep = affinity_report(&vec![s.clone(); 2], &recon, Centering::Raw).unwrap();
        assert_eq!(rep.per_pair.len(), 1);
        assert_eq!(rep.r_s, rep.per_pair[0].1);
        assert!((rep.r_a - (rep.per_modality[0] + rep.per_modality[1]) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn random_subspaces_have_low_affinity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = 2000;
        let s = gaussian(t, 10, &mut rng);
        let recon: Vec<_> = (0..5).map(|_| gaussian(t, 10, &mut rng)).collect();
        let rep = affinity_report(&vec![s; 5], &recon, Centering::Centered).unwrap();
        assert!(rep.r_a > 0.03 && rep.r_a < 0.12, "{}", rep.r_a);
        assert!(rep.r_s > 0.03 && rep.r_s < 0.12, "{}", rep.r_s);
    }

    #[test]
    fn affinity_depends_only_on_column_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = gaussian(40, 3, &mut rng);
        let y = gaussian(40, 5, &mut rng).add(&x.matmul(&gaussian(3, 5, &mut rng)));
        let base = subspace_affinity(&x, &y).unwrap();
        assert!((subspace_affinity(&y, &x).unwrap() - base).abs() < 1e-12);
        let mix = gaussian(5, 5, &mut rng);
        assert!((subspace_affinity(&x, &y.matmul(&mix)).unwrap() - base).abs() < 1e-10);
    }
}
