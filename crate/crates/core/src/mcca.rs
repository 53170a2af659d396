//! Linear multiset CCA.
//!
//! Covariances are feature-space (`D × D`) and carry the common factor
//! `1 / (N (T − 1))`:
//!
//! * within-set `R_W = c Σ_l X̄ˡᵀ X̄ˡ`
//! * total `R_T = c N² ĀᵀĀ` where `Ā` is the modality average centered by the grand mean
//! * between-set `R_B = R_T − R_W = c Σ_{l≠k} X̄ˡᵀ X̄ᵏ`
//!
//! The inter-set correlation of a direction `v` is
//! `ρ = vᵀR_B v / ((N − 1) vᵀR_W v)`, which is 1 for identical modalities.

use crate::error::{invalid, Error, Result};
use crate::linalg::{gev_solve, Matrix};
use crate::scalar::Scalar;

/// `N ≥ 2` modalities observed on the same `T` samples, each `T × D`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultimodalDataset<T> {
    modalities: Vec<Matrix<T>>,
}

impl<T: Scalar> MultimodalDataset<T> {
    pub fn new(modalities: Vec<Matrix<T>>) -> Result<Self> {
        if modalities.len() < 2 {
            return Err(invalid(format!("need at least 2 modalities, got {}", modalities.len())));
        }
        let shape = modalities[0].shape();
        if let Some((l, m)) = modalities.iter().enumerate().find(|(_, m)| m.shape() != shape) {
            return Err(invalid(format!(
                "modality {l} has shape {:?}, modality 0 has {:?}",
                m.shape(),
                shape
            )));
        }
        Ok(Self { modalities })
    }

    pub fn n_modalities(&self) -> usize {
        self.modalities.len()
    }

    pub fn n_samples(&self) -> usize {
        self.modalities[0].rows()
    }

    pub fn dim(&self) -> usize {
        self.modalities[0].cols()
    }

    pub fn modality(&self, l: usize) -> &Matrix<T> {
        &self.modalities[l]
    }

    pub fn modalities(&self) -> &[Matrix<T>] {
        &self.modalities
    }

    pub fn into_modalities(self) -> Vec<Matrix<T>> {
        self.modalities
    }

    /// Same samples (in the given order) from every modality.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self { modalities: self.modalities.iter().map(|m| m.select_rows(indices)).collect() }
    }
}

/// The three covariance matrices plus the statistics used to build them.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceBundle<T> {
    pub r_w: Matrix<T>,
    pub r_t: Matrix<T>,
    pub r_b: Matrix<T>,
    pub grand_mean: Vec<T>,
    pub n_modalities: usize,
    pub n_samples: usize,
}

impl<T: Scalar> CovarianceBundle<T> {
    /// Assembles a bundle from `R_W` and `R_T`; `R_B` is their difference.
    pub fn from_parts(
        r_w: Matrix<T>,
        r_t: Matrix<T>,
        grand_mean: Vec<T>,
        n_modalities: usize,
        n_samples: usize,
    ) -> Result<Self> {
        if r_w.shape() != r_t.shape() || !r_w.is_square() {
            return Err(invalid("covariance bundle: R_W and R_T must be square and equal-sized"));
        }
        if n_modalities < 2 {
            return Err(invalid("covariance bundle: need at least 2 modalities"));
        }
        let r_b = r_t.sub(&r_w);
        Ok(Self { r_w, r_t, r_b, grand_mean, n_modalities, n_samples })
    }

    pub fn dim(&self) -> usize {
        self.r_w.rows()
    }
}

/// Ridge added to the diagonal of `R_W` before the generalized eigensolve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ridge<T> {
    Absolute(T),
    /// Multiple of `Tr(R_W) / D`.
    TraceScaled(T),
}

impl<T: Scalar> Default for Ridge<T> {
    fn default() -> Self {
        Ridge::TraceScaled(T::lit(1e-6))
    }
}

impl<T: Scalar> Ridge<T> {
    pub fn resolve(&self, r_w: &Matrix<T>) -> T {
        match *self {
            Ridge::Absolute(eps) => eps,
            Ridge::TraceScaled(rel) => rel * r_w.trace() / T::from_usize_lossy(r_w.rows().max(1)),
        }
    }
}

/// Projections `V` (`D × K`, columns `R_W`-orthonormal) with their ISC values.
#[derive(Clone, Debug, PartialEq)]
pub struct IscSolution<T> {
    pub projections: Matrix<T>,
    /// Descending.
    pub isc: Vec<T>,
    /// Absolute ridge that was added to `R_W`.
    pub epsilon: T,
    /// Grand mean of the fitting data, for callers that want to center before [`transform`].
    pub grand_mean: Vec<T>,
}

impl<T: Scalar> IscSolution<T> {
    pub fn k(&self) -> usize {
        self.isc.len()
    }

    pub fn mean_isc(&self) -> T {
        self.isc.iter().copied().sum::<T>() / T::from_usize_lossy(self.isc.len().max(1))
    }
}

fn checked_samples<T: Scalar>(data: &MultimodalDataset<T>) -> Result<usize> {
    let t = data.n_samples();
    if t < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: t });
    }
    Ok(t)
}

fn common_factor<T: Scalar>(n: usize, t: usize) -> T {
    T::one() / (T::from_usize_lossy(n) * T::from_usize_lossy(t - 1))
}

/// `R_W = (1 / (N (T − 1))) Σ_l X̄ˡᵀ X̄ˡ`, each modality centered by its own mean.
pub fn within_set_cov<T: Scalar>(data: &MultimodalDataset<T>) -> Result<Matrix<T>> {
    let t = checked_samples(data)?;
    let d = data.dim();
    let mut acc = Matrix::zeros(d, d);
    for x in data.modalities() {
        let centered = x.sub_row_vector(&x.column_means());
        acc.add_assign(&centered.t_matmul(&centered));
    }
    Ok(acc.scale(common_factor(data.n_modalities(), t)).symmetrized())
}

/// Modality average with the grand mean removed, and the grand mean.
pub(crate) fn centered_average<T: Scalar>(data: &MultimodalDataset<T>) -> (Matrix<T>, Vec<T>) {
    let n = data.n_modalities();
    let (t, d) = (data.n_samples(), data.dim());
    let mut avg = Matrix::zeros(t, d);
    for x in data.modalities() {
        avg.add_assign(x);
    }
    let avg = avg.scale(T::one() / T::from_usize_lossy(n));
    let mu = avg.column_means();
    (avg.sub_row_vector(&mu), mu)
}

/// `R_T = (N / (T − 1)) ĀᵀĀ` (the common factor times `N² ĀᵀĀ`) and the grand mean.
pub fn total_cov<T: Scalar>(data: &MultimodalDataset<T>) -> Result<(Matrix<T>, Vec<T>)> {
    let t = checked_samples(data)?;
    let n = data.n_modalities();
    let (centered, mu) = centered_average(data);
    let nf = T::from_usize_lossy(n);
    let scale = common_factor::<T>(n, t) * nf * nf;
    Ok((centered.t_matmul(&centered).scale(scale).symmetrized(), mu))
}

/// `R_W`, `R_T` and `R_B = R_T − R_W`; the pairwise sum is never formed.
pub fn covariance_bundle<T: Scalar>(data: &MultimodalDataset<T>) -> Result<CovarianceBundle<T>> {
    let r_w = within_set_cov(data)?;
    let (r_t, mu) = total_cov(data)?;
    CovarianceBundle::from_parts(r_w, r_t, mu, data.n_modalities(), data.n_samples())
}

/// Top-`k` generalized eigenvectors of `(R_B, R_W + εI)` from a bundle.
pub fn solve_isc<T: Scalar>(bundle: &CovarianceBundle<T>, k: usize, ridge: Ridge<T>) -> Result<IscSolution<T>> {
    let d = bundle.dim();
    if k == 0 || k > d {
        return Err(invalid(format!("k = {k} must lie in 1..={d}")));
    }
    if !bundle.r_w.is_finite() || !bundle.r_t.is_finite() {
        return Err(Error::NonFinite("covariance contains NaN or Inf".into()));
    }
    let epsilon = ridge.resolve(&bundle.r_w);
    let mut b = bundle.r_w.clone();
    b.add_to_diag(epsilon);
    let eig = gev_solve(&bundle.r_b.symmetrized(), &b)?;
    let scale = T::one() / T::from_usize_lossy(bundle.n_modalities - 1);
    Ok(IscSolution {
        projections: eig.vectors.leading_columns(k),
        isc: eig.values.iter().take(k).map(|&l| l * scale).collect(),
        epsilon,
        grand_mean: bundle.grand_mean.clone(),
    })
}

/// Fits linear MCCA: `k` projections maximizing inter-set correlation.
pub fn fit_mcca<T: Scalar>(data: &MultimodalDataset<T>, k: usize, ridge: Ridge<T>) -> Result<IscSolution<T>> {
    if k == 0 || k > data.dim() {
        return Err(invalid(format!("k = {k} must lie in 1..={}", data.dim())));
    }
    solve_isc(&covariance_bundle(data)?, k, ridge)
}

/// `Y = X V`. No centering is applied; subtract `solution.grand_mean` first if wanted.
pub fn transform<T: Scalar>(x: &Matrix<T>, solution: &IscSolution<T>) -> Result<Matrix<T>> {
    if x.cols() != solution.projections.rows() {
        return Err(invalid(format!(
            "transform: data has {} features, projections expect {}",
            x.cols(),
            solution.projections.rows()
        )));
    }
    Ok(x.matmul(&solution.projections))
}

/// Mean ISC of the top `k` components, which for `R_W`-orthonormal
/// projections equals `Tr(VᵀR_B V) / (k (N − 1))`.
pub fn mean_isc_loss<T: Scalar>(
    bundle: &CovarianceBundle<T>,
    k: usize,
    ridge: Ridge<T>,
) -> Result<(T, IscSolution<T>)> {
    let solution = solve_isc(bundle, k, ridge)?;
    Ok((solution.mean_isc(), solution))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
    }

    fn sample_cov(x: &Matrix<f64>) -> Matrix<f64> {
        let c = x.sub_row_vector(&x.column_means());
        c.t_matmul(&c).scale(1.0 / (x.rows() - 1) as f64)
    }

    /// Two-loop summation of per-modality outer products.
    fn naive_within(data: &MultimodalDataset<f64>) -> Matrix<f64> {
        let (t, d, n) = (data.n_samples(), data.dim(), data.n_modalities());
        let mut out = Matrix::zeros(d, d);
        for x in data.modalities() {
            let mu = x.column_means();
            for i in 0..d {
                for j in 0..d {
                    let mut s = 0.0;
                    for r in 0..t {
                        s += (x[(r, i)] - mu[i]) * (x[(r, j)] - mu[j]);
                    }
                    out[(i, j)] += s;
                }
            }
        }
        out.scale(1.0 / (n * (t - 1)) as f64)
    }

    #[test]
    fn within_set_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = gaussian(30, 3, &mut rng);
        let data = MultimodalDataset::new(vec![x.clone(), x.clone()]).unwrap();
        assert!(within_set_cov(&data).unwrap().max_abs_diff(&sample_cov(&x)) < 1e-12);

        let data = MultimodalDataset::new((0..3).map(|_| gaussian(200, 4, &mut rng)).collect()).unwrap();
        let rw = within_set_cov(&data).unwrap();
        assert!(rw.max_abs_diff(&naive_within(&data)) < 1e-12);
        assert!(sym_eig(&rw).unwrap().values.iter().all(|&v| v >= -1e-10));
    }

    #[test]
    fn within_set_needs_two_samples() {
        let x = Matrix::<f64>::zeros(1, 3);
        let data = MultimodalDataset::new(vec![x.clone(), x]).unwrap();
        assert!(matches!(within_set_cov(&data), Err(Error::InsufficientSamples { .. })));
        assert!(matches!(total_cov(&data), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn total_cov_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = gaussian(40, 3, &mut rng);
        let n = 4;
        let data = MultimodalDataset::new(vec![x.clone(); n]).unwrap();
        let (rt, mu) = total_cov(&data).unwrap();
        assert!(rt.max_abs_diff(&sample_cov(&x).scale(n as f64)) < 1e-12);
        assert!(mu.iter().zip(x.column_means()).all(|(a, b)| (a - b).abs() < 1e-14));

        let x = x.sub_row_vector(&x.column_means());
        let data = MultimodalDataset::new(vec![x.clone(), x.scale(-1.0)]).unwrap();
        let (rt, _) = total_cov(&data).unwrap();
        assert!(rt.max_abs() < 1e-14);
    }

    #[test]
    fn bundle_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = gaussian(50, 4, &mut rng);
        let data = MultimodalDataset::new(vec![x.clone(); 3]).unwrap();
        let b = covariance_bundle(&data).unwrap();
        assert!(b.r_b.max_abs_diff(&b.r_w.scale(2.0)) < 1e-10);
        assert_eq!(b.r_t.sub(&b.r_w).sub(&b.r_b).max_abs(), 0.0);

        let data = MultimodalDataset::new((0..3).map(|_| gaussian(50_000, 4, &mut rng)).collect()).unwrap();
        let b = covariance_bundle(&data).unwrap();
        assert!(b.r_b.frobenius_norm() / b.r_w.frobenius_norm() < 0.05);
    }

    #[test]
    fn fit_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = gaussian(300, 5, &mut rng);
        let data = MultimodalDataset::new(vec![x.clone(); 3]).unwrap();
        let sol = fit_mcca(&data, 5, Ridge::TraceScaled(1e-8)).unwrap();
        assert!(sol.isc.iter().all(|&r| (r - 1.0).abs() < 1e-6), "{:?}", sol.isc);

        let data = MultimodalDataset::new((0..3).map(|_| gaussian(50_000, 4, &mut rng)).collect()).unwrap();
        let sol = fit_mcca(&data, 4, Ridge::default()).unwrap();
        assert!(sol.isc.iter().all(|r| r.abs() < 0.05), "{:?}", sol.isc);

        assert!(matches!(fit_mcca(&data, 5, Ridge::default()), Err(Error::InvalidInput(_))));
        assert!(matches!(fit_mcca(&data, 0, Ridge::default()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn diagonal_bundle_has_known_isc_and_loss() {
        let rw = Matrix::<f64>::identity(2);
        let rb = Matrix::<f64>::from_diag(&[3.0, 1.0]);
        let bundle = CovarianceBundle::from_parts(rw.clone(), rb.add(&rw), vec![0.0; 2], 2, 10).unwrap();
        let (loss, sol) = mean_isc_loss(&bundle, 2, Ridge::Absolute(0.0)).unwrap();
        assert!((sol.isc[0] - 3.0).abs() < 1e-12 && (sol.isc[1] - 1.0).abs() < 1e-12);
        assert!((loss - 2.0).abs() < 1e-12);
        let vbv = sol.projections.t_matmul(&bundle.r_w.matmul(&sol.projections));
        assert!(vbv.max_abs_diff(&Matrix::identity(2)) < 1e-12);
    }

    #[test]
    fn transform_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = gaussian(7, 3, &mut rng);
        let sol = |v: Matrix<f64>| IscSolution { isc: vec![0.0; v.cols()], projections: v, epsilon: 0.0, grand_mean: vec![] };
        assert_eq!(transform(&x, &sol(Matrix::identity(3))).unwrap(), x);
        assert_eq!(transform(&Matrix::zeros(4, 3), &sol(gaussian(3, 2, &mut rng))).unwrap().max_abs(), 0.0);

        let v = gaussian(3, 2, &mut rng);
        let y = transform(&x, &sol(v.clone())).unwrap();
        for i in 0..7 {
            for j in 0..2 {
                let mut s = 0.0;
                for p in 0..3 {
                    s += x[(i, p)] * v[(p, j)];
                }
                assert!((y[(i, j)] - s).abs() < 1e-12);
            }
        }
        assert!(transform(&Matrix::zeros(2, 4), &sol(v)).is_err());
    }

    #[test]
    fn identical_modalities_loss_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = gaussian(100, 4, &mut rng);
        let data = MultimodalDataset::new(vec![x; 2]).unwrap();
        let (loss, _) = mean_isc_loss(&covariance_bundle(&data).unwrap(), 4, Ridge::TraceScaled(1e-8)).unwrap();
        assert!((loss - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dataset_validation() {
        let a = Matrix::<f64>::zeros(3, 2);
        assert!(MultimodalDataset::new(vec![a.clone()]).is_err());
        assert!(MultimodalDataset::new(vec![a, Matrix::zeros(3, 3)]).is_err());
    }
}
