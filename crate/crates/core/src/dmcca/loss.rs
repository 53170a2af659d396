//! Mean-ISC objective over top-layer activations and its analytic gradient.
//!
//! With `B = R_W + εI`, `A = R_B = R_T − R_W` and `Vᵀ B V = I`, each
//! generalized eigenvalue obeys
//! `dλ_d = v_dᵀ (dR_T − (λ_d + 1) dR_W − λ_d dε I) v_d`.
//! For a mini-batch of `M` rows, `R_T = (N/(M−1)) ĀᵀĀ` and
//! `R_W = (1/(N(M−1))) Σ_l H̄ˡᵀH̄ˡ`, so
//!
//! ```text
//! ∂λ_d/∂Hˡ = 2/(M−1) · [ Ā v vᵀ − (λ_d+1)/N · H̄ˡ v vᵀ − λ_d ‖v‖² ε'/N · H̄ˡ ]
//! ```
//!
//! where `ε' = ∂ε/∂Tr(R_W)` (zero for an absolute ridge). Summing over all
//! `K` components gives the closed form used below. The loss is the negated
//! mean ISC, so gradient descent maximizes correlation.

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::mcca::{centered_average, covariance_bundle, solve_isc, IscSolution, MultimodalDataset, Ridge};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct IscLossOutput<T> {
    /// `−mean ISC` over all `K` output components.
    pub loss: T,
    /// `∂loss/∂Hˡ`, one per modality.
    pub grads: Vec<Matrix<T>>,
    pub solution: IscSolution<T>,
    /// Set when `M ≤ K`: the batch cannot have full-rank covariance and the
    /// ridge is doing all the conditioning.
    pub rank_deficient: bool,
}

fn to_dataset<T: Scalar>(h_list: &[Matrix<T>]) -> Result<MultimodalDataset<T>> {
    if let Some(l) = h_list.iter().position(|h| !h.is_finite()) {
        return Err(Error::NonFinite(format!("activations of modality {l}")));
    }
    let data = MultimodalDataset::new(h_list.to_vec())?;
    if data.n_samples() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: data.n_samples() });
    }
    Ok(data)
}

/// Loss value only, using every output column.
pub fn isc_loss<T: Scalar>(h_list: &[Matrix<T>], ridge: Ridge<T>) -> Result<(T, IscSolution<T>)> {
    let data = to_dataset(h_list)?;
    let bundle = covariance_bundle(&data)?;
    let solution = solve_isc(&bundle, data.dim(), ridge)?;
    Ok((-solution.mean_isc(), solution))
}

/// Loss and `∂loss/∂Hˡ` for every modality.
pub fn isc_loss_and_grad<T: Scalar>(h_list: &[Matrix<T>], ridge: Ridge<T>) -> Result<IscLossOutput<T>> {
    let data = to_dataset(h_list)?;
    let (m, k, n) = (data.n_samples(), data.dim(), data.n_modalities());
    let bundle = covariance_bundle(&data)?;
    let solution = solve_isc(&bundle, k, ridge)?;

    let nf = T::from_usize_lossy(n);
    let kf = T::from_usize_lossy(k);
    let v = &solution.projections;
    let lambdas: Vec<T> = solution.isc.iter().map(|&r| r * (nf - T::one())).collect();

    let ridge_slope = match ridge {
        Ridge::Absolute(_) => T::zero(),
        Ridge::TraceScaled(rel) => rel / kf,
    };
    let ridge_term: T = lambdas
        .iter()
        .enumerate()
        .map(|(d, &l)| {
            let col = v.col(d);
            l * col.iter().map(|&x| x * x).sum::<T>()
        })
        .sum::<T>()
        * ridge_slope
        / nf;

    let vvt = v.matmul_t(v);
    let weighted = Matrix::from_fn(k, k, |i, d| v[(i, d)] * (lambdas[d] + T::one()) / nf).matmul_t(v);

    let (avg, _) = centered_average(&data);
    let shared = avg.matmul(&vvt);
    let scale = -(T::lit(2.0) / (T::from_usize_lossy(m - 1) * kf * (nf - T::one())));

    let grads = data
        .modalities()
        .iter()
        .map(|h| {
            let centered = h.sub_row_vector(&h.column_means());
            let mut g = shared.sub(&centered.matmul(&weighted));
            g.add_scaled(-ridge_term, &centered);
            g.scale(scale)
        })
        .collect();

    Ok(IscLossOutput { loss: -solution.mean_isc(), grads, solution, rank_deficient: m <= k })
}

/// Mean squared error `(1/(M K)) Σ (H − S)²` and its gradient with respect to `H`.
pub fn mse_loss_and_grad<T: Scalar>(output: &Matrix<T>, target: &Matrix<T>) -> Result<(T, Matrix<T>)> {
    if output.shape() != target.shape() {
        return Err(invalid(format!("mse: output {:?} vs target {:?}", output.shape(), target.shape())));
    }
    if !output.is_finite() {
        return Err(Error::NonFinite("network output".into()));
    }
    let count = T::from_usize_lossy(output.as_slice().len().max(1));
    let diff = output.sub(target);
    let loss = diff.as_slice().iter().map(|&d| d * d).sum::<T>() / count;
    Ok((loss, diff.scale(T::lit(2.0) / count)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
    }

    /// Correlated views: shared latent plus independent noise.
    fn views(n: usize, m: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Matrix<f64>> {
        let z = gaussian(m, k, rng);
        (0..n).map(|_| z.add(&gaussian(m, k, rng).scale(0.8))).collect()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
    }

    #[test]
    fn identical_views_sit_at_the_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = gaussian(40, 3, &mut rng);
        let out = isc_loss_and_grad(&vec![h.clone(); 3], Ridge::TraceScaled(1e-8)).unwrap();
        assert!((out.loss + 1.0).abs() < 1e-6);

        // Equal perturbation of every branch keeps the views identical.
        let p = gaussian(40, 3, &mut rng);
        let directional: f64 = out.grads.iter().map(|g| g.as_slice().iter().zip(p.as_slice()).map(|(a, b)| a * b).sum::<f64>()).sum();
        assert!(directional.abs() < 1e-6, "{directional}");
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = views(2, 64, 3, &mut rng);
        let ridge = Ridge::TraceScaled(1e-6);
        let out = isc_loss_and_grad(&h, ridge).unwrap();
        let step = 1e-5;
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let l = rng.random_range(0..2);
            let (i, j) = (rng.random_range(0..64), rng.random_range(0..3));
            let mut plus = h.clone();
            plus[l][(i, j)] += step;
            let mut minus = h.clone();
            minus[l][(i, j)] -= step;
            let fd = (isc_loss(&plus, ridge).unwrap().0 - isc_loss(&minus, ridge).unwrap().0) / (2.0 * step);
            worst = worst.max(rel_err(out.grads[l][(i, j)], fd));
        }
        assert!(worst < 1e-5, "max relative error {worst}");
    }

    #[test]
    fn absolute_ridge_gradient_matches_too() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = views(3, 30, 4, &mut rng);
        let ridge = Ridge::Absolute(1e-3);
        let out = isc_loss_and_grad(&h, ridge).unwrap();
        let step = 1e-5;
        for _ in 0..20 {
            let (l, i, j) = (rng.random_range(0..3), rng.random_range(0..30), rng.random_range(0..4));
            let mut plus = h.clone();
            plus[l][(i, j)] += step;
            let mut minus = h.clone();
            minus[l][(i, j)] -= step;
            let fd = (isc_loss(&plus, ridge).unwrap().0 - isc_loss(&minus, ridge).unwrap().0) / (2.0 * step);
            assert!(rel_err(out.grads[l][(i, j)], fd) < 1e-5);
        }
    }

    #[test]
    fn loss_is_scale_and_order_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = views(3, 50, 4, &mut rng);
        let ridge = Ridge::TraceScaled(1e-6);
        let base = isc_loss(&h, ridge).unwrap().0;
        let scaled: Vec<_> = h.iter().map(|m| m.scale(2.0)).collect();
        assert!((isc_loss(&scaled, ridge).unwrap().0 - base).abs() < 1e-8);
        let order: Vec<usize> = (0..50).rev().collect();
        let permuted: Vec<_> = h.iter().map(|m| m.select_rows(&order)).collect();
        assert!((isc_loss(&permuted, ridge).unwrap().0 - base).abs() < 1e-8);
    }

    #[test]
    fn rank_deficient_batches_are_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = views(2, 4, 5, &mut rng);
        let out = isc_loss_and_grad(&h, Ridge::TraceScaled(1e-3)).unwrap();
        assert!(out.rank_deficient);
        let mut bad = h.clone();
        bad[0][(0, 0)] = f64::NAN;
        assert!(matches!(isc_loss_and_grad(&bad, Ridge::default()), Err(Error::NonFinite(_))));
    }

    #[test]
    fn mse_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = gaussian(10, 3, &mut rng);
        let s = gaussian(10, 3, &mut rng);
        let (_, g) = mse_loss_and_grad(&h, &s).unwrap();
        for i in 0..10 {
            for j in 0..3 {
                let mut plus = h.clone();
                plus[(i, j)] += 1e-5;
                let mut minus = h.clone();
                minus[(i, j)] -= 1e-5;
                let fd = (mse_loss_and_grad(&plus, &s).unwrap().0 - mse_loss_and_grad(&minus, &s).unwrap().0) / 2e-5;
                assert!(rel_err(g[(i, j)], fd) < 1e-5);
            }
        }
    }
}
