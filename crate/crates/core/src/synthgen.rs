//! Synthetic multimodal data with a known shared signal.
//!
//! For every modality `l` and sample `t`:
//!
//! ```text
//! x_s = A_sˡ s_t + ηˡ_t            A_sˡ = O_sˡ D_sˡ  (D × K)
//! x_n = A_nˡ nˡ_t                  A_nˡ = O_nˡ D_nˡ  (D × D)
//! x_n ← α x_n,t + (1 − α) x_n,t−1  (recursive, over t)
//! y   = β x_s + (1 − β) x_n
//! ```
//!
//! `s_t` is shared by all modalities; `nˡ`, `ηˡ` and the mixing matrices are
//! drawn independently per modality.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::dmcca::rng_stream;
use crate::error::{invalid, Result};
use crate::linalg::{random_orthonormal, Matrix};
use crate::mcca::MultimodalDataset;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub t_samples: usize,
    pub ambient_dim: usize,
    pub signal_dim: usize,
    pub n_modalities: usize,
    /// β: weight of the signal image in the observation.
    pub snr_mix: f64,
    /// α: weight of the current sample in the noise recursion.
    pub spatial_corr: f64,
    /// σ_η of the additive signal-side noise.
    pub additive_noise_scale: f64,
    /// Range of the uniform diagonal gains in `D_sˡ`, `D_nˡ`.
    pub diag_scale_range: (f64, f64),
    pub seed: u64,
}

impl SynthConfig {
    /// T=100000, D=1024, K=10, N=5, β=0.7, α=0.5.
    pub fn paper_scale() -> Self {
        Self {
            t_samples: 100_000,
            ambient_dim: 1024,
            signal_dim: 10,
            n_modalities: 5,
            snr_mix: 0.7,
            spatial_corr: 0.5,
            additive_noise_scale: 0.1,
            diag_scale_range: (0.5, 1.5),
            seed: 0,
        }
    }

    /// Same mixing parameters at T=20000, D=256.
    pub fn desk_scale() -> Self {
        Self { t_samples: 20_000, ambient_dim: 256, ..Self::paper_scale() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_samples == 0 || self.ambient_dim == 0 || self.signal_dim == 0 {
            return Err(invalid("T, D and K must all be >= 1"));
        }
        if self.signal_dim > self.ambient_dim {
            return Err(invalid(format!("signal dim {} exceeds ambient dim {}", self.signal_dim, self.ambient_dim)));
        }
        if self.n_modalities < 2 {
            return Err(invalid("need at least 2 modalities"));
        }
        for (name, v) in [("beta", self.snr_mix), ("alpha", self.spatial_corr)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !(self.additive_noise_scale.is_finite() && self.additive_noise_scale >= 0.0) {
            return Err(invalid("additive noise scale must be finite and >= 0"));
        }
        let (lo, hi) = self.diag_scale_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(invalid(format!("bad diagonal scale range ({lo}, {hi})")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthDataset<T> {
    pub observations: MultimodalDataset<T>,
    /// Shared signal `S`, `T × K`.
    pub source_signal: Matrix<T>,
    pub signal_images: Vec<Matrix<T>>,
    /// Noise images after the recursive filter.
    pub noise_images: Vec<Matrix<T>>,
    pub signal_mixing: Vec<Matrix<T>>,
    pub noise_mixing: Vec<Matrix<T>>,
}

/// In-order recursion `x_t ← α x_t + (1 − α) x_{t−1}` over the rows, using the
/// already filtered previous row. The first row passes through.
pub fn ar_filter<T: Scalar>(x: &Matrix<T>, alpha: f64) -> Matrix<T> {
    let a = T::lit(alpha);
    let b = T::one() - a;
    let mut out = x.clone();
    for t in 1..out.rows() {
        let cols = out.cols();
        let (head, tail) = out.as_mut_slice().split_at_mut(t * cols);
        let prev = &head[(t - 1) * cols..];
        for (cur, &p) in tail[..cols].iter_mut().zip(prev) {
            *cur = a * *cur + b * p;
        }
    }
    out
}

fn gaussian<T: Scalar>(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<T> {
    Matrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        T::lit(z)
    })
}

/// `O D` with `O` random orthonormal and `D` uniform diagonal gains.
fn mixing<T: Scalar>(rows: usize, cols: usize, range: (f64, f64), rng: &mut ChaCha8Rng) -> Result<Matrix<T>> {
    let mut o = random_orthonormal::<T, _>(rows, cols, rng)?;
    let gains: Vec<T> = (0..cols)
        .map(|_| T::lit(if range.0 < range.1 { rng.random_range(range.0..range.1) } else { range.0 }))
        .collect();
    for i in 0..rows {
        for (v, &g) in o.row_mut(i).iter_mut().zip(&gains) {
            *v = *v * g;
        }
    }
    Ok(o)
}

pub fn generate<T: Scalar>(config: &SynthConfig) -> Result<SynthDataset<T>> {
    config.validate()?;
    let (t, d, k, n) = (config.t_samples, config.ambient_dim, config.signal_dim, config.n_modalities);
    let beta = T::lit(config.snr_mix);
    let one_minus_beta = T::one() - beta;

    let source_signal = gaussian::<T>(t, k, &mut rng_stream(config.seed, 100));
    let eta = Normal::new(0.0, config.additive_noise_scale).map_err(|e| invalid(e.to_string()))?;

    let mut observations = Vec::with_capacity(n);
    let mut signal_images = Vec::with_capacity(n);
    let mut noise_images = Vec::with_capacity(n);
    let mut signal_mixing = Vec::with_capacity(n);
    let mut noise_mixing = Vec::with_capacity(n);
    for l in 0..n {
        let mut rng = rng_stream(config.seed, 101 + l as u64);
        let a_s = mixing::<T>(d, k, config.diag_scale_range, &mut rng)?;
        let a_n = mixing::<T>(d, d, config.diag_scale_range, &mut rng)?;

        let mut x_s = source_signal.matmul_t(&a_s);
        if config.additive_noise_scale > 0.0 {
            for v in x_s.as_mut_slice() {
                *v = *v + T::lit(eta.sample(&mut rng));
            }
        }
        let noise = gaussian::<T>(t, d, &mut rng);
        let x_n = ar_filter(&noise.matmul_t(&a_n), config.spatial_corr);
        let y = x_s.zip_with(&x_n, |s, z| beta * s + one_minus_beta * z);

        observations.push(y);
        signal_images.push(x_s);
        noise_images.push(x_n);
        signal_mixing.push(a_s);
        noise_mixing.push(a_n);
    }
    Ok(SynthDataset {
        observations: MultimodalDataset::new(observations)?,
        source_signal,
        signal_images,
        noise_images,
        signal_mixing,
        noise_mixing,
    })
}
