//! Data → model → test embeddings → metrics, shared by every command so the
//! sweep, `train`/`transform`/`eval` and `table1` report identical numbers.

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use dmcca_core::dmcca::{
    isc_loss, rng_stream, train_dmcca, train_supervised, Activation, BranchNetwork, DataSplit, EpochRecord, Layer,
    LayerSpec, StopReason,
};
use dmcca_core::linalg::{cholesky, solve_lower, solve_lower_transpose, Matrix};
use dmcca_core::mcca::{fit_mcca, MultimodalDataset};
use dmcca_core::metrics::{affinity_report, AffinityReport, Centering};
use dmcca_core::synthgen::generate;
use dmcca_core::Error;

use crate::config::{ActivationSetting, ExperimentConfig, Method};
use crate::error::{CliError, CliResult};

const STREAM_RANDOM_BASELINE: u64 = 300;

/// Observations and ground truth; the intermediate signal and noise images
/// are dropped to bound memory.
#[derive(Clone, Debug)]
pub struct SynthData {
    pub data: MultimodalDataset<f64>,
    pub source: Matrix<f64>,
}

pub fn synthesize(config: &ExperimentConfig, seed: u64) -> CliResult<SynthData> {
    let ds = generate::<f64>(&config.synth.to_config(seed))?;
    Ok(SynthData { data: ds.observations, source: ds.source_signal })
}

#[derive(Clone, Debug)]
pub struct FittedModel {
    pub method: Method,
    pub networks: Vec<BranchNetwork<f64>>,
    pub split: DataSplit,
    pub history: Vec<EpochRecord>,
    pub initial_val_loss: f64,
    /// `None` for closed-form fits.
    pub stop_reason: Option<StopReason>,
    pub seed: u64,
}

impl FittedModel {
    pub fn epochs_run(&self) -> usize {
        self.history.len()
    }

    pub fn final_val_loss(&self) -> f64 {
        self.history.last().map_or(self.initial_val_loss, |r| r.val_loss)
    }
}

fn linear_branch(weights: Matrix<f64>) -> CliResult<BranchNetwork<f64>> {
    let (out_dim, in_dim) = weights.shape();
    Ok(BranchNetwork::from_layers(vec![Layer {
        spec: LayerSpec::new(in_dim, out_dim, Activation::Linear),
        weights,
        bias: vec![0.0; out_dim],
    }])?)
}

/// Trains `method` with `k` outputs and batch size `batch`. Supervised
/// training needs `source` and uses its width as the output width.
#[allow(clippy::too_many_arguments)]
pub fn fit(
    config: &ExperimentConfig,
    method: Method,
    activation: ActivationSetting,
    data: &MultimodalDataset<f64>,
    source: Option<&Matrix<f64>>,
    k: usize,
    batch: usize,
    seed: u64,
) -> CliResult<FittedModel> {
    let d = data.dim();
    let arch = &config.arch;
    match method {
        Method::Dmcca => {
            let specs = arch.specs(d, k, activation, arch.dmcca_dropout);
            let run = train_dmcca(data, &specs, &config.train_config(method, k, batch, seed))?;
            Ok(FittedModel {
                method,
                networks: run.networks,
                split: run.split,
                history: run.history,
                initial_val_loss: run.initial_val_loss,
                stop_reason: Some(run.stop_reason),
                seed,
            })
        }
        Method::Supervised => {
            let source = source.ok_or_else(|| CliError::Config("supervised training needs a source signal".into()))?;
            let k = source.cols();
            let dropout = match activation {
                ActivationSetting::Tanh => arch.supervised_tanh_dropout,
                ActivationSetting::Linear => 0.0,
            };
            let specs = arch.specs(d, k, activation, dropout);
            let targets = vec![source.clone(); data.n_modalities()];
            let run = train_supervised(data, &targets, &specs, &config.train_config(method, k, batch, seed))?;
            Ok(FittedModel {
                method,
                networks: run.networks,
                split: run.split,
                history: run.history,
                initial_val_loss: run.initial_val_loss,
                stop_reason: Some(run.stop_reason),
                seed,
            })
        }
        Method::Mcca => {
            let t = &config.train;
            let split = DataSplit::new(data.n_samples(), t.val_fraction, t.test_fraction, seed)?;
            let sol = fit_mcca(&data.select_rows(&split.train), k, config.ridge())?;
            let w = sol.projections.transpose();
            let networks = (0..data.n_modalities()).map(|_| linear_branch(w.clone())).collect::<CliResult<_>>()?;
            Ok(FittedModel { method, networks, split, history: Vec::new(), initial_val_loss: f64::NAN, stop_reason: None, seed })
        }
    }
}

/// Eval-mode outputs of every branch on the rows in `rows`.
pub fn embed_rows(networks: &[BranchNetwork<f64>], data: &MultimodalDataset<f64>, rows: &[usize]) -> CliResult<Vec<Matrix<f64>>> {
    if networks.len() != data.n_modalities() {
        return Err(Error::InvalidInput(format!("{} branches for {} modalities", networks.len(), data.n_modalities())).into());
    }
    networks
        .iter()
        .zip(data.modalities())
        .map(|(net, x)| {
            if net.in_dim() != x.cols() {
                return Err(Error::InvalidInput(format!("branch expects {} features, data has {}", net.in_dim(), x.cols())).into());
            }
            Ok(net.predict(&x.select_rows(rows))?)
        })
        .collect()
}

pub fn centering(config: &ExperimentConfig) -> Centering {
    if config.center_affinity {
        Centering::Centered
    } else {
        Centering::Raw
    }
}

pub fn score(config: &ExperimentConfig, embeddings: &[Matrix<f64>], source: &Matrix<f64>) -> CliResult<AffinityReport> {
    let sources = vec![source.clone(); embeddings.len()];
    Ok(affinity_report(&sources, embeddings, centering(config))?)
}

/// Mean ISC of the embeddings, using every column.
pub fn mean_isc(config: &ExperimentConfig, embeddings: &[Matrix<f64>]) -> CliResult<f64> {
    Ok(-isc_loss(embeddings, config.ridge())?.0)
}

/// Independent standard-normal embeddings, one per modality.
pub fn random_embeddings(rows: usize, k: usize, n: usize, seed: u64) -> Vec<Matrix<f64>> {
    let mut rng = rng_stream(seed, STREAM_RANDOM_BASELINE);
    (0..n).map(|_| Matrix::from_fn(rows, k, |_, _| StandardNormal.sample(&mut rng))).collect()
}

/// Closed-form least-squares regression of `source` on each modality over
/// the training rows, applied to the test rows: the ceiling any linear
/// supervised branch can reach.
pub fn least_squares_embeddings(
    data: &MultimodalDataset<f64>,
    source: &Matrix<f64>,
    split: &DataSplit,
    ridge: f64,
) -> CliResult<Vec<Matrix<f64>>> {
    let target = source.select_rows(&split.train);
    data.modalities()
        .iter()
        .map(|x| {
            let xt = x.select_rows(&split.train);
            let mut gram = xt.t_matmul(&xt);
            let scale = gram.trace() / gram.rows() as f64;
            gram.add_to_diag(ridge * scale);
            let l = cholesky(&gram)?;
            let w = solve_lower_transpose(&l, &solve_lower(&l, &xt.t_matmul(&target)));
            Ok(x.select_rows(&split.test).matmul(&w))
        })
        .collect()
}

/// Everything reported for one trained configuration on its test split.
#[derive(Clone, Debug, Serialize)]
pub struct PointMetrics {
    pub r_a: f64,
    pub r_s: f64,
    pub per_modality: Vec<f64>,
    pub per_pair: Vec<((usize, usize), f64)>,
    pub test_isc: f64,
    pub final_val_loss: f64,
    pub epochs: usize,
    pub stop_reason: String,
}

pub fn stop_label(reason: Option<StopReason>) -> String {
    match reason {
        Some(StopReason::EarlyStop) => "early-stop".into(),
        Some(StopReason::MaxEpochs) => "max-epochs".into(),
        None => "closed-form".into(),
    }
}

pub fn evaluate_model(config: &ExperimentConfig, model: &FittedModel, synth: &SynthData) -> CliResult<PointMetrics> {
    let emb = embed_rows(&model.networks, &synth.data, &model.split.test)?;
    let rep = score(config, &emb, &synth.source.select_rows(&model.split.test))?;
    Ok(PointMetrics {
        r_a: rep.r_a,
        r_s: rep.r_s,
        per_modality: rep.per_modality,
        per_pair: rep.per_pair,
        test_isc: mean_isc(config, &emb)?,
        final_val_loss: model.final_val_loss(),
        epochs: model.epochs_run(),
        stop_reason: stop_label(model.stop_reason),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.synth.t_samples = 600;
        c.synth.ambient_dim = 12;
        c.synth.signal_dim = 3;
        c.synth.n_modalities = 3;
        c.train.max_epochs = 3;
        c.train.batch_size = 50;
        c
    }

    #[test]
    fn every_method_produces_test_embeddings() {
        let c = small();
        let s = synthesize(&c, 4).unwrap();
        for method in [Method::Dmcca, Method::Supervised, Method::Mcca] {
            let m = fit(&c, method, ActivationSetting::Linear, &s.data, Some(&s.source), 3, 50, 4).unwrap();
            let metrics = evaluate_model(&c, &m, &s).unwrap();
            assert!((0.0..=1.0).contains(&metrics.r_a) && (0.0..=1.0).contains(&metrics.r_s), "{method:?}");
            assert_eq!(m.split.test.len(), 60);
        }
    }

    #[test]
    fn mcca_branches_apply_projection() {
        let c = small();
        let s = synthesize(&c, 1).unwrap();
        let m = fit(&c, Method::Mcca, ActivationSetting::Linear, &s.data, None, 2, 50, 1).unwrap();
        let sol = fit_mcca(&s.data.select_rows(&m.split.train), 2, c.ridge()).unwrap();
        let emb = embed_rows(&m.networks, &s.data, &m.split.test).unwrap();
        let direct = s.data.modality(1).select_rows(&m.split.test).matmul(&sol.projections);
        assert!(emb[1].max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn least_squares_recovers_noiseless_source() {
        let mut c = small();
        c.synth.snr_mix = 1.0;
        c.synth.additive_noise_scale = 0.0;
        let s = synthesize(&c, 2).unwrap();
        let split = DataSplit::new(600, 0.2, 0.1, 2).unwrap();
        let emb = least_squares_embeddings(&s.data, &s.source, &split, 1e-10).unwrap();
        let target = s.source.select_rows(&split.test);
        assert!(emb[0].max_abs_diff(&target) < 1e-6);
    }
}
