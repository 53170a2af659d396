//! Mini-batch training loops for the correlation objective and for the
//! supervised reconstruction baseline.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::{isc_loss, isc_loss_and_grad, mse_loss_and_grad};
use super::network::{BranchNetwork, LayerSpec, Mode};
use super::optim::{OptimizerConfig, OptimizerState};
use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::mcca::{MultimodalDataset, Ridge};
use crate::scalar::Scalar;

const STREAM_SPLIT: u64 = 0;
const STREAM_INIT: u64 = 1;
const STREAM_BATCHES: u64 = 2;
const STREAM_DROPOUT: u64 = 3;

/// Independent, reproducible random stream `stream` derived from `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// How the `N` branches are initialized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitScheme {
    /// Every branch starts from the same weights.
    Shared,
    /// Each branch draws its own weights.
    Independent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig<T> {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop once `|val(e) − val(e−1)|` stays below this for `early_stop_patience` epochs.
    pub early_stop_tolerance: f64,
    pub early_stop_patience: usize,
    /// Output width of every branch.
    pub k_components: usize,
    pub ridge: Ridge<T>,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub init: InitScheme,
}

impl<T: Scalar> TrainConfig<T> {
    /// RMSProp (1e-3, decay 0.9), 70/20/10 split, patience 5 at tolerance 1e-6.
    pub fn dmcca(k_components: usize, batch_size: usize) -> Self {
        Self {
            batch_size,
            max_epochs: 100,
            early_stop_tolerance: 1e-6,
            early_stop_patience: 5,
            k_components,
            ridge: Ridge::default(),
            seed: 0,
            optimizer: OptimizerConfig::rmsprop(1e-3, 0.9),
            val_fraction: 0.2,
            test_fraction: 0.1,
            init: InitScheme::Shared,
        }
    }

    /// Same as [`TrainConfig::dmcca`] but with SGD + Nesterov momentum 0.9 at 1e-3.
    pub fn supervised(k_components: usize, batch_size: usize) -> Self {
        Self { optimizer: OptimizerConfig::sgd_nesterov(1e-3, 0.9), ..Self::dmcca(k_components, batch_size) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(invalid(format!("batch size must be >= 2, got {}", self.batch_size)));
        }
        if self.max_epochs == 0 || self.early_stop_patience == 0 {
            return Err(invalid("max_epochs and early_stop_patience must be >= 1"));
        }
        if self.k_components == 0 {
            return Err(invalid("k_components must be >= 1"));
        }
        let (v, t) = (self.val_fraction, self.test_fraction);
        if !(v > 0.0 && t > 0.0 && v + t < 1.0) {
            return Err(invalid(format!("split fractions val={v} test={t} must be positive with sum < 1")));
        }
        self.optimizer.validate()
    }
}

/// Sample indices of the train/val/test partitions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl DataSplit {
    /// Seeded shuffle of `0..n`, then test, validation and training blocks.
    pub fn new(n: usize, val_fraction: f64, test_fraction: f64, seed: u64) -> Result<Self> {
        let n_val = (n as f64 * val_fraction).round() as usize;
        let n_test = (n as f64 * test_fraction).round() as usize;
        if n_val < 2 || n_test < 2 || n < n_val + n_test + 2 {
            return Err(Error::InsufficientSamples { needed: n_val.max(2) + n_test.max(2) + 2, got: n });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_stream(seed, STREAM_SPLIT));
        let test = order[..n_test].to_vec();
        let val = order[n_test..n_test + n_val].to_vec();
        let train = order[n_test + n_val..].to_vec();
        Ok(Self { train, val, test })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    EarlyStop,
    MaxEpochs,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean mini-batch loss.
    pub train_loss: f64,
    /// Full validation-set loss in eval mode.
    pub val_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainRun<T> {
    pub history: Vec<EpochRecord>,
    /// Validation loss of the freshly initialized networks.
    pub initial_val_loss: f64,
    pub epochs_run: usize,
    pub stop_reason: StopReason,
    pub networks: Vec<BranchNetwork<T>>,
    pub split: DataSplit,
    pub seed: u64,
}

impl<T: Scalar> TrainRun<T> {
    pub fn final_val_loss(&self) -> f64 {
        self.history.last().map_or(self.initial_val_loss, |r| r.val_loss)
    }
}

/// Eval-mode outputs of each branch on its modality.
pub fn embed<T: Scalar>(networks: &[BranchNetwork<T>], data: &MultimodalDataset<T>) -> Result<Vec<Matrix<T>>> {
    if networks.len() != data.n_modalities() {
        return Err(invalid(format!("{} networks for {} modalities", networks.len(), data.n_modalities())));
    }
    networks.iter().zip(data.modalities()).map(|(net, x)| net.predict(x)).collect()
}

fn init_networks<T: Scalar>(specs: &[LayerSpec], n: usize, config: &TrainConfig<T>) -> Result<Vec<BranchNetwork<T>>> {
    let mut rng = rng_stream(config.seed, STREAM_INIT);
    match config.init {
        InitScheme::Shared => Ok(vec![BranchNetwork::new(specs, &mut rng)?; n]),
        InitScheme::Independent => (0..n).map(|_| BranchNetwork::new(specs, &mut rng)).collect(),
    }
}

fn check_arch<T: Scalar>(data: &MultimodalDataset<T>, specs: &[LayerSpec], config: &TrainConfig<T>) -> Result<()> {
    config.validate()?;
    let first = specs.first().ok_or_else(|| invalid("empty architecture"))?;
    if first.in_dim != data.dim() {
        return Err(invalid(format!("architecture expects {} inputs, data has {}", first.in_dim, data.dim())));
    }
    let out = specs[specs.len() - 1].out_dim;
    if out != config.k_components {
        return Err(invalid(format!("architecture outputs {out} features, config asks for {}", config.k_components)));
    }
    Ok(())
}

trait Objective {
    fn train_batch(&mut self, batch: &[usize]) -> Result<f64>;
    fn validation_loss(&self) -> Result<f64>;
}

fn batches(indices: &[usize], size: usize) -> Vec<&[usize]> {
    if indices.len() <= size {
        return vec![indices];
    }
    indices.chunks(size).filter(|c| c.len() == size).collect()
}

fn run_epochs<T: Scalar, O: Objective>(
    objective: &mut O,
    train: &[usize],
    config: &TrainConfig<T>,
) -> Result<(Vec<EpochRecord>, f64, StopReason)> {
    let diverged = |epoch: usize, reason: String, history: &[EpochRecord], initial: f64| Error::Diverged {
        epoch,
        reason,
        val_history: std::iter::once(initial).chain(history.iter().map(|r| r.val_loss)).collect(),
    };
    let initial = objective.validation_loss()?;
    if !initial.is_finite() {
        return Err(diverged(0, "initial validation loss is not finite".into(), &[], initial));
    }
    let mut rng = rng_stream(config.seed, STREAM_BATCHES);
    let mut order = train.to_vec();
    let mut history = Vec::new();
    let mut previous = initial;
    let mut streak = 0;
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let chunks = batches(&order, config.batch_size);
        for batch in &chunks {
            let loss = match objective.train_batch(batch) {
                Ok(l) if l.is_finite() => l,
                Ok(l) => return Err(diverged(epoch, format!("batch loss {l}"), &history, initial)),
                Err(Error::NonFinite(what)) => return Err(diverged(epoch, what, &history, initial)),
                Err(e) => return Err(e),
            };
            sum += loss;
        }
        let val_loss = match objective.validation_loss() {
            Ok(v) if v.is_finite() => v,
            Ok(v) => return Err(diverged(epoch, format!("validation loss {v}"), &history, initial)),
            Err(Error::NonFinite(what)) => return Err(diverged(epoch, what, &history, initial)),
            Err(e) => return Err(e),
        };
        history.push(EpochRecord { epoch, train_loss: sum / chunks.len() as f64, val_loss });
        if (val_loss - previous).abs() < config.early_stop_tolerance {
            streak += 1;
        } else {
            streak = 0;
        }
        previous = val_loss;
        if streak >= config.early_stop_patience {
            return Ok((history, initial, StopReason::EarlyStop));
        }
    }
    Ok((history, initial, StopReason::MaxEpochs))
}

struct DmccaObjective<'a, T> {
    data: &'a MultimodalDataset<T>,
    val: MultimodalDataset<T>,
    networks: Vec<BranchNetwork<T>>,
    optimizers: Vec<OptimizerState<T>>,
    ridge: Ridge<T>,
    dropout_rng: ChaCha8Rng,
}

impl<T: Scalar> Objective for DmccaObjective<'_, T> {
    fn train_batch(&mut self, batch: &[usize]) -> Result<f64> {
        let mut outputs = Vec::with_capacity(self.networks.len());
        let mut caches = Vec::with_capacity(self.networks.len());
        for (net, x) in self.networks.iter().zip(self.data.modalities()) {
            let (h, cache) = net.forward(&x.select_rows(batch), Mode::Train, &mut self.dropout_rng)?;
            outputs.push(h);
            caches.push(cache);
        }
        let out = isc_loss_and_grad(&outputs, self.ridge)?;
        for (((net, opt), cache), grad) in
            self.networks.iter_mut().zip(&mut self.optimizers).zip(&caches).zip(&out.grads)
        {
            let grads = net.backprop(cache, grad)?;
            opt.step(&mut net.parameters_mut(), &grads.slices())?;
        }
        Ok(out.loss.as_f64())
    }

    fn validation_loss(&self) -> Result<f64> {
        let h = embed(&self.networks, &self.val)?;
        Ok(isc_loss(&h, self.ridge)?.0.as_f64())
    }
}

/// Trains one branch per modality to maximize the mean ISC of their outputs.
///
/// Every mini-batch runs `N` forward passes, re-solves the generalized
/// eigenproblem on the batch covariances, backpropagates the analytic
/// eigenvalue gradient through each branch and takes one optimizer step per
/// branch. Validation uses full-set covariances in eval mode.
pub fn train_dmcca<T: Scalar>(
    data: &MultimodalDataset<T>,
    specs: &[LayerSpec],
    config: &TrainConfig<T>,
) -> Result<TrainRun<T>> {
    check_arch(data, specs, config)?;
    let split = DataSplit::new(data.n_samples(), config.val_fraction, config.test_fraction, config.seed)?;
    let n = data.n_modalities();
    let mut objective = DmccaObjective {
        data,
        val: data.select_rows(&split.val),
        networks: init_networks(specs, n, config)?,
        optimizers: (0..n).map(|_| OptimizerState::new(config.optimizer)).collect::<Result<_>>()?,
        ridge: config.ridge,
        dropout_rng: rng_stream(config.seed, STREAM_DROPOUT),
    };
    let (history, initial_val_loss, stop_reason) = run_epochs(&mut objective, &split.train, config)?;
    Ok(TrainRun {
        epochs_run: history.len(),
        history,
        initial_val_loss,
        stop_reason,
        networks: objective.networks,
        split,
        seed: config.seed,
    })
}

struct SupervisedObjective<'a, T> {
    data: &'a MultimodalDataset<T>,
    targets: &'a [Matrix<T>],
    val: MultimodalDataset<T>,
    val_targets: Vec<Matrix<T>>,
    networks: Vec<BranchNetwork<T>>,
    optimizers: Vec<OptimizerState<T>>,
    dropout_rng: ChaCha8Rng,
}

impl<T: Scalar> Objective for SupervisedObjective<'_, T> {
    fn train_batch(&mut self, batch: &[usize]) -> Result<f64> {
        let mut total = 0.0;
        for (((net, opt), x), s) in self
            .networks
            .iter_mut()
            .zip(&mut self.optimizers)
            .zip(self.data.modalities())
            .zip(self.targets)
        {
            let (h, cache) = net.forward(&x.select_rows(batch), Mode::Train, &mut self.dropout_rng)?;
            let (loss, grad) = mse_loss_and_grad(&h, &s.select_rows(batch))?;
            let grads = net.backprop(&cache, &grad)?;
            opt.step(&mut net.parameters_mut(), &grads.slices())?;
            total += loss.as_f64();
        }
        Ok(total / self.networks.len() as f64)
    }

    fn validation_loss(&self) -> Result<f64> {
        let h = embed(&self.networks, &self.val)?;
        let mut total = 0.0;
        for (out, s) in h.iter().zip(&self.val_targets) {
            total += mse_loss_and_grad(out, s)?.0.as_f64();
        }
        Ok(total / h.len() as f64)
    }
}

/// Trains each branch independently to regress its target by mean squared error.
pub fn train_supervised<T: Scalar>(
    data: &MultimodalDataset<T>,
    targets: &[Matrix<T>],
    specs: &[LayerSpec],
    config: &TrainConfig<T>,
) -> Result<TrainRun<T>> {
    check_arch(data, specs, config)?;
    if targets.len() != data.n_modalities() {
        return Err(invalid(format!("{} targets for {} modalities", targets.len(), data.n_modalities())));
    }
    if let Some(l) = targets.iter().position(|s| s.shape() != (data.n_samples(), config.k_components)) {
        return Err(invalid(format!(
            "target {l} has shape {:?}, expected {:?}",
            targets[l].shape(),
            (data.n_samples(), config.k_components)
        )));
    }
    let split = DataSplit::new(data.n_samples(), config.val_fraction, config.test_fraction, config.seed)?;
    let n = data.n_modalities();
    let mut objective = SupervisedObjective {
        data,
        targets,
        val: data.select_rows(&split.val),
        val_targets: targets.iter().map(|s| s.select_rows(&split.val)).collect(),
        networks: init_networks(specs, n, config)?,
        optimizers: (0..n).map(|_| OptimizerState::new(config.optimizer)).collect::<Result<_>>()?,
        dropout_rng: rng_stream(config.seed, STREAM_DROPOUT),
    };
    let (history, initial_val_loss, stop_reason) = run_epochs(&mut objective, &split.train, config)?;
    Ok(TrainRun {
        epochs_run: history.len(),
        history,
        initial_val_loss,
        stop_reason,
        networks: objective.networks,
        split,
        seed: config.seed,
    })
}
