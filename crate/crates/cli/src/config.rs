//! JSON experiment configuration. Every field has a default, so `{}` is a
//! valid desk-scale configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use dmcca_core::dmcca::{mlp_specs, Activation, InitScheme, LayerSpec, OptimizerConfig, TrainConfig};
use dmcca_core::mcca::Ridge;
use dmcca_core::synthgen::SynthConfig;

use crate::error::{io_err, CliError, CliResult};
use crate::nmnist::NmnistParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub t_samples: usize,
    pub ambient_dim: usize,
    pub signal_dim: usize,
    pub n_modalities: usize,
    pub snr_mix: f64,
    pub spatial_corr: f64,
    pub additive_noise_scale: f64,
    pub diag_scale_range: (f64, f64),
}

impl From<SynthConfig> for SynthSettings {
    fn from(c: SynthConfig) -> Self {
        Self {
            t_samples: c.t_samples,
            ambient_dim: c.ambient_dim,
            signal_dim: c.signal_dim,
            n_modalities: c.n_modalities,
            snr_mix: c.snr_mix,
            spatial_corr: c.spatial_corr,
            additive_noise_scale: c.additive_noise_scale,
            diag_scale_range: c.diag_scale_range,
        }
    }
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthConfig::desk_scale().into()
    }
}

impl SynthSettings {
    pub fn to_config(&self, seed: u64) -> SynthConfig {
        SynthConfig {
            t_samples: self.t_samples,
            ambient_dim: self.ambient_dim,
            signal_dim: self.signal_dim,
            n_modalities: self.n_modalities,
            snr_mix: self.snr_mix,
            spatial_corr: self.spatial_corr,
            additive_noise_scale: self.additive_noise_scale,
            diag_scale_range: self.diag_scale_range,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OptimizerSetting {
    Rmsprop { learning_rate: f64, decay: f64 },
    SgdNesterov { learning_rate: f64, momentum: f64 },
}

impl From<OptimizerSetting> for OptimizerConfig {
    fn from(o: OptimizerSetting) -> Self {
        match o {
            OptimizerSetting::Rmsprop { learning_rate, decay } => OptimizerConfig::rmsprop(learning_rate, decay),
            OptimizerSetting::SgdNesterov { learning_rate, momentum } => {
                OptimizerConfig::sgd_nesterov(learning_rate, momentum)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitSetting {
    Shared,
    Independent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum RidgeSetting {
    Absolute(f64),
    TraceScaled(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_tolerance: f64,
    pub early_stop_patience: usize,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub ridge: RidgeSetting,
    pub init: InitSetting,
    pub dmcca_optimizer: OptimizerSetting,
    pub supervised_optimizer: OptimizerSetting,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            batch_size: 400,
            max_epochs: 100,
            early_stop_tolerance: 1e-6,
            early_stop_patience: 5,
            val_fraction: 0.2,
            test_fraction: 0.1,
            ridge: RidgeSetting::TraceScaled(1e-6),
            init: InitSetting::Shared,
            dmcca_optimizer: OptimizerSetting::Rmsprop { learning_rate: 1e-3, decay: 0.9 },
            supervised_optimizer: OptimizerSetting::SgdNesterov { learning_rate: 1e-3, momentum: 0.9 },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Dmcca,
    Supervised,
    Mcca,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationSetting {
    Linear,
    Tanh,
}

impl From<ActivationSetting> for Activation {
    fn from(a: ActivationSetting) -> Self {
        match a {
            ActivationSetting::Linear => Activation::Linear,
            ActivationSetting::Tanh => Activation::Tanh,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchSettings {
    /// Hidden widths; `None` means a single hidden layer of half the input width.
    pub hidden: Option<Vec<usize>>,
    pub activation: ActivationSetting,
    /// Dropout on dMCCA hidden layers.
    pub dmcca_dropout: f64,
    /// Dropout on supervised branches when the activation is tanh.
    pub supervised_tanh_dropout: f64,
}

impl Default for ArchSettings {
    fn default() -> Self {
        Self { hidden: None, activation: ActivationSetting::Linear, dmcca_dropout: 0.0, supervised_tanh_dropout: 0.2 }
    }
}

impl ArchSettings {
    pub fn hidden_for(&self, in_dim: usize) -> Vec<usize> {
        self.hidden.clone().unwrap_or_else(|| vec![(in_dim / 2).max(1)])
    }

    /// `in_dim → hidden… → out_dim`. Dropout, when nonzero, sits on the hidden layers only.
    pub fn specs(&self, in_dim: usize, out_dim: usize, activation: ActivationSetting, dropout: f64) -> Vec<LayerSpec> {
        let mut dims = vec![in_dim];
        dims.extend(self.hidden_for(in_dim));
        dims.push(out_dim);
        let mut specs = mlp_specs(&dims, activation.into(), 0.0);
        let n = specs.len();
        for spec in &mut specs[..n - 1] {
            spec.dropout_rate = dropout;
        }
        specs
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub synth: SynthSettings,
    pub train: TrainSettings,
    pub arch: ArchSettings,
    pub method: Method,
    /// Output width for `train` with `dmcca` and for `table1`.
    pub k_components: usize,
    pub k_list: Vec<usize>,
    pub m_list: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Center embedding columns before affinity.
    pub center_affinity: bool,
    pub kmeans_max_iters: usize,
    /// Cluster count for `eval`; `None` uses the number of distinct labels.
    pub eval_clusters: Option<usize>,
    pub nmnist: NmnistParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            synth: SynthSettings::default(),
            train: TrainSettings::default(),
            arch: ArchSettings::default(),
            method: Method::Dmcca,
            k_components: 10,
            k_list: vec![5, 10, 20, 40],
            m_list: vec![100, 400, 800],
            seeds: vec![0, 1, 2],
            center_affinity: true,
            kmeans_max_iters: 300,
            eval_clusters: None,
            nmnist: NmnistParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Full-size dimensions (T=100000, D=1024) with the current mixing parameters.
    pub fn use_paper_scale(&mut self) {
        let paper = SynthConfig::paper_scale();
        self.synth.t_samples = paper.t_samples;
        self.synth.ambient_dim = paper.ambient_dim;
    }

    pub fn validate_sweep(&self) -> CliResult<()> {
        if self.k_list.is_empty() || self.m_list.is_empty() || self.seeds.is_empty() {
            return Err(CliError::Config("k_list, m_list and seeds must be non-empty".into()));
        }
        Ok(())
    }

    pub fn ridge(&self) -> Ridge<f64> {
        match self.train.ridge {
            RidgeSetting::Absolute(v) => Ridge::Absolute(v),
            RidgeSetting::TraceScaled(v) => Ridge::TraceScaled(v),
        }
    }

    pub fn train_config(&self, method: Method, k: usize, batch_size: usize, seed: u64) -> TrainConfig<f64> {
        let t = &self.train;
        let optimizer = match method {
            Method::Supervised => t.supervised_optimizer,
            Method::Dmcca | Method::Mcca => t.dmcca_optimizer,
        };
        TrainConfig {
            batch_size,
            max_epochs: t.max_epochs,
            early_stop_tolerance: t.early_stop_tolerance,
            early_stop_patience: t.early_stop_patience,
            k_components: k,
            ridge: self.ridge(),
            seed,
            optimizer: optimizer.into(),
            val_fraction: t.val_fraction,
            test_fraction: t.test_fraction,
            init: match t.init {
                InitSetting::Shared => InitScheme::Shared,
                InitSetting::Independent => InitScheme::Independent,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_desk_default() {
        let c: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!((c.synth.t_samples, c.synth.ambient_dim), (20_000, 256));
    }

    #[test]
    fn full_round_trip_and_overrides() {
        let mut c = ExperimentConfig::default();
        c.train.dmcca_optimizer = OptimizerSetting::SgdNesterov { learning_rate: 0.01, momentum: 0.5 };
        c.train.ridge = RidgeSetting::Absolute(1e-3);
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), c);
        let partial: ExperimentConfig =
            serde_json::from_str(r#"{"k_list":[3],"train":{"max_epochs":7},"arch":{"activation":"tanh"}}"#).unwrap();
        assert_eq!(partial.k_list, vec![3]);
        assert_eq!(partial.train.max_epochs, 7);
        assert_eq!(partial.train.batch_size, 400);
        assert_eq!(partial.arch.activation, ActivationSetting::Tanh);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn specs_follow_half_width_rule() {
        let a = ArchSettings::default();
        let s = a.specs(256, 10, ActivationSetting::Tanh, 0.2);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].in_dim, s[0].out_dim, s[1].out_dim), (256, 128, 10));
        assert_eq!((s[0].dropout_rate, s[1].dropout_rate), (0.2, 0.0));
        let mut c = ExperimentConfig::default();
        c.use_paper_scale();
        assert_eq!(c.arch.hidden_for(c.synth.ambient_dim), vec![512]);
    }
}
