//! `synth-gen`, `train`, `transform`, `eval` and `nmnist-gen`.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use dmcca_core::dmcca::checkpoint::Checkpoint;
use dmcca_core::dmcca::{DataSplit, EpochRecord};
use dmcca_core::linalg::Matrix;
use dmcca_core::metrics::{cluster_report, AffinityReport};


use crate::config::{ActivationSetting, ExperimentConfig, Method};
use crate::container::{Section, TensorContainer, CONCAT, LABELS, METADATA, SAMPLE_INDICES, SOURCE_SIGNAL};
use crate::error::{in_file, io_err, CliError, CliResult};
use crate::experiments::provenance;
use crate::idx::load_idx;
use crate::nmnist::{corrupt_views, glyph_images, SIDE};
use crate::output::write_json;
use crate::pipeline::{embed_rows, fit, mean_isc, score, stop_label, synthesize};

pub const SYNTH_FILE: &str = "synth.dmt";
pub const CHECKPOINT_FILE: &str = "checkpoint.ckpt";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.dmt";
pub const EVAL_FILE: &str = "eval.json";
pub const NMNIST_FILE: &str = "nmnist.dmt";

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Generates one synthetic dataset with its source signal.
pub fn synth_gen(config: &ExperimentConfig, seed: u64, out: &Path) -> CliResult<PathBuf> {
    ensure_dir(out)?;
    let synth = synthesize(config, seed)?;
    let meta = json!({ "provenance": provenance("synth-gen", config), "seed": seed });
    let container = TensorContainer::new(synth.data.into_modalities())?
        .with_section(SOURCE_SIGNAL, Section::Matrix(synth.source))
        .with_section(METADATA, Section::Text(serde_json::to_string(&meta)?));
    let path = out.join(SYNTH_FILE);
    container.save(&path)?;
    Ok(path)
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainReport {
    pub method: Method,
    pub activation: ActivationSetting,
    pub k: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub initial_val_loss: Option<f64>,
    pub stop_reason: String,
    pub history: Vec<HistoryEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HistoryEntry {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

impl From<&EpochRecord> for HistoryEntry {
    fn from(r: &EpochRecord) -> Self {
        Self { epoch: r.epoch, train_loss: r.train_loss, val_loss: r.val_loss }
    }
}

pub struct TrainArgs {
    pub data: PathBuf,
    pub method: Method,
    pub activation: ActivationSetting,
    pub k: usize,
    pub batch_size: usize,
    pub seed: u64,
}

/// Trains on a container and writes the checkpoint plus a JSON report.
pub fn train(config: &ExperimentConfig, args: &TrainArgs, out: &Path) -> CliResult<TrainReport> {
    ensure_dir(out)?;
    let container = TensorContainer::load(&args.data)?;
    let data = container.dataset()?;
    let model = fit(
        config,
        args.method,
        args.activation,
        &data,
        container.matrix(SOURCE_SIGNAL),
        args.k,
        args.batch_size,
        args.seed,
    )?;
    let ckpt = Checkpoint {
        seed: args.seed,
        val_fraction: config.train.val_fraction,
        test_fraction: config.train.test_fraction,
        networks: model.networks.clone(),
    };
    let path = out.join(CHECKPOINT_FILE);
    ckpt.write_to(BufWriter::new(File::create(&path).map_err(io_err(&path))?)).map_err(in_file(&path))?;
    let report = TrainReport {
        method: args.method,
        activation: args.activation,
        k: model.networks[0].out_dim(),
        batch_size: args.batch_size,
        seed: args.seed,
        n_train: model.split.train.len(),
        n_val: model.split.val.len(),
        n_test: model.split.test.len(),
        initial_val_loss: model.initial_val_loss.is_finite().then_some(model.initial_val_loss),
        stop_reason: stop_label(model.stop_reason),
        history: model.history.iter().map(HistoryEntry::from).collect(),
    };
    write_json(&out.join(TRAIN_REPORT_FILE), &json!({ "provenance": provenance("train", config), "report": report }))?;
    Ok(report)
}

pub fn load_checkpoint(path: &Path) -> CliResult<Checkpoint<f64>> {
    let file = File::open(path).map_err(io_err(path))?;
    Checkpoint::read_from(BufReader::new(file)).map_err(in_file(path))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowSelection {
    Test,
    All,
}

/// Embeds the selected rows with every branch; ground-truth sections are
/// carried over restricted to the same rows.
pub fn transform(data: &Path, checkpoint: &Path, rows: RowSelection, out: &Path) -> CliResult<PathBuf> {
    ensure_dir(out)?;
    let container = TensorContainer::load(data)?;
    let ckpt = load_checkpoint(checkpoint)?;
    let dataset = container.dataset()?;
    let indices: Vec<usize> = match rows {
        RowSelection::Test => {
            DataSplit::new(dataset.n_samples(), ckpt.val_fraction, ckpt.test_fraction, ckpt.seed)?.test
        }
        RowSelection::All => (0..dataset.n_samples()).collect(),
    };
    let embeddings = embed_rows(&ckpt.networks, &dataset, &indices)?;
    let concat = Matrix::hstack(&embeddings)?;
    let mut result = TensorContainer::new(embeddings)?
        .with_section(CONCAT, Section::Matrix(concat))
        .with_section(SAMPLE_INDICES, Section::Labels(indices.iter().map(|&i| i as u64).collect()));
    if let Some(source) = container.matrix(SOURCE_SIGNAL) {
        result.set_section(SOURCE_SIGNAL, Section::Matrix(source.select_rows(&indices)));
    }
    if let Some(labels) = container.labels(LABELS) {
        result.set_section(LABELS, Section::Labels(indices.iter().map(|&i| labels[i]).collect()));
    }
    let path = out.join(EMBEDDINGS_FILE);
    result.save(&path)?;
    Ok(path)
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusterSummary {
    pub k: usize,
    pub nmi: f64,
    pub completeness: f64,
    pub inertia: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AffinitySummary {
    pub r_a: f64,
    pub r_s: f64,
    pub per_modality: Vec<f64>,
    pub per_pair: Vec<((usize, usize), f64)>,
}

impl From<AffinityReport> for AffinitySummary {
    fn from(r: AffinityReport) -> Self {
        Self { r_a: r.r_a, r_s: r.r_s, per_modality: r.per_modality, per_pair: r.per_pair }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub n_samples: usize,
    pub n_modalities: usize,
    pub k: usize,
    pub test_isc: f64,
    pub affinity: Option<AffinitySummary>,
    pub clustering: Option<ClusterSummary>,
}

/// Mean ISC, affinity against `source_signal` and k-means on `concat`
/// against `labels`, each when the section is present.
pub fn eval(config: &ExperimentConfig, embeddings: &Path, seed: u64, out: &Path) -> CliResult<EvalReport> {
    ensure_dir(out)?;
    let container = TensorContainer::load(embeddings)?;
    let (t, k, n) = container.dims();
    let affinity = match container.matrix(SOURCE_SIGNAL) {
        Some(source) if source.rows() == t => Some(score(config, &container.modalities, source)?.into()),
        Some(source) => {
            return Err(CliError::File {
                path: embeddings.to_path_buf(),
                message: format!("source signal has {} rows, embeddings have {t}", source.rows()),
            })
        }
        None => None,
    };
    let clustering = match container.labels(LABELS) {
        Some(labels) => {
            let truth: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
            let n_clusters = config.eval_clusters.unwrap_or_else(|| truth.iter().collect::<BTreeSet<_>>().len());
            let concat = match container.matrix(CONCAT) {
                Some(m) => m.clone(),
                None => Matrix::hstack(&container.modalities)?,
            };
            let rep = cluster_report(&concat, &truth, n_clusters, seed, config.kmeans_max_iters)?;
            Some(ClusterSummary { k: n_clusters, nmi: rep.nmi, completeness: rep.completeness, inertia: rep.inertia })
        }
        None => None,
    };
    let report = EvalReport { n_samples: t, n_modalities: n, k, test_isc: mean_isc(config, &container.modalities)?, affinity, clustering };
    write_json(&out.join(EVAL_FILE), &json!({ "provenance": provenance("eval", config), "seed": seed, "report": report }))?;
    Ok(report)
}

/// Three corrupted views of IDX images (scaled by 1/255 when stored as
/// bytes) or of built-in glyphs.
pub fn nmnist_gen(
    config: &ExperimentConfig,
    images: Option<&Path>,
    labels: Option<&Path>,
    seed: u64,
    out: &Path,
) -> CliResult<PathBuf> {
    ensure_dir(out)?;
    let params = config.nmnist;
    let (clean, truth, width, source) = match images {
        Some(path) => {
            let arr = load_idx(path)?;
            if arr.dims.len() != 3 {
                return Err(CliError::File { path: path.to_path_buf(), message: format!("expected rank-3 images, got dims {:?}", arr.dims) });
            }
            let max = arr.data.iter().copied().fold(0.0, f64::max);
            let scale = if max > 1.0 { 1.0 / 255.0 } else { 1.0 };
            let data: Vec<f64> = arr.data.iter().map(|v| v * scale).collect();
            let clean = Matrix::new(arr.dims[0], arr.item_len(), data)?;
            let truth = match labels {
                Some(lp) => {
                    let la = load_idx(lp)?;
                    if la.dims != [arr.dims[0]] {
                        return Err(CliError::File { path: lp.to_path_buf(), message: format!("expected {} labels, got dims {:?}", arr.dims[0], la.dims) });
                    }
                    Some(la.data.iter().map(|&v| v as u64).collect())
                }
                None => None,
            };
            (clean, truth, arr.dims[2], path.display().to_string())
        }
        None => {
            let (clean, truth) = glyph_images(params.n_images, seed);
            (clean, Some(truth), SIDE, "built-in glyphs".to_string())
        }
    };
    let views = corrupt_views(&clean, width, &params, seed)?;
    let meta = json!({
        "provenance": provenance("nmnist-gen", config),
        "seed": seed,
        "source": source,
        "views": ["awgn", "motion-blur", "contrast+awgn"],
        "params": params,
        "image_width": width,
    });
    let mut container = TensorContainer::new(views.into())?
        .with_section("clean", Section::Matrix(clean))
        .with_section(METADATA, Section::Text(serde_json::to_string(&meta)?));
    if let Some(truth) = truth {
        container.set_section(LABELS, Section::Labels(truth));
    }
    let path = out.join(NMNIST_FILE);
    container.save(&path)?;
    Ok(path)
}
