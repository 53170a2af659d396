//! Grid sweeps over (K, M, seed) and the method comparison table.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use dmcca_core::dmcca::DataSplit;

use crate::config::{ActivationSetting, ExperimentConfig, Method};
use crate::error::CliResult;
use crate::output::{mean_std, num, write_csv, write_json};
use crate::pipeline::{
    evaluate_model, fit, least_squares_embeddings, random_embeddings, score, synthesize, PointMetrics, SynthData,
};

pub fn provenance(command: &str, config: &ExperimentConfig) -> Value {
    json!({ "command": command, "config": config })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub k: usize,
    pub m: usize,
    pub seed: u64,
    pub metrics: Option<PointMetrics>,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

pub const SWEEP_HEADER: [&str; 11] =
    ["k", "m", "seed", "r_a", "r_s", "test_isc", "final_val_loss", "epochs", "stop_reason", "wall_time_s", "error"];

impl SweepRow {
    fn record(&self) -> Vec<String> {
        let mut rec = vec![self.k.to_string(), self.m.to_string(), self.seed.to_string()];
        match &self.metrics {
            Some(p) => rec.extend([
                num(p.r_a),
                num(p.r_s),
                num(p.test_isc),
                num(p.final_val_loss),
                p.epochs.to_string(),
                p.stop_reason.clone(),
            ]),
            None => rec.extend(std::iter::repeat_n(String::new(), 6)),
        }
        rec.push(format!("{:.3}", self.wall_time_s));
        rec.push(self.error.clone().unwrap_or_default());
        rec
    }
}

/// One dMCCA training and evaluation at width `k`, batch `m`.
pub fn sweep_point(config: &ExperimentConfig, synth: &SynthData, k: usize, m: usize, seed: u64) -> SweepRow {
    let start = Instant::now();
    let result = fit(config, Method::Dmcca, config.arch.activation, &synth.data, Some(&synth.source), k, m, seed)
        .and_then(|model| evaluate_model(config, &model, synth));
    let wall_time_s = start.elapsed().as_secs_f64();
    match result {
        Ok(metrics) => SweepRow { k, m, seed, metrics: Some(metrics), wall_time_s, error: None },
        Err(e) => SweepRow { k, m, seed, metrics: None, wall_time_s, error: Some(e.to_string()) },
    }
}

/// Runs every grid point, writing `points/*.json` as each completes and
/// `sweep.csv` / `sweep_summary.csv` at the end. Rows are in seed, K, M order.
pub fn run_sweep(config: &ExperimentConfig, out: &Path) -> CliResult<Vec<SweepRow>> {
    config.validate_sweep()?;
    let prov = provenance("synth-sweep", config);
    let grid: Vec<(usize, usize)> =
        config.k_list.iter().flat_map(|&k| config.m_list.iter().map(move |&m| (k, m))).collect();
    let mut rows = Vec::with_capacity(grid.len() * config.seeds.len());
    for &seed in &config.seeds {
        let synth = match synthesize(config, seed) {
            Ok(s) => s,
            Err(e) => {
                let msg = format!("data generation failed: {e}");
                rows.extend(grid.iter().map(|&(k, m)| SweepRow {
                    k,
                    m,
                    seed,
                    metrics: None,
                    wall_time_s: 0.0,
                    error: Some(msg.clone()),
                }));
                continue;
            }
        };
        let seed_rows: Vec<SweepRow> = grid
            .par_iter()
            .map(|&(k, m)| {
                let row = sweep_point(config, &synth, k, m, seed);
                let path = out.join("points").join(format!("k{k}_m{m}_seed{seed}.json"));
                let doc = json!({ "provenance": prov, "seed": seed, "k": k, "m": m, "result": row });
                if let Err(e) = write_json(&path, &doc) {
                    eprintln!("warning: {e}");
                }
                row
            })
            .collect();
        rows.extend(seed_rows);
    }
    let records: Vec<Vec<String>> = rows.iter().map(SweepRow::record).collect();
    write_csv(&out.join("sweep.csv"), &prov, &SWEEP_HEADER, &records)?;
    write_csv(
        &out.join("sweep_summary.csv"),
        &prov,
        &["k", "m", "n_ok", "r_a_mean", "r_a_std", "r_s_mean", "r_s_std"],
        &sweep_summary(config, &rows),
    )?;
    Ok(rows)
}

/// Mean ± std per (K, M), then per K pooled over M (`m` = "all").
fn sweep_summary(config: &ExperimentConfig, rows: &[SweepRow]) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let summarize = |k: usize, m: Option<usize>| {
        let ok: Vec<&PointMetrics> = rows
            .iter()
            .filter(|r| r.k == k && m.is_none_or(|m| r.m == m))
            .filter_map(|r| r.metrics.as_ref())
            .collect();
        let (ra, sa) = mean_std(&ok.iter().map(|p| p.r_a).collect::<Vec<_>>());
        let (rs, ss) = mean_std(&ok.iter().map(|p| p.r_s).collect::<Vec<_>>());
        vec![
            k.to_string(),
            m.map_or("all".into(), |m| m.to_string()),
            ok.len().to_string(),
            num(ra),
            num(sa),
            num(rs),
            num(ss),
        ]
    };
    for &k in &config.k_list {
        for &m in &config.m_list {
            out.push(summarize(k, Some(m)));
        }
    }
    for &k in &config.k_list {
        out.push(summarize(k, None));
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct TableRun {
    pub method: String,
    pub activation: String,
    pub seed: u64,
    pub r_a: Option<f64>,
    pub r_s: Option<f64>,
    pub epochs: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TableRow {
    pub method: String,
    pub activation: String,
    pub n_ok: usize,
    pub r_a_mean: f64,
    pub r_a_std: f64,
    pub r_s_mean: f64,
    pub r_s_std: f64,
}

#[derive(Clone, Copy, Debug)]
enum Entry {
    Trained(Method, ActivationSetting),
    LeastSquares,
    Random,
}

const ENTRIES: [Entry; 7] = [
    Entry::Trained(Method::Supervised, ActivationSetting::Linear),
    Entry::Trained(Method::Supervised, ActivationSetting::Tanh),
    Entry::Trained(Method::Dmcca, ActivationSetting::Linear),
    Entry::Trained(Method::Dmcca, ActivationSetting::Tanh),
    Entry::Trained(Method::Mcca, ActivationSetting::Linear),
    Entry::LeastSquares,
    Entry::Random,
];

fn entry_names(e: Entry) -> (&'static str, &'static str) {
    let act = |a: ActivationSetting| match a {
        ActivationSetting::Linear => "linear",
        ActivationSetting::Tanh => "tanh",
    };
    match e {
        Entry::Trained(Method::Supervised, a) => ("supervised", act(a)),
        Entry::Trained(Method::Dmcca, a) => ("dmcca", act(a)),
        Entry::Trained(Method::Mcca, a) => ("mcca", act(a)),
        Entry::LeastSquares => ("least-squares", "linear"),
        Entry::Random => ("random", "none"),
    }
}

fn table_entry(config: &ExperimentConfig, synth: &SynthData, entry: Entry, seed: u64) -> TableRun {
    let (method, activation) = entry_names(entry);
    let k = config.k_components;
    let result: CliResult<(f64, f64, usize)> = (|| match entry {
        Entry::Trained(m, act) => {
            let model = fit(config, m, act, &synth.data, Some(&synth.source), k, config.train.batch_size, seed)?;
            let p = evaluate_model(config, &model, synth)?;
            Ok((p.r_a, p.r_s, p.epochs))
        }
        Entry::LeastSquares | Entry::Random => {
            let t = &config.train;
            let split = DataSplit::new(synth.data.n_samples(), t.val_fraction, t.test_fraction, seed)?;
            let emb = match entry {
                Entry::LeastSquares => least_squares_embeddings(&synth.data, &synth.source, &split, 1e-10)?,
                _ => random_embeddings(split.test.len(), k, synth.data.n_modalities(), seed),
            };
            let rep = score(config, &emb, &synth.source.select_rows(&split.test))?;
            Ok((rep.r_a, rep.r_s, 0))
        }
    })();
    match result {
        Ok((r_a, r_s, epochs)) => TableRun {
            method: method.into(),
            activation: activation.into(),
            seed,
            r_a: Some(r_a),
            r_s: Some(r_s),
            epochs,
            error: None,
        },
        Err(e) => TableRun {
            method: method.into(),
            activation: activation.into(),
            seed,
            r_a: None,
            r_s: None,
            epochs: 0,
            error: Some(e.to_string()),
        },
    }
}

/// Every method on the same generated data per seed; writes
/// `table1_runs.csv`, `table1.csv` and `table1.json`.
pub fn run_table1(config: &ExperimentConfig, out: &Path) -> CliResult<(Vec<TableRow>, Vec<TableRun>)> {
    if config.seeds.is_empty() {
        return Err(crate::error::CliError::Config("seeds must be non-empty".into()));
    }
    let prov = provenance("table1", config);
    let mut runs = Vec::new();
    for &seed in &config.seeds {
        let synth = synthesize(config, seed)?;
        let seed_runs: Vec<TableRun> = ENTRIES.par_iter().map(|&e| table_entry(config, &synth, e, seed)).collect();
        runs.extend(seed_runs);
    }
    let rows: Vec<TableRow> = ENTRIES
        .iter()
        .map(|&e| {
            let (method, activation) = entry_names(e);
            let ok: Vec<&TableRun> =
                runs.iter().filter(|r| r.method == method && r.activation == activation && r.error.is_none()).collect();
            let (r_a_mean, r_a_std) = mean_std(&ok.iter().filter_map(|r| r.r_a).collect::<Vec<_>>());
            let (r_s_mean, r_s_std) = mean_std(&ok.iter().filter_map(|r| r.r_s).collect::<Vec<_>>());
            TableRow {
                method: method.into(),
                activation: activation.into(),
                n_ok: ok.len(),
                r_a_mean,
                r_a_std,
                r_s_mean,
                r_s_std,
            }
        })
        .collect();
    let run_records: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                r.activation.clone(),
                r.seed.to_string(),
                r.r_a.map(num).unwrap_or_default(),
                r.r_s.map(num).unwrap_or_default(),
                r.epochs.to_string(),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(
        &out.join("table1_runs.csv"),
        &prov,
        &["method", "activation", "seed", "r_a", "r_s", "epochs", "error"],
        &run_records,
    )?;
    let row_records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                r.activation.clone(),
                r.n_ok.to_string(),
                num(r.r_a_mean),
                num(r.r_a_std),
                num(r.r_s_mean),
                num(r.r_s_std),
            ]
        })
        .collect();
    write_csv(
        &out.join("table1.csv"),
        &prov,
        &["method", "activation", "n_ok", "r_a_mean", "r_a_std", "r_s_mean", "r_s_std"],
        &row_records,
    )?;
    write_json(&out.join("table1.json"), &json!({ "provenance": prov, "summary": rows, "runs": runs }))?;
    Ok((rows, runs))
}
