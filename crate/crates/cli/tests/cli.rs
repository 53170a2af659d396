use std::path::{Path, PathBuf};
use std::process::Command;

use dmcca_cli::config::{ActivationSetting, ExperimentConfig, Method};
use dmcca_cli::container::{Section, TensorContainer, CONCAT, LABELS, SOURCE_SIGNAL};
use dmcca_cli::experiments::sweep_point;
use dmcca_cli::output::read_csv;
use dmcca_cli::pipeline::synthesize;
use dmcca_core::dmcca::checkpoint::Checkpoint;
use dmcca_core::dmcca::BranchNetwork;
use dmcca_core::linalg::Matrix;
use serde_json::Value;

fn tiny_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.synth.t_samples = 800;
    c.synth.ambient_dim = 16;
    c.synth.signal_dim = 3;
    c.synth.n_modalities = 3;
    c.train.max_epochs = 4;
    c.train.batch_size = 64;
    c.k_components = 3;
    c.k_list = vec![2, 3];
    c.m_list = vec![64];
    c.seeds = vec![5];
    c.nmnist.n_images = 40;
    c
}

fn write_config(dir: &Path, c: &ExperimentConfig) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string(c).unwrap()).unwrap();
    path
}

fn dmcca(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_dmcca")).args(args).output().unwrap();
    (out.status.success(), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

fn run_ok(args: &[&str]) -> String {
    let (ok, stdout, stderr) = dmcca(args);
    assert!(ok, "dmcca {args:?} failed: {stderr}");
    stdout
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_transform_eval_matches_in_process_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let c = tiny_config();
    let cfg = write_config(dir.path(), &c);
    let d = dir.path();
    run_ok(&["synth-gen", "--config", s(&cfg), "--out", s(d)]);
    run_ok(&["train", "--config", s(&cfg), "--out", s(d), "--data", s(&d.join("synth.dmt")), "--k", "3", "--batch-size", "64"]);
    run_ok(&[
        "transform",
        "--out",
        s(d),
        "--data",
        s(&d.join("synth.dmt")),
        "--checkpoint",
        s(&d.join("checkpoint.ckpt")),
    ]);
    let emb = TensorContainer::load(&d.join("embeddings.dmt")).unwrap();
    assert_eq!(emb.dims(), (80, 3, 3));
    assert_eq!(emb.matrix(CONCAT).unwrap().shape(), (80, 9));
    run_ok(&["eval", "--config", s(&cfg), "--out", s(d), "--embeddings", s(&d.join("embeddings.dmt"))]);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(d.join("eval.json")).unwrap()).unwrap();
    let r_a = report["report"]["affinity"]["r_a"].as_f64().unwrap();
    let r_s = report["report"]["affinity"]["r_s"].as_f64().unwrap();

    let synth = synthesize(&c, 5).unwrap();
    let point = sweep_point(&c, &synth, 3, 64, 5).metrics.unwrap();
    assert!((point.r_a - r_a).abs() < 1e-10, "{} vs {r_a}", point.r_a);
    assert!((point.r_s - r_s).abs() < 1e-10);
    assert_eq!(report["provenance"]["config"], serde_json::to_value(&c).unwrap());
}

#[test]
fn identity_checkpoint_transform_returns_features() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let x = Matrix::from_fn(30, 4, |i, j| (i as f64).sin() + j as f64);
    let y = x.scale(2.0);
    TensorContainer::new(vec![x.clone(), y.clone()])
        .unwrap()
        .with_section(LABELS, Section::Labels((0..30).map(|i| i % 2).collect()))
        .save(&d.join("in.dmt"))
        .unwrap();
    let ckpt = Checkpoint {
        seed: 0,
        val_fraction: 0.2,
        test_fraction: 0.1,
        networks: vec![BranchNetwork::<f64>::identity(4), BranchNetwork::identity(4)],
    };
    ckpt.write_to(std::fs::File::create(d.join("id.ckpt")).unwrap()).unwrap();
    run_ok(&["transform", "--out", s(d), "--data", s(&d.join("in.dmt")), "--checkpoint", s(&d.join("id.ckpt")), "--rows", "all"]);
    let emb = TensorContainer::load(&d.join("embeddings.dmt")).unwrap();
    assert_eq!(emb.modalities, vec![x, y]);
    assert_eq!(emb.labels(LABELS).unwrap().len(), 30);
}

#[test]
fn sweep_rows_are_deterministic_modulo_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &tiny_config());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok(&["synth-sweep", "--config", s(&cfg), "--out", s(&a), "--threads", "1"]);
    run_ok(&["synth-sweep", "--config", s(&cfg), "--out", s(&b)]);
    let (pa, ra) = read_csv(&a.join("sweep.csv")).unwrap();
    let (pb, rb) = read_csv(&b.join("sweep.csv")).unwrap();
    assert_eq!(pa, pb);
    assert_eq!(ra.len(), 2);
    for (x, y) in ra.iter().zip(&rb) {
        for (key, v) in x {
            if key != "wall_time_s" {
                assert_eq!(v, &y[key], "{key}");
            }
        }
        assert!(x["error"].is_empty());
    }
    assert!(a.join("points/k2_m64_seed5.json").exists());
    let (_, summary) = read_csv(&a.join("sweep_summary.csv")).unwrap();
    assert_eq!(summary.len(), 4);
}

#[test]
fn table1_with_one_seed_reports_zero_std() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny_config();
    c.train.max_epochs = 2;
    let cfg = write_config(dir.path(), &c);
    let stdout = run_ok(&["table1", "--config", s(&cfg), "--out", s(dir.path())]);
    assert!(stdout.contains("dmcca"));
    let (_, rows) = read_csv(&dir.path().join("table1.csv")).unwrap();
    let methods: Vec<&str> = rows.iter().map(|r| r["method"].as_str()).collect();
    assert_eq!(methods, ["supervised", "supervised", "dmcca", "dmcca", "mcca", "least-squares", "random"]);
    for r in &rows {
        assert_eq!(r["n_ok"], "1");
        assert_eq!(r["r_a_std"].parse::<f64>().unwrap(), 0.0);
        assert_eq!(r["r_s_std"].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn supervised_and_mcca_train_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let c = tiny_config();
    let cfg = write_config(dir.path(), &c);
    let d = dir.path();
    run_ok(&["synth-gen", "--config", s(&cfg), "--out", s(d), "--seed", "2"]);
    for method in ["supervised", "mcca"] {
        let out = d.join(method);
        run_ok(&["train", "--config", s(&cfg), "--out", s(&out), "--data", s(&d.join("synth.dmt")), "--method", method, "--seed", "2"]);
        let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("train_report.json")).unwrap()).unwrap();
        assert_eq!(report["report"]["k"], 3);
    }
    let _ = (Method::Dmcca, ActivationSetting::Linear, SOURCE_SIGNAL);
}

#[test]
fn corrupt_inputs_fail_with_offsets() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.dmt"), b"DMCCATNS\x01\x00\x00\x00\x05").unwrap();
    let (ok, _, stderr) = dmcca(&["transform", "--out", s(d), "--data", s(&d.join("bad.dmt")), "--checkpoint", s(&d.join("x.ckpt"))]);
    assert!(!ok);
    assert!(stderr.contains("byte 13"), "{stderr}");
    std::fs::write(d.join("bad.idx"), [0u8, 0, 0x08, 3, 0, 0]).unwrap();
    let (ok, _, stderr) = dmcca(&["nmnist-gen", "--out", s(d), "--images", s(&d.join("bad.idx"))]);
    assert!(!ok);
    assert!(stderr.contains("byte 6"), "{stderr}");
    let (ok, _, stderr) = dmcca(&["synth-sweep", "--config", s(&d.join("missing.json")), "--out", s(d)]);
    assert!(!ok && stderr.contains("missing.json"));
}

#[test]
fn nmnist_generation_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &tiny_config());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok(&["nmnist-gen", "--config", s(&cfg), "--out", s(&a), "--seed", "3"]);
    run_ok(&["nmnist-gen", "--config", s(&cfg), "--out", s(&b), "--seed", "3"]);
    let x = std::fs::read(a.join("nmnist.dmt")).unwrap();
    assert_eq!(x, std::fs::read(b.join("nmnist.dmt")).unwrap());
    let c = TensorContainer::load(&a.join("nmnist.dmt")).unwrap();
    assert_eq!(c.dims(), (40, 784, 3));
    assert!(c.text("metadata").unwrap().contains("blur_length"));
}
