use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pefnn_core::io::{read_dataset, Checkpoint, RunConfig};
use pefnn_core::net::Model;

fn pefnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pefnn")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = pefnn(args);
    assert!(out.status.success(), "{args:?}\nstdout: {}\nstderr: {}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    pefnn(args).status.code().expect("exited normally")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn smoke() -> String {
    configs().join("swe-smoke.toml").display().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

/// Smoke dataset in `dir`, generated once per test.
fn smoke_data(dir: &Path) -> String {
    let out = s(&dir.join("smoke.pefn"));
    ok(&["gen-swe", "--config", &smoke(), "--out", &out]);
    out
}

#[test]
fn every_shipped_config_parses() {
    let mut n = 0;
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 4);
}

#[test]
fn gen_swe_header_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[swe]\nn = 32\nrefine = 1\n");
    let a = s(&dir.path().join("a.pefn"));
    let b = s(&dir.path().join("b.pefn"));
    let stdout = ok(&["gen-swe", "--config", &cfg, "--trajectories", "4", "--out", &a]);
    assert!(stdout.contains("4 swe trajectories") && stdout.contains("32x32"), "{stdout}");
    ok(&["gen-swe", "--config", &cfg, "--trajectories", "4", "--out", &b]);
    let ds = read_dataset(Path::new(&a)).unwrap();
    let h = ds.header;
    assert_eq!((h.trajectories, h.slices, h.channels, h.height, h.width), (4, 25, 1, 32, 32));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ds.meta.unwrap().config["solver"]["n"], 32);

    ok(&["gen-swe", "--config", &cfg, "--trajectories", "4", "--seed", "9", "--out", &b]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn gen_ns_and_flood_write_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[ns]\nn = 16\nhorizon = 2.0\n[flood]\nn = 16\nhorizon = 300.0\nrecord_interval = 100.0\n",
    );
    let ns = s(&dir.path().join("ns.pefn"));
    ok(&["gen-ns", "--config", &cfg, "--trajectories", "2", "--dtype", "f64", "--out", &ns]);
    let d = read_dataset(Path::new(&ns)).unwrap();
    assert_eq!((d.header.slices, d.header.height), (3, 16));
    assert_eq!(d.trajectories[0].channels, vec!["w"]);
    let fl = s(&dir.path().join("flood.pefn"));
    ok(&["gen-flood", "--config", &cfg, "--trajectories", "2", "--out", &fl]);
    assert_eq!(read_dataset(Path::new(&fl)).unwrap().header.slices, 4);
}

#[test]
fn corrupted_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = smoke_data(dir.path());
    let mut bytes = fs::read(&data).unwrap();
    bytes[100] ^= 0x10;
    fs::write(&data, bytes).unwrap();
    let ck = s(&dir.path().join("m.ckpt"));
    assert_eq!(code(&["train", "--config", &smoke(), "--data", &data, "--out", &ck]), 3);
}

#[test]
fn exit_codes_for_config_io_and_numeric_failures() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "[model]\nlayres = 2\n");
    let out = s(&dir.path().join("x.pefn"));
    assert_eq!(code(&["gen-swe", "--config", &bad, "--out", &out]), 2);
    let output = pefnn(&["gen-swe", "--config", &bad, "--out", &out]);
    assert!(String::from_utf8_lossy(&output.stderr).contains("layres"));
    assert_eq!(code(&["gen-swe", "--config", "/nonexistent/c.toml", "--out", &out]), 5);
    assert_eq!(code(&["gen-swe", "--out", "/nonexistent/dir/x.pefn", "--trajectories", "1"]), 5);
    let unstable = write(dir.path(), "u.toml", "[ns]\nn = 16\ncfl = 50.0\ndt_max = 1.0\nforcing = 1e4\nhorizon = 20.0\n");
    assert_eq!(code(&["gen-ns", "--config", &unstable, "--trajectories", "1", "--out", &out]), 4);
}

#[test]
fn zero_epochs_saves_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let data = smoke_data(dir.path());
    let ck = s(&dir.path().join("m.ckpt"));
    ok(&["train", "--config", &smoke(), "--data", &data, "--out", &ck, "--strategy", "markov", "--epochs", "0"]);
    let saved = Checkpoint::load(Path::new(&ck)).unwrap();
    let cfg = RunConfig::load(Path::new(&smoke())).unwrap();
    let init = Model::new(cfg.model.clone(), cfg.train.seed).unwrap();
    assert_eq!(saved.params, init.params);
    assert_eq!(saved.best_epoch, None);
    assert!(saved.history.is_empty());
}

fn history(ck: &str) -> String {
    fs::read_to_string(format!("{ck}.history.csv")).unwrap()
}

#[test]
fn smoke_training_reduces_validation_loss_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = smoke_data(dir.path());
    let a = s(&dir.path().join("a.ckpt"));
    let b = s(&dir.path().join("b.ckpt"));
    ok(&["train", "--config", &smoke(), "--data", &data, "--out", &a, "--quiet"]);
    ok(&["train", "--config", &smoke(), "--data", &data, "--out", &b, "--quiet"]);
    let h = history(&a);
    assert_eq!(h, history(&b));
    let rows: Vec<Vec<&str>> = h.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    let valid: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(valid[5] < valid[0], "{valid:?}");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn resume_reproduces_the_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = smoke_data(dir.path());
    let full = s(&dir.path().join("full.ckpt"));
    let part = s(&dir.path().join("part.ckpt"));
    let rest = s(&dir.path().join("rest.ckpt"));
    ok(&["train", "--config", &smoke(), "--data", &data, "--out", &full, "--epochs", "4", "--quiet"]);
    ok(&["train", "--config", &smoke(), "--data", &data, "--out", &part, "--epochs", "4", "--stop-after", "2", "--quiet"]);
    assert_eq!(history(&part).lines().count(), 3);
    ok(&["train", "--config", &smoke(), "--data", &data, "--out", &rest, "--epochs", "4", "--resume", &part, "--quiet"]);
    assert_eq!(history(&rest), history(&full));
    assert_eq!(Checkpoint::load(Path::new(&rest)).unwrap(), Checkpoint::load(Path::new(&full)).unwrap());

    let other = write(dir.path(), "o.toml", &fs::read_to_string(smoke()).unwrap().replace("latent = 4", "latent = 5"));
    assert_eq!(code(&["train", "--config", &other, "--data", &data, "--out", &rest, "--resume", &part]), 2);
    let out = pefnn(&["train", "--config", &other, "--data", &data, "--out", &rest, "--resume", &part]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("latent"));
}

#[test]
fn eval_rollout_and_superres() {
    let dir = tempfile::tempdir().unwrap();
    let data = smoke_data(dir.path());
    let ck = s(&dir.path().join("m.ckpt"));
    ok(&["train", "--config", &smoke(), "--data", &data, "--out", &ck, "--epochs", "1", "--quiet"]);

    let csv = s(&dir.path().join("eval.csv"));
    ok(&["eval", "--checkpoint", &ck, "--data", &data, "--config", &smoke(), "--split", "test", "--out", &csv]);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "step,l_rmse,l_m");
    assert_eq!(text.lines().count(), 9);
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(format!("{csv}.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["report"]["trajectories"].as_array().unwrap().len(), 2);
    assert!(meta["report"]["l_rmse"].as_f64().unwrap() > 0.0);

    let dump = s(&dir.path().join("pred.pefn"));
    ok(&["rollout", "--checkpoint", &ck, "--data", &data, "--steps", "5", "--dump", &dump]);
    let preds = read_dataset(Path::new(&dump)).unwrap();
    assert_eq!((preds.header.trajectories, preds.header.slices), (10, 6));
    let self_csv = s(&dir.path().join("self.csv"));
    ok(&["eval", "--checkpoint", &ck, "--data", &dump, "--out", &self_csv]);
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(format!("{self_csv}.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["report"]["l_rmse"].as_f64().unwrap(), 0.0);

    let fine_cfg = write(dir.path(), "fine.toml", "[swe]\nn = 32\nrefine = 1\nrecords = 9\n");
    let fine = s(&dir.path().join("fine.pefn"));
    ok(&["gen-swe", "--config", &fine_cfg, "--trajectories", "2", "--out", &fine]);
    let stdout = ok(&["superres", "--checkpoint", &ck, "--data", &fine, "--train-res", "16", "--steps", "3"]);
    assert!(stdout.contains("on 32x32") && stdout.starts_with("2 trajectories"), "{stdout}");
    assert_eq!(code(&["superres", "--checkpoint", &ck, "--data", &fine, "--train-res", "8"]), 2);
}

#[test]
fn gradcheck_passes_and_lists_every_mode() {
    let stdout = ok(&["gradcheck"]);
    for mode in ["dense", "single-rotation", "multiple-rotation"] {
        assert!(stdout.contains(mode), "{stdout}");
    }
    assert!(stdout.contains("worst relative error"));
    assert!(!stdout.contains("FAIL"));
}
