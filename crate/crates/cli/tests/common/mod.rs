#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const DIM: usize = 8;

pub fn plume() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_plume"));
    // keep the caller's environment from leaking into the run
    for (k, _) in std::env::vars() {
        if k.starts_with("PLUME_") {
            cmd.env_remove(k);
        }
    }
    cmd
}

pub fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn plume");
    assert!(
        out.status.success(),
        "plume failed: {}\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub train: PathBuf,
    pub val: PathBuf,
    pub config: PathBuf,
}

impl Fixture {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn synth(out: &Path, n_normal: usize, n_anomaly: usize, stream: u64) {
    run_ok(plume().args(["synth", "--dim", &DIM.to_string(), "--separation", "4", "--seed", "3"]).args([
        "--n-normal",
        &n_normal.to_string(),
        "--n-anomaly",
        &n_anomaly.to_string(),
        "--stream",
        &stream.to_string(),
        "--out",
        out.to_str().unwrap(),
    ]));
}

/// Blob train/val files plus a small config next to them.
pub fn fixture(epochs: usize, runs: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.plmf");
    let val = dir.path().join("val.plmf");
    synth(&train, 128, 0, 0);
    synth(&val, 60, 60, 1);
    let config = dir.path().join("plume.toml");
    let text = format!(
        "hidden1 = 16\nhidden2 = 8\nbatch_size = 16\nepochs = {epochs}\nruns = {runs}\n\
         train_features = \"train.plmf\"\nval_features = \"val.plmf\"\nout_dir = \"out\"\n"
    );
    std::fs::write(&config, text).unwrap();
    Fixture { dir, train, val, config }
}

pub fn train(fx: &Fixture, extra: &[&str]) -> Output {
    run_ok(
        plume()
            .args(["train", "--quiet", "--config", fx.config.to_str().unwrap()])
            .args(extra),
    )
}
