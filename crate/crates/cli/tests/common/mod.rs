#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn iwar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iwar")).args(args).output().expect("binary runs")
}

pub fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

/// Runs `mode` on `cfg` with outputs in `out`, asserting success.
pub fn run_ok(mode: &str, cfg: &Path, out: &Path) -> Output {
    let o = iwar(&[mode, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{mode} failed: {}", String::from_utf8_lossy(&o.stderr));
    o
}

pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    (header, rows)
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn p2_model(horizon: usize) -> Value {
    serde_json::json!({ "n": 6.0, "T": horizon, "f": [[0.9, 0.0], [0.0, 0.5]], "s": [[1.0, 0.3], [0.3, 1.0]] })
}

/// Every file in `dir`, by name.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}
