//! Helpers for driving the `dentgen` binary from tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// A few teeth, a short chain and one or two epochs per step.
pub const TINY_CONFIG: &str = r#"// tiny
{
  "synth": { "train": 4, "test": 2, "partial": 3, "generator": { "points_per_tooth": 12 } },
  "schedule": { "steps": 10, "beta_min": 1e-3, "beta_max": 0.3 },
  "stage1": { "epochs": 2, "schedule": { "kind": "constant" } },
  "stage2": { "epochs": 1, "schedule": { "kind": "constant" } },
  "boundary": { "epochs": 2, "schedule": { "kind": "constant" } },
  "sampling": { "scenarios": [1, 1, 0, 0, 0, 1] },
  "stats": { "ni": { "bootstrap_iters": 1000 }, "agreement_iters": 1000 }
}
"#;

pub const PIPELINE: [&[&str]; 8] = [
    &["synth"],
    &["train-boundary"],
    &["train-denoiser", "--stage", "1"],
    &["bootstrap-pseudo"],
    &["train-denoiser", "--stage", "2"],
    &["sample"],
    &["evaluate"],
    &["stats"],
];

pub fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.jsonc");
    std::fs::write(&p, text).unwrap();
    p
}

/// Runs `dentgen --out <out> [--config cfg] <args>`.
pub fn dentgen(out: &Path, config: Option<&Path>, args: &[&str]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dentgen"));
    c.arg("--out").arg(out).env("RUST_BACKTRACE", "0");
    if let Some(cfg) = config {
        c.arg("--config").arg(cfg);
    }
    c.args(args).output().expect("binary runs")
}

/// Like [`dentgen`] but panics with stderr on failure.
pub fn dentgen_ok(out: &Path, config: Option<&Path>, args: &[&str]) -> Output {
    let o = dentgen(out, config, args);
    assert!(
        o.status.success(),
        "dentgen {args:?} failed ({:?}):\n{}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

/// Every file under `root`, keyed by relative path.
pub fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                let rel = p.strip_prefix(base).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Names of files that differ or exist on one side only.
pub fn diff(a: &BTreeMap<String, Vec<u8>>, b: &BTreeMap<String, Vec<u8>>) -> Vec<String> {
    let keys: std::collections::BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    keys.into_iter().filter(|k| a.get(*k) != b.get(*k)).cloned().collect()
}

pub fn read_metrics(path: &Path) -> Vec<(String, String, String, f64)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.deserialize().map(|row| row.unwrap()).collect()
}
