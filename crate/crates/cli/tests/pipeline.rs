mod support;

use std::collections::BTreeSet;
use std::path::Path;

use dentgen_cli::commands::keys;
use dentgen_cli::config::PipelineConfig;
use dentgen_core::dentition::{read_dentition, write_dentition, Fdi};
use dentgen_core::nets::{read_checkpoint, BoundaryRegressor, Denoiser};
use dentgen_core::rng::derive_seed;
use serde_json::Value;
use support::*;

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &std::process::Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn synth_is_deterministic_and_guards_its_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY_CONFIG);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    dentgen_ok(&a, Some(&cfg), &["synth"]);
    dentgen_ok(&b, Some(&cfg), &["synth"]);
    assert!(diff(&snapshot(&a), &snapshot(&b)).is_empty());

    let index = json(&a.join("data/dataset.json"));
    for (split, n) in [("train", 4), ("test", 2), ("partial", 3)] {
        assert_eq!(index["splits"][split]["count"], n);
        assert_eq!(index["splits"][split]["entries"].as_array().unwrap().len(), n);
    }

    let again = dentgen(&a, Some(&cfg), &["synth"]);
    assert_eq!(again.status.code(), Some(2));
    assert!(stderr(&again).contains("--force"));
    dentgen_ok(&a, Some(&cfg), &["--force", "synth"]);
    assert!(diff(&snapshot(&a), &snapshot(&b)).is_empty());

    let c = dir.path().join("c");
    dentgen_ok(&c, Some(&cfg), &["--seed", "5", "synth"]);
    assert!(!diff(&snapshot(&a), &snapshot(&c)).is_empty());
}

#[test]
fn pipeline_composes_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY_CONFIG);
    let out = dir.path().join("w");
    for step in PIPELINE {
        dentgen_ok(&out, Some(&cfg), step);
    }

    // Loss files have one row per epoch.
    for (step, epochs) in [("boundary", 2), ("stage1", 2), ("stage2", 1)] {
        let text = std::fs::read_to_string(out.join(step).join("loss.csv")).unwrap();
        assert_eq!(text.lines().count(), epochs + 1, "{step}");
    }

    // Stage 2 trains on the observed set plus every pseudo-completed one.
    let run = json(&out.join("stage2/run.json"));
    assert_eq!(run["details"]["dataset_size"], 7);
    assert_eq!(run["details"]["pseudo_completed"], 3);

    // Pseudo-completed dentitions are fully dentate, with exactly the gaps flagged.
    let index = json(&out.join("pseudo/dataset.json"));
    assert_eq!(index["splits"]["pseudo"]["count"], 3);
    for i in 0..3 {
        let full = read_dentition::<f64>(&out.join(format!("pseudo/{i:04}"))).unwrap();
        let src = read_dentition::<f64>(&out.join(format!("data/partial/{i:04}"))).unwrap();
        assert!(full.is_fully_dentate());
        let gaps = (1..=4).contains(&(28 - src.len()));
        assert!(gaps, "partial dentition {i} has {} teeth", src.len());
        for t in full.teeth() {
            assert_eq!(t.pseudo, !src.contains(t.fdi), "tooth {}", t.fdi);
        }
    }

    // Two test dentitions, three scenarios each; bound overlap reported.
    let samples = json(&out.join("samples/index.json"));
    assert_eq!(samples["scenarios"].as_array().unwrap().len(), 6);
    let rows = read_metrics(&out.join("eval/metrics.csv"));
    assert!(rows.iter().any(|r| r.2 == "bound_dice"));
    assert!(rows.iter().all(|r| r.3.is_finite()));
    let summary = json(&out.join("eval/summary.json"));
    assert_eq!(summary["scenarios"], 6);
    for k in ["1", "2", "6"] {
        assert!(summary["by_missing"][k]["cd"]["mean"].is_number(), "missing {k}");
    }
    assert!(out.join("stats/ni.csv").exists() && out.join("stats/agreement.csv").exists());
    for step in ["data", "boundary", "stage1", "pseudo", "stage2", "samples", "eval", "stats"] {
        let m = json(&out.join(step).join("run.json"));
        assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    }

    // Replacing every sample with its ground truth gives zero distances.
    for e in samples["scenarios"].as_array().unwrap() {
        let id = e["id"].as_str().unwrap();
        let truth = read_dentition::<f64>(&out.join("data").join(e["dentition"].as_str().unwrap())).unwrap();
        let targets: BTreeSet<Fdi> = e["targets"].as_array().unwrap().iter().map(|c| Fdi::new(c.as_u64().unwrap() as u32).unwrap()).collect();
        let mut only = truth.clone();
        for f in truth.fdis() {
            if !targets.contains(&f) {
                only.remove(f);
            }
        }
        write_dentition(&only, &out.join("samples").join(id), None).unwrap();
    }
    dentgen_ok(&out, Some(&cfg), &["--force", "evaluate"]);
    for (_, _, metric, value) in read_metrics(&out.join("eval/metrics.csv")) {
        match metric.as_str() {
            "cd" | "emd" | "asd" => assert_eq!(value, 0.0, "{metric}"),
            m if m.starts_with("f1@") => assert_eq!(value, 1.0, "{metric}"),
            _ => {}
        }
    }

    // A sample missing one of its targets is reported by scenario and tooth.
    let first = &samples["scenarios"][0];
    let id = first["id"].as_str().unwrap();
    let manifest_path = out.join("samples").join(id).join("manifest.json");
    let mut manifest = json(&manifest_path);
    let dropped = manifest["teeth"].as_array_mut().unwrap().pop().unwrap();
    std::fs::write(&manifest_path, serde_json::to_string(&manifest).unwrap()).unwrap();
    let bad = dentgen(&out, Some(&cfg), &["--force", "evaluate"]);
    assert_eq!(bad.status.code(), Some(2));
    let msg = stderr(&bad);
    assert!(msg.contains(id) && msg.contains(&dropped["fdi"].to_string()), "{msg}");
}

#[test]
fn zero_learning_rate_keeps_initial_weights() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), TINY_CONFIG);
    let out = dir.path().join("w");
    let set = |k: &str| vec!["--set".to_string(), format!("{k}=0")];
    dentgen_ok(&out, Some(&cfg_path), &["synth"]);
    let args: Vec<String> = [set("stage1.lr"), vec!["train-denoiser".into()]].concat();
    dentgen_ok(&out, Some(&cfg_path), &args.iter().map(String::as_str).collect::<Vec<_>>());
    let args: Vec<String> = [set("boundary.lr"), vec!["train-boundary".into()]].concat();
    dentgen_ok(&out, Some(&cfg_path), &args.iter().map(String::as_str).collect::<Vec<_>>());

    let cfg = dentgen_cli::config::load(Some(&cfg_path), &[], None).unwrap();
    let init = Denoiser::new(cfg.denoiser, derive_seed(cfg.seed, &[keys::STAGE1, 0])).unwrap();
    let (_, stored) = read_checkpoint(&out.join("stage1/checkpoint.bin")).unwrap();
    assert_eq!(stored.len(), init.store.len());
    for id in init.store.ids() {
        assert_eq!(stored.value(id), init.store.value(id), "{}", init.store.name(id));
    }
    let init = BoundaryRegressor::new(cfg.regressor, derive_seed(cfg.seed, &[keys::BOUNDARY, 0])).unwrap();
    let (_, stored) = read_checkpoint(&out.join("boundary/checkpoint.bin")).unwrap();
    for id in init.store.ids() {
        assert_eq!(stored.value(id), init.store.value(id), "{}", init.store.name(id));
    }
}

#[test]
fn exit_codes_distinguish_validation_from_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY_CONFIG);
    let out = dir.path().join("w");

    let missing = dentgen(&out, Some(&cfg), &["train-boundary"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).contains("synth"));

    let unknown = dentgen(&out, Some(&cfg), &["--set", "stage1.epoch=3", "synth"]);
    assert_eq!(unknown.status.code(), Some(2));
    let invalid = dentgen(&out, Some(&cfg), &["--set", "metrics.thresholds=[0.5,-1]", "synth"]);
    assert_eq!(invalid.status.code(), Some(2));
    assert!(!out.join("data").exists());

    dentgen_ok(&out, Some(&cfg), &["synth"]);
    let blown = dentgen(&out, Some(&cfg), &["--set", "stage1.lr=1e300", "train-denoiser"]);
    assert_eq!(blown.status.code(), Some(3), "{}", stderr(&blown));
}

#[test]
fn all_equal_scores_are_noninferior_with_zero_width_interval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY_CONFIG);
    let scores = dir.path().join("scores.csv");
    let mut text = String::from("case,reader,criterion,workflow,score\n");
    for c in 0..26 {
        for r in ["R1", "R2"] {
            for k in ["occlusion", "crown_form"] {
                for w in ["assisted", "manual"] {
                    text.push_str(&format!("case{c:02},{r},{k},{w},3\n"));
                }
            }
        }
    }
    std::fs::write(&scores, text).unwrap();
    let out = dir.path().join("w");
    let set = format!("stats.scores={}", serde_json::to_string(&scores).unwrap());
    dentgen_ok(&out, Some(&cfg), &["--set", &set, "stats"]);
    let mut r = csv::Reader::from_path(out.join("stats/ni.csv")).unwrap();
    let headers = r.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let mut n = 0;
    for row in r.records() {
        let row = row.unwrap();
        assert_eq!(&row[col("verdict")], "noninferior");
        assert_eq!(row[col("boot_lo")].parse::<f64>().unwrap(), 0.0);
        assert_eq!(row[col("boot_hi")].parse::<f64>().unwrap(), 0.0);
        n += 1;
    }
    assert!(n >= 2);
}

#[test]
fn config_command_prints_the_effective_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let o = dentgen_ok(dir.path(), None, &["--seed", "12", "--set", "stage1.epochs=7", "config"]);
    let cfg: PipelineConfig = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cfg.seed, 12);
    assert_eq!(cfg.stage1.epochs, 7);
    assert_eq!(cfg.stage2, PipelineConfig::default().stage2);
}
