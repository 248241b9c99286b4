//! Pipeline configuration: JSON with `//` comments, deep-merged over the
//! defaults, then `--set key.path=value` overrides.

use std::path::{Path, PathBuf};

use dentgen_core::dentition::{AugmentConfig, SynthConfig};
use dentgen_core::diffusion::ScheduleConfig;
use dentgen_core::metrics::MetricConfig;
use dentgen_core::nets::{AdamConfig, DenoiserConfig, LrSchedule, RegressorConfig, TrainConfig};
use dentgen_core::stats::{NiConfig, Weights};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const DEFAULT_CONFIG: &str = include_str!("../config/default.jsonc");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub synth: SynthSection,
    pub schedule: ScheduleConfig,
    pub denoiser: DenoiserConfig,
    pub regressor: RegressorConfig,
    pub stage1: TrainSection,
    pub stage2: TrainSection,
    pub boundary: TrainSection,
    pub sampling: SamplingSection,
    pub metrics: MetricConfig,
    pub stats: StatsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub train: usize,
    pub test: usize,
    pub partial: usize,
    pub partial_missing: (usize, usize),
    pub generator: SynthConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub schedule: LrSchedule,
    pub augment: AugmentConfig,
}

impl TrainSection {
    pub fn to_train_config(self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                lr: self.lr,
                schedule: self.schedule,
                ..AdamConfig::default()
            },
            augment: self.augment,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSource {
    Predicted,
    Fitted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub scenarios: [usize; 6],
    pub bounds: BoundSource,
    pub stage: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReaderStudy {
    pub cases: usize,
    pub readers: usize,
    /// Standard deviation of per-rating noise on the latent quality scale.
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsSection {
    pub scores: Option<PathBuf>,
    pub reader_study: ReaderStudy,
    pub ni: NiConfig,
    pub weights: Weights,
    pub agreement_iters: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        parse_config_value(&default_value()).expect("built-in default config is valid")
    }
}

/// Removes `//` comments outside string literals.
pub fn strip_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        let mut in_str = false;
        let mut escaped = false;
        let mut cut = line.len();
        let bytes = line.as_bytes();
        for (i, &b) in bytes.iter().enumerate() {
            if in_str {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_str = false,
                    _ => {}
                }
            } else if b == b'"' {
                in_str = true;
            } else if b == b'/' && bytes.get(i + 1) == Some(&b'/') {
                cut = i;
                break;
            }
        }
        out.push_str(&line[..cut]);
        out.push('\n');
    }
    out
}

fn parse_jsonc(text: &str, origin: &str) -> CliResult<Value> {
    serde_json::from_str(&strip_comments(text))
        .map_err(|e| CliError::Validation(format!("{origin}: {e}")))
}

fn default_value() -> Value {
    parse_jsonc(DEFAULT_CONFIG, "built-in config").expect("built-in default config parses")
}

/// Recursively overlays `top` onto `base`; objects merge, anything else
/// replaces. Tagged objects whose `kind` changes are replaced whole.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) if t.get("kind").is_none_or(|k| b.get("kind") == Some(k)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Applies `key.path=value`; the value is parsed as JSON and falls back to
/// a plain string.
fn apply_override(root: &mut Value, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("--set expects key=value, got `{assignment}`")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = slot
            .as_object_mut()
            .ok_or_else(|| CliError::Validation(format!("--set {key}: `{}` is not an object", parts[..i].join("."))))?;
        if !obj.contains_key(*part) {
            return Err(CliError::Validation(format!("--set {key}: unknown key `{part}`")));
        }
        slot = obj.get_mut(*part).expect("checked above");
    }
    *slot = value;
    Ok(())
}

fn parse_config_value(v: &Value) -> CliResult<PipelineConfig> {
    serde_json::from_value(v.clone()).map_err(|e| CliError::Validation(format!("config: {e}")))
}

/// Defaults, then the optional file, then overrides, then `--seed`.
pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> CliResult<PipelineConfig> {
    let mut v = default_value();
    if let Some(p) = path {
        let text = std::fs::read_to_string(p)
            .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
        merge(&mut v, parse_jsonc(&text, &p.display().to_string())?);
    }
    for o in overrides {
        apply_override(&mut v, o)?;
    }
    let mut cfg = parse_config_value(&v)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

impl PipelineConfig {
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Validation(m));
        let s = &self.synth;
        if s.generator.points_per_tooth == 0 {
            return bad("synth.generator.points_per_tooth must be positive".into());
        }
        if s.partial_missing.0 == 0 || s.partial_missing.0 > s.partial_missing.1 || s.partial_missing.1 > 27 {
            return bad(format!("synth.partial_missing {:?} must satisfy 1 <= lo <= hi <= 27", s.partial_missing));
        }
        if !(self.schedule.steps >= 2 && 0.0 < self.schedule.beta_min && self.schedule.beta_min < self.schedule.beta_max && self.schedule.beta_max < 1.0) {
            return bad(format!("invalid schedule {:?}", self.schedule));
        }
        for (name, t) in [("stage1", &self.stage1), ("stage2", &self.stage2), ("boundary", &self.boundary)] {
            if t.batch_size == 0 || !(t.lr >= 0.0) || !t.lr.is_finite() {
                return bad(format!("{name}: batch_size must be positive and lr finite and non-negative"));
            }
        }
        if !matches!(self.sampling.stage, 1 | 2) {
            return bad(format!("sampling.stage must be 1 or 2, got {}", self.sampling.stage));
        }
        if self.metrics.thresholds.iter().any(|t| !(*t > 0.0)) {
            return bad("metrics.thresholds must be positive".into());
        }
        let ni = &self.stats.ni;
        if !(ni.margin < 0.0) || !(0.0 < ni.level && ni.level < 1.0) || ni.bootstrap_iters < 1000 {
            return bad("stats.ni needs margin < 0, 0 < level < 1 and at least 1000 bootstrap iterations".into());
        }
        if self.stats.agreement_iters < 1000 {
            return bad("stats.agreement_iters must be at least 1000".into());
        }
        if self.stats.reader_study.cases < 2 || self.stats.reader_study.readers == 0 {
            return bad("stats.reader_study needs at least 2 cases and 1 reader".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_validate() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!(c.schedule.steps, 200);
        assert_eq!(c.regressor.dropout, 0.3);
        assert_eq!(c.denoiser.dropout, 0.1);
    }

    #[test]
    fn comments_inside_strings_survive() {
        let s = strip_comments("{\"a\": \"x//y\"} // tail\n// full line\n");
        let v: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["a"], "x//y");
    }

    #[test]
    fn overrides() {
        let c = load(None, &["stage1.epochs=3".into(), "sampling.bounds=fitted".into()], Some(9)).unwrap();
        assert_eq!(c.stage1.epochs, 3);
        assert_eq!(c.sampling.bounds, BoundSource::Fitted);
        assert_eq!(c.seed, 9);
        assert!(load(None, &["stage1.epoch=3".into()], None).is_err());
        assert!(load(None, &["stage1".into()], None).is_err());
        assert!(load(None, &["schedule.beta_min=0.5".into()], None).is_err());
    }

    #[test]
    fn file_merges_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonc");
        std::fs::write(&p, "// partial\n{ \"synth\": { \"train\": 5 }, \"seed\": 4 }").unwrap();
        let c = load(Some(&p), &[], None).unwrap();
        assert_eq!(c.synth.train, 5);
        assert_eq!(c.synth.test, 8);
        assert_eq!(c.seed, 4);
        std::fs::write(&p, "{ \"synth\": { \"trian\": 5 } }").unwrap();
        assert!(load(Some(&p), &[], None).is_err());
    }

    #[test]
    fn changing_schedule_kind_drops_old_fields() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{ "stage1": { "schedule": { "kind": "step", "every": 5, "gamma": 0.5 } } }"#).unwrap();
        let c = load(Some(&p), &[], None).unwrap();
        assert_eq!(c.stage1.schedule, LrSchedule::Step { every: 5, gamma: 0.5 });
        std::fs::write(&p, r#"{ "stage1": { "schedule": { "min_lr": 1e-4 } } }"#).unwrap();
        let c = load(Some(&p), &[], None).unwrap();
        assert_eq!(c.stage1.schedule, LrSchedule::Cosine { min_lr: 1e-4, epochs: 200 });
    }

    #[test]
    fn hash_tracks_content() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
