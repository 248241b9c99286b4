//! Directory layout under `--out`, step directories, run manifests and
//! checkpoint files.

use std::fs;
use std::path::{Path, PathBuf};

use dentgen_core::dentition::io::write_atomic;
use dentgen_core::diffusion::{DiffusionSchedule, ScheduleConfig};
use dentgen_core::nets::params::CHECKPOINT_VERSION;
use dentgen_core::nets::{
    load_into, read_checkpoint, write_checkpoint, BoundaryRegressor, Denoiser, DenoiserConfig, RegressorConfig,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::PipelineConfig;
use crate::error::{io_err, CliError, CliResult, Context};

pub const RUN_MANIFEST: &str = "run.json";
pub const CHECKPOINT: &str = "checkpoint.bin";
pub const DATASET_INDEX: &str = "dataset.json";

#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn data(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn boundary(&self) -> PathBuf {
        self.root.join("boundary")
    }

    pub fn stage(&self, stage: u8) -> PathBuf {
        self.root.join(format!("stage{stage}"))
    }

    pub fn pseudo(&self) -> PathBuf {
        self.root.join("pseudo")
    }

    pub fn samples(&self) -> PathBuf {
        self.root.join("samples")
    }

    pub fn eval(&self) -> PathBuf {
        self.root.join("eval")
    }

    pub fn stats(&self) -> PathBuf {
        self.root.join("stats")
    }
}

/// Creates an empty step directory. An existing non-empty one is removed
/// with `force` and refused otherwise.
pub fn prepare_step(dir: &Path, force: bool) -> CliResult<()> {
    if dir.exists() {
        let occupied = fs::read_dir(dir).map_err(|e| io_err(dir, e))?.next().is_some();
        if occupied {
            if !force {
                return Err(CliError::Exists(dir.to_path_buf()));
            }
            fs::remove_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
    }
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn require(path: &Path, step: &'static str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingArtifact {
            path: path.to_path_buf(),
            step,
        })
    }
}

/// Pretty JSON with a trailing newline, written atomically.
pub fn write_json(path: &Path, v: &impl Serialize) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    s.push('\n');
    write_atomic(path, s.as_bytes()).context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Provenance record written into every step directory. Holds nothing that
/// varies between identical runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub dentgen_cli: String,
    pub dentgen_core: String,
    pub checkpoint_format: u32,
    pub seed: u64,
    pub config_sha256: String,
    pub details: Value,
    pub config: PipelineConfig,
}

pub fn write_run_manifest(dir: &Path, command: &str, cfg: &PipelineConfig, details: Value) -> CliResult<()> {
    let m = RunManifest {
        command: command.into(),
        dentgen_cli: env!("CARGO_PKG_VERSION").into(),
        dentgen_core: dentgen_core::VERSION.into(),
        checkpoint_format: CHECKPOINT_VERSION,
        seed: cfg.seed,
        config_sha256: cfg.hash(),
        details,
        config: cfg.clone(),
    };
    write_json(&dir.join(RUN_MANIFEST), &m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckpointMeta {
    Denoiser {
        stage: u8,
        config: DenoiserConfig,
        schedule: ScheduleConfig,
    },
    Regressor {
        config: RegressorConfig,
    },
}

pub fn save_denoiser(dir: &Path, model: &Denoiser, stage: u8, schedule: ScheduleConfig) -> CliResult<()> {
    let meta = CheckpointMeta::Denoiser {
        stage,
        config: model.net.cfg,
        schedule,
    };
    let path = dir.join(CHECKPOINT);
    write_checkpoint(&path, &model.store, &json!(meta)).context(|| format!("writing {}", path.display()))
}

pub fn save_regressor(dir: &Path, model: &BoundaryRegressor) -> CliResult<()> {
    let meta = CheckpointMeta::Regressor { config: model.net.cfg };
    let path = dir.join(CHECKPOINT);
    write_checkpoint(&path, &model.store, &json!(meta)).context(|| format!("writing {}", path.display()))
}

fn read_meta(path: &Path) -> CliResult<(CheckpointMeta, dentgen_core::nets::ParamStore)> {
    let (meta, store) = read_checkpoint(path).context(|| format!("reading {}", path.display()))?;
    let meta = serde_json::from_value(meta)
        .map_err(|e| CliError::Validation(format!("{}: bad checkpoint metadata: {e}", path.display())))?;
    Ok((meta, store))
}

/// The denoiser and the schedule it was trained with.
pub fn load_denoiser(dir: &Path, step: &'static str) -> CliResult<(Denoiser, DiffusionSchedule<f64>, ScheduleConfig)> {
    let path = dir.join(CHECKPOINT);
    require(&path, step)?;
    match read_meta(&path)? {
        (CheckpointMeta::Denoiser { config, schedule, .. }, store) => {
            let mut model = Denoiser::new(config, 0)?;
            load_into(&mut model.store, &store).context(|| format!("loading {}", path.display()))?;
            let s = DiffusionSchedule::from_config(&schedule)?;
            Ok((model, s, schedule))
        }
        _ => Err(CliError::Validation(format!("{} is not a denoiser checkpoint", path.display()))),
    }
}

pub fn load_regressor(dir: &Path) -> CliResult<BoundaryRegressor> {
    let path = dir.join(CHECKPOINT);
    require(&path, "train-boundary")?;
    match read_meta(&path)? {
        (CheckpointMeta::Regressor { config }, store) => {
            let mut model = BoundaryRegressor::new(config, 0)?;
            load_into(&mut model.store, &store).context(|| format!("loading {}", path.display()))?;
            Ok(model)
        }
        _ => Err(CliError::Validation(format!("{} is not a regressor checkpoint", path.display()))),
    }
}

/// Named lists of dentition directories, relative to the index file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub splits: std::collections::BTreeMap<String, Split>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub count: usize,
    pub entries: Vec<String>,
}

impl DatasetIndex {
    pub fn add(&mut self, name: &str, entries: Vec<String>) {
        self.splits.insert(
            name.into(),
            Split {
                count: entries.len(),
                entries,
            },
        );
    }

    /// Absolute entry paths of one split.
    pub fn paths(&self, base: &Path, name: &str) -> CliResult<Vec<PathBuf>> {
        let s = self
            .splits
            .get(name)
            .ok_or_else(|| CliError::Validation(format!("dataset index has no split `{name}`")))?;
        Ok(s.entries.iter().map(|e| base.join(e)).collect())
    }
}

pub fn entry_name(split: &str, i: usize) -> String {
    format!("{split}/{i:04}")
}
