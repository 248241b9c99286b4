//! One function per subcommand. Each writes into its own step directory
//! under the workspace root and finishes with a run manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use dentgen_core::boundary::{cyl_overlap, fit_bound, read_bounds_csv, write_bounds_csv, CylBound};
use dentgen_core::dentition::io::read_dentition_with_meta;
use dentgen_core::dentition::{coverage_suite, read_dentition, synth_dentition, write_dentition, Dentition, Fdi};
use dentgen_core::metrics::{evaluate_scenario, report_rows, write_metric_rows, Cloud, EvalMode, MetricRow};
use dentgen_core::nets::{train_denoiser, train_regressor, BoundaryRegressor, Denoiser, LossTrace};
use dentgen_core::pipeline::{fill_gaps, generate_crowns};
use dentgen_core::rng::derive_seed;
use dentgen_core::stats::{analyze, write_stats_report, ScoreTable, StatsConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{BoundSource, PipelineConfig};
use crate::error::{CliError, CliResult, Context};
use crate::readers;
use crate::workspace::{
    entry_name, load_denoiser, load_regressor, prepare_step, read_json, require, save_denoiser, save_regressor,
    write_json, write_run_manifest, DatasetIndex, Workspace, DATASET_INDEX,
};

/// Keys separating the random streams of the pipeline steps.
pub mod keys {
    pub const TRAIN: u64 = 1;
    pub const TEST: u64 = 2;
    pub const PARTIAL: u64 = 3;
    pub const READERS: u64 = 4;
    pub const BOUNDARY: u64 = 10;
    pub const STAGE1: u64 = 11;
    pub const STAGE2: u64 = 12;
    pub const PSEUDO: u64 = 20;
    pub const SAMPLE: u64 = 30;
    pub const STATS: u64 = 40;
}

pub const SCORES: &str = "scores.csv";
pub const SAMPLE_INDEX: &str = "index.json";
pub const BOUNDS: &str = "bounds.csv";

pub struct Ctx {
    pub cfg: PipelineConfig,
    pub ws: Workspace,
    pub force: bool,
}

impl Ctx {
    fn seed(&self, keys: &[u64]) -> u64 {
        derive_seed(self.cfg.seed, keys)
    }
}

fn load_split(ws: &Workspace, split: &str, step: &'static str) -> CliResult<Vec<(String, Dentition<f64>)>> {
    let base = ws.data();
    let index_path = base.join(DATASET_INDEX);
    require(&index_path, step)?;
    let index: DatasetIndex = read_json(&index_path)?;
    let names = &index
        .splits
        .get(split)
        .ok_or_else(|| CliError::Validation(format!("{}: no split `{split}`", index_path.display())))?
        .entries;
    names
        .par_iter()
        .map(|n| {
            let d = read_dentition(&base.join(n)).context(|| format!("reading dentition {n}"))?;
            Ok((n.clone(), d))
        })
        .collect()
}

fn write_loss(dir: &Path, trace: &LossTrace) -> CliResult<()> {
    let path = dir.join("loss.csv");
    trace.write_csv(&path).context(|| format!("writing {}", path.display()))
}

fn loss_summary(trace: &LossTrace) -> Value {
    json!({ "epochs": trace.losses.len(), "first_loss": trace.first(), "last_loss": trace.last() })
}

pub fn synth(ctx: &Ctx) -> CliResult<()> {
    let dir = ctx.ws.data();
    prepare_step(&dir, ctx.force)?;
    let s = &ctx.cfg.synth;
    let mut partial_gen = s.generator.clone();
    partial_gen.missing = s.partial_missing;
    let splits = [
        ("train", s.train, keys::TRAIN, &s.generator),
        ("test", s.test, keys::TEST, &s.generator),
        ("partial", s.partial, keys::PARTIAL, &partial_gen),
    ];
    let mut index = DatasetIndex::default();
    for (name, n, key, generator) in splits {
        let entries: Vec<String> = (0..n)
            .into_par_iter()
            .map(|i| {
                let seed = ctx.seed(&[key, i as u64]);
                let d = synth_dentition::<f64>(seed, generator).context(|| format!("synthesizing {name} {i}"))?;
                let entry = entry_name(name, i);
                let meta = json!({ "split": name, "index": i, "seed": seed });
                write_dentition(&d, &dir.join(&entry), Some(meta)).context(|| format!("writing {entry}"))?;
                Ok(entry)
            })
            .collect::<CliResult<_>>()?;
        eprintln!("synth: {n} {name} dentitions");
        index.add(name, entries);
    }
    write_json(&dir.join(DATASET_INDEX), &index)?;
    let scores = readers::simulate(&ctx.cfg.stats.reader_study, ctx.seed(&[keys::READERS]))?;
    let path = dir.join(SCORES);
    scores.write_csv(&path).context(|| format!("writing {}", path.display()))?;
    let counts: BTreeMap<&str, usize> = index.splits.iter().map(|(k, v)| (k.as_str(), v.count)).collect();
    write_run_manifest(&dir, "synth", &ctx.cfg, json!({ "counts": counts }))
}

pub fn train_boundary(ctx: &Ctx) -> CliResult<()> {
    let data = load_split(&ctx.ws, "train", "synth")?;
    let dir = ctx.ws.boundary();
    prepare_step(&dir, ctx.force)?;
    let dents: Vec<Dentition<f64>> = data.into_iter().map(|(_, d)| d).collect();
    let mut model = BoundaryRegressor::new(ctx.cfg.regressor, ctx.seed(&[keys::BOUNDARY, 0]))?;
    let tc = ctx.cfg.boundary.to_train_config(ctx.seed(&[keys::BOUNDARY, 1]));
    eprintln!("train-boundary: {} dentitions, {} epochs", dents.len(), tc.epochs);
    let trace = train_regressor(&mut model, &dents, &tc).context(|| "training boundary regressor".into())?;
    save_regressor(&dir, &model)?;
    write_loss(&dir, &trace)?;
    write_run_manifest(
        &dir,
        "train-boundary",
        &ctx.cfg,
        json!({ "dataset_size": dents.len(), "loss": loss_summary(&trace) }),
    )
}

pub fn train_denoiser_stage(ctx: &Ctx, stage: u8) -> CliResult<()> {
    let train = load_split(&ctx.ws, "train", "synth")?;
    let mut dents: Vec<Dentition<f64>> = train.into_iter().map(|(_, d)| d).collect();
    let n_train = dents.len();
    let (mut model, key) = match stage {
        1 => (Denoiser::new(ctx.cfg.denoiser, ctx.seed(&[keys::STAGE1, 0]))?, keys::STAGE1),
        2 => {
            let (m, _, sc) = load_denoiser(&ctx.ws.stage(1), "train-denoiser --stage 1")?;
            if sc != ctx.cfg.schedule {
                return Err(CliError::Validation(format!(
                    "stage-1 checkpoint was trained with schedule {sc:?}, config has {:?}",
                    ctx.cfg.schedule
                )));
            }
            if m.net.cfg != ctx.cfg.denoiser {
                return Err(CliError::Validation("stage-1 checkpoint network differs from config.denoiser".into()));
            }
            (m, keys::STAGE2)
        }
        _ => return Err(CliError::Validation(format!("--stage must be 1 or 2, got {stage}"))),
    };
    let mut n_pseudo = 0;
    if stage == 2 {
        let index_path = ctx.ws.pseudo().join(DATASET_INDEX);
        if index_path.exists() {
            let index: DatasetIndex = read_json(&index_path)?;
            let paths = index.paths(&ctx.ws.pseudo(), "pseudo")?;
            let extra: Vec<Dentition<f64>> = paths
                .par_iter()
                .map(|p| read_dentition(p).context(|| format!("reading {}", p.display())))
                .collect::<CliResult<_>>()?;
            n_pseudo = extra.len();
            dents.extend(extra);
        } else {
            eprintln!("train-denoiser: no pseudo-crown dataset at {}", index_path.display());
        }
    }
    let dir = ctx.ws.stage(stage);
    prepare_step(&dir, ctx.force)?;
    let section = if stage == 1 { ctx.cfg.stage1 } else { ctx.cfg.stage2 };
    let tc = section.to_train_config(ctx.seed(&[key, 1]));
    let s = dentgen_core::diffusion::DiffusionSchedule::from_config(&ctx.cfg.schedule)?;
    eprintln!(
        "train-denoiser: stage {stage}, dataset {} dentitions ({n_train} observed + {n_pseudo} pseudo-completed), {} epochs",
        dents.len(),
        tc.epochs
    );
    let trace = train_denoiser(&mut model, &dents, &s, &tc).context(|| format!("training stage-{stage} denoiser"))?;
    save_denoiser(&dir, &model, stage, ctx.cfg.schedule)?;
    write_loss(&dir, &trace)?;
    write_run_manifest(
        &dir,
        "train-denoiser",
        &ctx.cfg,
        json!({
            "stage": stage,
            "dataset_size": dents.len(),
            "observed": n_train,
            "pseudo_completed": n_pseudo,
            "loss": loss_summary(&trace),
        }),
    )
}

pub fn bootstrap_pseudo(ctx: &Ctx) -> CliResult<()> {
    let (model, s, sc) = load_denoiser(&ctx.ws.stage(1), "train-denoiser --stage 1")?;
    let regressor = load_regressor(&ctx.ws.boundary())?;
    let partial = load_split(&ctx.ws, "partial", "synth")?;
    let dir = ctx.ws.pseudo();
    prepare_step(&dir, ctx.force)?;
    let seed = ctx.seed(&[keys::PSEUDO]);
    let n_points = ctx.cfg.synth.generator.points_per_tooth;
    let filled: Vec<(String, Vec<u32>)> = partial
        .par_iter()
        .enumerate()
        .map(|(i, (name, d))| {
            let full = fill_gaps(&model, &regressor, &s, d, n_points, seed, i as u64)
                .context(|| format!("filling gaps of {name}"))?;
            let added: Vec<u32> = full.teeth().filter(|t| t.pseudo).map(|t| t.fdi.code()).collect();
            let entry = format!("{i:04}");
            let meta = json!({ "source": name, "pseudo": added, "seed": seed, "schedule": sc });
            write_dentition(&full, &dir.join(&entry), Some(meta)).context(|| format!("writing {entry}"))?;
            Ok((entry, added))
        })
        .collect::<CliResult<_>>()?;
    let total: usize = filled.iter().map(|f| f.1.len()).sum();
    eprintln!("bootstrap-pseudo: {total} pseudo-crowns over {} dentitions", filled.len());
    let mut index = DatasetIndex::default();
    index.add("pseudo", filled.iter().map(|f| f.0.clone()).collect());
    write_json(&dir.join(DATASET_INDEX), &index)?;
    write_run_manifest(
        &dir,
        "bootstrap-pseudo",
        &ctx.cfg,
        json!({ "dentitions": filled.len(), "pseudo_crowns": total }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: String,
    pub dentition: String,
    pub targets: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleIndex {
    pub stage: u8,
    pub bounds: BoundSource,
    pub scenarios: Vec<SampleEntry>,
}

fn masked(d: &Dentition<f64>, targets: &BTreeSet<Fdi>) -> Dentition<f64> {
    let mut m = d.clone();
    for f in targets {
        m.remove(*f);
    }
    m
}

pub fn sample(ctx: &Ctx) -> CliResult<()> {
    let stage = ctx.cfg.sampling.stage;
    let (model, s, sc) = load_denoiser(&ctx.ws.stage(stage), "train-denoiser")?;
    let regressor = match ctx.cfg.sampling.bounds {
        BoundSource::Predicted => Some(load_regressor(&ctx.ws.boundary())?),
        BoundSource::Fitted => None,
    };
    let test = load_split(&ctx.ws, "test", "synth")?;
    let dir = ctx.ws.samples();
    prepare_step(&dir, ctx.force)?;
    let seed = ctx.seed(&[keys::SAMPLE]);
    let n_points = ctx.cfg.synth.generator.points_per_tooth;

    let mut jobs = Vec::new();
    for (i, (name, d)) in test.iter().enumerate() {
        let suite = coverage_suite(d, &ctx.cfg.sampling.scenarios, derive_seed(seed, &[i as u64]))
            .context(|| format!("scenarios for {name}"))?;
        for (j, sc) in suite.into_iter().enumerate() {
            jobs.push((i, j, name, d, sc.targets));
        }
    }
    let entries: Vec<SampleEntry> = jobs
        .par_iter()
        .map(|(i, j, name, d, targets)| {
            let id = format!("{i:04}_{j:02}");
            let context = masked(d, targets);
            let bounds: Vec<(Fdi, CylBound<f64>)> = match &regressor {
                Some(r) => r.predict_bounds(&context, targets).context(|| format!("bounds for {id}"))?,
                None => targets
                    .iter()
                    .map(|f| Ok((*f, fit_bound(d.get(*f).expect("targets come from the dentition"))?)))
                    .collect::<dentgen_core::Result<_>>()
                    .context(|| format!("bounds for {id}"))?,
            };
            let scenario_key = ((*i as u64) << 32) | *j as u64;
            let crowns = generate_crowns(&model, &s, &context, &bounds, n_points, seed, scenario_key)
                .context(|| format!("sampling {id}"))?;
            let out = Dentition::new(crowns)?;
            let codes: Vec<u32> = targets.iter().map(|f| f.code()).collect();
            let meta = json!({
                "dentition": name,
                "targets": codes,
                "bounds": ctx.cfg.sampling.bounds,
                "stage": stage,
                "seed": seed,
                "scenario_key": scenario_key,
                "schedule": sc,
            });
            let sdir = dir.join(&id);
            write_dentition(&out, &sdir, Some(meta)).context(|| format!("writing {id}"))?;
            write_bounds_csv(&sdir.join(BOUNDS), &bounds).context(|| format!("writing bounds of {id}"))?;
            Ok(SampleEntry {
                id,
                dentition: (*name).clone(),
                targets: codes,
            })
        })
        .collect::<CliResult<_>>()?;
    eprintln!("sample: {} scenarios over {} test dentitions", entries.len(), test.len());
    let index = SampleIndex {
        stage,
        bounds: ctx.cfg.sampling.bounds,
        scenarios: entries,
    };
    write_json(&dir.join(SAMPLE_INDEX), &index)?;
    write_run_manifest(
        &dir,
        "sample",
        &ctx.cfg,
        json!({ "scenarios": index.scenarios.len(), "stage": stage, "bounds": index.bounds }),
    )
}

fn clouds(d: &Dentition<f64>, keys: &BTreeSet<Fdi>) -> BTreeMap<Fdi, Cloud<f64>> {
    d.teeth().filter(|t| keys.contains(&t.fdi)).map(|t| (t.fdi, Cloud::from_tooth(t))).collect()
}

fn fmt_codes<'a>(it: impl IntoIterator<Item = &'a Fdi>) -> String {
    it.into_iter().map(|f| f.to_string()).collect::<Vec<_>>().join(",")
}

struct ScenarioScores {
    rows: Vec<MetricRow>,
    missing: usize,
}

/// Scores one sampled scenario against its ground-truth dentition.
fn score_scenario(
    sample_dir: &Path,
    entry: &SampleEntry,
    truth: &Dentition<f64>,
    cfg: &PipelineConfig,
) -> CliResult<ScenarioScores> {
    let id = &entry.id;
    let (generated, _) = read_dentition_with_meta::<f64>(&sample_dir.join(id)).context(|| format!("reading sample {id}"))?;
    let expected: BTreeSet<Fdi> = entry
        .targets
        .iter()
        .map(|c| Fdi::new(*c))
        .collect::<dentgen_core::Result<_>>()
        .context(|| format!("index entry {id}"))?;
    let got: BTreeSet<Fdi> = generated.fdis().into_iter().collect();
    if got != expected {
        return Err(CliError::Validation(format!(
            "scenario {id}: generated teeth [{}] do not match targets [{}]",
            fmt_codes(&got),
            fmt_codes(&expected)
        )));
    }
    if let Some(f) = expected.iter().find(|f| !truth.contains(**f)) {
        return Err(CliError::Validation(format!(
            "scenario {id}: target {f} is absent from ground truth {}",
            entry.dentition
        )));
    }
    let gen = clouds(&generated, &expected);
    let gt = clouds(truth, &expected);
    let mut rows = Vec::new();
    for mode in [EvalMode::PerScenario, EvalMode::PerTooth] {
        let reports = evaluate_scenario(&gen, &gt, mode, &cfg.metrics).context(|| format!("scenario {id}"))?;
        rows.extend(report_rows(id, &reports));
    }
    let bounds = read_bounds_csv(&sample_dir.join(id).join(BOUNDS)).context(|| format!("bounds of {id}"))?;
    let bound_keys: BTreeSet<Fdi> = bounds.iter().map(|b| b.0).collect();
    if bound_keys != expected {
        return Err(CliError::Validation(format!(
            "scenario {id}: bounds for [{}] do not match targets [{}]",
            fmt_codes(&bound_keys),
            fmt_codes(&expected)
        )));
    }
    for (f, b) in &bounds {
        let fitted = fit_bound(truth.get(*f).expect("checked above")).context(|| format!("scenario {id}"))?;
        let o = cyl_overlap(b, &fitted);
        for (metric, value) in [("bound_dice", o.dice), ("bound_iou", o.iou)] {
            rows.push(MetricRow {
                scenario: id.clone(),
                tooth: f.to_string(),
                metric: metric.into(),
                value,
            });
        }
    }
    Ok(ScenarioScores {
        rows,
        missing: expected.len(),
    })
}

#[derive(Default)]
struct Acc(BTreeMap<String, (f64, usize)>);

impl Acc {
    fn add(&mut self, metric: &str, v: f64) {
        let e = self.0.entry(metric.to_string()).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }

    fn means(&self) -> BTreeMap<String, Value> {
        self.0
            .iter()
            .map(|(k, (s, n))| (k.clone(), json!({ "mean": s / *n as f64, "n": n })))
            .collect()
    }
}

pub fn evaluate(ctx: &Ctx) -> CliResult<()> {
    let sdir = ctx.ws.samples();
    let index_path = sdir.join(SAMPLE_INDEX);
    require(&index_path, "sample")?;
    let index: SampleIndex = read_json(&index_path)?;
    let base = ctx.ws.data();
    let names: BTreeSet<&String> = index.scenarios.iter().map(|e| &e.dentition).collect();
    let truths: BTreeMap<String, Dentition<f64>> = names
        .into_par_iter()
        .map(|n| {
            let p = base.join(n);
            let d = read_dentition(&p).context(|| format!("reading ground truth {n}"))?;
            Ok((n.clone(), d))
        })
        .collect::<CliResult<_>>()?;
    let dir = ctx.ws.eval();
    prepare_step(&dir, ctx.force)?;
    let scored: Vec<ScenarioScores> = index
        .scenarios
        .par_iter()
        .map(|e| score_scenario(&sdir, e, &truths[&e.dentition], &ctx.cfg))
        .collect::<CliResult<_>>()?;

    let mut overall = Acc::default();
    let mut by_missing: BTreeMap<usize, Acc> = BTreeMap::new();
    let mut by_group: BTreeMap<&str, Acc> = BTreeMap::new();
    let mut by_missing_group: BTreeMap<String, Acc> = BTreeMap::new();
    let mut all_rows = Vec::new();
    for s in &scored {
        for r in &s.rows {
            if r.tooth == "ALL" {
                overall.add(&r.metric, r.value);
                by_missing.entry(s.missing).or_default().add(&r.metric, r.value);
            } else {
                let code: u32 = r.tooth.parse().expect("tooth keys are FDI codes");
                let g = Fdi::new(code)?.group().name();
                by_group.entry(g).or_default().add(&r.metric, r.value);
                by_missing_group
                    .entry(format!("{}/{g}", s.missing))
                    .or_default()
                    .add(&r.metric, r.value);
            }
        }
        all_rows.extend(s.rows.iter().cloned());
    }
    let path = dir.join("metrics.csv");
    write_metric_rows(&path, &all_rows).context(|| format!("writing {}", path.display()))?;
    let summary = json!({
        "scenarios": scored.len(),
        "stage": index.stage,
        "bounds": index.bounds,
        "per_scenario": overall.means(),
        "by_missing": by_missing.iter().map(|(k, a)| (k.to_string(), a.means())).collect::<BTreeMap<_, _>>(),
        "by_group": by_group.iter().map(|(k, a)| (k.to_string(), a.means())).collect::<BTreeMap<_, _>>(),
        "by_missing_group": by_missing_group.iter().map(|(k, a)| (k.clone(), a.means())).collect::<BTreeMap<_, _>>(),
    });
    write_json(&dir.join("summary.json"), &summary)?;
    eprintln!("evaluate: {} scenarios, {} metric rows", scored.len(), all_rows.len());
    write_run_manifest(&dir, "evaluate", &ctx.cfg, json!({ "scenarios": scored.len(), "rows": all_rows.len() }))
}

pub fn stats(ctx: &Ctx) -> CliResult<()> {
    let path: PathBuf = match &ctx.cfg.stats.scores {
        Some(p) => p.clone(),
        None => ctx.ws.data().join(SCORES),
    };
    require(&path, "synth")?;
    let table = ScoreTable::read_csv(&path).context(|| format!("reading {}", path.display()))?;
    let mut ni = ctx.cfg.stats.ni;
    ni.seed = ctx.seed(&[keys::STATS, ni.seed]);
    let sc = StatsConfig {
        ni,
        weights: ctx.cfg.stats.weights,
        agreement_iters: ctx.cfg.stats.agreement_iters,
    };
    let dir = ctx.ws.stats();
    prepare_step(&dir, ctx.force)?;
    let report = analyze(&table, &sc).context(|| "analysing scores".into())?;
    write_stats_report(&dir, &report).context(|| format!("writing {}", dir.display()))?;
    eprintln!(
        "stats: {} cases, {} readers, {} endpoints",
        report.cases,
        report.readers.len(),
        report.non_inferiority.len()
    );
    write_run_manifest(&dir, "stats", &ctx.cfg, json!({ "cases": report.cases, "readers": report.readers }))
}
