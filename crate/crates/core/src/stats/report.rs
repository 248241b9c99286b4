use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dentition::io::write_atomic;
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::agreement::{brennan_prediger_table, contingency, gwet_ac2_table, kendall_w, opa_table, Weights};
use crate::stats::inference::{bootstrap_stat, ni_decision, paired_t, Alternative, NiConfig, NiVerdict, TTest};
use crate::stats::table::{paired_differences, Endpoint, ScoreTable, Workflow, SCORE_MAX, SCORE_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub ni: NiConfig,
    pub weights: Weights,
    pub agreement_iters: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            ni: NiConfig::default(),
            weights: Weights::Quadratic,
            agreement_iters: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NiRow {
    pub endpoint: String,
    pub cases: usize,
    pub mean_assisted: f64,
    pub mean_manual: f64,
    pub mean_difference: f64,
    pub boot_lo: f64,
    pub boot_hi: f64,
    pub verdict: NiVerdict,
    pub t_lo: f64,
    pub t_hi: f64,
    pub t_verdict: NiVerdict,
    pub t_two_sided: TTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub level: String,
    pub workflow: String,
    pub criterion: String,
    pub items: usize,
    pub metric: String,
    pub value: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub level: String,
    pub workflow: String,
    pub criterion: String,
    /// Rows: first reader; columns: second reader; categories ascending.
    pub counts: Vec<Vec<usize>>,
    pub opa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub readers: Vec<String>,
    pub cases: usize,
    pub non_inferiority: Vec<NiRow>,
    pub agreement: Vec<AgreementRow>,
    pub contingency: Vec<ContingencyTable>,
    pub notes: Vec<String>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn endpoint_means(t: &ScoreTable, e: &Endpoint) -> (f64, f64) {
    let readers = t.readers();
    let crits = match e {
        Endpoint::Criterion(c) => vec![c.clone()],
        Endpoint::Composite => t.criteria(),
    };
    let mut out = [0.0; 2];
    for (slot, w) in Workflow::ALL.into_iter().enumerate() {
        let mut acc = Vec::new();
        for case in t.cases() {
            let mut s = 0.0;
            for k in &crits {
                for r in &readers {
                    s += t.get(&case, r, k, w).unwrap_or(0) as f64;
                }
            }
            acc.push(s / (crits.len() * readers.len()) as f64);
        }
        out[slot] = mean(&acc);
    }
    (out[0], out[1])
}

/// Rated units of one aggregation cell: per case, the two readers' scores
/// for each (criterion, workflow) in the cell.
struct Cell {
    level: &'static str,
    workflow: String,
    criterion: String,
    by_case: Vec<Vec<(u8, u8)>>,
}

fn cells(t: &ScoreTable, readers: &[String]) -> Vec<Cell> {
    let crits = t.criteria();
    let cases = t.cases();
    let collect = |ws: &[Workflow], ks: &[String]| -> Vec<Vec<(u8, u8)>> {
        cases
            .iter()
            .map(|c| {
                let mut v = Vec::new();
                for &w in ws {
                    for k in ks {
                        if let (Some(a), Some(b)) = (t.get(c, &readers[0], k, w), t.get(c, &readers[1], k, w)) {
                            v.push((a, b));
                        }
                    }
                }
                v
            })
            .collect()
    };
    let mut out = Vec::new();
    for w in Workflow::ALL {
        for k in &crits {
            out.push(Cell {
                level: "workflow_criterion",
                workflow: w.name().into(),
                criterion: k.clone(),
                by_case: collect(&[w], std::slice::from_ref(k)),
            });
        }
    }
    for k in &crits {
        out.push(Cell {
            level: "criterion",
            workflow: "all".into(),
            criterion: k.clone(),
            by_case: collect(&Workflow::ALL, std::slice::from_ref(k)),
        });
    }
    for w in Workflow::ALL {
        out.push(Cell {
            level: "workflow",
            workflow: w.name().into(),
            criterion: "all".into(),
            by_case: collect(&[w], &crits),
        });
    }
    out.push(Cell {
        level: "overall",
        workflow: "all".into(),
        criterion: "all".into(),
        by_case: collect(&Workflow::ALL, &crits),
    });
    out
}

const METRICS: [&str; 4] = ["gwet_ac2", "brennan_prediger", "kendall_w", "opa"];

fn metric(name: &str, pairs: &[(u8, u8)], weights: Weights) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let cats: Vec<u8> = (SCORE_MIN..=SCORE_MAX).collect();
    let a: Vec<u8> = pairs.iter().map(|p| p.0).collect();
    let b: Vec<u8> = pairs.iter().map(|p| p.1).collect();
    let table = contingency(&a, &b, &cats).ok()?;
    match name {
        "gwet_ac2" => gwet_ac2_table(&table, weights).ok(),
        "brennan_prediger" => brennan_prediger_table(&table, weights).ok(),
        "kendall_w" => kendall_w(&[
            a.iter().map(|&v| v as f64).collect(),
            b.iter().map(|&v| v as f64).collect(),
        ])
        .ok(),
        "opa" => opa_table(&table).ok(),
        _ => None,
    }
}

/// Non-inferiority per criterion and for the composite, and two-reader
/// agreement at four aggregation levels.
pub fn analyze(t: &ScoreTable, cfg: &StatsConfig) -> Result<StatsReport> {
    let mut endpoints: Vec<Endpoint> = t.criteria().into_iter().map(Endpoint::Criterion).collect();
    endpoints.push(Endpoint::Composite);
    let mut ni = Vec::new();
    for (i, e) in endpoints.iter().enumerate() {
        let diffs: Vec<f64> = paired_differences(t, e)?.into_iter().map(|d| d.1).collect();
        let ni_cfg = NiConfig {
            seed: rng::derive_seed(cfg.ni.seed, &[1, i as u64]),
            ..cfg.ni
        };
        let r = ni_decision(&diffs, &ni_cfg)?;
        let (ma, mm) = endpoint_means(t, e);
        ni.push(NiRow {
            endpoint: e.name().to_string(),
            cases: diffs.len(),
            mean_assisted: ma,
            mean_manual: mm,
            mean_difference: r.mean,
            boot_lo: r.bootstrap_ci.0,
            boot_hi: r.bootstrap_ci.1,
            verdict: r.verdict,
            t_lo: r.t_ci.0,
            t_hi: r.t_ci.1,
            t_verdict: r.t_verdict,
            t_two_sided: paired_t(&diffs, Alternative::TwoSided)?,
        });
    }

    let readers = t.readers();
    let mut agreement = Vec::new();
    let mut tables = Vec::new();
    let mut notes = Vec::new();
    if readers.len() == 2 {
        if cfg.agreement_iters < 1000 {
            return Err(Error::InvalidInput(format!(
                "agreement bootstrap needs at least 1000 iterations, got {}",
                cfg.agreement_iters
            )));
        }
        let cats: Vec<u8> = (SCORE_MIN..=SCORE_MAX).collect();
        for (ci, cell) in cells(t, &readers).into_iter().enumerate() {
            let pairs: Vec<(u8, u8)> = cell.by_case.iter().flatten().copied().collect();
            let a: Vec<u8> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<u8> = pairs.iter().map(|p| p.1).collect();
            let counts = contingency(&a, &b, &cats)?;
            tables.push(ContingencyTable {
                level: cell.level.into(),
                workflow: cell.workflow.clone(),
                criterion: cell.criterion.clone(),
                opa: opa_table(&counts)?,
                counts,
            });
            for (mi, name) in METRICS.into_iter().enumerate() {
                let value = metric(name, &pairs, cfg.weights);
                let seed = rng::derive_seed(cfg.ni.seed, &[2, ci as u64, mi as u64]);
                let mut buf = Vec::with_capacity(pairs.len());
                let ci_pair = bootstrap_stat(cell.by_case.len(), cfg.agreement_iters, cfg.ni.level, seed, |idx| {
                    buf.clear();
                    for &i in idx {
                        buf.extend_from_slice(&cell.by_case[i]);
                    }
                    metric(name, &buf, cfg.weights)
                });
                agreement.push(AgreementRow {
                    level: cell.level.into(),
                    workflow: cell.workflow.clone(),
                    criterion: cell.criterion.clone(),
                    items: pairs.len(),
                    metric: name.into(),
                    value,
                    ci_lo: ci_pair.map(|c| c.0),
                    ci_hi: ci_pair.map(|c| c.1),
                });
            }
        }
        notes.push("case-level percentile bootstrap; resamples with an undefined coefficient are skipped".into());
    } else {
        notes.push(format!("agreement needs exactly 2 readers, table has {}", readers.len()));
    }
    Ok(StatsReport {
        readers,
        cases: t.cases().len(),
        non_inferiority: ni,
        agreement,
        contingency: tables,
        notes,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12}")).unwrap_or_default()
}

/// Writes `ni.csv`, `agreement.csv` and `summary.json` into `dir`.
pub fn write_stats_report(dir: &Path, r: &StatsReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let verdict = |v: NiVerdict| match v {
        NiVerdict::Noninferior => "noninferior",
        NiVerdict::Inconclusive => "inconclusive",
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "endpoint", "cases", "mean_assisted", "mean_manual", "mean_difference", "boot_lo", "boot_hi", "verdict", "t_lo",
        "t_hi", "t_verdict", "t_stat", "p_two_sided",
    ])?;
    for n in &r.non_inferiority {
        let (ts, p) = match n.t_two_sided {
            TTest::Test { t, p, .. } => (Some(t), Some(p)),
            TTest::Degenerate { .. } => (None, None),
        };
        w.write_record([
            n.endpoint.clone(),
            n.cases.to_string(),
            format!("{:.12}", n.mean_assisted),
            format!("{:.12}", n.mean_manual),
            format!("{:.12}", n.mean_difference),
            format!("{:.12}", n.boot_lo),
            format!("{:.12}", n.boot_hi),
            verdict(n.verdict).into(),
            format!("{:.12}", n.t_lo),
            format!("{:.12}", n.t_hi),
            verdict(n.t_verdict).into(),
            fmt_opt(ts),
            fmt_opt(p),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    write_atomic(&dir.join("ni.csv"), &bytes)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["level", "workflow", "criterion", "items", "metric", "value", "ci_lo", "ci_hi"])?;
    for a in &r.agreement {
        w.write_record([
            a.level.clone(),
            a.workflow.clone(),
            a.criterion.clone(),
            a.items.to_string(),
            a.metric.clone(),
            fmt_opt(a.value),
            fmt_opt(a.ci_lo),
            fmt_opt(a.ci_hi),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    write_atomic(&dir.join("agreement.csv"), &bytes)?;

    let json = serde_json::to_vec_pretty(r).map_err(|e| Error::Json {
        path: dir.join("summary.json"),
        source: e,
    })?;
    write_atomic(&dir.join("summary.json"), &json)
}
