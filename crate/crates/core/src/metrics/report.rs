use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dentition::Fdi;
use crate::error::{Error, Result};
use crate::metrics::distance::{asd, chamfer_l1, emd, estimate_normals, f1_at, normal_consistency};
use crate::point::Point3;
use crate::scalar::Real;

/// Scale applied to CD and EMD in reports.
pub const DISTANCE_REPORT_SCALE: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub struct Cloud<T> {
    pub points: Vec<Point3<T>>,
    pub normals: Option<Vec<Point3<T>>>,
}

impl<T: Real> Cloud<T> {
    pub fn new(points: Vec<Point3<T>>) -> Self {
        Cloud { points, normals: None }
    }

    pub fn from_tooth(t: &crate::dentition::Tooth<T>) -> Self {
        Cloud {
            points: t.points().to_vec(),
            normals: t.normals().map(|n| n.to_vec()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// All targets of a scenario concatenated into one sample.
    PerScenario,
    /// Each target tooth scored on its own.
    PerTooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    /// F1 distance thresholds (mm).
    pub thresholds: Vec<f64>,
    /// Neighbourhood size for normal estimation on clouds without normals.
    pub normal_neighbors: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            thresholds: vec![0.3, 0.5, 1.0],
            normal_neighbors: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport<T> {
    /// `"ALL"` for per-scenario reports, the FDI code otherwise.
    pub key: String,
    /// Chamfer-L1 scaled by [`DISTANCE_REPORT_SCALE`].
    pub cd: T,
    /// EMD scaled by [`DISTANCE_REPORT_SCALE`].
    pub emd: T,
    /// `(threshold, f1)` pairs.
    pub f1: Vec<(T, T)>,
    pub asd: T,
    /// `None` when the ground truth carries no normals.
    pub nc: Option<T>,
}

impl<T: Real> MetricReport<T> {
    /// `(metric name, value)` pairs in a fixed order.
    pub fn named_values(&self) -> Vec<(String, T)> {
        let mut v = vec![("cd".to_string(), self.cd), ("emd".to_string(), self.emd)];
        for (tau, f) in &self.f1 {
            v.push((format!("f1@{tau}"), *f));
        }
        v.push(("asd".to_string(), self.asd));
        if let Some(nc) = self.nc {
            v.push(("nc".to_string(), nc));
        }
        v
    }
}

fn score<T: Real>(key: String, gen: &Cloud<T>, truth: &Cloud<T>, cfg: &MetricConfig) -> Result<MetricReport<T>> {
    let scale = T::lit(DISTANCE_REPORT_SCALE);
    let cd = chamfer_l1(&gen.points, &truth.points)?;
    let em = emd(&gen.points, &truth.points)?;
    let f1 = cfg
        .thresholds
        .iter()
        .map(|&tau| f1_at(&gen.points, &truth.points, T::lit(tau)).map(|pr| (T::lit(tau), pr.f1)))
        .collect::<Result<Vec<_>>>()?;
    let nc = match &truth.normals {
        Some(tn) => {
            let gn = match &gen.normals {
                Some(n) => n.clone(),
                None => estimate_normals(&gen.points, cfg.normal_neighbors),
            };
            Some(normal_consistency(&gen.points, &gn, &truth.points, tn)?)
        }
        None => None,
    };
    Ok(MetricReport {
        key,
        cd: cd * scale,
        emd: em * scale,
        f1,
        asd: asd(&gen.points, &truth.points)?,
        nc,
    })
}

fn concat<T: Real>(clouds: &BTreeMap<Fdi, Cloud<T>>) -> Cloud<T> {
    let points = clouds.values().flat_map(|c| c.points.iter().copied()).collect();
    let normals = if clouds.values().all(|c| c.normals.is_some()) {
        Some(
            clouds
                .values()
                .flat_map(|c| c.normals.as_ref().unwrap().iter().copied())
                .collect(),
        )
    } else {
        None
    };
    Cloud { points, normals }
}

/// Scores generated crowns against the truth, either as one concatenated
/// sample or tooth by tooth.
pub fn evaluate_scenario<T: Real>(
    generated: &BTreeMap<Fdi, Cloud<T>>,
    truth: &BTreeMap<Fdi, Cloud<T>>,
    mode: EvalMode,
    cfg: &MetricConfig,
) -> Result<Vec<MetricReport<T>>> {
    let gk: Vec<Fdi> = generated.keys().copied().collect();
    let tk: Vec<Fdi> = truth.keys().copied().collect();
    if gk != tk {
        let fmt = |v: &[Fdi]| v.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(",");
        return Err(Error::InvalidInput(format!(
            "generated teeth [{}] do not match truth [{}]",
            fmt(&gk),
            fmt(&tk)
        )));
    }
    if gk.is_empty() {
        return Err(Error::Empty("scenario targets"));
    }
    match mode {
        EvalMode::PerScenario => Ok(vec![score(
            "ALL".to_string(),
            &concat(generated),
            &concat(truth),
            cfg,
        )?]),
        EvalMode::PerTooth => gk
            .iter()
            .map(|f| score(f.to_string(), &generated[f], &truth[f], cfg))
            .collect(),
    }
}

/// One long-format row: `(scenario, tooth|ALL, metric, value)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub scenario: String,
    pub tooth: String,
    pub metric: String,
    pub value: f64,
}

pub fn report_rows<T: Real>(scenario: &str, reports: &[MetricReport<T>]) -> Vec<MetricRow> {
    reports
        .iter()
        .flat_map(|r| {
            r.named_values().into_iter().map(move |(m, v)| MetricRow {
                scenario: scenario.to_string(),
                tooth: r.key.clone(),
                metric: m,
                value: v.to_f64_lossy(),
            })
        })
        .collect()
}

pub fn write_metric_rows(path: &std::path::Path, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
