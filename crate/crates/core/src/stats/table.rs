use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordinal scale shared by every criterion.
pub const SCORE_MIN: u8 = 1;
pub const SCORE_MAX: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Workflow {
    Assisted,
    Manual,
}

impl Workflow {
    pub const ALL: [Workflow; 2] = [Workflow::Assisted, Workflow::Manual];

    pub fn name(self) -> &'static str {
        match self {
            Workflow::Assisted => "assisted",
            Workflow::Manual => "manual",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub case: String,
    pub reader: String,
    pub criterion: String,
    pub workflow: Workflow,
    pub score: u8,
}

pub type ScoreKey = (String, String, String, Workflow);

/// Ordinal scores keyed by `(case, reader, criterion, workflow)`, fully
/// crossed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    scores: BTreeMap<ScoreKey, u8>,
}

impl ScoreTable {
    pub fn from_rows(rows: impl IntoIterator<Item = ScoreRow>) -> Result<Self> {
        let mut scores = BTreeMap::new();
        for r in rows {
            if !(SCORE_MIN..=SCORE_MAX).contains(&r.score) {
                return Err(Error::InvalidInput(format!(
                    "score {} for case {} reader {} outside {SCORE_MIN}..={SCORE_MAX}",
                    r.score, r.case, r.reader
                )));
            }
            let key = (r.case, r.reader, r.criterion, r.workflow);
            if scores.insert(key.clone(), r.score).is_some() {
                return Err(Error::InvalidInput(format!("duplicate score for {key:?}")));
            }
        }
        let t = ScoreTable { scores };
        t.check_crossed()?;
        Ok(t)
    }

    /// CSV with header `case,reader,criterion,workflow,score`.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let rows = rdr.deserialize::<ScoreRow>().collect::<std::result::Result<Vec<_>, _>>()?;
        Self::from_rows(rows)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in self.rows() {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn rows(&self) -> impl Iterator<Item = ScoreRow> + '_ {
        self.scores.iter().map(|((c, r, k, w), &s)| ScoreRow {
            case: c.clone(),
            reader: r.clone(),
            criterion: k.clone(),
            workflow: *w,
            score: s,
        })
    }

    fn check_crossed(&self) -> Result<()> {
        if self.scores.is_empty() {
            return Err(Error::Empty("score table"));
        }
        let (cases, readers, criteria) = (self.cases(), self.readers(), self.criteria());
        let workflows: BTreeSet<Workflow> = self.scores.keys().map(|k| k.3).collect();
        for c in &cases {
            for r in &readers {
                for k in &criteria {
                    for &w in &workflows {
                        if !self.scores.contains_key(&(c.clone(), r.clone(), k.clone(), w)) {
                            return Err(Error::InvalidInput(format!(
                                "missing score: case {c}, reader {r}, criterion {k}, workflow {}",
                                w.name()
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, case: &str, reader: &str, criterion: &str, w: Workflow) -> Option<u8> {
        self.scores
            .get(&(case.to_string(), reader.to_string(), criterion.to_string(), w))
            .copied()
    }

    pub fn cases(&self) -> Vec<String> {
        self.scores.keys().map(|k| k.0.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn readers(&self) -> Vec<String> {
        self.scores.keys().map(|k| k.1.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn criteria(&self) -> Vec<String> {
        self.scores.keys().map(|k| k.2.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn has_workflow(&self, w: Workflow) -> bool {
        self.scores.keys().any(|k| k.3 == w)
    }
}

/// Which score a paired difference is taken over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Criterion(String),
    /// Mean over all criteria.
    Composite,
}

impl Endpoint {
    pub fn name(&self) -> &str {
        match self {
            Endpoint::Criterion(c) => c,
            Endpoint::Composite => "composite",
        }
    }
}

fn reader_mean(t: &ScoreTable, case: &str, criterion: &str, w: Workflow, readers: &[String]) -> Result<f64> {
    let mut acc = 0.0;
    for r in readers {
        acc += t
            .get(case, r, criterion, w)
            .ok_or_else(|| Error::InvalidInput(format!("case {case} has no {} score for {criterion}", w.name())))?
            as f64;
    }
    Ok(acc / readers.len() as f64)
}

/// Per-case reader-averaged score difference, assisted minus manual, in
/// case order.
pub fn paired_differences(t: &ScoreTable, endpoint: &Endpoint) -> Result<Vec<(String, f64)>> {
    for w in Workflow::ALL {
        if !t.has_workflow(w) {
            return Err(Error::InvalidInput(format!("no {} scores in table", w.name())));
        }
    }
    let readers = t.readers();
    let criteria = match endpoint {
        Endpoint::Criterion(c) => {
            if !t.criteria().contains(c) {
                return Err(Error::InvalidInput(format!("unknown criterion {c}")));
            }
            vec![c.clone()]
        }
        Endpoint::Composite => t.criteria(),
    };
    t.cases()
        .into_iter()
        .map(|case| {
            let mut d = 0.0;
            for k in &criteria {
                d += reader_mean(t, &case, k, Workflow::Assisted, &readers)?
                    - reader_mean(t, &case, k, Workflow::Manual, &readers)?;
            }
            Ok((case, d / criteria.len() as f64))
        })
        .collect()
}
