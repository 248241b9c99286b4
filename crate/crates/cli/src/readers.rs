//! Simulated reader-study scores for exercising the statistics pipeline on
//! synthetic data.

use dentgen_core::rng;
use dentgen_core::stats::{ScoreRow, ScoreTable, Workflow, SCORE_MAX, SCORE_MIN};
use rand_distr::{Distribution, StandardNormal};

use crate::config::ReaderStudy;
use crate::error::CliResult;

pub const CRITERIA: [&str; 4] = ["occlusion", "proximal_contact", "arch_alignment", "crown_form"];

/// Mean latent quality; high, so most ratings land on the top category.
const BASE: f64 = 2.6;
const CASE_SD: f64 = 0.4;
const READER_SD: f64 = 0.1;
const CRITERION_OFFSET: [f64; 4] = [0.0, -0.1, 0.05, -0.05];

fn normal(seed: u64, keys: &[u64]) -> f64 {
    StandardNormal.sample(&mut rng::stream(seed, keys))
}

/// Ordinal scores from a latent case quality shared by both workflows, plus
/// reader bias and per-rating noise. Every draw has its own keyed stream.
pub fn simulate(study: &ReaderStudy, seed: u64) -> CliResult<ScoreTable> {
    let mut rows = Vec::new();
    for c in 0..study.cases {
        let q = CASE_SD * normal(seed, &[1, c as u64]);
        for r in 0..study.readers {
            let bias = READER_SD * normal(seed, &[2, r as u64]);
            for (k, crit) in CRITERIA.iter().enumerate() {
                for (w, workflow) in Workflow::ALL.into_iter().enumerate() {
                    let z = normal(seed, &[3, c as u64, r as u64, k as u64, w as u64]);
                    let latent = BASE + q + bias + CRITERION_OFFSET[k] + study.noise * z;
                    let score = latent.round().clamp(SCORE_MIN as f64, SCORE_MAX as f64) as u8;
                    rows.push(ScoreRow {
                        case: format!("case{:02}", c + 1),
                        reader: format!("R{}", r + 1),
                        criterion: crit.to_string(),
                        workflow,
                        score,
                    });
                }
            }
        }
    }
    Ok(ScoreTable::from_rows(rows)?)
}
