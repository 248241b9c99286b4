//! Masking designs: which teeth are generated (targets) and which condition
//! the generation (context).

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dentition::fdi::{Fdi, ToothGroup};
use crate::dentition::tooth::Dentition;
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

pub const MAX_TARGETS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub context: BTreeSet<Fdi>,
    pub targets: BTreeSet<Fdi>,
}

impl Scenario {
    /// Context is every present tooth that is not a target.
    pub fn new<T: Real>(dentition: &Dentition<T>, targets: &[Fdi]) -> Result<Self> {
        let targets: BTreeSet<Fdi> = targets.iter().copied().collect();
        if targets.is_empty() || targets.len() > MAX_TARGETS {
            return Err(Error::InvalidInput(format!(
                "scenario needs 1..={MAX_TARGETS} targets, got {}",
                targets.len()
            )));
        }
        for &t in &targets {
            if !dentition.contains(t) {
                return Err(Error::MissingTooth(t.code()));
            }
        }
        let context = dentition
            .fdis()
            .into_iter()
            .filter(|f| !targets.contains(f))
            .collect();
        Ok(Scenario { context, targets })
    }

    /// `k` targets drawn uniformly from the present teeth.
    pub fn random<T: Real>(dentition: &Dentition<T>, k: usize, seed: u64) -> Result<Self> {
        let pool = dentition.fdis();
        Self::pick(dentition, &pool, k, seed)
    }

    /// `k` targets drawn from a single functional group.
    pub fn random_in_group<T: Real>(
        dentition: &Dentition<T>,
        group: ToothGroup,
        k: usize,
        seed: u64,
    ) -> Result<Self> {
        let pool: Vec<Fdi> = dentition
            .fdis()
            .into_iter()
            .filter(|f| f.group() == group)
            .collect();
        Self::pick(dentition, &pool, k, seed)
    }

    /// Number of targets drawn uniformly from 1..=6, then the targets.
    /// Pseudo teeth are never targets unless nothing else is present.
    pub fn random_training<T: Real>(dentition: &Dentition<T>, seed: u64) -> Result<Self> {
        let mut pool: Vec<Fdi> = dentition.teeth().filter(|t| !t.pseudo).map(|t| t.fdi).collect();
        if pool.is_empty() {
            pool = dentition.fdis();
        }
        let mut r = rng::stream(seed, &[0x5CE7]);
        let max = MAX_TARGETS.min(pool.len()).min(dentition.len().saturating_sub(1)).max(1);
        let k = r.random_range(1..=max);
        Self::pick(dentition, &pool, k, rng::derive_seed(seed, &[k as u64]))
    }

    fn pick<T: Real>(dentition: &Dentition<T>, pool: &[Fdi], k: usize, seed: u64) -> Result<Self> {
        if k == 0 || k > MAX_TARGETS {
            return Err(Error::InvalidInput(format!(
                "scenario needs 1..={MAX_TARGETS} targets, got {k}"
            )));
        }
        if pool.len() < k {
            return Err(Error::InvalidInput(format!(
                "only {} candidate teeth for {k} targets",
                pool.len()
            )));
        }
        let mut r = rng::seeded(seed);
        let chosen: Vec<Fdi> = pool.choose_multiple(&mut r, k).copied().collect();
        Self::new(dentition, &chosen)
    }

    /// Functional group shared by all targets, if any.
    pub fn group(&self) -> Option<ToothGroup> {
        let mut it = self.targets.iter().map(|f| f.group());
        let first = it.next()?;
        it.all(|g| g == first).then_some(first)
    }
}

/// Per-tooth evaluation suite: `counts[k-1]` scenarios with `k` targets,
/// arranged so that every present tooth is a target at least once when the
/// total number of target slots allows it.
pub fn coverage_suite<T: Real>(
    dentition: &Dentition<T>,
    counts: &[usize; MAX_TARGETS],
    seed: u64,
) -> Result<Vec<Scenario>> {
    let mut r = rng::seeded(seed);
    let mut order = dentition.fdis();
    order.shuffle(&mut r);
    let mut fresh = order.into_iter();
    let mut out = Vec::new();
    for (i, &n) in counts.iter().enumerate() {
        let k = i + 1;
        for _ in 0..n {
            let mut targets: Vec<Fdi> = Vec::with_capacity(k);
            while targets.len() < k {
                match fresh.next() {
                    Some(f) => targets.push(f),
                    None => break,
                }
            }
            if targets.len() < k {
                let rest: Vec<Fdi> = dentition
                    .fdis()
                    .into_iter()
                    .filter(|f| !targets.contains(f))
                    .collect();
                let need = k - targets.len();
                if rest.len() < need {
                    return Err(Error::InvalidInput(format!(
                        "dentition has too few teeth for {k}-target scenarios"
                    )));
                }
                targets.extend(rest.choose_multiple(&mut r, need).copied());
            }
            out.push(Scenario::new(dentition, &targets)?);
        }
    }
    Ok(out)
}
