//! Two-rater agreement on an ordered categorical scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weights {
    /// Credit only for exact agreement.
    Identity,
    /// `1 - (k - l)^2 / (q - 1)^2`.
    Quadratic,
}

impl Weights {
    pub fn matrix(self, q: usize) -> Vec<Vec<f64>> {
        (0..q)
            .map(|k| {
                (0..q)
                    .map(|l| match self {
                        Weights::Identity => f64::from(u8::from(k == l)),
                        Weights::Quadratic => {
                            if q == 1 {
                                1.0
                            } else {
                                let d = k as f64 - l as f64;
                                1.0 - d * d / ((q - 1) as f64 * (q - 1) as f64)
                            }
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// `table[k][l]` counts items rated `categories[k]` by the first rater and
/// `categories[l]` by the second.
pub fn contingency(r1: &[u8], r2: &[u8], categories: &[u8]) -> Result<Vec<Vec<usize>>> {
    if r1.len() != r2.len() {
        return Err(Error::Shape(format!("rater vectors of length {} and {}", r1.len(), r2.len())));
    }
    if r1.is_empty() {
        return Err(Error::Empty("ratings"));
    }
    let pos = |v: u8| {
        categories
            .iter()
            .position(|&c| c == v)
            .ok_or_else(|| Error::InvalidInput(format!("rating {v} is not one of {categories:?}")))
    };
    let q = categories.len();
    let mut t = vec![vec![0usize; q]; q];
    for (&a, &b) in r1.iter().zip(r2) {
        t[pos(a)?][pos(b)?] += 1;
    }
    Ok(t)
}

fn observed(table: &[Vec<usize>], w: &[Vec<f64>]) -> (f64, f64) {
    let n: usize = table.iter().flatten().sum();
    let mut pa = 0.0;
    for (k, row) in table.iter().enumerate() {
        for (l, &c) in row.iter().enumerate() {
            pa += w[k][l] * c as f64;
        }
    }
    (pa / n as f64, n as f64)
}

fn chance_corrected(pa: f64, pe: f64) -> Result<f64> {
    if pe >= 1.0 {
        return Err(Error::Degenerate(format!("chance agreement {pe} leaves nothing to correct")));
    }
    Ok((pa - pe) / (1.0 - pe))
}

/// Gwet's AC2 from a contingency table: chance agreement
/// `T_w / (q (q - 1)) * sum_k pi_k (1 - pi_k)` with `pi_k` the mean of the two
/// raters' marginal proportions and `T_w` the sum of all weights.
pub fn gwet_ac2_table(table: &[Vec<usize>], weights: Weights) -> Result<f64> {
    let q = table.len();
    if q < 2 {
        return Err(Error::InvalidInput("agreement needs at least 2 categories".into()));
    }
    let w = weights.matrix(q);
    let (pa, n) = observed(table, &w);
    if n == 0.0 {
        return Err(Error::Empty("ratings"));
    }
    let tw: f64 = w.iter().flatten().sum();
    let mut s = 0.0;
    for k in 0..q {
        let row: usize = table[k].iter().sum();
        let col: usize = table.iter().map(|r| r[k]).sum();
        let pi = (row + col) as f64 / (2.0 * n);
        s += pi * (1.0 - pi);
    }
    chance_corrected(pa, tw / (q * (q - 1)) as f64 * s)
}

pub fn gwet_ac2(r1: &[u8], r2: &[u8], categories: &[u8], weights: Weights) -> Result<f64> {
    gwet_ac2_table(&contingency(r1, r2, categories)?, weights)
}

/// Brennan-Prediger coefficient: chance agreement `T_w / q^2`.
pub fn brennan_prediger_table(table: &[Vec<usize>], weights: Weights) -> Result<f64> {
    let q = table.len();
    if q < 2 {
        return Err(Error::InvalidInput("agreement needs at least 2 categories".into()));
    }
    let w = weights.matrix(q);
    let (pa, n) = observed(table, &w);
    if n == 0.0 {
        return Err(Error::Empty("ratings"));
    }
    let tw: f64 = w.iter().flatten().sum();
    chance_corrected(pa, tw / (q * q) as f64)
}

pub fn brennan_prediger(r1: &[u8], r2: &[u8], categories: &[u8], weights: Weights) -> Result<f64> {
    brennan_prediger_table(&contingency(r1, r2, categories)?, weights)
}

/// Percentage of items on the diagonal.
pub fn opa_table(table: &[Vec<usize>]) -> Result<f64> {
    let n: usize = table.iter().flatten().sum();
    if n == 0 {
        return Err(Error::Empty("contingency table"));
    }
    let diag: usize = (0..table.len()).map(|k| table[k][k]).sum();
    Ok(diag as f64 / n as f64 * 100.0)
}

pub fn opa(r1: &[u8], r2: &[u8]) -> Result<f64> {
    if r1.len() != r2.len() {
        return Err(Error::Shape(format!("rater vectors of length {} and {}", r1.len(), r2.len())));
    }
    if r1.is_empty() {
        return Err(Error::Empty("ratings"));
    }
    let same = r1.iter().zip(r2).filter(|(a, b)| a == b).count();
    Ok(same as f64 / r1.len() as f64 * 100.0)
}

/// Mid-ranks (1-based) and the tie term `sum (t^3 - t)`.
fn mid_ranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    (ranks, ties)
}

/// Kendall's coefficient of concordance for `ratings[rater][item]`, with
/// the tie correction.
pub fn kendall_w(ratings: &[Vec<f64>]) -> Result<f64> {
    let m = ratings.len();
    if m < 2 {
        return Err(Error::InvalidInput(format!("Kendall's W needs at least 2 raters, got {m}")));
    }
    let n = ratings[0].len();
    if n == 0 {
        return Err(Error::Empty("ratings"));
    }
    if ratings.iter().any(|r| r.len() != n) {
        return Err(Error::Shape("raters scored different numbers of items".into()));
    }
    if ratings.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ratings"));
    }
    let mut sums = vec![0.0; n];
    let mut ties = 0.0;
    for r in ratings {
        let (ranks, t) = mid_ranks(r);
        ties += t;
        for (s, x) in sums.iter_mut().zip(ranks) {
            *s += x;
        }
    }
    let mean = m as f64 * (n as f64 + 1.0) / 2.0;
    let s: f64 = sums.iter().map(|r| (r - mean) * (r - mean)).sum();
    let (mf, nf) = (m as f64, n as f64);
    let denom = mf * mf * (nf * nf * nf - nf) - mf * ties;
    if denom <= 0.0 {
        return Err(Error::Degenerate("every rater gave all items the same rank".into()));
    }
    Ok(12.0 * s / denom)
}
