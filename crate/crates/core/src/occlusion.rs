//! Logistic normalization of vertex scores and selection of the visible part
//! subset with the highest mean probability.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `exp(s) / (1 + exp(s))`, evaluated without overflow.
pub fn part_probability(score: f64) -> Result<f64> {
    if !score.is_finite() {
        return Err(Error::NonFinite(score));
    }
    Ok(logistic(score))
}

/// Logistic with a temperature; `temperature == 1` is the plain form.
pub fn part_probability_with_temperature(score: f64, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::InvalidConfig(format!("temperature {temperature}")));
    }
    part_probability(score / temperature)
}

#[inline]
pub(crate) fn logistic(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Mean of `q` over `subset`, summed in ascending index order.
pub fn subset_mean(q: &[f64], subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut idx = subset.to_vec();
    idx.sort_unstable();
    let mut sum = 0.0;
    for &i in &idx {
        sum += *q
            .get(i)
            .ok_or_else(|| Error::OutOfBounds(format!("vertex {i} of {}", q.len())))?;
    }
    Ok(sum / idx.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyConfig {
    pub min_size: usize,
    pub include_root: bool,
}

impl GreedyConfig {
    /// Smallest admissible configuration for `n_vertices`: at least half of
    /// the vertices, root included.
    pub fn for_vertices(n_vertices: usize) -> Self {
        Self {
            min_size: n_vertices.div_ceil(2).max(2).min(n_vertices.max(1)),
            include_root: true,
        }
    }
}

/// How visible subsets are searched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetStrategy {
    /// Exhaustive search over an explicit family (normally the model's).
    Candidates(Vec<Vec<usize>>),
    /// Sequentially add vertices by decreasing probability.
    Greedy(GreedyConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSelection {
    /// Chosen vertex indices, ascending.
    pub subset: Vec<usize>,
    /// Mean probability over the chosen subset.
    pub psi_prime: f64,
    pub visible: Vec<bool>,
}

/// Whether `(value, subset)` beats the incumbent: higher value, then larger
/// subset, then lexicographically smaller index set.
fn better(value: f64, subset: &[usize], best: &Option<(f64, Vec<usize>)>) -> bool {
    match best {
        None => true,
        Some((bv, bs)) => {
            value > *bv
                || (value == *bv
                    && (subset.len() > bs.len() || (subset.len() == bs.len() && subset < bs.as_slice())))
        }
    }
}

fn finish(q: &[f64], best: Option<(f64, Vec<usize>)>) -> Result<SubsetSelection> {
    let (psi_prime, subset) = best.ok_or(Error::EmptyFamily)?;
    let mut visible = vec![false; q.len()];
    for &i in &subset {
        visible[i] = true;
    }
    Ok(SubsetSelection {
        subset,
        psi_prime,
        visible,
    })
}

/// Picks the subset maximizing the mean of `q`.
pub fn select_subset(q: &[f64], strategy: &SubsetStrategy) -> Result<SubsetSelection> {
    match strategy {
        SubsetStrategy::Candidates(family) => select_from_family(q, family),
        SubsetStrategy::Greedy(cfg) => select_greedy(q, cfg),
    }
}

pub fn select_from_family(q: &[f64], family: &[Vec<usize>]) -> Result<SubsetSelection> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for cand in family {
        let mut sorted = cand.clone();
        sorted.sort_unstable();
        sorted.dedup();
        let m = subset_mean(q, &sorted)?;
        if better(m, &sorted, &best) {
            best = Some((m, sorted));
        }
    }
    finish(q, best)
}

/// Greedy prefix search: order vertices by decreasing `q` (root first when
/// required), then evaluate every prefix of at least `min_size` vertices.
pub fn select_greedy(q: &[f64], cfg: &GreedyConfig) -> Result<SubsetSelection> {
    let n = q.len();
    if n == 0 || cfg.min_size == 0 || cfg.min_size > n {
        return Err(Error::EmptyFamily);
    }
    let mut order: Vec<usize> = if cfg.include_root { (1..n).collect() } else { (0..n).collect() };
    order.sort_by(|&a, &b| q[b].total_cmp(&q[a]).then(a.cmp(&b)));
    if cfg.include_root {
        order.insert(0, 0);
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for k in cfg.min_size..=n {
        let mut prefix = order[..k].to_vec();
        prefix.sort_unstable();
        let m = subset_mean(q, &prefix)?;
        if better(m, &prefix, &best) {
            best = Some((m, prefix));
        }
    }
    finish(q, best)
}
