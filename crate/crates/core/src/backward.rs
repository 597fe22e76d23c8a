//! Random backward trajectories: at each step a preimage is chosen uniformly,
//! which on leading symbols is exactly the `Q`-chain.

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::chain::{BackwardKernel, ChainError};
use crate::fair::{cylinder_measure, integral_log_c, FairError, FairMeasure};
use crate::state::{IndexRange, StateId};

/// Leading symbols `y₀, y₁, …` of a backward trajectory; `y_{n+1}` is a
/// predecessor of `y_n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BackwardPath {
    pub states: Vec<StateId>,
    pub seed: u64,
    pub kernel: String,
}

impl BackwardPath {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// A path of `length` states starting at `start`, seeded by `seed`.
pub fn sample_backward(q: &BackwardKernel, start: StateId, length: usize, seed: u64) -> Result<BackwardPath, ChainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(length);
    let mut buf = Vec::new();
    let mut s = start;
    if length > 0 {
        q.rules().column_count(start)?;
        states.push(s);
    }
    for _ in 1..length {
        s = q.sample(s, &mut rng, &mut buf)?;
        states.push(s);
    }
    Ok(BackwardPath { states, seed, kernel: q.rules().name().to_string() })
}

/// `count` paths; path `k` uses seed `seed + k`.
pub fn sample_paths(q: &BackwardKernel, start: StateId, length: usize, count: usize, seed: u64) -> Result<Vec<BackwardPath>, ChainError> {
    (0..count as u64).into_par_iter().map(|k| sample_backward(q, start, length, seed.wrapping_add(k))).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PathStatistics {
    pub length: usize,
    pub visit_frequencies: BTreeMap<StateId, f64>,
    /// Keyed by the forward word `(y_n, y_{n-1}, …, y_{n-m})`.
    pub cylinder_frequencies: BTreeMap<Vec<StateId>, f64>,
    pub geo_mean_c: f64,
    pub last_visit_time: BTreeMap<StateId, usize>,
}

struct ColumnCache<'a> {
    q: &'a BackwardKernel,
    logs: HashMap<StateId, f64>,
}

impl<'a> ColumnCache<'a> {
    fn new(q: &'a BackwardKernel) -> Self {
        ColumnCache { q, logs: HashMap::new() }
    }

    fn log_c(&mut self, s: StateId) -> Result<f64, ChainError> {
        if let Some(v) = self.logs.get(&s) {
            return Ok(*v);
        }
        let v = (self.q.column(s)? as f64).ln();
        self.logs.insert(s, v);
        Ok(v)
    }
}

// Occurrences of each forward word of length 1..=depth along the reversed path.
fn word_counts(path: &[StateId], depth: usize) -> (BTreeMap<Vec<StateId>, u64>, Vec<u64>) {
    let mut counts: HashMap<Vec<StateId>, u64> = HashMap::new();
    let mut positions = vec![0u64; depth + 1];
    let mut word = Vec::with_capacity(depth);
    for n in 0..path.len() {
        word.clear();
        for m in 0..depth.min(n + 1) {
            word.push(path[n - m]);
            *counts.entry(word.clone()).or_default() += 1;
            positions[m + 1] += 1;
        }
    }
    (counts.into_iter().collect(), positions)
}

/// Visit frequencies, reversed-word cylinder frequencies, the geometric mean
/// of `c` along the path, and last visit times.
pub fn path_statistics(path: &BackwardPath, q: &BackwardKernel, depth: usize) -> Result<PathStatistics, ChainError> {
    let n = path.len();
    let mut visits: BTreeMap<StateId, u64> = BTreeMap::new();
    let mut last: BTreeMap<StateId, usize> = BTreeMap::new();
    let mut cache = ColumnCache::new(q);
    let mut log_sum = 0.0;
    for (t, &s) in path.states.iter().enumerate() {
        *visits.entry(s).or_default() += 1;
        last.insert(s, t);
        log_sum += cache.log_c(s)?;
    }
    let (counts, positions) = word_counts(&path.states, depth.max(1));
    let cylinder_frequencies = counts
        .into_iter()
        .map(|(w, c)| {
            let total = positions[w.len()].max(1) as f64;
            (w, c as f64 / total)
        })
        .collect();
    Ok(PathStatistics {
        length: n,
        visit_frequencies: visits.into_iter().map(|(s, c)| (s, c as f64 / n.max(1) as f64)).collect(),
        cylinder_frequencies,
        geo_mean_c: if n == 0 { 1.0 } else { (log_sum / n as f64).exp() },
        last_visit_time: last,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Discrepancy {
    pub max_discrepancy: f64,
    pub worst_word: Vec<StateId>,
    pub words_checked: usize,
}

/// Largest `|empirical frequency − μ[w]|` over admissible words of length
/// `<= depth` inside `window`, pooling all paths.
pub fn equidistribution_test(
    paths: &[BackwardPath],
    q: &BackwardKernel,
    mu: &FairMeasure,
    depth: usize,
    window: IndexRange,
) -> Result<Discrepancy, FairError> {
    let depth = depth.max(1);
    let mut counts: BTreeMap<Vec<StateId>, u64> = BTreeMap::new();
    let mut positions = vec![0u64; depth + 1];
    for p in paths {
        let (c, pos) = word_counts(&p.states, depth);
        for (w, k) in c {
            *counts.entry(w).or_default() += k;
        }
        for (a, b) in positions.iter_mut().zip(pos) {
            *a += b;
        }
    }
    let m = q.rules();
    let mut best = Discrepancy { max_discrepancy: 0.0, worst_word: Vec::new(), words_checked: 0 };
    let mut stack: Vec<Vec<StateId>> =
        window.states().filter(|s| m.domain().contains(*s)).map(|s| vec![s]).collect();
    while let Some(w) = stack.pop() {
        let empirical = counts.get(&w).copied().unwrap_or(0) as f64 / positions[w.len()].max(1) as f64;
        let d = (empirical - cylinder_measure(mu, &w)).abs();
        best.words_checked += 1;
        if d > best.max_discrepancy {
            best.max_discrepancy = d;
            best.worst_word = w.clone();
        }
        if w.len() < depth {
            for j in m.row(*w.last().expect("nonempty"))?.within(window) {
                let mut next = w.clone();
                next.push(j);
                stack.push(next);
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize)]
pub struct GeoMeanTrace {
    /// `(c(y₀)⋯c(y_{n−1}))^{1/n}` for `n = 1..=len`.
    pub running: Vec<f64>,
    /// `exp Σ π_i log c_i`.
    pub target: f64,
}

pub fn running_geo_means(path: &BackwardPath, q: &BackwardKernel) -> Result<Vec<f64>, ChainError> {
    let mut cache = ColumnCache::new(q);
    let mut sum = 0.0;
    let mut out = Vec::with_capacity(path.len());
    for (k, &s) in path.states.iter().enumerate() {
        sum += cache.log_c(s)?;
        out.push((sum / (k + 1) as f64).exp());
    }
    Ok(out)
}

pub fn geo_mean_convergence(path: &BackwardPath, q: &BackwardKernel, mu: &FairMeasure) -> Result<GeoMeanTrace, FairError> {
    let running = running_geo_means(path, q)?;
    let target = integral_log_c(mu, q, mu.window())?.value.exp();
    Ok(GeoMeanTrace { running, target })
}

#[derive(Debug, Clone, Serialize)]
pub struct ChiSquaredFit {
    pub statistic: f64,
    pub degrees_of_freedom: u64,
    pub p_value: f64,
    pub states_used: usize,
}

/// Goodness of fit of observed backward steps against the rows of `Q`, over
/// source states whose every cell expects at least `min_expected` counts.
pub fn transition_chi_squared(paths: &[BackwardPath], q: &BackwardKernel, min_expected: f64) -> Result<ChiSquaredFit, ChainError> {
    let mut steps: BTreeMap<StateId, BTreeMap<StateId, u64>> = BTreeMap::new();
    for p in paths {
        for w in p.states.windows(2) {
            *steps.entry(w[0]).or_default().entry(w[1]).or_default() += 1;
        }
    }
    let mut statistic = 0.0;
    let mut dof = 0u64;
    let mut used = 0;
    let mut buf = Vec::new();
    for (j, observed) in &steps {
        q.predecessors_into(*j, &mut buf)?;
        let total: u64 = observed.values().sum();
        let expected = total as f64 / buf.len() as f64;
        if buf.len() < 2 || expected < min_expected {
            continue;
        }
        used += 1;
        dof += buf.len() as u64 - 1;
        for i in &buf {
            let o = observed.get(i).copied().unwrap_or(0) as f64;
            statistic += (o - expected).powi(2) / expected;
        }
    }
    let p_value = if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(statistic)
    };
    Ok(ChiSquaredFit { statistic, degrees_of_freedom: dof, p_value, states_used: used })
}

/// Number of visits to `state` among the last `fraction` of the path.
pub fn late_visits(path: &BackwardPath, state: StateId, fraction: f64) -> usize {
    let start = ((1.0 - fraction) * path.len() as f64).floor() as usize;
    path.states[start.min(path.len())..].iter().filter(|s| **s == state).count()
}
