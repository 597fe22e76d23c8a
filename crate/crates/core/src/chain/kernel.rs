use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;

use super::{ChainError, TransitionRuleSet};
use crate::state::{StateDomain, StateId};

/// Row-stochastic kernel `q_ji = m_ij / c_j`: row `j` is the uniform
/// distribution over the predecessors of `j`.
#[derive(Debug, Clone)]
pub struct BackwardKernel {
    rules: Arc<TransitionRuleSet>,
    fast: Option<FastOffsets>,
}

// Predecessor offsets by residue of `j`, valid for pure-offset rules on ℤ.
#[derive(Debug, Clone)]
struct FastOffsets {
    period: i64,
    deltas: Vec<Vec<i64>>,
}

impl BackwardKernel {
    /// Fails with `InfinitePreimages` when some column is infinite.
    pub fn new(rules: impl Into<Arc<TransitionRuleSet>>) -> Result<Self, ChainError> {
        let rules = rules.into();
        if let Some(j) = rules.divergent_column() {
            return Err(ChainError::InfinitePreimages(j));
        }
        let fast = fast_offsets(&rules);
        Ok(BackwardKernel { rules, fast })
    }

    pub fn rules(&self) -> &TransitionRuleSet {
        &self.rules
    }

    pub fn shared_rules(&self) -> Arc<TransitionRuleSet> {
        Arc::clone(&self.rules)
    }

    pub fn domain(&self) -> StateDomain {
        self.rules.domain()
    }

    pub fn predecessors_into(&self, j: StateId, buf: &mut Vec<StateId>) -> Result<(), ChainError> {
        if let Some(fast) = &self.fast {
            buf.clear();
            let deltas = &fast.deltas[j.0.rem_euclid(fast.period) as usize];
            buf.extend(deltas.iter().map(|&d| j.offset(d)));
            return Ok(());
        }
        self.rules.predecessors_into(j, buf)
    }

    /// `c_j`.
    pub fn column(&self, j: StateId) -> Result<u64, ChainError> {
        if let Some(fast) = &self.fast {
            return Ok(fast.deltas[j.0.rem_euclid(fast.period) as usize].len() as u64);
        }
        let mut buf = Vec::new();
        self.rules.predecessors_into(j, &mut buf)?;
        Ok(buf.len() as u64)
    }

    /// Row `j` of `Q` in floating point.
    pub fn row(&self, j: StateId) -> Result<Vec<(StateId, f64)>, ChainError> {
        let mut buf = Vec::new();
        self.predecessors_into(j, &mut buf)?;
        let q = 1.0 / buf.len() as f64;
        Ok(buf.into_iter().map(|i| (i, q)).collect())
    }

    /// Row `j` of `Q` in exact arithmetic; entries sum to exactly 1.
    pub fn row_exact(&self, j: StateId) -> Result<Vec<(StateId, BigRational)>, ChainError> {
        let mut buf = Vec::new();
        self.predecessors_into(j, &mut buf)?;
        let q = BigRational::new(BigInt::from(1), BigInt::from(buf.len()));
        Ok(buf.into_iter().map(|i| (i, q.clone())).collect())
    }

    /// One backward step from `j`: a uniformly chosen predecessor.
    pub fn sample<R: Rng + ?Sized>(&self, j: StateId, rng: &mut R, buf: &mut Vec<StateId>) -> Result<StateId, ChainError> {
        if let Some(fast) = &self.fast {
            let deltas = &fast.deltas[j.0.rem_euclid(fast.period) as usize];
            return Ok(j.offset(deltas[rng.random_range(0..deltas.len())]));
        }
        self.rules.predecessors_into(j, buf)?;
        Ok(buf[rng.random_range(0..buf.len())])
    }
}

/// Backward stepper that draws power-of-two choices from a buffered word of
/// random bits; each step is still exactly uniform over the predecessors.
#[derive(Debug)]
pub struct StepSampler<'a> {
    q: &'a BackwardKernel,
    bits: u64,
    available: u32,
    buf: Vec<StateId>,
}

impl<'a> StepSampler<'a> {
    pub fn new(q: &'a BackwardKernel) -> Self {
        StepSampler { q, bits: 0, available: 0, buf: Vec::new() }
    }

    fn index<R: Rng + ?Sized>(&mut self, len: usize, rng: &mut R) -> usize {
        if !len.is_power_of_two() {
            return rng.random_range(0..len);
        }
        let k = len.trailing_zeros();
        if k == 0 {
            return 0;
        }
        if self.available < k {
            self.bits = rng.next_u64();
            self.available = 64;
        }
        let i = (self.bits & ((1u64 << k) - 1)) as usize;
        self.bits >>= k;
        self.available -= k;
        i
    }

    /// One backward step from `j`.
    pub fn step<R: Rng + ?Sized>(&mut self, j: StateId, rng: &mut R) -> Result<StateId, ChainError> {
        if let Some(fast) = &self.q.fast {
            let deltas = if fast.period == 1 { &fast.deltas[0] } else { &fast.deltas[j.0.rem_euclid(fast.period) as usize] };
            let i = self.index(deltas.len(), rng);
            return Ok(j.offset(deltas[i]));
        }
        let mut buf = std::mem::take(&mut self.buf);
        self.q.rules.predecessors_into(j, &mut buf)?;
        let i = self.index(buf.len(), rng);
        let s = buf[i];
        self.buf = buf;
        Ok(s)
    }
}

fn fast_offsets(rules: &TransitionRuleSet) -> Option<FastOffsets> {
    let tail = rules.tail()?;
    if !rules.explicit_rows().is_empty() || rules.domain() != StateDomain::Integers || !tail.is_pure_offset() {
        return None;
    }
    let p = tail.period;
    let deltas = (0..p)
        .map(|s| {
            let mut d: Vec<i64> = tail
                .residues
                .iter()
                .enumerate()
                .flat_map(|(r, rule)| rule.offsets.iter().map(move |&o| (r as i64, o)))
                .filter(|&(r, o)| (s - o - r).rem_euclid(p) == 0)
                .map(|(_, o)| -o)
                .collect();
            d.sort();
            d.dedup();
            d
        })
        .collect();
    Some(FastOffsets { period: p, deltas })
}
