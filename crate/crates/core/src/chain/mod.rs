//! Countable 0-1 transition matrices given by a finite explicit head and
//! eventually periodic offset rules, plus the backward kernel derived from them.

mod kernel;
pub mod spec;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{IndexRange, StateDomain, StateId};

pub use kernel::{BackwardKernel, StepSampler};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("state {0} lies outside the declared domain")]
    UnresolvableState(StateId),
    #[error("column {0} has infinitely many predecessors")]
    InfinitePreimages(StateId),
    #[error("row {0} has no successors")]
    EmptyRow(StateId),
    #[error("invalid rule: {0}")]
    InvalidRule(String),
}

/// Number of predecessors of a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnCount {
    Finite(u64),
    Infinite,
}

impl ColumnCount {
    pub fn finite(self) -> Option<u64> {
        match self {
            ColumnCount::Finite(c) => Some(c),
            ColumnCount::Infinite => None,
        }
    }
}

impl fmt::Display for ColumnCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnCount::Finite(c) => write!(f, "{c}"),
            ColumnCount::Infinite => write!(f, "inf"),
        }
    }
}

/// An absolute half-line of states, clipped to the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ray {
    AtLeast(i64),
    AtMost(i64),
}

impl Ray {
    pub fn contains(self, j: StateId) -> bool {
        match self {
            Ray::AtLeast(k) => j.0 >= k,
            Ray::AtMost(k) => j.0 <= k,
        }
    }
}

/// A half-line of successors relative to the source state `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelativeRay {
    /// Successors `j >= i + offset`.
    AtLeast(i64),
    /// Successors `j <= i + offset`.
    AtMost(i64),
}

impl RelativeRay {
    fn at(self, i: StateId) -> Ray {
        match self {
            RelativeRay::AtLeast(o) => Ray::AtLeast(i.0 + o),
            RelativeRay::AtMost(o) => Ray::AtMost(i.0 + o),
        }
    }
}

/// Support of one row: a finite sorted list plus an optional ray.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Row {
    pub targets: Vec<StateId>,
    pub ray: Option<Ray>,
}

impl Row {
    pub fn finite(mut targets: Vec<StateId>) -> Self {
        targets.sort();
        targets.dedup();
        Row { targets, ray: None }
    }

    pub fn contains(&self, j: StateId) -> bool {
        self.ray.is_some_and(|r| r.contains(j)) || self.targets.binary_search(&j).is_ok()
    }

    pub fn is_finite(&self) -> bool {
        self.ray.is_none()
    }

    /// Successors inside `window`, sorted.
    pub fn within(&self, window: IndexRange) -> Vec<StateId> {
        let mut out: Vec<StateId> = self.targets.iter().copied().filter(|s| window.contains(*s)).collect();
        if let Some(ray) = self.ray {
            out.extend(window.states().filter(|s| ray.contains(*s)));
            out.sort();
            out.dedup();
        }
        out
    }
}

/// Successor rule for one residue class of the tail.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OffsetRule {
    pub offsets: Vec<i64>,
    pub fixed: Vec<StateId>,
    pub ray: Option<RelativeRay>,
}

impl OffsetRule {
    pub fn offsets(offsets: impl IntoIterator<Item = i64>) -> Self {
        OffsetRule { offsets: offsets.into_iter().collect(), ..Default::default() }
    }

    pub fn ray(ray: RelativeRay) -> Self {
        OffsetRule { ray: Some(ray), ..Default::default() }
    }

    fn is_pure_offset(&self) -> bool {
        self.fixed.is_empty() && self.ray.is_none()
    }

    fn is_empty(&self) -> bool {
        self.offsets.is_empty() && self.fixed.is_empty() && self.ray.is_none()
    }
}

/// Rules for every state without an explicit row; state `i` uses
/// `residues[i mod period]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TailRules {
    pub period: i64,
    pub residues: Vec<OffsetRule>,
}

impl TailRules {
    pub fn uniform(rule: OffsetRule) -> Self {
        TailRules { period: 1, residues: vec![rule] }
    }

    pub fn rule_for(&self, i: StateId) -> &OffsetRule {
        &self.residues[i.0.rem_euclid(self.period) as usize]
    }

    pub fn is_pure_offset(&self) -> bool {
        self.residues.iter().all(OffsetRule::is_pure_offset)
    }
}

/// A possibly infinite 0-1 matrix over integer states.
#[derive(Debug, Clone)]
pub struct TransitionRuleSet {
    name: String,
    domain: StateDomain,
    explicit: BTreeMap<StateId, Row>,
    tail: Option<TailRules>,
    declared_window: i64,
    // Explicit rows grouped by finite target.
    column_index: BTreeMap<StateId, Vec<StateId>>,
    explicit_rays: Vec<(StateId, Ray)>,
}

impl TransitionRuleSet {
    pub fn new(
        name: impl Into<String>,
        domain: StateDomain,
        explicit: BTreeMap<StateId, Row>,
        tail: Option<TailRules>,
        declared_window: i64,
    ) -> Result<Self, ChainError> {
        let mut column_index: BTreeMap<StateId, Vec<StateId>> = BTreeMap::new();
        let mut explicit_rays = Vec::new();
        for (&i, row) in &explicit {
            if !domain.contains(i) {
                return Err(ChainError::UnresolvableState(i));
            }
            if row.targets.is_empty() && row.ray.is_none() {
                return Err(ChainError::EmptyRow(i));
            }
            for &j in &row.targets {
                if !domain.contains(j) {
                    return Err(ChainError::UnresolvableState(j));
                }
                column_index.entry(j).or_default().push(i);
            }
            if let Some(ray) = row.ray {
                explicit_rays.push((i, ray));
            }
        }
        if let Some(tail) = &tail {
            if tail.period < 1 || tail.residues.len() != tail.period as usize {
                return Err(ChainError::InvalidRule(format!(
                    "tail period {} needs exactly that many residue rules, got {}",
                    tail.period,
                    tail.residues.len()
                )));
            }
            for (r, rule) in tail.residues.iter().enumerate() {
                for f in &rule.fixed {
                    if !domain.contains(*f) {
                        return Err(ChainError::UnresolvableState(*f));
                    }
                }
                if rule.is_empty() && !domain.is_finite() {
                    return Err(ChainError::InvalidRule(format!("residue {r} has no successors")));
                }
            }
        } else if domain.size().is_none_or(|n| n != explicit.len()) {
            return Err(ChainError::InvalidRule(
                "without tail rules every state of a finite domain needs an explicit row".into(),
            ));
        }
        for ids in column_index.values_mut() {
            ids.sort();
        }
        let rules = TransitionRuleSet {
            name: name.into(),
            domain,
            explicit,
            tail,
            declared_window: declared_window.max(1),
            column_index,
            explicit_rays,
        };
        rules.validate_tail()?;
        Ok(rules)
    }

    /// A finite matrix on `0..rows.len()` given row by row.
    pub fn from_rows(name: impl Into<String>, rows: &[Vec<i64>]) -> Result<Self, ChainError> {
        let n = rows.len() as i64;
        if n == 0 {
            return Err(ChainError::InvalidRule("empty matrix".into()));
        }
        let explicit = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (StateId(i as i64), Row::finite(r.iter().copied().map(StateId).collect())))
            .collect();
        TransitionRuleSet::new(name, StateDomain::Finite { min: 0, max: n - 1 }, explicit, None, n)
    }

    /// A finite matrix from a dense 0-1 array.
    pub fn from_dense(name: impl Into<String>, m: &[Vec<u8>]) -> Result<Self, ChainError> {
        let rows: Vec<Vec<i64>> = m
            .iter()
            .map(|r| r.iter().enumerate().filter(|(_, &v)| v != 0).map(|(j, _)| j as i64).collect())
            .collect();
        Self::from_rows(name, &rows)
    }

    // Tail rows near a domain boundary must stay inside the domain.
    fn validate_tail(&self) -> Result<(), ChainError> {
        let Some(tail) = &self.tail else { return Ok(()) };
        let span = self.declared_window + 4 * tail.period + self.max_offset() + 2;
        let check: Box<dyn Iterator<Item = StateId>> = match self.domain {
            StateDomain::Finite { min, max } => Box::new((min..=max).map(StateId)),
            StateDomain::Naturals { min } => Box::new((min..min + span).map(StateId)),
            StateDomain::Integers => Box::new(std::iter::empty()),
        };
        for i in check {
            if self.explicit.contains_key(&i) {
                continue;
            }
            let row = self.row(i)?;
            for &j in &row.targets {
                if !self.domain.contains(j) {
                    return Err(ChainError::UnresolvableState(j));
                }
            }
            if row.targets.is_empty() && !self.ray_meets_domain(row.ray) {
                return Err(ChainError::EmptyRow(i));
            }
        }
        Ok(())
    }

    fn ray_meets_domain(&self, ray: Option<Ray>) -> bool {
        match ray {
            None => false,
            Some(Ray::AtLeast(k)) => self.domain.upper().is_none_or(|u| k <= u),
            Some(Ray::AtMost(k)) => self.domain.lower().is_none_or(|l| k >= l),
        }
    }

    fn max_offset(&self) -> i64 {
        self.tail
            .iter()
            .flat_map(|t| t.residues.iter())
            .flat_map(|r| {
                r.offsets.iter().copied().chain(r.ray.map(|ray| match ray {
                    RelativeRay::AtLeast(o) | RelativeRay::AtMost(o) => o,
                }))
            })
            .map(i64::abs)
            .max()
            .unwrap_or(0)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> StateDomain {
        self.domain
    }

    pub fn declared_window(&self) -> i64 {
        self.declared_window
    }

    pub fn explicit_rows(&self) -> &BTreeMap<StateId, Row> {
        &self.explicit
    }

    pub fn tail(&self) -> Option<&TailRules> {
        self.tail.as_ref()
    }

    pub fn window(&self, n: i64) -> IndexRange {
        self.domain.window(n)
    }

    fn require(&self, s: StateId) -> Result<(), ChainError> {
        if self.domain.contains(s) {
            Ok(())
        } else {
            Err(ChainError::UnresolvableState(s))
        }
    }

    /// Successors of `i`.
    pub fn row(&self, i: StateId) -> Result<Row, ChainError> {
        self.require(i)?;
        if let Some(row) = self.explicit.get(&i) {
            return Ok(row.clone());
        }
        let tail = self.tail.as_ref().ok_or(ChainError::UnresolvableState(i))?;
        let rule = tail.rule_for(i);
        let mut targets: Vec<StateId> = rule.offsets.iter().map(|&o| i.offset(o)).collect();
        targets.extend(rule.fixed.iter().copied());
        let ray = rule.ray.map(|r| r.at(i));
        if let Some(r) = ray {
            targets.retain(|t| !r.contains(*t));
        }
        targets.sort();
        targets.dedup();
        Ok(Row { targets, ray })
    }

    pub fn has_edge(&self, i: StateId, j: StateId) -> Result<bool, ChainError> {
        self.require(j)?;
        Ok(self.row(i)?.contains(j))
    }

    /// `true` when the column of `j` is an infinite set.
    fn column_is_infinite(&self, j: StateId) -> bool {
        let Some(tail) = &self.tail else { return false };
        if self.domain.is_finite() {
            return false;
        }
        tail.residues.iter().any(|rule| {
            rule.fixed.contains(&j)
                || match rule.ray {
                    Some(RelativeRay::AtLeast(_)) => self.domain.lower().is_none(),
                    Some(RelativeRay::AtMost(_)) => self.domain.upper().is_none(),
                    None => false,
                }
        })
    }

    /// Some state whose column is infinite, detected from the rules alone.
    pub fn divergent_column(&self) -> Option<StateId> {
        let tail = self.tail.as_ref()?;
        if self.domain.is_finite() {
            return None;
        }
        for rule in &tail.residues {
            if let Some(&f) = rule.fixed.first() {
                return Some(f);
            }
            let unbounded = match rule.ray {
                Some(RelativeRay::AtLeast(_)) => self.domain.lower().is_none(),
                Some(RelativeRay::AtMost(_)) => self.domain.upper().is_none(),
                None => false,
            };
            if unbounded {
                return Some(self.domain.first());
            }
        }
        None
    }

    pub fn column_count(&self, j: StateId) -> Result<ColumnCount, ChainError> {
        self.require(j)?;
        if self.column_is_infinite(j) {
            return Ok(ColumnCount::Infinite);
        }
        let mut buf = Vec::new();
        self.predecessors_into(j, &mut buf)?;
        Ok(ColumnCount::Finite(buf.len() as u64))
    }

    /// Sorted predecessors of `j`.
    pub fn predecessors(&self, j: StateId) -> Result<Vec<StateId>, ChainError> {
        let mut buf = Vec::new();
        self.predecessors_into(j, &mut buf)?;
        Ok(buf)
    }

    /// Writes the sorted predecessors of `j` into `buf`.
    pub fn predecessors_into(&self, j: StateId, buf: &mut Vec<StateId>) -> Result<(), ChainError> {
        self.require(j)?;
        if self.column_is_infinite(j) {
            return Err(ChainError::InfinitePreimages(j));
        }
        buf.clear();
        if let Some(ids) = self.column_index.get(&j) {
            buf.extend_from_slice(ids);
        }
        for &(i, ray) in &self.explicit_rays {
            if ray.contains(j) {
                buf.push(i);
            }
        }
        if let Some(tail) = &self.tail {
            let p = tail.period;
            let tail_state = |i: StateId, r: usize| {
                i.0.rem_euclid(p) as usize == r && self.domain.contains(i) && !self.explicit.contains_key(&i)
            };
            for (r, rule) in tail.residues.iter().enumerate() {
                for &o in &rule.offsets {
                    let i = j.offset(-o);
                    if tail_state(i, r) {
                        buf.push(i);
                    }
                }
                if rule.fixed.contains(&j) {
                    let (lo, hi) = (self.domain.lower().unwrap_or(0), self.domain.upper().unwrap_or(-1));
                    buf.extend((lo..=hi).map(StateId).filter(|&i| tail_state(i, r)));
                }
                match rule.ray {
                    Some(RelativeRay::AtLeast(o)) => {
                        let lo = self.domain.lower().expect("finite column");
                        buf.extend((lo..=j.0 - o).map(StateId).filter(|&i| tail_state(i, r)));
                    }
                    Some(RelativeRay::AtMost(o)) => {
                        let hi = self.domain.upper().expect("finite column");
                        buf.extend((j.0 - o..=hi).map(StateId).filter(|&i| tail_state(i, r)));
                    }
                    None => {}
                }
            }
        }
        buf.sort();
        buf.dedup();
        Ok(())
    }

    /// Dense 0-1 matrix on `window`, rows and columns in index order.
    pub fn dense(&self, window: IndexRange) -> Result<Vec<Vec<u8>>, ChainError> {
        window
            .states()
            .map(|i| {
                let row = self.row(i)?;
                Ok(window.states().map(|j| u8::from(row.contains(j))).collect())
            })
            .collect()
    }

    /// Strong connectivity of the subgraph induced on `window(n)`.
    pub fn check_irreducible(&self, n: i64) -> Irreducibility {
        let window = self.window(n);
        let states: Vec<StateId> = window.states().collect();
        let index = |s: StateId| (s.0 - window.lo) as usize;
        let mut fwd = vec![Vec::new(); states.len()];
        let mut bwd = vec![Vec::new(); states.len()];
        for &i in &states {
            let Ok(row) = self.row(i) else { continue };
            for j in row.within(window) {
                fwd[index(i)].push(index(j));
                bwd[index(j)].push(index(i));
            }
        }
        let root = 0;
        if let Some(t) = unreached(&fwd, root) {
            return Irreducibility { irreducible: false, witness: Some((states[root], states[t])) };
        }
        if let Some(t) = unreached(&bwd, root) {
            return Irreducibility { irreducible: false, witness: Some((states[t], states[root])) };
        }
        Irreducibility { irreducible: true, witness: None }
    }
}

fn unreached(adj: &[Vec<usize>], root: usize) -> Option<usize> {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen.iter().position(|s| !s)
}

/// Outcome of [`TransitionRuleSet::check_irreducible`]. The witness `(a, b)`
/// is a pair with no path from `a` to `b` inside the window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Irreducibility {
    pub irreducible: bool,
    pub witness: Option<(StateId, StateId)>,
}
