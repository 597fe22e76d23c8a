//! Markov maps on tame graphs, given by the covering relation of a countable
//! free-arc partition, and their reduction to interval maps.
//!
//! Only the covering relation matters: arc `i` is mapped homeomorphically
//! onto the ordered union of the arcs in `transitions[i]`, each with an
//! orientation. Graph topology is not represented.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainError, Row, TransitionRuleSet};
use crate::exact::{int, pow, rat, serde_rat};
use crate::interval::{BranchSpec, IntervalError, IntervalSpec, MarkovIntervalMap, Partition, PointRef};
use crate::state::{StateDomain, StateId};

/// Version of the graph-map JSON format.
pub const GRAPH_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone)]
pub enum GraphError {
    #[error("arc {arc} does not map in a Markov way onto arc {covered}")]
    NotMarkov { arc: i64, covered: i64 },
    #[error("arc {0} covers nothing")]
    EmptyCover(i64),
    #[error("unknown arc {0}")]
    UnknownArc(i64),
    #[error("invalid graph map: {0}")]
    Invalid(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcSpec {
    pub id: i64,
    #[serde(with = "serde_rat")]
    pub length: BigRational,
}

/// One arc of an image, in the order the image traverses it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cover {
    pub arc: i64,
    pub increasing: bool,
    /// The image meets the interior of `arc` without containing it.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub partial: bool,
}

impl Cover {
    pub fn new(arc: i64, increasing: bool) -> Self {
        Cover { arc, increasing, partial: false }
    }
}

/// A graph map given by arcs `1, 2, …` and their ordered covers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TameGraphMapSpec {
    pub name: String,
    pub arcs: Vec<ArcSpec>,
    pub transitions: BTreeMap<i64, Vec<Cover>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    schema_version: u32,
    name: String,
    arcs: Vec<ArcSpec>,
    transitions: BTreeMap<i64, Vec<Cover>>,
}

/// A refined state: the part of arc `arc` mapped onto its `position`-th cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct RefinedState {
    pub arc: i64,
    pub position: usize,
    pub covered: i64,
}

impl TameGraphMapSpec {
    /// Checks ids, lengths and that every cover is full.
    pub fn new(name: impl Into<String>, arcs: Vec<ArcSpec>, transitions: BTreeMap<i64, Vec<Cover>>) -> Result<Self, GraphError> {
        let spec = TameGraphMapSpec { name: name.into(), arcs, transitions };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), GraphError> {
        if self.arcs.is_empty() {
            return Err(GraphError::Invalid("no arcs".into()));
        }
        for (k, a) in self.arcs.iter().enumerate() {
            if a.id != k as i64 + 1 {
                return Err(GraphError::Invalid("arc ids must be 1, 2, … in order".into()));
            }
            if !a.length.is_positive() {
                return Err(GraphError::Invalid(format!("arc {} has nonpositive length", a.id)));
            }
        }
        for a in &self.arcs {
            let covers = self.transitions.get(&a.id).filter(|c| !c.is_empty()).ok_or(GraphError::EmptyCover(a.id))?;
            for c in covers {
                if !self.has_arc(c.arc) {
                    return Err(GraphError::UnknownArc(c.arc));
                }
                if c.partial {
                    return Err(GraphError::NotMarkov { arc: a.id, covered: c.arc });
                }
            }
        }
        for k in self.transitions.keys() {
            if !self.has_arc(*k) {
                return Err(GraphError::UnknownArc(*k));
            }
        }
        Ok(())
    }

    fn has_arc(&self, id: i64) -> bool {
        id >= 1 && id <= self.arcs.len() as i64
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let f: GraphFile = serde_json::from_str(text).map_err(|e| GraphError::Invalid(e.to_string()))?;
        if f.schema_version != GRAPH_SCHEMA_VERSION {
            return Err(GraphError::SchemaMismatch(format!(
                "expected schema_version {GRAPH_SCHEMA_VERSION}, found {}",
                f.schema_version
            )));
        }
        TameGraphMapSpec::new(f.name, f.arcs, f.transitions)
    }

    pub fn to_json(&self) -> String {
        let f = GraphFile {
            schema_version: GRAPH_SCHEMA_VERSION,
            name: self.name.clone(),
            arcs: self.arcs.clone(),
            transitions: self.transitions.clone(),
        };
        serde_json::to_string_pretty(&f).expect("graph spec serializes")
    }

    fn kept(&self, window: Option<usize>) -> i64 {
        window.map_or(self.arcs.len(), |w| w.min(self.arcs.len())) as i64
    }

    /// Refined states of the first `window` arcs, arc-major; state ids are
    /// positions in this list. States whose covered arc keeps no state are
    /// pruned until every row is nonempty.
    pub fn refined_states(&self, window: Option<usize>) -> Vec<RefinedState> {
        let kept = self.kept(window);
        let mut out: Vec<RefinedState> = (1..=kept)
            .flat_map(|arc| {
                self.transitions[&arc]
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.arc <= kept)
                    .map(move |(position, c)| RefinedState { arc, position, covered: c.arc })
            })
            .collect();
        loop {
            let alive: BTreeSet<i64> = out.iter().map(|s| s.arc).collect();
            let before = out.len();
            out.retain(|s| alive.contains(&s.covered));
            if out.len() == before {
                return out;
            }
        }
    }
}

/// `(i, j) → (j, k)` for every `k` covered by `j`, on the first `window` arcs.
pub fn refined_transition_matrix(spec: &TameGraphMapSpec, window: Option<usize>) -> Result<TransitionRuleSet, GraphError> {
    let states = spec.refined_states(window);
    if states.is_empty() {
        return Err(GraphError::Invalid("window keeps no refined state".into()));
    }
    let mut of_arc: BTreeMap<i64, Vec<StateId>> = BTreeMap::new();
    for (id, s) in states.iter().enumerate() {
        of_arc.entry(s.arc).or_default().push(StateId(id as i64));
    }
    let mut rows = BTreeMap::new();
    for (id, s) in states.iter().enumerate() {
        let targets = of_arc.get(&s.covered).cloned().unwrap_or_default();
        rows.insert(StateId(id as i64), Row::finite(targets));
    }
    let domain = StateDomain::Finite { min: 0, max: states.len() as i64 - 1 };
    Ok(TransitionRuleSet::new(format!("{}-refined", spec.name), domain, rows, None, states.len() as i64)?)
}

/// Arcs placed on dyadic slots and the interval map realizing the covers.
#[derive(Debug, Clone)]
pub struct CutAndPasteModel {
    /// `(arc, lo, hi)` with arc `n` on `(2^{−n}, 2^{−n+1})`.
    pub placement: Vec<(i64, BigRational, BigRational)>,
    pub states: Vec<RefinedState>,
    pub interval_map: MarkovIntervalMap,
}

fn slot(n: i64) -> (BigRational, BigRational) {
    let half = rat(1, 2);
    (pow(&half, n as u32), pow(&half, (n - 1) as u32))
}

/// Places arc `n` affinely on `(2^{−n}, 2^{−n+1})` and splits it into the
/// pieces mapped onto each covered arc, in proportion to arc length. Each
/// piece maps affinely onto the slot of its covered arc.
pub fn cut_and_paste(spec: &TameGraphMapSpec, window: Option<usize>) -> Result<CutAndPasteModel, GraphError> {
    let kept = spec.kept(window);
    let states = spec.refined_states(window);
    let present: BTreeSet<(i64, usize)> = states.iter().map(|s| (s.arc, s.position)).collect();
    let length = |id: i64| spec.arcs[(id - 1) as usize].length.clone();
    let mut intervals = Vec::with_capacity(states.len());
    let mut branches = BTreeMap::new();
    let mut id = 0i64;
    for arc in 1..=kept {
        let covers = &spec.transitions[&arc];
        let total: BigRational = covers.iter().map(|c| length(c.arc)).sum();
        let (lo, hi) = slot(arc);
        let width = &hi - &lo;
        let mut pos = lo.clone();
        for (position, c) in covers.iter().enumerate() {
            let next = &pos + &width * length(c.arc) / &total;
            if present.contains(&(arc, position)) {
                let (ilo, ihi) = slot(c.arc);
                intervals.push(IntervalSpec { id, lo: pos.clone(), hi: next.clone() });
                branches.insert(id, BranchSpec::new(PointRef::Value(ilo), PointRef::Value(ihi), c.increasing));
                id += 1;
            }
            pos = next;
        }
        debug_assert!(pos == hi);
    }
    let interval_map = MarkovIntervalMap::new(
        format!("{}-cut-and-paste", spec.name),
        Partition::Explicit { intervals },
        branches,
        None,
    )?;
    let placement = (1..=kept).map(|n| {
        let (lo, hi) = slot(n);
        (n, lo, hi)
    });
    Ok(CutAndPasteModel { placement: placement.collect(), states, interval_map })
}

/// The star dendrite truncated to `window` blades. Blade `i` carries pairs
/// `n = 0..=window − max(1, i − 1)`; both arcs of pair `n` cover blade
/// `max(1, i − 1) + n`, the first from the origin to the tip and the second
/// back. Arc lengths are `arc_ratio^k` for global arc index `k`.
pub fn dendrite_example(window: usize, arc_ratio: BigRational) -> Result<TameGraphMapSpec, GraphError> {
    if window < 2 {
        return Err(GraphError::Invalid("dendrite window must be at least 2".into()));
    }
    if !(arc_ratio.is_positive() && arc_ratio < BigRational::one()) {
        return Err(GraphError::Invalid("arc ratio must lie in (0, 1)".into()));
    }
    let w = window as i64;
    let base = |i: i64| (i - 1).max(1);
    // Global ids of the arcs of each blade, from the origin outwards.
    let mut blade_arcs: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    let mut next = 1;
    for i in 1..=w {
        let count = 2 * (w - base(i) + 1);
        blade_arcs.insert(i, (next..next + count).collect());
        next += count;
    }
    let mut transitions = BTreeMap::new();
    for i in 1..=w {
        for (k, &arc) in blade_arcs[&i].iter().enumerate() {
            let b = base(i) + k as i64 / 2;
            let outward = k % 2 == 0;
            let mut covers: Vec<Cover> = blade_arcs[&b].iter().map(|&a| Cover::new(a, outward)).collect();
            if !outward {
                covers.reverse();
            }
            transitions.insert(arc, covers);
        }
    }
    let arcs = (1..next).map(|k| ArcSpec { id: k, length: pow(&arc_ratio, k as u32) }).collect();
    TameGraphMapSpec::new(format!("dendrite-{window}"), arcs, transitions)
}

/// Blade of each arc of [`dendrite_example`].
pub fn dendrite_blades(window: usize) -> Vec<i64> {
    let w = window as i64;
    (1..=w).flat_map(|i| std::iter::repeat_n(i, (2 * (w - (i - 1).max(1) + 1)) as usize)).collect()
}

/// One arc covering itself twice, increasing then decreasing.
pub fn folded_arc() -> TameGraphMapSpec {
    TameGraphMapSpec::new(
        "folded-arc",
        vec![ArcSpec { id: 1, length: int(1) }],
        BTreeMap::from([(1, vec![Cover::new(1, true), Cover::new(1, false)])]),
    )
    .expect("valid spec")
}

/// Two arcs exchanged.
pub fn arc_exchange() -> TameGraphMapSpec {
    TameGraphMapSpec::new(
        "arc-exchange",
        vec![ArcSpec { id: 1, length: int(1) }, ArcSpec { id: 2, length: int(1) }],
        BTreeMap::from([(1, vec![Cover::new(2, true)]), (2, vec![Cover::new(1, true)])]),
    )
    .expect("valid spec")
}

pub fn graph_by_name(name: &str) -> Result<TameGraphMapSpec, GraphError> {
    let (base, param) = match name.split_once(':') {
        Some((b, p)) => (b, Some(p)),
        None => (name, None),
    };
    match base {
        "folded-arc" => Ok(folded_arc()),
        "arc-exchange" => Ok(arc_exchange()),
        "dendrite" => {
            let w = param
                .unwrap_or("12")
                .parse()
                .map_err(|_| GraphError::Invalid(format!("bad dendrite window in {name:?}")))?;
            dendrite_example(w, rat(1, 2))
        }
        _ => Err(GraphError::Invalid(format!("unknown graph {name:?}; known: folded-arc, arc-exchange, dendrite:W"))),
    }
}
