//! Piecewise affine models in which Lebesgue measure is fair.
//!
//! Interval `j` of the model has length `π_j`; the piece of interval `i`
//! mapping onto `j` has length `π_i p_ij = π_j / c_j`, so its slope is `±c_j`.
//! Exact lengths are kept in the (possibly unnormalized) weight units of the
//! stationary vector; fairness and slopes are checked in those units.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;

use super::{transition_matrix, IntervalError, MarkovIntervalMap, Partition};
use crate::chain::BackwardKernel;
use crate::exact::{int, to_f64};
use crate::fair::{EntropyEstimate, FairMeasure};
use crate::state::{IndexRange, StateId};

/// Interval `id` of the model, `[lo, hi]`.
#[derive(Debug, Clone, Serialize)]
pub struct ModelInterval {
    pub id: StateId,
    pub lo: f64,
    pub hi: f64,
    #[serde(skip)]
    pub length_exact: Option<BigRational>,
    /// `c_id` of the source chain.
    pub preimages: u64,
    /// Every preimage piece of this interval is present in the model.
    pub complete: bool,
}

/// An affine piece mapping `[x, x_end]` onto `[y, y_end]`.
#[derive(Debug, Clone, Serialize)]
pub struct AffinePiece {
    pub source: StateId,
    pub target: StateId,
    pub x: f64,
    pub x_end: f64,
    pub y: f64,
    pub y_end: f64,
    /// Signed; the sign is the orientation.
    pub slope: i64,
    #[serde(skip)]
    pub length_exact: Option<BigRational>,
}

impl AffinePiece {
    pub fn length(&self) -> f64 {
        self.x_end - self.x
    }

    pub fn increasing(&self) -> bool {
        self.slope > 0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PiecewiseAffineMap {
    pub intervals: BTreeMap<StateId, ModelInterval>,
    /// Ordered by source position, then by position inside the source.
    pub pieces: Vec<AffinePiece>,
    /// `1 − Σ` piece lengths.
    pub tail_mass: f64,
    /// Exact weight units per unit of probability.
    pub weight_scale: f64,
}

/// Input for [`PiecewiseAffineMap::from_pieces`].
#[derive(Debug, Clone)]
pub struct PieceSpec {
    pub source: StateId,
    pub target: StateId,
    pub length: BigRational,
    pub slope: i64,
}

impl PiecewiseAffineMap {
    /// Tiles `intervals` left to right and each interval by its pieces in the
    /// given order. Requires `|slope| · length = |target|` exactly.
    pub fn from_pieces(intervals: &[(StateId, BigRational)], pieces: &[PieceSpec]) -> Result<Self, IntervalError> {
        let total: BigRational = intervals.iter().map(|(_, l)| l.clone()).sum();
        let scale = to_f64(&total);
        let mut model = BTreeMap::new();
        let mut pos = BigRational::zero();
        for (id, len) in intervals {
            let preimages = pieces.iter().filter(|p| p.target == *id).count() as u64;
            model.insert(
                *id,
                ModelInterval {
                    id: *id,
                    lo: to_f64(&pos) / scale,
                    hi: to_f64(&(&pos + len)) / scale,
                    length_exact: Some(len.clone()),
                    preimages,
                    complete: true,
                },
            );
            pos += len;
        }
        let mut cursor: BTreeMap<StateId, BigRational> = BTreeMap::new();
        let mut out = Vec::with_capacity(pieces.len());
        for p in pieces {
            let (src, dst) = match (model.get(&p.source), model.get(&p.target)) {
                (Some(s), Some(d)) => (s, d),
                _ => return Err(IntervalError::Invalid(format!("piece {} -> {} names an unknown interval", p.source, p.target))),
            };
            let dst_len = dst.length_exact.clone().expect("exact");
            if &p.length * int(p.slope.abs()) != dst_len {
                return Err(IntervalError::Invalid(format!("piece {} -> {} has |slope|·length ≠ image length", p.source, p.target)));
            }
            let offset = cursor.entry(p.source).or_insert_with(BigRational::zero);
            let start = to_f64(offset) / scale + src.lo;
            *offset += &p.length;
            if &*offset > src.length_exact.as_ref().expect("exact") {
                return Err(IntervalError::Invalid(format!("pieces overflow interval {}", p.source)));
            }
            out.push(AffinePiece {
                source: p.source,
                target: p.target,
                x: start,
                x_end: start + to_f64(&p.length) / scale,
                y: dst.lo,
                y_end: dst.hi,
                slope: p.slope,
                length_exact: Some(p.length.clone()),
            });
        }
        let covered: f64 = out.iter().map(AffinePiece::length).sum();
        Ok(PiecewiseAffineMap { intervals: model, pieces: out, tail_mass: (1.0 - covered).max(0.0), weight_scale: scale })
    }

    /// Splits each piece into `k` pieces of `k` times the slope, alternating
    /// orientation so the map stays continuous on each original piece.
    pub fn subdivide(&self, k: u32) -> Self {
        let k = k.max(1);
        let mut pieces = Vec::with_capacity(self.pieces.len() * k as usize);
        for p in &self.pieces {
            let step = p.length() / k as f64;
            for t in 0..k {
                let sign = if t % 2 == 0 { 1 } else { -1 };
                pieces.push(AffinePiece {
                    source: p.source,
                    target: p.target,
                    x: p.x + step * t as f64,
                    x_end: if t + 1 == k { p.x_end } else { p.x + step * (t + 1) as f64 },
                    y: p.y,
                    y_end: p.y_end,
                    slope: sign * p.slope * k as i64,
                    length_exact: p.length_exact.as_ref().map(|l| l / int(k as i64)),
                });
            }
        }
        let intervals = self
            .intervals
            .iter()
            .map(|(id, iv)| (*id, ModelInterval { preimages: iv.preimages * k as u64, ..iv.clone() }))
            .collect();
        PiecewiseAffineMap { intervals, pieces, tail_mass: self.tail_mass, weight_scale: self.weight_scale }
    }

    fn is_exact(&self) -> bool {
        self.pieces.iter().all(|p| p.length_exact.is_some()) && self.intervals.values().all(|iv| iv.length_exact.is_some())
    }
}

/// The piecewise affine map whose pieces are the sets `i ∩ f⁻¹(j)` with
/// lengths `π_i p_ij`, restricted to `window`.
pub fn lebesgue_fair_model(map: &MarkovIntervalMap, mu: &FairMeasure, window: IndexRange) -> Result<PiecewiseAffineMap, IntervalError> {
    if !mu.pi.normalized {
        return Err(IntervalError::NotPositiveRecurrent);
    }
    let q = BackwardKernel::new(transition_matrix(map)?)?;
    let rules = q.rules();
    let states: Vec<StateId> = mu.pi.entries.keys().copied().filter(|s| window.contains(*s)).collect();
    let left: BTreeMap<StateId, BigRational> =
        states.iter().map(|s| Ok((*s, map.left_endpoint(s.0)?))).collect::<Result<_, IntervalError>>()?;
    let mut spatial = states.clone();
    spatial.sort_by(|a, b| left[a].cmp(&left[b]));

    // A geometric partition loses its truncated tail on the left, so positions
    // are accumulated from the right end.
    let tail_on_left = matches!(map.partition, Partition::Geometric { .. });
    let mut y: BTreeMap<StateId, (f64, f64)> = BTreeMap::new();
    if tail_on_left {
        let mut acc = 1.0;
        for s in spatial.iter().rev() {
            y.insert(*s, (acc - mu.pi.get(*s), acc));
            acc -= mu.pi.get(*s);
        }
    } else {
        let mut acc = 0.0;
        for s in &spatial {
            y.insert(*s, (acc, acc + mu.pi.get(*s)));
            acc += mu.pi.get(*s);
        }
    }

    let weights = mu.pi.weights.as_ref();
    let weight_scale = match weights {
        Some(w) => {
            let s = *states.iter().max_by(|a, b| mu.pi.get(**a).total_cmp(&mu.pi.get(**b))).expect("nonempty");
            to_f64(&w[&s]) / mu.pi.get(s)
        }
        None => 1.0,
    };

    let mut columns: BTreeMap<StateId, u64> = BTreeMap::new();
    let mut intervals = BTreeMap::new();
    let mut buf = Vec::new();
    for &j in &states {
        let c = q.column(j)?;
        columns.insert(j, c);
        q.predecessors_into(j, &mut buf)?;
        let complete = buf.iter().all(|i| y.contains_key(i));
        let (lo, hi) = y[&j];
        intervals.insert(
            j,
            ModelInterval { id: j, lo, hi, length_exact: weights.map(|w| w[&j].clone()), preimages: c, complete },
        );
    }

    let mut pieces = Vec::new();
    for &i in &spatial {
        let increasing = map.branch(i.0)?.increasing;
        let mut targets: Vec<StateId> = rules.row(i)?.within(window).into_iter().filter(|j| y.contains_key(j)).collect();
        targets.sort_by(|a, b| left[a].cmp(&left[b]));
        if !increasing {
            targets.reverse();
        }
        let pi_i = mu.pi.get(i);
        let lengths: Vec<f64> = targets.iter().map(|j| pi_i * mu.p.get(i, *j)).collect();
        let missing = (pi_i - lengths.iter().sum::<f64>()).max(0.0);
        let mut x = y[&i].0 + if tail_on_left && increasing { missing } else { 0.0 };
        for (&j, &len) in targets.iter().zip(&lengths) {
            let c = columns[&j];
            let length_exact = match weights {
                Some(w) => {
                    let p = mu.p.get_exact(i, j).ok_or(IntervalError::NotPositiveRecurrent)?;
                    let l = &w[&i] * p;
                    // π_j / (π_i p_ij) = c_j.
                    assert_eq!(&l * int(c as i64), w[&j], "slope identity fails at {i} -> {j}");
                    Some(l)
                }
                None => {
                    let pi_j = mu.pi.get(j);
                    assert!((len * c as f64 - pi_j).abs() <= 1e-9 * pi_j, "slope identity fails at {i} -> {j}");
                    None
                }
            };
            let (y0, y1) = y[&j];
            let sign = if increasing { 1 } else { -1 };
            pieces.push(AffinePiece { source: i, target: j, x, x_end: x + len, y: y0, y_end: y1, slope: sign * c as i64, length_exact });
            x += len;
        }
    }
    let covered: f64 = pieces.iter().map(AffinePiece::length).sum();
    Ok(PiecewiseAffineMap { intervals, pieces, tail_mass: (1.0 - covered).max(0.0), weight_scale })
}

/// `∫ log |g'| dx = Σ length · log |slope|` over the pieces.
pub fn rohlin_entropy(pam: &PiecewiseAffineMap) -> EntropyEstimate {
    let value = pam.pieces.iter().map(|p| p.length() * (p.slope.unsigned_abs() as f64).ln()).sum();
    let top = pam.pieces.iter().map(|p| (p.slope.unsigned_abs() as f64).ln()).fold(0.0, f64::max);
    EntropyEstimate { value, tail_bound: pam.tail_mass * (1.0 + top) }
}

#[derive(Debug, Clone, Serialize)]
pub struct LebesgueFairness {
    pub max_violation: f64,
    /// All lengths were exact, so a zero violation is exactly zero.
    pub exact: bool,
    /// Exact value as `p/q`, when it is known in probability units.
    pub max_violation_exact: Option<String>,
    pub checks: usize,
}

// Length of the model cylinder `word` (numeric or exact).
trait Len: Clone + PartialOrd {
    fn len_of(iv: &ModelInterval) -> Self;
    fn len_div(&self, k: u64) -> Self;
    fn len_add(&self, o: &Self) -> Self;
    fn len_zero() -> Self;
    fn len_dist(&self, o: &Self) -> Self;
}

impl Len for f64 {
    fn len_of(iv: &ModelInterval) -> Self {
        iv.hi - iv.lo
    }
    fn len_div(&self, k: u64) -> Self {
        self / k as f64
    }
    fn len_add(&self, o: &Self) -> Self {
        self + o
    }
    fn len_zero() -> Self {
        0.0
    }
    fn len_dist(&self, o: &Self) -> Self {
        (self - o).abs()
    }
}

impl Len for BigRational {
    fn len_of(iv: &ModelInterval) -> Self {
        iv.length_exact.clone().expect("exact")
    }
    fn len_div(&self, k: u64) -> Self {
        self / int(k as i64)
    }
    fn len_add(&self, o: &Self) -> Self {
        self + o
    }
    fn len_zero() -> Self {
        BigRational::zero()
    }
    fn len_dist(&self, o: &Self) -> Self {
        (self - o).abs()
    }
}

struct Walker<'a> {
    pam: &'a PiecewiseAffineMap,
    by_source: BTreeMap<StateId, Vec<&'a AffinePiece>>,
    onto: BTreeMap<StateId, Vec<&'a AffinePiece>>,
}

impl<'a> Walker<'a> {
    fn new(pam: &'a PiecewiseAffineMap) -> Self {
        let mut by_source: BTreeMap<StateId, Vec<&AffinePiece>> = BTreeMap::new();
        let mut onto: BTreeMap<StateId, Vec<&AffinePiece>> = BTreeMap::new();
        for p in &pam.pieces {
            by_source.entry(p.source).or_default().push(p);
            onto.entry(p.target).or_default().push(p);
        }
        Walker { pam, by_source, onto }
    }

    // |J_{w0} ∩ g⁻¹(J_{w1}) ∩ ⋯|.
    fn length<L: Len>(&self, word: &[StateId]) -> L {
        if word.len() == 1 {
            return L::len_of(&self.pam.intervals[&word[0]]);
        }
        let rest: L = self.length(&word[1..]);
        self.by_source
            .get(&word[0])
            .map(|ps| {
                ps.iter()
                    .filter(|p| p.target == word[1])
                    .fold(L::len_zero(), |acc, p| acc.len_add(&rest.len_div(p.slope.unsigned_abs())))
            })
            .unwrap_or_else(L::len_zero)
    }

    fn max_violation<L: Len>(&self, depth: usize) -> (L, usize) {
        let mut best = L::len_zero();
        let mut checks = 0;
        for (id, iv) in &self.pam.intervals {
            let Some(branches) = self.onto.get(id) else { continue };
            if !iv.complete {
                continue;
            }
            let c = branches.len() as u64;
            let mut stack = vec![vec![*id]];
            while let Some(word) = stack.pop() {
                let len: L = self.length(&word);
                let fair = len.len_div(c);
                for p in branches {
                    let v = len.len_div(p.slope.unsigned_abs()).len_dist(&fair);
                    checks += 1;
                    if v > best {
                        best = v;
                    }
                }
                if word.len() < depth {
                    if let Some(ps) = self.by_source.get(word.last().expect("nonempty")) {
                        let mut next: Vec<StateId> = ps.iter().map(|p| p.target).collect();
                        next.sort();
                        next.dedup();
                        for t in next {
                            let mut w = word.clone();
                            w.push(t);
                            stack.push(w);
                        }
                    }
                }
            }
        }
        (best, checks)
    }
}

/// Largest `| |piece ∩ g⁻¹B| − |B| / c(B) |` over model cylinders `B` of
/// length `<= depth` inside complete intervals and pieces mapping onto them.
pub fn check_lebesgue_fair(pam: &PiecewiseAffineMap, depth: usize) -> LebesgueFairness {
    let walker = Walker::new(pam);
    let depth = depth.max(1);
    if pam.is_exact() {
        let (v, checks): (BigRational, usize) = walker.max_violation(depth);
        let known = v.is_zero() || pam.weight_scale == 1.0;
        LebesgueFairness {
            max_violation: to_f64(&v) / pam.weight_scale,
            exact: true,
            max_violation_exact: known.then(|| v.to_string()),
            checks,
        }
    } else {
        let (v, checks): (f64, usize) = walker.max_violation(depth);
        LebesgueFairness { max_violation: v, exact: false, max_violation_exact: None, checks }
    }
}
