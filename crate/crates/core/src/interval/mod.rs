//! Countably Markov interval maps with affine branches, their transition
//! matrices, itineraries and cylinder intervals.
//!
//! Intervals are identified by integer ids. Each branch maps its interval
//! affinely and monotonically onto an image span whose endpoints are
//! partition points, so the transition matrix is `m_ij = 1` iff the image of
//! `i` contains `j`.

mod model;

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainError, OffsetRule, Ray, RelativeRay, Row, TailRules, TransitionRuleSet};
use crate::exact::{int, pow, rat, serde_rat};
use crate::fair::FairError;
use crate::state::{StateDomain, StateId};

pub use model::{
    check_lebesgue_fair, lebesgue_fair_model, rohlin_entropy, AffinePiece, LebesgueFairness, ModelInterval,
    PieceSpec, PiecewiseAffineMap,
};

/// Version of the interval-map JSON format.
pub const MAP_SCHEMA_VERSION: u32 = 1;

// Largest exponent searched when matching a point against `λ^m`.
const MAX_EXPONENT: i64 = 100_000;

#[derive(Debug, Error, Clone)]
pub enum IntervalError {
    #[error("branch of interval {interval} is not Markov: {reason}")]
    NotMarkov { interval: i64, reason: String },
    #[error("orbit hits a partition point at step {0}")]
    HitsPartitionPoint(usize),
    #[error("orbit leaves the partitioned region at step {0}")]
    OutsidePartition(usize),
    #[error("word is inadmissible at position {0}")]
    InadmissibleWord(usize),
    #[error("no interval with id {0}")]
    UnknownInterval(i64),
    #[error("fair measure is not a probability vector")]
    NotPositiveRecurrent,
    #[error("invalid interval map: {0}")]
    Invalid(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Fair(#[from] FairError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalSpec {
    pub id: i64,
    #[serde(with = "serde_rat")]
    pub lo: BigRational,
    #[serde(with = "serde_rat")]
    pub hi: BigRational,
}

/// The partition into open intervals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Partition {
    /// Finitely many intervals with contiguous ids; gaps are allowed.
    Explicit { intervals: Vec<IntervalSpec> },
    /// `i_n = (λ^n, λ^{n−1})` for `n >= 1`, accumulating at 0.
    Geometric {
        #[serde(with = "serde_rat")]
        ratio: BigRational,
    },
    /// `I_k = (k, k + 1)` for `k ∈ ℤ`.
    Lattice,
}

/// An endpoint of a branch image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointRef {
    Value(#[serde(with = "serde_rat")] BigRational),
    /// Left endpoint of interval `k`.
    Lo(i64),
    /// Right endpoint of interval `k`.
    Hi(i64),
    /// Left endpoint of interval `i + d` for the branch's own interval `i`.
    LoRel(i64),
    /// Right endpoint of interval `i + d`.
    HiRel(i64),
    /// The accumulation point of a geometric partition.
    Accumulation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub image_lo: PointRef,
    pub image_hi: PointRef,
    pub increasing: bool,
}

impl BranchSpec {
    pub fn new(image_lo: PointRef, image_hi: PointRef, increasing: bool) -> Self {
        BranchSpec { image_lo, image_hi, increasing }
    }
}

/// Branches of every interval without an explicit one; interval `i` uses
/// `residues[i mod period]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchTail {
    pub period: i64,
    pub residues: Vec<BranchSpec>,
}

/// Where a point lies relative to the partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Interior(i64),
    PartitionPoint,
    Outside,
}

/// An exact closed interval `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enclosure {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl Enclosure {
    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn overlaps(&self, other: &Enclosure) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        &self.lo <= x && x <= &self.hi
    }
}

/// The open interval of points whose itinerary starts with `word`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CylinderInterval {
    pub word: Vec<i64>,
    pub lo: BigRational,
    pub hi: BigRational,
}

/// Nested closures of cylinders along a word.
#[derive(Debug, Clone)]
pub struct PointEnclosure {
    pub enclosure: Enclosure,
    /// Width after each prefix length `1..=len`; non-increasing.
    pub widths: Vec<f64>,
    pub converged: bool,
}

/// A map whose branches are affine between exact endpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovIntervalMap {
    pub name: String,
    pub partition: Partition,
    #[serde(default)]
    pub branches: BTreeMap<i64, BranchSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<BranchTail>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    schema_version: u32,
    name: String,
    partition: Partition,
    #[serde(default)]
    branches: BTreeMap<i64, BranchSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail: Option<BranchTail>,
}

impl MarkovIntervalMap {
    pub fn new(
        name: impl Into<String>,
        partition: Partition,
        branches: BTreeMap<i64, BranchSpec>,
        tail: Option<BranchTail>,
    ) -> Result<Self, IntervalError> {
        let map = MarkovIntervalMap { name: name.into(), partition, branches, tail };
        map.validate()?;
        Ok(map)
    }

    fn validate(&self) -> Result<(), IntervalError> {
        match &self.partition {
            Partition::Explicit { intervals } => {
                if intervals.is_empty() {
                    return Err(IntervalError::Invalid("empty partition".into()));
                }
                for (k, iv) in intervals.iter().enumerate() {
                    if iv.id != intervals[0].id + k as i64 {
                        return Err(IntervalError::Invalid("interval ids must be contiguous and sorted".into()));
                    }
                    if iv.lo >= iv.hi {
                        return Err(IntervalError::Invalid(format!("interval {} is empty", iv.id)));
                    }
                }
                let mut spatial: Vec<&IntervalSpec> = intervals.iter().collect();
                spatial.sort_by(|a, b| a.lo.cmp(&b.lo));
                if spatial.windows(2).any(|w| w[0].hi > w[1].lo) {
                    return Err(IntervalError::Invalid("intervals overlap".into()));
                }
                for iv in intervals {
                    self.branch(iv.id)?;
                }
            }
            Partition::Geometric { ratio } => {
                if !(ratio.is_positive() && ratio < &BigRational::one()) {
                    return Err(IntervalError::Invalid("geometric ratio must lie in (0, 1)".into()));
                }
            }
            Partition::Lattice => {}
        }
        if let Some(t) = &self.tail {
            if t.period < 1 || t.residues.len() != t.period as usize {
                return Err(IntervalError::Invalid("tail needs one branch per residue".into()));
            }
        }
        let domain = self.domain();
        for &i in self.branches.keys() {
            if !domain.contains(StateId(i)) {
                return Err(IntervalError::UnknownInterval(i));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, IntervalError> {
        let file: MapFile = serde_json::from_str(text).map_err(|e| IntervalError::Invalid(e.to_string()))?;
        if file.schema_version != MAP_SCHEMA_VERSION {
            return Err(IntervalError::SchemaMismatch(format!(
                "expected schema_version {MAP_SCHEMA_VERSION}, found {}",
                file.schema_version
            )));
        }
        MarkovIntervalMap::new(file.name, file.partition, file.branches, file.tail)
    }

    pub fn to_json(&self) -> String {
        let file = MapFile {
            schema_version: MAP_SCHEMA_VERSION,
            name: self.name.clone(),
            partition: self.partition.clone(),
            branches: self.branches.clone(),
            tail: self.tail.clone(),
        };
        serde_json::to_string_pretty(&file).expect("interval map serializes")
    }

    pub fn domain(&self) -> StateDomain {
        match &self.partition {
            Partition::Explicit { intervals } => StateDomain::Finite {
                min: intervals[0].id,
                max: intervals[intervals.len() - 1].id,
            },
            Partition::Geometric { .. } => StateDomain::Naturals { min: 1 },
            Partition::Lattice => StateDomain::Integers,
        }
    }

    /// Endpoints of interval `id`.
    pub fn interval(&self, id: i64) -> Result<(BigRational, BigRational), IntervalError> {
        if !self.domain().contains(StateId(id)) {
            return Err(IntervalError::UnknownInterval(id));
        }
        Ok(match &self.partition {
            Partition::Explicit { intervals } => {
                let iv = &intervals[(id - intervals[0].id) as usize];
                (iv.lo.clone(), iv.hi.clone())
            }
            Partition::Geometric { ratio } => (pow(ratio, id as u32), pow(ratio, id as u32 - 1)),
            Partition::Lattice => (int(id), int(id + 1)),
        })
    }

    pub fn branch(&self, id: i64) -> Result<&BranchSpec, IntervalError> {
        if let Some(b) = self.branches.get(&id) {
            return Ok(b);
        }
        match &self.tail {
            Some(t) if self.domain().contains(StateId(id)) => Ok(&t.residues[id.rem_euclid(t.period) as usize]),
            _ => Err(IntervalError::UnknownInterval(id)),
        }
    }

    fn resolve(&self, id: i64, p: &PointRef) -> Result<BigRational, IntervalError> {
        Ok(match p {
            PointRef::Value(v) => v.clone(),
            PointRef::Lo(k) => self.interval(*k)?.0,
            PointRef::Hi(k) => self.interval(*k)?.1,
            PointRef::LoRel(d) => self.interval(id + d)?.0,
            PointRef::HiRel(d) => self.interval(id + d)?.1,
            PointRef::Accumulation => match self.partition {
                Partition::Geometric { .. } => BigRational::zero(),
                _ => return Err(IntervalError::Invalid("accumulation point needs a geometric partition".into())),
            },
        })
    }

    /// The image span of interval `id`.
    pub fn image(&self, id: i64) -> Result<(BigRational, BigRational), IntervalError> {
        let b = self.branch(id)?;
        let lo = self.resolve(id, &b.image_lo)?;
        let hi = self.resolve(id, &b.image_hi)?;
        if lo >= hi {
            return Err(IntervalError::NotMarkov { interval: id, reason: "empty image".into() });
        }
        Ok((lo, hi))
    }

    fn slope(&self, id: i64) -> Result<BigRational, IntervalError> {
        let (l, h) = self.interval(id)?;
        let (a, b) = self.image(id)?;
        Ok((b - a) / (h - l))
    }

    /// The affine branch of `id` evaluated at `x` (also on the closure).
    pub fn apply(&self, id: i64, x: &BigRational) -> Result<BigRational, IntervalError> {
        let (l, _) = self.interval(id)?;
        let (a, b) = self.image(id)?;
        let s = self.slope(id)?;
        Ok(if self.branch(id)?.increasing { a + (x - l) * s } else { b - (x - l) * s })
    }

    /// Image of the closed interval `e ⊂ closure(id)` under the branch of `id`.
    pub fn apply_enclosure(&self, id: i64, e: &Enclosure) -> Result<Enclosure, IntervalError> {
        let u = self.apply(id, &e.lo)?;
        let v = self.apply(id, &e.hi)?;
        Ok(if u <= v { Enclosure { lo: u, hi: v } } else { Enclosure { lo: v, hi: u } })
    }

    /// Preimage of `(u, v)` under the branch of `id`.
    fn pull_back(&self, id: i64, u: &BigRational, v: &BigRational) -> Result<(BigRational, BigRational), IntervalError> {
        let (l, _) = self.interval(id)?;
        let (a, b) = self.image(id)?;
        let s = self.slope(id)?;
        Ok(if self.branch(id)?.increasing {
            (&l + (u - &a) / &s, &l + (v - &a) / &s)
        } else {
            (&l + (&b - v) / &s, &l + (&b - u) / &s)
        })
    }

    pub fn locate(&self, x: &BigRational) -> Location {
        match &self.partition {
            Partition::Explicit { intervals } => {
                for iv in intervals {
                    if &iv.lo < x && x < &iv.hi {
                        return Location::Interior(iv.id);
                    }
                    if &iv.lo == x || &iv.hi == x {
                        return Location::PartitionPoint;
                    }
                }
                Location::Outside
            }
            Partition::Geometric { ratio } => {
                let one = BigRational::one();
                if x.is_zero() || x == &one {
                    return Location::PartitionPoint;
                }
                if x.is_negative() || x > &one {
                    return Location::Outside;
                }
                let mut hi = one;
                let mut n = 1;
                loop {
                    let lo = &hi * ratio;
                    if x == &lo {
                        return Location::PartitionPoint;
                    }
                    if x > &lo {
                        return Location::Interior(n);
                    }
                    hi = lo;
                    n += 1;
                }
            }
            Partition::Lattice => {
                if x.is_integer() {
                    Location::PartitionPoint
                } else {
                    Location::Interior(x.floor().to_integer().try_into().unwrap_or(i64::MAX))
                }
            }
        }
    }

    /// Whether the image of `i` contains interval `j`.
    pub fn covers(&self, i: i64, j: i64) -> Result<bool, IntervalError> {
        let (a, b) = self.image(i)?;
        let (l, h) = self.interval(j)?;
        Ok(a <= l && h <= b)
    }

    // Exponent `m` with `λ^m = x`.
    fn exponent(&self, id: i64, x: &BigRational) -> Result<i64, IntervalError> {
        let Partition::Geometric { ratio } = &self.partition else { unreachable!() };
        let mut p = BigRational::one();
        for m in 0..MAX_EXPONENT {
            if &p == x {
                return Ok(m);
            }
            if &p < x {
                break;
            }
            p *= ratio;
        }
        Err(IntervalError::NotMarkov { interval: id, reason: format!("image endpoint {x} is not a partition point") })
    }

    /// Row `i` of the transition matrix.
    pub fn cover_row(&self, i: i64) -> Result<Row, IntervalError> {
        let (a, b) = self.image(i)?;
        let not_markov = |reason: String| IntervalError::NotMarkov { interval: i, reason };
        let row = match &self.partition {
            Partition::Explicit { intervals } => {
                let mut sorted: Vec<&IntervalSpec> = intervals.iter().collect();
                sorted.sort_by(|x, y| x.lo.cmp(&y.lo));
                return explicit_cover(i, &a, &b, &sorted);
            }
            Partition::Lattice => {
                if !(a.is_integer() && b.is_integer()) {
                    return Err(not_markov(format!("image ({a}, {b}) has a non-integer endpoint")));
                }
                let (a, b): (i64, i64) = (a.to_integer().try_into().unwrap(), b.to_integer().try_into().unwrap());
                Row::finite((a..b).map(StateId).collect())
            }
            Partition::Geometric { .. } => {
                let m = self.exponent(i, &b)?;
                if a.is_zero() {
                    Row { targets: Vec::new(), ray: Some(Ray::AtLeast(m + 1)) }
                } else {
                    let p = self.exponent(i, &a)?;
                    Row::finite((m + 1..=p).map(StateId).collect())
                }
            }
        };
        if row.targets.is_empty() && row.ray.is_none() {
            return Err(not_markov("image covers no interval".into()));
        }
        Ok(row)
    }

    // Relative successor rule for a tail branch.
    fn tail_rule(&self, b: &BranchSpec) -> Result<OffsetRule, IntervalError> {
        let invalid = || IntervalError::Invalid("tail branches need relative endpoints".into());
        match &self.partition {
            Partition::Lattice => {
                // Boundary index: Lo(k) = k, Hi(k) = k + 1.
                let lo = match b.image_lo {
                    PointRef::LoRel(d) => d,
                    PointRef::HiRel(d) => d + 1,
                    _ => return Err(invalid()),
                };
                let hi = match b.image_hi {
                    PointRef::LoRel(d) => d,
                    PointRef::HiRel(d) => d + 1,
                    _ => return Err(invalid()),
                };
                if lo >= hi {
                    return Err(IntervalError::Invalid("tail branch image is empty".into()));
                }
                Ok(OffsetRule::offsets(lo..hi))
            }
            Partition::Geometric { .. } => {
                // Exponent of λ: Lo(k) = λ^k, Hi(k) = λ^(k-1).
                let exp = |p: &PointRef| match p {
                    PointRef::LoRel(d) => Ok(Some(*d)),
                    PointRef::HiRel(d) => Ok(Some(d - 1)),
                    PointRef::Accumulation => Ok(None),
                    _ => Err(invalid()),
                };
                let m = exp(&b.image_hi)?.ok_or_else(invalid)?;
                match exp(&b.image_lo)? {
                    None => Ok(OffsetRule::ray(RelativeRay::AtLeast(m + 1))),
                    Some(p) if p > m => Ok(OffsetRule::offsets(m + 1..=p)),
                    Some(_) => Err(IntervalError::Invalid("tail branch image is empty".into())),
                }
            }
            Partition::Explicit { .. } => Err(invalid()),
        }
    }

    /// Spatial order key of an interval.
    pub fn left_endpoint(&self, id: i64) -> Result<BigRational, IntervalError> {
        Ok(self.interval(id)?.0)
    }

    /// Length-`n` prefix of the true itinerary of `x`.
    pub fn itinerary(&self, x: &BigRational, n: usize) -> Result<Vec<i64>, IntervalError> {
        let mut x = x.clone();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            match self.locate(&x) {
                Location::Interior(id) => {
                    out.push(id);
                    if k + 1 < n {
                        x = self.apply(id, &x)?;
                    }
                }
                Location::PartitionPoint => return Err(IntervalError::HitsPartitionPoint(k)),
                Location::Outside => return Err(IntervalError::OutsidePartition(k)),
            }
        }
        Ok(out)
    }

    /// `i₀ ∩ f⁻¹(i₁) ∩ ⋯ ∩ f⁻ⁿ(iₙ)`; `fⁿ` maps it onto `iₙ`.
    pub fn cylinder_interval(&self, word: &[i64]) -> Result<CylinderInterval, IntervalError> {
        let Some(&last) = word.last() else {
            return Err(IntervalError::InadmissibleWord(0));
        };
        for (k, &i) in word.iter().enumerate() {
            if !self.domain().contains(StateId(i)) {
                return Err(IntervalError::InadmissibleWord(k));
            }
        }
        let (mut lo, mut hi) = self.interval(last)?;
        for k in (0..word.len() - 1).rev() {
            if !self.covers(word[k], word[k + 1])? {
                return Err(IntervalError::InadmissibleWord(k + 1));
            }
            (lo, hi) = self.pull_back(word[k], &lo, &hi)?;
        }
        let mut e = Enclosure { lo: lo.clone(), hi: hi.clone() };
        for &i in &word[..word.len() - 1] {
            e = self.apply_enclosure(i, &e)?;
        }
        let target = self.interval(last)?;
        assert!(e.lo == target.0 && e.hi == target.1, "f^n must map the cylinder onto its last interval");
        Ok(CylinderInterval { word: word.to_vec(), lo, hi })
    }

    /// Closed enclosure of the point coded by `word`, refined prefix by prefix.
    pub fn point_from_itinerary(&self, word: &[i64], eps: f64) -> Result<PointEnclosure, IntervalError> {
        let mut widths = Vec::with_capacity(word.len());
        let mut last = None;
        for k in 1..=word.len() {
            let c = self.cylinder_interval(&word[..k])?;
            widths.push(crate::exact::to_f64(&(&c.hi - &c.lo)));
            last = Some(Enclosure { lo: c.lo, hi: c.hi });
        }
        let enclosure = last.ok_or(IntervalError::InadmissibleWord(0))?;
        let converged = widths.last().is_some_and(|w| *w < eps);
        Ok(PointEnclosure { enclosure, widths, converged })
    }
}

// Intervals of a spatially sorted explicit partition inside `(a, b)`.
fn explicit_cover(i: i64, a: &BigRational, b: &BigRational, sorted: &[&IntervalSpec]) -> Result<Row, IntervalError> {
    let first = sorted.partition_point(|iv| &iv.hi <= a);
    let mut targets = Vec::new();
    for iv in sorted[first..].iter().take_while(|iv| &iv.lo < b) {
        if !(a <= &iv.lo && &iv.hi <= b) {
            return Err(IntervalError::NotMarkov {
                interval: i,
                reason: format!("image ({a}, {b}) partially overlaps interval {}", iv.id),
            });
        }
        targets.push(StateId(iv.id));
    }
    if targets.is_empty() {
        return Err(IntervalError::NotMarkov { interval: i, reason: "image covers no interval".into() });
    }
    Ok(Row::finite(targets))
}

/// `m_ij = 1` iff the image of `i` contains `j`.
pub fn transition_matrix(map: &MarkovIntervalMap) -> Result<TransitionRuleSet, IntervalError> {
    let mut rows = BTreeMap::new();
    let tail = match &map.partition {
        Partition::Explicit { intervals } => {
            let mut sorted: Vec<&IntervalSpec> = intervals.iter().collect();
            sorted.sort_by(|x, y| x.lo.cmp(&y.lo));
            for iv in intervals {
                let (a, b) = map.image(iv.id)?;
                rows.insert(StateId(iv.id), explicit_cover(iv.id, &a, &b, &sorted)?);
            }
            None
        }
        _ => {
            for &i in map.branches.keys() {
                rows.insert(StateId(i), map.cover_row(i)?);
            }
            match &map.tail {
                Some(t) => Some(TailRules {
                    period: t.period,
                    residues: t.residues.iter().map(|b| map.tail_rule(b)).collect::<Result<_, _>>()?,
                }),
                None => None,
            }
        }
    };
    Ok(TransitionRuleSet::new(map.name.clone(), map.domain(), rows, tail, 16)?)
}

/// Whether `f` of the enclosure of `word` overlaps the enclosure of the
/// shifted word.
pub fn conjugacy_overlap(map: &MarkovIntervalMap, word: &[i64]) -> Result<bool, IntervalError> {
    if word.len() < 2 {
        return Ok(true);
    }
    let whole = map.point_from_itinerary(word, 0.0)?.enclosure;
    let shifted = map.point_from_itinerary(&word[1..], 0.0)?.enclosure;
    Ok(map.apply_enclosure(word[0], &whole)?.overlaps(&shifted))
}

/// Tent map on `(0, ½) ∪ (½, 1)` with ids 0 and 1.
pub fn tent() -> MarkovIntervalMap {
    let intervals = vec![
        IntervalSpec { id: 0, lo: int(0), hi: rat(1, 2) },
        IntervalSpec { id: 1, lo: rat(1, 2), hi: int(1) },
    ];
    let full = |inc| BranchSpec::new(PointRef::Value(int(0)), PointRef::Value(int(1)), inc);
    let branches = BTreeMap::from([(0, full(true)), (1, full(false))]);
    MarkovIntervalMap::new("tent", Partition::Explicit { intervals }, branches, None).expect("tent map is valid")
}

/// `i₁` onto `(0, 1)` and `i_n` onto `(0, λ^{n−2})`, all increasing.
pub fn bruin_todd_map(ratio: BigRational) -> Result<MarkovIntervalMap, IntervalError> {
    let branches = BTreeMap::from([(1, BranchSpec::new(PointRef::Accumulation, PointRef::Hi(1), true))]);
    let tail = BranchTail {
        period: 1,
        residues: vec![BranchSpec::new(PointRef::Accumulation, PointRef::HiRel(-1), true)],
    };
    MarkovIntervalMap::new("bruin-todd", Partition::Geometric { ratio }, branches, Some(tail))
}

/// `5x − 8n − 2` on `I_{2n}` and `−3x + 8n + 6` on `I_{2n+1}`.
pub fn five_three_map() -> MarkovIntervalMap {
    let tail = BranchTail {
        period: 2,
        residues: vec![
            BranchSpec::new(PointRef::LoRel(-2), PointRef::HiRel(2), true),
            BranchSpec::new(PointRef::LoRel(-1), PointRef::HiRel(1), false),
        ],
    };
    MarkovIntervalMap::new("five-three", Partition::Lattice, BTreeMap::new(), Some(tail)).expect("valid map")
}

/// Built-in interval maps and the chain builtin their matrix should equal.
pub const MAP_NAMES: &[(&str, &str)] = &[("tent", "full-shift:2"), ("bruin-todd", "bruin-todd"), ("five-three", "five-three")];

pub fn map_by_name(name: &str) -> Result<MarkovIntervalMap, IntervalError> {
    match name {
        "tent" => Ok(tent()),
        "bruin-todd" => bruin_todd_map(rat(1, 2)),
        "five-three" => Ok(five_three_map()),
        _ => Err(IntervalError::Invalid(format!("unknown interval map {name:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;

    fn q(s: &str) -> BigRational {
        s.parse().unwrap()
    }

    #[test]
    fn tent_matrix_is_full() {
        let m = transition_matrix(&tent()).unwrap();
        assert_eq!(m.dense(m.window(2)).unwrap(), vec![vec![1, 1], vec![1, 1]]);
    }

    #[test]
    fn builtin_maps_match_chain_builtins() {
        for (map_name, chain_name) in MAP_NAMES {
            let m = transition_matrix(&map_by_name(map_name).unwrap()).unwrap();
            let c = builtins::by_name(chain_name).unwrap().rules;
            let w = c.domain().window(if c.domain() == StateDomain::Integers { 4 } else { 9 });
            assert_eq!(m.dense(w).unwrap(), c.dense(w).unwrap(), "{map_name}");
        }
    }

    #[test]
    fn five_three_branch_values() {
        let f = five_three_map();
        // On I_2 = (2, 3): 5x − 10; on I_3: −3x + 14.
        assert_eq!(f.apply(2, &q("5/2")).unwrap(), q("5/2"));
        assert_eq!(f.apply(3, &q("7/2")).unwrap(), q("7/2"));
        assert_eq!(f.image(2).unwrap(), (int(0), int(5)));
        assert_eq!(f.image(3).unwrap(), (int(2), int(5)));
    }

    #[test]
    fn bruin_todd_branches() {
        let f = bruin_todd_map(rat(1, 2)).unwrap();
        assert_eq!(f.image(1).unwrap(), (int(0), int(1)));
        assert_eq!(f.image(4).unwrap(), (int(0), rat(1, 4)));
        assert_eq!(f.apply(3, &q("3/16")).unwrap(), q("1/4"));
    }

    #[test]
    fn tent_itineraries() {
        let f = tent();
        assert_eq!(f.itinerary(&q("2/5"), 4).unwrap(), vec![0, 1, 0, 1]);
        assert_eq!(f.itinerary(&q("2/3"), 5).unwrap(), vec![1; 5]);
        assert!(matches!(f.itinerary(&q("1/2"), 3), Err(IntervalError::HitsPartitionPoint(0))));
        assert!(matches!(f.itinerary(&q("1/4"), 3), Err(IntervalError::HitsPartitionPoint(1))));
    }

    #[test]
    fn tent_cylinders() {
        let f = tent();
        let c = f.cylinder_interval(&[0, 0]).unwrap();
        assert_eq!((c.lo, c.hi), (int(0), q("1/4")));
        let c = f.cylinder_interval(&[1, 0]).unwrap();
        assert_eq!((c.lo, c.hi), (q("3/4"), int(1)));
        let c = f.cylinder_interval(&[1]).unwrap();
        assert_eq!((c.lo, c.hi), (q("1/2"), int(1)));
    }

    #[test]
    fn inadmissible_word() {
        let f = bruin_todd_map(rat(1, 2)).unwrap();
        assert!(matches!(f.cylinder_interval(&[3, 1]), Err(IntervalError::InadmissibleWord(1))));
        assert!(f.cylinder_interval(&[3, 2, 1, 5]).is_ok());
    }

    #[test]
    fn points_from_itineraries() {
        let f = tent();
        let e = f.point_from_itinerary(&[0; 20], 1e-5).unwrap();
        assert!(e.converged && e.enclosure.contains(&int(0)));
        let e = f.point_from_itinerary(&[1; 20], 1e-5).unwrap();
        assert!(e.converged && e.enclosure.contains(&q("2/3")));
        assert!(e.widths.windows(2).all(|w| w[1] <= w[0]));
        let e = f.point_from_itinerary(&[1], 1e-5).unwrap();
        assert!(!e.converged);
    }

    #[test]
    fn equal_length_cylinders_are_disjoint() {
        let f = tent();
        let words: Vec<Vec<i64>> = (0..8).map(|k| (0..3).map(|b| (k >> b) & 1).collect()).collect();
        let cyl: Vec<CylinderInterval> = words.iter().map(|w| f.cylinder_interval(w).unwrap()).collect();
        let total: BigRational = cyl.iter().map(|c| &c.hi - &c.lo).sum();
        assert_eq!(total, int(1));
        for a in 0..cyl.len() {
            for b in a + 1..cyl.len() {
                assert!(cyl[a].hi <= cyl[b].lo || cyl[b].hi <= cyl[a].lo);
            }
        }
    }

    #[test]
    fn conjugacy_on_sample_words() {
        let f = bruin_todd_map(rat(1, 2)).unwrap();
        assert!(conjugacy_overlap(&f, &[2, 1, 1, 3, 2]).unwrap());
        assert!(conjugacy_overlap(&tent(), &[0, 1, 1, 0]).unwrap());
    }

    #[test]
    fn partial_overlap_is_not_markov() {
        let intervals = vec![
            IntervalSpec { id: 0, lo: int(0), hi: rat(1, 2) },
            IntervalSpec { id: 1, lo: rat(1, 2), hi: int(1) },
        ];
        let branches = BTreeMap::from([
            (0, BranchSpec::new(PointRef::Value(int(0)), PointRef::Value(rat(3, 4)), true)),
            (1, BranchSpec::new(PointRef::Value(int(0)), PointRef::Value(int(1)), false)),
        ]);
        let f = MarkovIntervalMap::new("bad", Partition::Explicit { intervals }, branches, None).unwrap();
        assert!(matches!(transition_matrix(&f), Err(IntervalError::NotMarkov { interval: 0, .. })));
    }

    #[test]
    fn json_round_trip() {
        for (name, _) in MAP_NAMES {
            let f = map_by_name(name).unwrap();
            assert_eq!(MarkovIntervalMap::from_json(&f.to_json()).unwrap(), f);
        }
        let bad = tent().to_json().replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(matches!(MarkovIntervalMap::from_json(&bad), Err(IntervalError::SchemaMismatch(_))));
    }
}
