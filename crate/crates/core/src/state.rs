//! State identifiers and the index domains they live in.

use std::fmt;

use serde::{Deserialize, Serialize};

/// An integer-indexed state of a Markov shift.
///
/// States are ordered by index. When every state of an infinite domain has to be
/// visited in turn, the canonical order is the spiral `0, 1, -1, 2, -2, ...`
/// (see [`StateId::spiral_rank`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub i64);

impl StateId {
    pub fn index(self) -> i64 {
        self.0
    }

    pub fn offset(self, delta: i64) -> StateId {
        StateId(self.0 + delta)
    }

    /// Position of the state in the spiral enumeration `0, 1, -1, 2, -2, ...`.
    pub fn spiral_rank(self) -> u64 {
        let i = self.0;
        if i > 0 {
            (2 * i - 1) as u64
        } else {
            (-2 * i) as u64
        }
    }

    /// Inverse of [`StateId::spiral_rank`].
    pub fn from_spiral_rank(rank: u64) -> StateId {
        let r = rank as i64;
        if r % 2 == 1 {
            StateId((r + 1) / 2)
        } else {
            StateId(-r / 2)
        }
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<i64> for StateId {
    fn from(i: i64) -> Self {
        StateId(i)
    }
}

/// A closed range of state indices `lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexRange {
    pub lo: i64,
    pub hi: i64,
}

impl IndexRange {
    pub fn new(lo: i64, hi: i64) -> Self {
        IndexRange { lo, hi }
    }

    pub fn contains(&self, s: StateId) -> bool {
        self.lo <= s.0 && s.0 <= self.hi
    }

    pub fn len(&self) -> usize {
        if self.hi < self.lo {
            0
        } else {
            (self.hi - self.lo + 1) as usize
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        (self.lo..=self.hi).map(StateId)
    }
}

/// The set of indices a chain is defined on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateDomain {
    /// All of ℤ.
    Integers,
    /// `min, min + 1, ...`
    Naturals { min: i64 },
    /// `min..=max`
    Finite { min: i64, max: i64 },
}

impl StateDomain {
    pub fn contains(&self, s: StateId) -> bool {
        match *self {
            StateDomain::Integers => true,
            StateDomain::Naturals { min } => s.0 >= min,
            StateDomain::Finite { min, max } => min <= s.0 && s.0 <= max,
        }
    }

    pub fn lower(&self) -> Option<i64> {
        match *self {
            StateDomain::Integers => None,
            StateDomain::Naturals { min } | StateDomain::Finite { min, .. } => Some(min),
        }
    }

    pub fn upper(&self) -> Option<i64> {
        match *self {
            StateDomain::Finite { max, .. } => Some(max),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, StateDomain::Finite { .. })
    }

    pub fn size(&self) -> Option<usize> {
        match *self {
            StateDomain::Finite { min, max } => Some((max - min + 1).max(0) as usize),
            _ => None,
        }
    }

    /// The window of size `n`: `-n..=n` on ℤ, the first `n` states otherwise.
    pub fn window(&self, n: i64) -> IndexRange {
        let n = n.max(1);
        match *self {
            StateDomain::Integers => IndexRange::new(-n, n),
            StateDomain::Naturals { min } => IndexRange::new(min, min + n - 1),
            StateDomain::Finite { min, max } => IndexRange::new(min, max.min(min + n - 1)),
        }
    }

    /// First state of the canonical enumeration.
    pub fn first(&self) -> StateId {
        match *self {
            StateDomain::Integers => StateId(0),
            StateDomain::Naturals { min } | StateDomain::Finite { min, .. } => StateId(min),
        }
    }

    /// States of the window whose distance to the window edge is less than a
    /// quarter of the window radius. Used to measure mass escaping a truncation.
    pub fn in_outer_quarter(&self, window: IndexRange, s: StateId) -> bool {
        match *self {
            StateDomain::Integers => {
                let radius = window.hi.max(1);
                4 * s.0.abs() > 3 * radius
            }
            StateDomain::Naturals { min } => {
                let span = (window.hi - min + 1).max(1);
                4 * (s.0 - min) >= 3 * span
            }
            StateDomain::Finite { max, .. } => window.hi < max && 4 * (s.0 - window.lo) >= 3 * window.len() as i64,
        }
    }
}
