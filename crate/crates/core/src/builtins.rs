//! Named chain families.

use std::collections::BTreeMap;

use crate::chain::{ChainError, OffsetRule, Ray, RelativeRay, Row, TailRules, TransitionRuleSet};
use crate::fair::ClosedForm;
use crate::state::{StateDomain, StateId};

/// A named chain together with what is known about it in closed form.
#[derive(Debug, Clone)]
pub struct Builtin {
    pub name: String,
    pub rules: TransitionRuleSet,
    pub closed_form: Option<ClosedForm>,
    /// Reference state for recurrence tests.
    pub origin: StateId,
}

pub const NAMES: &[&str] = &[
    "unbiased-walk",
    "biased-walk",
    "origin-broadcast",
    "bruin-todd",
    "five-three",
    "full-shift:K",
    "cycle:K",
    "sink-walk",
];

fn build(name: &str, domain: StateDomain, explicit: Vec<(i64, Row)>, tail: Option<TailRules>) -> TransitionRuleSet {
    let explicit: BTreeMap<StateId, Row> = explicit.into_iter().map(|(i, r)| (StateId(i), r)).collect();
    TransitionRuleSet::new(name, domain, explicit, tail, 16).expect("builtin rules are valid")
}

/// `i -> i - 1, i + 1` on ℤ.
pub fn unbiased_walk() -> TransitionRuleSet {
    build("unbiased-walk", StateDomain::Integers, vec![], Some(TailRules::uniform(OffsetRule::offsets([-1, 1]))))
}

/// `i -> i - 1, i + 2` on ℤ; backward steps are `-2` or `+1`.
pub fn biased_walk() -> TransitionRuleSet {
    build("biased-walk", StateDomain::Integers, vec![], Some(TailRules::uniform(OffsetRule::offsets([-1, 2]))))
}

/// `0 -> anything`, `i -> i - 1` for `i >= 1`.
pub fn origin_broadcast() -> TransitionRuleSet {
    build(
        "origin-broadcast",
        StateDomain::Naturals { min: 0 },
        vec![(0, Row { targets: vec![], ray: Some(Ray::AtLeast(0)) })],
        Some(TailRules::uniform(OffsetRule::offsets([-1]))),
    )
}

/// States `1, 2, ...`; `1 -> anything`, `i -> j` for `j >= i - 1`.
pub fn bruin_todd() -> TransitionRuleSet {
    build(
        "bruin-todd",
        StateDomain::Naturals { min: 1 },
        vec![(1, Row { targets: vec![], ray: Some(Ray::AtLeast(1)) })],
        Some(TailRules::uniform(OffsetRule::ray(RelativeRay::AtLeast(-1)))),
    )
}

/// Symbolic dynamics of the map `5x - 8n - 2` on `(2n, 2n+1)`, `-3x + 8n + 6`
/// on `(2n+1, 2n+2)`: even states cover five neighbours, odd states three.
pub fn five_three() -> TransitionRuleSet {
    build(
        "five-three",
        StateDomain::Integers,
        vec![],
        Some(TailRules { period: 2, residues: vec![OffsetRule::offsets(-2..=2), OffsetRule::offsets(-1..=1)] }),
    )
}

/// All-ones `k x k` matrix.
pub fn full_shift(k: usize) -> TransitionRuleSet {
    let all: Vec<i64> = (0..k as i64).collect();
    TransitionRuleSet::from_rows(format!("full-shift:{k}"), &vec![all; k]).expect("k >= 1")
}

/// Deterministic cycle `0 -> 1 -> ... -> k-1 -> 0`.
pub fn cycle(k: usize) -> TransitionRuleSet {
    let rows: Vec<Vec<i64>> = (0..k as i64).map(|i| vec![(i + 1) % k as i64]).collect();
    TransitionRuleSet::from_rows(format!("cycle:{k}"), &rows).expect("k >= 1")
}

/// Unbiased walk where every state may also jump to 0, so column 0 is infinite.
pub fn sink_walk() -> TransitionRuleSet {
    let rule = OffsetRule { offsets: vec![-1, 1], fixed: vec![StateId(0)], ray: None };
    build("sink-walk", StateDomain::Integers, vec![], Some(TailRules::uniform(rule)))
}

fn parse_k(name: &str, param: Option<&str>) -> Result<usize, ChainError> {
    let k: usize = param
        .ok_or_else(|| ChainError::InvalidRule(format!("{name} needs a size, e.g. {name}:2")))?
        .parse()
        .map_err(|_| ChainError::InvalidRule(format!("{name}: size is not a positive integer")))?;
    if k == 0 {
        return Err(ChainError::InvalidRule(format!("{name}: size must be positive")));
    }
    Ok(k)
}

/// Looks up `name` or `name:param`.
pub fn by_name(spec: &str) -> Result<Builtin, ChainError> {
    let (name, param) = match spec.split_once(':') {
        Some((n, p)) => (n, Some(p)),
        None => (spec, None),
    };
    let (rules, closed_form, origin) = match name {
        "unbiased-walk" => (unbiased_walk(), None, 0),
        "biased-walk" => (biased_walk(), None, 0),
        "origin-broadcast" => (origin_broadcast(), Some(ClosedForm::HalfPowers { min: 0 }), 0),
        "bruin-todd" => (bruin_todd(), Some(ClosedForm::InverseFactorial { min: 1 }), 1),
        "five-three" => (five_three(), Some(ClosedForm::Periodic { values: vec![5, 3] }), 0),
        "full-shift" => {
            let k = parse_k(name, param)?;
            (full_shift(k), Some(ClosedForm::Uniform { min: 0, count: k as i64 }), 0)
        }
        "cycle" => {
            let k = parse_k(name, param)?;
            (cycle(k), Some(ClosedForm::Uniform { min: 0, count: k as i64 }), 0)
        }
        "sink-walk" => (sink_walk(), None, 0),
        _ => return Err(ChainError::InvalidRule(format!("unknown builtin {spec:?}; known: {}", NAMES.join(", ")))),
    };
    Ok(Builtin { name: spec.to_string(), rules, closed_form, origin: StateId(origin) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense9(m: &TransitionRuleSet) -> Vec<Vec<u8>> {
        m.dense(m.window(9)).unwrap()
    }

    #[test]
    fn origin_broadcast_matrix() {
        let d = dense9(&origin_broadcast());
        assert_eq!(d[0], vec![1; 9]);
        for i in 1..9 {
            let expect: Vec<u8> = (0..9).map(|j| u8::from(j + 1 == i)).collect();
            assert_eq!(d[i], expect);
        }
    }

    #[test]
    fn bruin_todd_matrix() {
        let d = dense9(&bruin_todd());
        for (r, row) in d.iter().enumerate() {
            let i = r as i64 + 1;
            let expect: Vec<u8> = (1..=9).map(|j| u8::from(i == 1 || j >= i - 1)).collect();
            assert_eq!(*row, expect);
        }
    }

    #[test]
    fn walk_matrices() {
        let m = unbiased_walk();
        let w = crate::state::IndexRange::new(-4, 4);
        let d = m.dense(w).unwrap();
        for (a, row) in d.iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                assert_eq!(v, u8::from((a as i64 - b as i64).abs() == 1));
            }
        }
        let d = biased_walk().dense(w).unwrap();
        for (a, row) in d.iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                let step = b as i64 - a as i64;
                assert_eq!(v, u8::from(step == -1 || step == 2));
            }
        }
    }

    #[test]
    fn five_three_bands() {
        let m = five_three();
        for i in -6..6 {
            let row = m.row(StateId(i)).unwrap();
            let width = if i % 2 == 0 { 5 } else { 3 };
            assert_eq!(row.targets.len(), width);
            assert_eq!(m.column_count(StateId(i)).unwrap().finite(), Some(width as u64));
        }
    }

    #[test]
    fn lookup() {
        assert_eq!(by_name("full-shift:2").unwrap().rules.domain().size(), Some(2));
        assert!(by_name("full-shift").is_err());
        assert!(by_name("nope").is_err());
    }
}
