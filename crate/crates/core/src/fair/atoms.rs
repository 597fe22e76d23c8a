use serde::Serialize;

use super::FairError;
use crate::chain::{ColumnCount, TransitionRuleSet};
use crate::state::StateId;

/// A periodic orbit equal to its own full preimage; listed in forward order
/// starting from its smallest state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AtomicOrbit {
    pub cycle: Vec<StateId>,
}

/// Cycles of length `<= max_period` inside `window(n)` on which every state has
/// exactly one predecessor, the previous state of the cycle.
pub fn find_atomic_fair_measures(
    m: &TransitionRuleSet,
    max_period: usize,
    window: i64,
) -> Result<Vec<AtomicOrbit>, FairError> {
    let window = m.window(window);
    let unique_pred = |s: StateId| -> Result<Option<StateId>, FairError> {
        if m.column_count(s)? != ColumnCount::Finite(1) {
            return Ok(None);
        }
        Ok(m.predecessors(s)?.first().copied())
    };
    let mut out: Vec<AtomicOrbit> = Vec::new();
    for start in window.states().filter(|s| m.domain().contains(*s)) {
        let mut back = vec![start];
        let mut cur = start;
        for _ in 0..max_period {
            let Some(prev) = unique_pred(cur)? else { break };
            if prev == start {
                back.reverse();
                let k = back.iter().enumerate().min_by_key(|(_, s)| **s).map(|(k, _)| k).unwrap_or(0);
                back.rotate_left(k);
                if !out.iter().any(|o| o.cycle == back) {
                    out.push(AtomicOrbit { cycle: back });
                }
                break;
            }
            if !window.contains(prev) || back.contains(&prev) {
                break;
            }
            back.push(prev);
            cur = prev;
        }
    }
    out.sort_by(|a, b| a.cycle.cmp(&b.cycle));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;

    #[test]
    fn full_shift_has_no_atoms() {
        assert!(find_atomic_fair_measures(&builtins::full_shift(2), 4, 2).unwrap().is_empty());
    }

    #[test]
    fn five_three_has_no_atoms() {
        assert!(find_atomic_fair_measures(&builtins::five_three(), 6, 20).unwrap().is_empty());
    }

    #[test]
    fn isolated_self_loop() {
        let m = TransitionRuleSet::from_rows("m", &[vec![0, 1], vec![1, 2], vec![1]]).unwrap();
        let atoms = find_atomic_fair_measures(&m, 3, 3).unwrap();
        assert_eq!(atoms, vec![AtomicOrbit { cycle: vec![StateId(0)] }]);
    }

    #[test]
    fn deterministic_cycle_is_one_orbit() {
        let atoms = find_atomic_fair_measures(&builtins::cycle(3), 3, 3).unwrap();
        assert_eq!(atoms, vec![AtomicOrbit { cycle: vec![StateId(0), StateId(1), StateId(2)] }]);
        assert!(find_atomic_fair_measures(&builtins::cycle(3), 2, 3).unwrap().is_empty());
    }
}
