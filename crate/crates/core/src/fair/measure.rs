use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;

use super::{FairError, StationaryVector};
use crate::chain::{BackwardKernel, TransitionRuleSet};
use crate::exact::{int, to_f64};
use crate::state::{IndexRange, StateId};

/// Rows of `P`, sorted by target. Rows of states with infinitely many
/// successors are cut at the window; `row_tail` holds the missing mass.
#[derive(Debug, Clone, Serialize)]
pub struct ForwardMatrix {
    pub rows: BTreeMap<StateId, Vec<(StateId, f64)>>,
    #[serde(skip)]
    pub exact_rows: Option<BTreeMap<StateId, Vec<(StateId, BigRational)>>>,
    pub row_tail: BTreeMap<StateId, f64>,
}

impl ForwardMatrix {
    pub fn get(&self, i: StateId, j: StateId) -> f64 {
        self.rows
            .get(&i)
            .and_then(|r| r.binary_search_by_key(&j, |e| e.0).ok().map(|k| r[k].1))
            .unwrap_or(0.0)
    }

    pub fn get_exact(&self, i: StateId, j: StateId) -> Option<BigRational> {
        let rows = self.exact_rows.as_ref()?;
        Some(
            rows.get(&i)
                .and_then(|r| r.binary_search_by_key(&j, |e| e.0).ok().map(|k| r[k].1.clone()))
                .unwrap_or_else(BigRational::zero),
        )
    }
}

/// `p_ij = π_j q_ji / π_i` on the window of `pi`.
pub fn build_forward_matrix(pi: &StationaryVector, q: &BackwardKernel) -> Result<ForwardMatrix, FairError> {
    let window = pi.window;
    let rules = q.rules();
    let mut rows = BTreeMap::new();
    let mut exact_rows = pi.weights.as_ref().map(|_| BTreeMap::new());
    let mut row_tail = BTreeMap::new();
    let mut columns: BTreeMap<StateId, u64> = BTreeMap::new();
    for (&i, &pi_i) in &pi.entries {
        if pi_i <= 0.0 {
            return Err(FairError::ZeroMass(i));
        }
        let succ = rules.row(i)?.within(window);
        let mut row = Vec::with_capacity(succ.len());
        let mut exact_row = Vec::new();
        for j in succ {
            let c = match columns.get(&j) {
                Some(&c) => c,
                None => {
                    let c = q.column(j)?;
                    columns.insert(j, c);
                    c
                }
            };
            row.push((j, pi.get(j) / (c as f64 * pi_i)));
            if let Some(w) = &pi.weights {
                exact_row.push((j, &w[&j] / (&w[&i] * int(c as i64))));
            }
        }
        row_tail.insert(i, (1.0 - row.iter().map(|e| e.1).sum::<f64>()).max(0.0));
        rows.insert(i, row);
        if let Some(er) = exact_rows.as_mut() {
            er.insert(i, exact_row);
        }
    }
    Ok(ForwardMatrix { rows, exact_rows, row_tail })
}

/// `Markov(π, P)`.
#[derive(Debug, Clone, Serialize)]
pub struct FairMeasure {
    pub pi: StationaryVector,
    pub p: ForwardMatrix,
}

impl FairMeasure {
    pub fn new(pi: StationaryVector, q: &BackwardKernel) -> Result<Self, FairError> {
        let p = build_forward_matrix(&pi, q)?;
        Ok(FairMeasure { pi, p })
    }

    /// The Bernoulli measure on the full shift over `0..probs.len()`.
    pub fn bernoulli(probs: &[BigRational]) -> Self {
        let states: Vec<StateId> = (0..probs.len() as i64).map(StateId).collect();
        let window = IndexRange::new(0, probs.len() as i64 - 1);
        let pi: BTreeMap<StateId, BigRational> = states.iter().copied().zip(probs.iter().cloned()).collect();
        let exact_row: Vec<(StateId, BigRational)> = pi.iter().map(|(s, v)| (*s, v.clone())).collect();
        let row: Vec<(StateId, f64)> = exact_row.iter().map(|(s, v)| (*s, to_f64(v))).collect();
        let p = ForwardMatrix {
            rows: states.iter().map(|s| (*s, row.clone())).collect(),
            exact_rows: Some(states.iter().map(|s| (*s, exact_row.clone())).collect()),
            row_tail: states.iter().map(|s| (*s, 0.0)).collect(),
        };
        FairMeasure { pi: StationaryVector::from_exact(pi, window), p }
    }

    pub fn window(&self) -> IndexRange {
        self.pi.window
    }

    // Exact cylinder weight, proportional to the cylinder measure.
    fn cylinder_weight(&self, word: &[StateId]) -> Option<BigRational> {
        let w = self.pi.weights.as_ref()?;
        let mut acc = w.get(&word[0]).cloned().unwrap_or_else(BigRational::zero);
        for pair in word.windows(2) {
            if acc.is_zero() {
                break;
            }
            acc *= self.p.get_exact(pair[0], pair[1])?;
        }
        Some(acc)
    }
}

/// `μ[j₀ … jₙ] = π_{j₀} p_{j₀j₁} ⋯ p_{jₙ₋₁jₙ}`.
pub fn cylinder_measure(mu: &FairMeasure, word: &[StateId]) -> f64 {
    let Some(&first) = word.first() else { return 0.0 };
    let mut acc = mu.pi.get(first);
    for pair in word.windows(2) {
        acc *= mu.p.get(pair[0], pair[1]);
    }
    acc
}

/// Exact cylinder measure when π is exactly normalized.
pub fn cylinder_measure_exact(mu: &FairMeasure, word: &[StateId]) -> Option<BigRational> {
    if word.is_empty() {
        return Some(BigRational::zero());
    }
    let z = mu.pi.exact_normalizer.as_ref()?;
    Some(mu.cylinder_weight(word)? / z)
}

/// Outcome of [`check_fair_on_cylinders`].
#[derive(Debug, Clone, Serialize)]
pub struct FairnessCheck {
    pub max_violation: f64,
    #[serde(serialize_with = "ser_opt_rat")]
    pub max_violation_exact: Option<BigRational>,
    pub checks: usize,
}

fn ser_opt_rat<S: serde::Serializer>(v: &Option<BigRational>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(q) => s.serialize_some(&q.to_string()),
        None => s.serialize_none(),
    }
}

struct Violations<'a> {
    mu: &'a FairMeasure,
    exact: bool,
    max_f: f64,
    max_w: BigRational,
    checks: usize,
}

impl Violations<'_> {
    // Compares Σ_g μ[i·g] against Σ_g μ[g] / c over a group of words.
    fn record(&mut self, i: StateId, words: &[Vec<StateId>], c: u64) {
        self.checks += 1;
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for w in words {
            let mut iw = Vec::with_capacity(w.len() + 1);
            iw.push(i);
            iw.extend_from_slice(w);
            lhs += cylinder_measure(self.mu, &iw);
            rhs += cylinder_measure(self.mu, w);
        }
        self.max_f = self.max_f.max((lhs - rhs / c as f64).abs());
        if self.exact {
            let mut lhs = BigRational::zero();
            let mut rhs = BigRational::zero();
            for w in words {
                let mut iw = vec![i];
                iw.extend_from_slice(w);
                match (self.mu.cylinder_weight(&iw), self.mu.cylinder_weight(w)) {
                    (Some(a), Some(b)) => {
                        lhs += a;
                        rhs += b;
                    }
                    _ => {
                        self.exact = false;
                        return;
                    }
                }
            }
            let d = (lhs - rhs / int(c as i64)).abs();
            if d > self.max_w {
                self.max_w = d;
            }
        }
    }
}

/// Largest `|μ(X_i ∩ σ⁻¹B) − μ(B)/c(B)|` over cylinders `B = [w]` with
/// `1 <= |w| <= depth` inside `window`, and over the coarsest sets on which
/// `c` is defined: unions of states sharing one predecessor set.
pub fn check_fair_on_cylinders(
    mu: &FairMeasure,
    m: &TransitionRuleSet,
    depth: usize,
    window: IndexRange,
) -> Result<FairnessCheck, FairError> {
    let window = IndexRange::new(window.lo.max(mu.window().lo), window.hi.min(mu.window().hi));
    let states: Vec<StateId> = window.states().filter(|s| m.domain().contains(*s)).collect();
    let mut preds: BTreeMap<StateId, Vec<StateId>> = BTreeMap::new();
    for &j in &states {
        preds.insert(j, m.predecessors(j)?);
    }
    let mut v = Violations {
        mu,
        exact: mu.pi.weights.is_some() && mu.p.exact_rows.is_some(),
        max_f: 0.0,
        max_w: BigRational::zero(),
        checks: 0,
    };

    let mut groups: BTreeMap<&Vec<StateId>, Vec<Vec<StateId>>> = BTreeMap::new();
    for (j, p) in &preds {
        groups.entry(p).or_default().push(vec![*j]);
    }
    for (p, words) in &groups {
        for &i in p.iter().filter(|i| window.contains(**i)) {
            v.record(i, words, p.len() as u64);
        }
    }

    let mut stack: Vec<Vec<StateId>> = states.iter().map(|s| vec![*s]).collect();
    while let Some(w) = stack.pop() {
        let p = &preds[&w[0]];
        for &i in p.iter().filter(|i| window.contains(**i)) {
            v.record(i, std::slice::from_ref(&w), p.len() as u64);
        }
        if w.len() < depth {
            for j in m.row(*w.last().expect("nonempty"))?.within(window) {
                let mut next = w.clone();
                next.push(j);
                stack.push(next);
            }
        }
    }

    let max_violation_exact = if v.exact {
        match &mu.pi.exact_normalizer {
            Some(z) => Some(&v.max_w / z),
            None if v.max_w.is_zero() => Some(BigRational::zero()),
            None => None,
        }
    } else {
        None
    };
    Ok(FairnessCheck { max_violation: v.max_f, max_violation_exact, checks: v.checks })
}

/// A truncated sum with a heuristic bound on the omitted part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyEstimate {
    pub value: f64,
    pub tail_bound: f64,
}

/// `−Σ π_i p_ij log p_ij` over `window`, with `0 log 0 = 0`.
pub fn fair_entropy(mu: &FairMeasure, window: IndexRange) -> Result<EntropyEstimate, FairError> {
    let mut value = 0.0;
    let mut missing = mu.pi.tail_mass_bound;
    let mut worst_log: f64 = 1.0;
    for (&i, row) in mu.p.rows.range(StateId(window.lo)..=StateId(window.hi)) {
        let pi_i = mu.pi.get(i);
        for &(_, p) in row {
            if p > 0.0 {
                value -= pi_i * p * p.ln();
                worst_log = worst_log.max(-p.ln());
            }
        }
        missing += pi_i * mu.p.row_tail.get(&i).copied().unwrap_or(0.0);
    }
    if !value.is_finite() {
        return Err(FairError::EntropyDiverges);
    }
    Ok(EntropyEstimate { value, tail_bound: missing * (1.0 + worst_log) })
}

/// `Σ π_i log c_i` over `window`.
pub fn integral_log_c(mu: &FairMeasure, q: &BackwardKernel, window: IndexRange) -> Result<EntropyEstimate, FairError> {
    let mut value = 0.0;
    let mut top: f64 = 0.0;
    for (&i, &pi_i) in mu.pi.entries.range(StateId(window.lo)..=StateId(window.hi)) {
        let log_c = (q.column(i)? as f64).ln();
        value += pi_i * log_c;
        top = top.max(log_c);
    }
    if !value.is_finite() {
        return Err(FairError::EntropyDiverges);
    }
    Ok(EntropyEstimate { value, tail_bound: mu.pi.tail_mass_bound * (1.0 + top) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;
    use crate::exact::rat;
    use crate::fair::{solve_stationary, solve_stationary_with, SolverOptions};

    fn measure(name: &str) -> (FairMeasure, BackwardKernel, TransitionRuleSet) {
        let b = builtins::by_name(name).unwrap();
        let q = BackwardKernel::new(b.rules.clone()).unwrap();
        let pi = solve_stationary_with(&q, SolverOptions::default(), b.closed_form.as_ref()).unwrap();
        (FairMeasure::new(pi, &q).unwrap(), q, b.rules)
    }

    fn s(i: i64) -> StateId {
        StateId(i)
    }

    #[test]
    fn origin_broadcast_first_row() {
        let (mu, _, _) = measure("origin-broadcast");
        for j in 0..10 {
            assert_eq!(mu.p.get_exact(s(0), s(j)), Some(crate::exact::pow(&rat(1, 2), j as u32 + 1)));
        }
        for i in 1..10 {
            assert_eq!(mu.p.get_exact(s(i), s(i - 1)), Some(rat(1, 1)));
        }
    }

    #[test]
    fn bruin_todd_first_row() {
        let (mu, _, _) = measure("bruin-todd");
        let expect = [rat(1, 2), rat(1, 3), rat(1, 8), rat(1, 30)];
        for (k, e) in expect.iter().enumerate() {
            assert_eq!(mu.p.get_exact(s(1), s(k as i64 + 1)).as_ref(), Some(e));
        }
        assert_eq!(mu.p.get_exact(s(3), s(2)), Some(rat(2, 3)));
    }

    #[test]
    fn cycle_forward_matrix_is_the_permutation() {
        let (mu, _, _) = measure("cycle:3");
        for i in 0..3 {
            assert_eq!(mu.p.rows[&s(i)], vec![(s((i + 1) % 3), 1.0)]);
        }
    }

    #[test]
    fn zero_mass_is_rejected() {
        let q = BackwardKernel::new(builtins::cycle(2)).unwrap();
        let pi = StationaryVector::from_exact([(s(0), rat(1, 1)), (s(1), rat(0, 1))].into(), IndexRange::new(0, 1));
        assert!(matches!(build_forward_matrix(&pi, &q), Err(FairError::ZeroMass(StateId(1)))));
    }

    #[test]
    fn cylinder_values() {
        let (mu, _, _) = measure("origin-broadcast");
        assert_eq!(cylinder_measure_exact(&mu, &[s(0), s(0)]), Some(rat(1, 4)));
        assert_eq!(cylinder_measure_exact(&mu, &[s(3)]), Some(rat(1, 16)));
        assert_eq!(cylinder_measure_exact(&mu, &[s(2), s(2)]), Some(rat(0, 1)));
        let (bt, _, _) = measure("bruin-todd");
        let e = std::f64::consts::E;
        assert!((cylinder_measure(&bt, &[s(1), s(2)]) - 1.0 / (3.0 * e)).abs() < 1e-15);
        assert!((cylinder_measure(&bt, &[s(4)]) - 1.0 / (6.0 * e)).abs() < 1e-15);
    }

    #[test]
    fn fairness_is_exact_for_closed_forms() {
        let (mu, _, m) = measure("origin-broadcast");
        let r = check_fair_on_cylinders(&mu, &m, 3, IndexRange::new(0, 9)).unwrap();
        assert_eq!(r.max_violation_exact, Some(BigRational::zero()));
        let (bt, _, m) = measure("bruin-todd");
        let r = check_fair_on_cylinders(&bt, &m, 2, IndexRange::new(1, 8)).unwrap();
        assert_eq!(r.max_violation_exact, Some(BigRational::zero()));
    }

    #[test]
    fn bernoulli_fairness() {
        let m = builtins::full_shift(2);
        let uniform = FairMeasure::bernoulli(&[rat(1, 2), rat(1, 2)]);
        let r = check_fair_on_cylinders(&uniform, &m, 2, IndexRange::new(0, 1)).unwrap();
        assert_eq!(r.max_violation_exact, Some(BigRational::zero()));
        let skew = FairMeasure::bernoulli(&[rat(1, 3), rat(2, 3)]);
        let r = check_fair_on_cylinders(&skew, &m, 1, IndexRange::new(0, 1)).unwrap();
        assert_eq!(r.max_violation_exact, Some(rat(1, 6)));
        assert!((r.max_violation - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn entropies() {
        let (mu, q, _) = measure("origin-broadcast");
        let w = mu.window();
        let h = fair_entropy(&mu, w).unwrap();
        assert!((h.value - 2f64.ln()).abs() < 1e-9, "{h:?}");
        let l = integral_log_c(&mu, &q, w).unwrap();
        assert!((l.value - 2f64.ln()).abs() < 1e-9);

        let (mu, q, _) = measure("bruin-todd");
        let w = IndexRange::new(1, 40);
        let h = fair_entropy(&mu, w).unwrap().value;
        let l = integral_log_c(&mu, &q, w).unwrap().value;
        assert!((h - 2.85053f64.ln()).abs() < 1e-4);
        assert!((h - l).abs() < 1e-9);

        let (mu, _, _) = measure("cycle:1");
        assert_eq!(fair_entropy(&mu, mu.window()).unwrap().value, 0.0);
        let (mu, q3, _) = measure("full-shift:3");
        assert!((integral_log_c(&mu, &q3, mu.window()).unwrap().value - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn numeric_and_closed_form_measures_agree() {
        let q = BackwardKernel::new(builtins::bruin_todd()).unwrap();
        let pi = solve_stationary(&q, SolverOptions::default()).unwrap();
        let mu = FairMeasure::new(pi, &q).unwrap();
        let r = check_fair_on_cylinders(&mu, q.rules(), 2, IndexRange::new(1, 10)).unwrap();
        assert!(r.max_violation < 1e-9, "{}", r.max_violation);
        assert!(r.max_violation_exact.is_none());
    }
}
