//! Positive recurrence, null recurrence and transience of the backward kernel,
//! decided from three independent kinds of evidence.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::chain::{BackwardKernel, ChainError, StepSampler};
use crate::fair::{solve_stationary_with, ClosedForm, FairError, SolverOptions};
use crate::state::StateId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecurrenceError {
    #[error("paths of length {steps} leave the window of radius {window}")]
    WindowInsufficient { steps: usize, window: i64 },
    #[error(transparent)]
    Chain(#[from] ChainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecurrenceClass {
    PositiveRecurrent,
    NullRecurrent,
    Transient,
    Unknown,
}

/// `(Q^n)_{oo}` and the partial sum through `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTerm {
    pub n: usize,
    pub value: BigRational,
    pub partial_sum: BigRational,
}

/// Exact diagonal powers `(Q^n)_{oo}` for `n = 0..=n_max`. Every state reached
/// must lie in `window(window)`.
pub fn series_test(q: &BackwardKernel, origin: StateId, n_max: usize, window: i64) -> Result<Vec<SeriesTerm>, RecurrenceError> {
    let range = q.domain().window(window);
    // Numerators over a common denominator.
    let mut dist: BTreeMap<StateId, BigInt> = BTreeMap::from([(origin, BigInt::one())]);
    let mut denom = BigInt::one();
    let mut partial = BigRational::zero();
    let mut out = Vec::with_capacity(n_max + 1);
    let mut cols: BTreeMap<StateId, Vec<StateId>> = BTreeMap::new();
    for n in 0..=n_max {
        let value = BigRational::new(dist.get(&origin).cloned().unwrap_or_default(), denom.clone());
        partial += &value;
        out.push(SeriesTerm { n, value, partial_sum: partial.clone() });
        if n == n_max {
            break;
        }
        for j in dist.keys() {
            if !cols.contains_key(j) {
                let mut buf = Vec::new();
                q.predecessors_into(*j, &mut buf)?;
                cols.insert(*j, buf);
            }
        }
        let l = dist.keys().fold(BigInt::one(), |acc, j| acc.lcm(&BigInt::from(cols[j].len())));
        let mut next: BTreeMap<StateId, BigInt> = BTreeMap::new();
        for (j, num) in &dist {
            let preds = &cols[j];
            let share = num * (&l / BigInt::from(preds.len()));
            for &i in preds {
                if !range.contains(i) {
                    return Err(RecurrenceError::WindowInsufficient { steps: n + 1, window });
                }
                *next.entry(i).or_default() += &share;
            }
        }
        denom *= l;
        dist = next;
    }
    Ok(out)
}

/// Floating-point `(Q^n)_{oo}` for `n = 0..=n_max`; mass leaving the window is
/// dropped and reported.
pub fn series_f64(q: &BackwardKernel, origin: StateId, n_max: usize, window: i64) -> Result<(Vec<f64>, f64), ChainError> {
    let range = q.domain().window(window);
    let states: Vec<StateId> = range.states().filter(|s| q.domain().contains(*s)).collect();
    let lo = states[0].0;
    let mut preds: Vec<Vec<usize>> = Vec::with_capacity(states.len());
    let mut escape: Vec<f64> = Vec::with_capacity(states.len());
    let mut buf = Vec::new();
    for &j in &states {
        q.predecessors_into(j, &mut buf)?;
        let inside: Vec<usize> = buf.iter().filter(|i| range.contains(**i)).map(|i| (i.0 - lo) as usize).collect();
        escape.push((buf.len() - inside.len()) as f64 / buf.len() as f64);
        preds.push(inside);
    }
    let c: Vec<f64> = states.iter().map(|&j| q.column(j).map(|c| c as f64)).collect::<Result<_, _>>()?;
    let o = (origin.0 - lo) as usize;
    let mut v = vec![0.0; states.len()];
    v[o] = 1.0;
    let mut next = vec![0.0; states.len()];
    let mut out = vec![1.0];
    let mut lost = 0.0;
    for _ in 0..n_max {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (j, &m) in v.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            lost += m * escape[j];
            let share = m / c[j];
            for &i in &preds[j] {
                next[i] += share;
            }
        }
        std::mem::swap(&mut v, &mut next);
        out.push(v[o]);
    }
    Ok((out, lost))
}

/// Return statistics at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnEstimate {
    pub horizon: u64,
    pub trials: u64,
    pub returns: u64,
    pub return_frequency: f64,
    /// Wilson 95% interval.
    pub confidence_interval: (f64, f64),
    pub mean_return_time_of_returners: Option<f64>,
}

const BATCH: u64 = 1024;

pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// First return times to `origin`, `None` when no return within `horizon`.
/// Trial `t` belongs to batch `t / 1024`, which draws from stream `batch` of a
/// ChaCha8 generator seeded with `seed`; output is independent of scheduling.
pub fn return_times(q: &BackwardKernel, origin: StateId, trials: u64, horizon: u64, seed: u64) -> Result<Vec<Option<u64>>, ChainError> {
    let batches = trials.div_ceil(BATCH);
    let parts: Vec<Result<Vec<Option<u64>>, ChainError>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let count = BATCH.min(trials - b * BATCH);
            let mut stepper = StepSampler::new(q);
            let mut out = Vec::with_capacity(count as usize);
            for _ in 0..count {
                let mut s = origin;
                let mut hit = None;
                for t in 1..=horizon {
                    s = stepper.step(s, &mut rng)?;
                    if s == origin {
                        hit = Some(t);
                        break;
                    }
                }
                out.push(hit);
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::with_capacity(trials as usize);
    for p in parts {
        all.extend(p?);
    }
    Ok(all)
}

fn estimate(times: &[Option<u64>], horizon: u64) -> ReturnEstimate {
    let mut returns = 0u64;
    let mut total = 0u64;
    for t in times.iter().flatten().filter(|t| **t <= horizon) {
        returns += 1;
        total += t;
    }
    let trials = times.len() as u64;
    ReturnEstimate {
        horizon,
        trials,
        returns,
        return_frequency: returns as f64 / trials.max(1) as f64,
        confidence_interval: wilson_interval(returns, trials),
        mean_return_time_of_returners: (returns > 0).then(|| total as f64 / returns as f64),
    }
}

pub fn monte_carlo_return(q: &BackwardKernel, origin: StateId, trials: u64, horizon: u64, seed: u64) -> Result<ReturnEstimate, ChainError> {
    Ok(estimate(&return_times(q, origin, trials, horizon, seed)?, horizon))
}

/// One simulation read off at several horizons.
pub fn monte_carlo_returns(
    q: &BackwardKernel,
    origin: StateId,
    trials: u64,
    horizons: &[u64],
    seed: u64,
) -> Result<Vec<ReturnEstimate>, ChainError> {
    let max = horizons.iter().copied().max().unwrap_or(1);
    let times = return_times(q, origin, trials, max, seed)?;
    Ok(horizons.iter().map(|&h| estimate(&times, h)).collect())
}

/// Thresholds for [`classify`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrencePolicy {
    pub origin: StateId,
    pub horizons: Vec<u64>,
    pub trials: u64,
    pub seed: u64,
    pub n_max: usize,
    /// Window radius for the series and the irreducibility check.
    pub window: i64,
    /// Transient needs the upper confidence bound below this at every horizon.
    pub transience_upper_bound: f64,
    /// Transient needs the series to grow less than this over its last quarter.
    pub series_growth: f64,
    /// Recurrent evidence: non-return fraction shrinking by this factor per horizon step.
    pub shrink_factor: f64,
    pub solver: SolverOptions,
}

impl Default for RecurrencePolicy {
    fn default() -> Self {
        RecurrencePolicy {
            origin: StateId(0),
            horizons: vec![100, 1_000, 10_000],
            trials: 10_000,
            seed: 0,
            n_max: 400,
            window: 1024,
            transience_upper_bound: 0.99,
            series_growth: 1e-6,
            shrink_factor: 1.5,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SolverOutcome {
    Summable { provenance: String, tail_mass_bound: f64 },
    NoSummableSolution { reason: String },
    Inconclusive { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrenceEvidence {
    /// `(n, (Q^n)_oo, partial sum)`.
    pub series: Vec<(usize, f64, f64)>,
    pub series_escaped_mass: f64,
    pub series_growth_last_quarter: f64,
    pub monte_carlo: Vec<ReturnEstimate>,
    pub solver: SolverOutcome,
    pub transient_signal: bool,
    pub recurrent_signal: bool,
    pub irreducible_on_window: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrenceVerdict {
    pub class: RecurrenceClass,
    pub evidence: RecurrenceEvidence,
}

/// Combines the stationary solver, the return series and Monte Carlo returns.
/// Positive recurrence needs a summable π; conflicting evidence gives `Unknown`.
pub fn classify(q: &BackwardKernel, policy: &RecurrencePolicy, closed_form: Option<&ClosedForm>) -> Result<RecurrenceVerdict, ChainError> {
    let irreducible = q.rules().check_irreducible(policy.window.min(64)).irreducible;

    let solver = match solve_stationary_with(q, policy.solver, closed_form) {
        Ok(pi) => SolverOutcome::Summable {
            provenance: format!("{:?}", pi.provenance),
            tail_mass_bound: pi.tail_mass_bound,
        },
        Err(FairError::NoSummableSolution(d)) => SolverOutcome::NoSummableSolution { reason: d.reason },
        Err(FairError::Chain(e)) => return Err(e),
        Err(e) => SolverOutcome::Inconclusive { reason: e.to_string() },
    };

    let (terms, escaped) = series_f64(q, policy.origin, policy.n_max, policy.window)?;
    let mut partial = 0.0;
    let series: Vec<(usize, f64, f64)> = terms
        .iter()
        .enumerate()
        .map(|(n, &v)| {
            partial += v;
            (n, v, partial)
        })
        .collect();
    let quarter = policy.n_max - policy.n_max / 4;
    let growth = series.last().map_or(0.0, |l| l.2) - series.get(quarter).map_or(0.0, |t| t.2);

    let mc = monte_carlo_returns(q, policy.origin, policy.trials, &policy.horizons, policy.seed)?;
    let transient_signal = !mc.is_empty()
        && mc.iter().all(|e| e.confidence_interval.1 < policy.transience_upper_bound)
        && growth < policy.series_growth;
    let shrinking = mc.len() >= 2
        && mc.windows(2).all(|w| {
            let a = 1.0 - w[0].return_frequency;
            let b = 1.0 - w[1].return_frequency;
            b * policy.shrink_factor <= a
        });
    let recurrent_signal = shrinking || mc.last().is_some_and(|e| e.confidence_interval.1 >= policy.transience_upper_bound);

    let class = if !irreducible {
        RecurrenceClass::Unknown
    } else {
        match &solver {
            SolverOutcome::Summable { .. } if transient_signal => RecurrenceClass::Unknown,
            SolverOutcome::Summable { .. } => RecurrenceClass::PositiveRecurrent,
            SolverOutcome::NoSummableSolution { .. } if transient_signal => RecurrenceClass::Transient,
            SolverOutcome::NoSummableSolution { .. } if recurrent_signal => RecurrenceClass::NullRecurrent,
            SolverOutcome::Inconclusive { .. } if transient_signal => RecurrenceClass::Transient,
            _ => RecurrenceClass::Unknown,
        }
    };

    Ok(RecurrenceVerdict {
        class,
        evidence: RecurrenceEvidence {
            series,
            series_escaped_mass: escaped,
            series_growth_last_quarter: growth,
            monte_carlo: mc,
            solver,
            transient_signal,
            recurrent_signal,
            irreducible_on_window: irreducible,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;
    use crate::chain::TransitionRuleSet;
    use crate::exact::{factorial, int, rat};

    fn kernel(m: TransitionRuleSet) -> BackwardKernel {
        BackwardKernel::new(m).unwrap()
    }

    #[test]
    fn biased_walk_diagonal_matches_closed_form() {
        let q = kernel(builtins::biased_walk());
        let terms = series_test(&q, StateId(0), 12, 64).unwrap();
        assert_eq!(terms[3].value, rat(3, 8));
        assert_eq!(terms[6].value, rat(15, 64));
        for n in 1..=4u64 {
            let num = factorial(3 * n);
            let den = factorial(2 * n) * factorial(n) * BigInt::from(2).pow(3 * n as u32);
            assert_eq!(terms[3 * n as usize].value, BigRational::new(num, den));
        }
        assert!(terms.iter().filter(|t| t.n % 3 != 0).all(|t| t.value.is_zero()));
    }

    #[test]
    fn unbiased_walk_two_steps() {
        let q = kernel(builtins::unbiased_walk());
        let terms = series_test(&q, StateId(0), 2, 8).unwrap();
        assert_eq!(terms[0].value, int(1));
        assert_eq!(terms[2].value, rat(1, 2));
    }

    #[test]
    fn window_insufficient() {
        let q = kernel(builtins::unbiased_walk());
        assert_eq!(
            series_test(&q, StateId(0), 5, 2).unwrap_err(),
            RecurrenceError::WindowInsufficient { steps: 3, window: 2 }
        );
    }

    #[test]
    fn float_series_matches_exact() {
        let q = kernel(builtins::bruin_todd());
        let exact = series_test(&q, StateId(1), 10, 64).unwrap();
        let (approx, lost) = series_f64(&q, StateId(1), 10, 64).unwrap();
        assert_eq!(lost, 0.0);
        for (t, a) in exact.iter().zip(&approx) {
            assert!((crate::exact::to_f64(&t.value) - a).abs() < 1e-14);
        }
    }

    #[test]
    fn single_loop_always_returns_at_once() {
        let q = kernel(builtins::cycle(1));
        let e = monte_carlo_return(&q, StateId(0), 100, 10, 1).unwrap();
        assert_eq!(e.return_frequency, 1.0);
        assert_eq!(e.mean_return_time_of_returners, Some(1.0));
    }

    #[test]
    fn monte_carlo_is_seed_reproducible() {
        let q = kernel(builtins::unbiased_walk());
        let a = return_times(&q, StateId(0), 3000, 200, 9).unwrap();
        let b = return_times(&q, StateId(0), 3000, 200, 9).unwrap();
        assert_eq!(a, b);
        let c = return_times(&q, StateId(0), 3000, 200, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
        assert!(wilson_interval(10, 10).1 > 1.0 - 1e-12);
    }

    #[test]
    fn classify_examples() {
        let policy = RecurrencePolicy { trials: 4000, ..Default::default() };
        let ob = builtins::by_name("origin-broadcast").unwrap();
        let v = classify(&kernel(ob.rules), &policy, ob.closed_form.as_ref()).unwrap();
        assert_eq!(v.class, RecurrenceClass::PositiveRecurrent);
        let v = classify(&kernel(builtins::unbiased_walk()), &policy, None).unwrap();
        assert_eq!(v.class, RecurrenceClass::NullRecurrent);
        let v = classify(&kernel(builtins::biased_walk()), &policy, None).unwrap();
        assert_eq!(v.class, RecurrenceClass::Transient);
    }
}
