use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;

use super::{ClosedForm, FairError, Provenance, StationaryVector};
use crate::chain::{BackwardKernel, ChainError};
use crate::exact::int;
use crate::state::{IndexRange, StateDomain, StateId};

/// Windows at or below this many states are solved directly.
const DIRECT_LIMIT: usize = 600;
/// Finite chains at or below this many states are solved in exact arithmetic.
const EXACT_LIMIT: usize = 24;
const POWER_MAX_ITER: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub tolerance: f64,
    /// Largest window radius tried.
    pub max_window: i64,
    pub initial_window: i64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tolerance: 1e-10, max_window: 1 << 14, initial_window: 8 }
    }
}

/// Per-window history of a solve. Convergence and divergence calls are
/// heuristic: a Cauchy test in ℓ¹ plus the mass in the outer quarter of the window.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    pub windows: Vec<i64>,
    pub boundary_mass: Vec<f64>,
    pub l1_change: Vec<f64>,
    pub reason: String,
}

// Q restricted to a window; rows losing mass are renormalized.
struct Truncated {
    states: Vec<StateId>,
    // rows[j] = [(i, q_ji)]
    rows: Vec<Vec<(usize, f64)>>,
}

fn truncate(q: &BackwardKernel, window: IndexRange) -> Result<Truncated, ChainError> {
    let domain = q.domain();
    let states: Vec<StateId> = window.states().filter(|s| domain.contains(*s)).collect();
    let index = |s: StateId| (s.0 - states[0].0) as usize;
    let mut buf = Vec::new();
    let mut rows = Vec::with_capacity(states.len());
    for &j in &states {
        q.predecessors_into(j, &mut buf)?;
        buf.retain(|i| window.contains(*i) && domain.contains(*i));
        if buf.is_empty() {
            rows.push(vec![(index(j), 1.0)]);
        } else {
            let w = 1.0 / buf.len() as f64;
            rows.push(buf.iter().map(|&i| (index(i), w)).collect());
        }
    }
    Ok(Truncated { states, rows })
}

/// Grassmann–Taksar–Heyman elimination on a dense row-stochastic matrix.
fn gth(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for k in (1..n).rev() {
        let s: f64 = a[k][..k].iter().sum();
        if s <= 0.0 {
            return None;
        }
        for i in 0..k {
            a[i][k] /= s;
        }
        for i in 0..k {
            let aik = a[i][k];
            if aik != 0.0 {
                for j in 0..k {
                    a[i][j] += aik * a[k][j];
                }
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for j in 1..n {
        pi[j] = (0..j).map(|i| pi[i] * a[i][j]).sum();
    }
    let total: f64 = pi.iter().sum();
    Some(pi.into_iter().map(|x| x / total).collect())
}

fn gth_exact(mut a: Vec<Vec<BigRational>>) -> Option<Vec<BigRational>> {
    let n = a.len();
    for k in (1..n).rev() {
        let s = a[k][..k].iter().fold(BigRational::zero(), |acc, x| acc + x);
        if s.is_zero() {
            return None;
        }
        for row in a.iter_mut().take(k) {
            row[k] = &row[k] / &s;
        }
        for i in 0..k {
            let aik = a[i][k].clone();
            if !aik.is_zero() {
                for j in 0..k {
                    let add = &aik * &a[k][j];
                    a[i][j] += add;
                }
            }
        }
    }
    let mut pi = vec![BigRational::zero(); n];
    pi[0] = int(1);
    for j in 1..n {
        pi[j] = (0..j).fold(BigRational::zero(), |acc, i| acc + &pi[i] * &a[i][j]);
    }
    let total = pi.iter().fold(BigRational::zero(), |acc, x| acc + x);
    Some(pi.into_iter().map(|x| x / &total).collect())
}

// Lazy power iteration `π ← ½(π + πQ)`.
fn power(t: &Truncated, init: Option<Vec<f64>>, tol: f64) -> Vec<f64> {
    let n = t.states.len();
    let mut pi = init.unwrap_or_else(|| vec![1.0 / n as f64; n]);
    let mut next = vec![0.0; n];
    for _ in 0..POWER_MAX_ITER {
        next.iter_mut().zip(&pi).for_each(|(x, p)| *x = 0.5 * p);
        for (j, row) in t.rows.iter().enumerate() {
            let half = 0.5 * pi[j];
            for &(i, q) in row {
                next[i] += half * q;
            }
        }
        let total: f64 = next.iter().sum();
        let mut diff = 0.0;
        for (p, x) in pi.iter_mut().zip(&next) {
            let v = x / total;
            diff += (v - *p).abs();
            *p = v;
        }
        if diff < tol * 1e-2 {
            break;
        }
    }
    pi
}

fn dense(t: &Truncated) -> Vec<Vec<f64>> {
    let n = t.states.len();
    let mut a = vec![vec![0.0; n]; n];
    for (j, row) in t.rows.iter().enumerate() {
        for &(i, q) in row {
            a[j][i] += q;
        }
    }
    a
}

fn solve_window(t: &Truncated, init: Option<Vec<f64>>, tol: f64) -> (Vec<f64>, &'static str) {
    if t.states.len() <= DIRECT_LIMIT {
        if let Some(pi) = gth(dense(t)) {
            return (pi, "gth");
        }
    }
    (power(t, init, tol), "power_iteration")
}

fn to_vector(t: &Truncated, pi: &[f64], window: IndexRange, tol: f64, method: &'static str, tail: f64) -> StationaryVector {
    StationaryVector {
        entries: t.states.iter().copied().zip(pi.iter().copied()).collect(),
        weights: None,
        exact_normalizer: None,
        normalized: true,
        provenance: Provenance::Truncated { window: window.len() as i64, tolerance: tol, method },
        tail_mass_bound: tail,
        window,
    }
}

/// Stationary vector of `Q` truncated to `window`, renormalized rows.
pub fn solve_truncated(q: &BackwardKernel, window: IndexRange, tolerance: f64) -> Result<StationaryVector, FairError> {
    let t = truncate(q, window)?;
    let (pi, method) = solve_window(&t, None, tolerance);
    let domain = q.domain();
    let tail = boundary_mass(domain, window, &t.states, &pi);
    Ok(to_vector(&t, &pi, window, tolerance, method, tail))
}

fn boundary_mass(domain: StateDomain, window: IndexRange, states: &[StateId], pi: &[f64]) -> f64 {
    states.iter().zip(pi).filter(|(s, _)| domain.in_outer_quarter(window, **s)).map(|(_, p)| p).sum()
}

pub fn solve_stationary(q: &BackwardKernel, options: SolverOptions) -> Result<StationaryVector, FairError> {
    solve_stationary_with(q, options, None)
}

/// Solves `πQ = π`. A closed form, when supplied and verified exactly on a
/// window, is used as is; a verified non-summable closed form is a hard
/// `NoSummableSolution`.
pub fn solve_stationary_with(
    q: &BackwardKernel,
    options: SolverOptions,
    closed_form: Option<&ClosedForm>,
) -> Result<StationaryVector, FairError> {
    let domain = q.domain();
    let tol = options.tolerance;
    let mut diag = SolverDiagnostics::default();

    if let Some(form) = closed_form {
        let check = domain.window(options.initial_window.max(16));
        let candidate = StationaryVector::from_closed_form(form, domain, check);
        if verify_stationary_exact(&candidate, q, check)?.is_some_and(|r| r.is_zero()) {
            if form.normalizer().is_none() && !domain.is_finite() {
                diag.reason = "the exact stationary weights are bounded below by a positive constant, so no multiple is summable".into();
                return Err(FairError::NoSummableSolution(diag));
            }
            let mut n = options.initial_window.max(1);
            while form.tail_mass(domain.window(n)) >= tol && n < options.max_window {
                n *= 2;
            }
            return Ok(StationaryVector::from_closed_form(form, domain, domain.window(n)));
        }
        diag.reason = "supplied closed form failed exact verification; solved numerically".into();
    }

    if let Some(size) = domain.size() {
        return solve_finite(q, size, tol);
    }

    let mut n = options.initial_window.max(2);
    let mut prev: Option<StationaryVector> = None;
    loop {
        let window = domain.window(n);
        let t = truncate(q, window)?;
        let init = prev.as_ref().map(|p| t.states.iter().map(|s| p.get(*s)).collect::<Vec<_>>());
        let (pi, method) = solve_window(&t, init, tol);
        let b = boundary_mass(domain, window, &t.states, &pi);
        let current = to_vector(&t, &pi, window, tol, method, b);
        let change = prev.as_ref().map_or(f64::INFINITY, |p| l1_distance(p, &current));
        diag.windows.push(n);
        diag.boundary_mass.push(b);
        diag.l1_change.push(change);

        if change < tol && b < tol {
            diag.reason = "consecutive windows agree in l1 and boundary mass is below tolerance".into();
            return Ok(current);
        }
        let k = diag.boundary_mass.len();
        if k >= 3 {
            let m = &diag.boundary_mass[k - 3..];
            if m.iter().all(|&x| x >= 1e-3) && m[1] >= 0.8 * m[0] && m[2] >= 0.8 * m[1] {
                diag.reason = format!(
                    "boundary mass does not decay across windows {:?}: {:?}",
                    &diag.windows[k - 3..],
                    m
                );
                return Err(FairError::NoSummableSolution(diag));
            }
        }
        if n * 2 > options.max_window {
            diag.reason = format!("reached max window {}", options.max_window);
            return Err(FairError::WindowExhausted(diag));
        }
        prev = Some(current);
        n *= 2;
    }
}

fn solve_finite(q: &BackwardKernel, size: usize, tol: f64) -> Result<StationaryVector, FairError> {
    let rules = q.rules();
    let irr = rules.check_irreducible(size as i64);
    if let Some((a, b)) = irr.witness {
        return Err(FairError::Reducible(a, b));
    }
    let window = rules.window(size as i64);
    if size <= EXACT_LIMIT {
        let states: Vec<StateId> = window.states().collect();
        let mut a = vec![vec![BigRational::zero(); size]; size];
        for (jx, &j) in states.iter().enumerate() {
            for (i, v) in q.row_exact(j)? {
                a[jx][(i.0 - window.lo) as usize] += v;
            }
        }
        if let Some(pi) = gth_exact(a) {
            return Ok(StationaryVector::from_exact(states.into_iter().zip(pi).collect(), window));
        }
    }
    let t = truncate(q, window)?;
    let (pi, method) = solve_window(&t, None, tol);
    Ok(to_vector(&t, &pi, window, tol, method, 0.0))
}

fn l1_distance(a: &StationaryVector, b: &StationaryVector) -> f64 {
    let mut keys: Vec<&StateId> = a.entries.keys().chain(b.entries.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter().map(|s| (a.get(*s) - b.get(*s)).abs()).sum()
}

// States whose full row lies inside the window.
fn interior(q: &BackwardKernel, window: IndexRange) -> Result<Vec<(StateId, Vec<StateId>)>, ChainError> {
    let domain = q.domain();
    let mut out = Vec::new();
    for i in window.states().filter(|s| domain.contains(*s)) {
        let row = q.rules().row(i)?;
        if row.is_finite() && row.targets.iter().all(|j| window.contains(*j)) {
            out.push((i, row.targets));
        }
    }
    Ok(out)
}

/// `‖πQ − π‖₁` over states whose whole row lies inside `window`.
pub fn verify_stationary(pi: &StationaryVector, q: &BackwardKernel, window: IndexRange) -> Result<f64, FairError> {
    let mut residual = 0.0;
    for (i, succ) in interior(q, window)? {
        let mut lhs = 0.0;
        for j in succ {
            lhs += pi.get(j) / q.column(j)? as f64;
        }
        residual += (lhs - pi.get(i)).abs();
    }
    Ok(residual)
}

/// Exact interior residual from the exact weights; `None` without them.
/// Unnormalized weights give the residual of the weights themselves.
pub fn verify_stationary_exact(
    pi: &StationaryVector,
    q: &BackwardKernel,
    window: IndexRange,
) -> Result<Option<BigRational>, FairError> {
    let Some(weights) = &pi.weights else { return Ok(None) };
    let scale = pi.exact_normalizer.clone().unwrap_or_else(|| int(1));
    let zero = BigRational::zero();
    let w = |s: StateId| weights.get(&s).unwrap_or(&zero).clone() / &scale;
    let mut residual = BigRational::zero();
    for (i, succ) in interior(q, window)? {
        let mut lhs = BigRational::zero();
        for j in succ {
            lhs += w(j) / int(q.column(j)? as i64);
        }
        residual += (lhs - w(i)).abs();
    }
    Ok(Some(residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;
    use crate::chain::TransitionRuleSet;
    use crate::exact::rat;

    fn kernel(m: TransitionRuleSet) -> BackwardKernel {
        BackwardKernel::new(m).unwrap()
    }

    #[test]
    fn origin_broadcast_numeric() {
        let q = kernel(builtins::origin_broadcast());
        let pi = solve_stationary(&q, SolverOptions::default()).unwrap();
        let err: f64 = (0..64).map(|i| (pi.get(StateId(i)) - 0.5f64.powi(i as i32 + 1)).abs()).sum();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn bruin_todd_numeric() {
        let q = kernel(builtins::bruin_todd());
        let pi = solve_stationary(&q, SolverOptions::default()).unwrap();
        let mut fact = 1.0;
        for j in 1..30 {
            if j > 1 {
                fact *= (j - 1) as f64;
            }
            let expect = (-1.0f64).exp() / fact;
            assert!((pi.get(StateId(j)) - expect).abs() < 1e-10, "state {j}");
        }
    }

    #[test]
    fn unbiased_walk_has_no_summable_solution() {
        let q = kernel(builtins::unbiased_walk());
        assert!(matches!(solve_stationary(&q, SolverOptions::default()), Err(FairError::NoSummableSolution(_))));
    }

    #[test]
    fn small_max_window_is_inconclusive() {
        let q = kernel(builtins::bruin_todd());
        let opts = SolverOptions { max_window: 4, initial_window: 2, ..Default::default() };
        assert!(matches!(solve_stationary(&q, opts), Err(FairError::WindowExhausted(_))));
    }

    #[test]
    fn five_three_closed_form_is_not_summable() {
        let b = builtins::by_name("five-three").unwrap();
        let q = kernel(b.rules);
        let r = solve_stationary_with(&q, SolverOptions::default(), b.closed_form.as_ref());
        assert!(matches!(r, Err(FairError::NoSummableSolution(_))));
        assert!(matches!(solve_stationary(&q, SolverOptions::default()), Err(FairError::NoSummableSolution(_))));
    }

    #[test]
    fn five_three_periodic_vector_has_zero_interior_residual() {
        let m = builtins::five_three();
        let q = kernel(m);
        let window = IndexRange::new(-20, 20);
        let v = StationaryVector::from_closed_form(&ClosedForm::Periodic { values: vec![5, 3] }, q.domain(), window);
        assert_eq!(verify_stationary_exact(&v, &q, window).unwrap(), Some(BigRational::zero()));
        assert_eq!(verify_stationary(&v, &q, window).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_origin_broadcast_residual_is_exactly_zero() {
        let q = kernel(builtins::origin_broadcast());
        let window = IndexRange::new(0, 30);
        let v = StationaryVector::from_closed_form(&ClosedForm::HalfPowers { min: 0 }, q.domain(), window);
        assert_eq!(verify_stationary_exact(&v, &q, window).unwrap(), Some(BigRational::zero()));
    }

    #[test]
    fn non_stationary_vector_has_positive_residual() {
        let q = kernel(builtins::cycle(3));
        let window = IndexRange::new(0, 2);
        let pi = [(StateId(0), rat(1, 2)), (StateId(1), rat(1, 2)), (StateId(2), rat(0, 1))].into_iter().collect();
        let v = StationaryVector::from_exact(pi, window);
        assert!(verify_stationary(&v, &q, window).unwrap() > 0.0);
    }

    #[test]
    fn finite_exact_solution() {
        let m = TransitionRuleSet::from_rows("m", &[vec![0, 1], vec![0]]).unwrap();
        let pi = solve_stationary(&kernel(m), SolverOptions::default()).unwrap();
        // c_0 = 2, c_1 = 1: π_0 = π_0/2 + π_1, π_1 = π_0/2.
        assert_eq!(pi.exact(StateId(0)), Some(rat(2, 3)));
        assert_eq!(pi.exact(StateId(1)), Some(rat(1, 3)));
    }

    #[test]
    fn reducible_finite_chain_is_reported() {
        let m = TransitionRuleSet::from_rows("id", &[vec![0], vec![1]]).unwrap();
        assert!(matches!(solve_stationary(&kernel(m), SolverOptions::default()), Err(FairError::Reducible(..))));
    }

    #[test]
    fn window_schedules_agree() {
        for m in [builtins::origin_broadcast(), builtins::bruin_todd()] {
            let q = kernel(m);
            let a = solve_stationary(&q, SolverOptions { initial_window: 8, ..Default::default() }).unwrap();
            let b = solve_stationary(&q, SolverOptions { initial_window: 12, ..Default::default() }).unwrap();
            assert!(l1_distance(&a, &b) < 1e-9);
        }
    }

    #[test]
    fn gth_matches_power_iteration() {
        let q = kernel(builtins::bruin_todd());
        let t = truncate(&q, IndexRange::new(1, 20)).unwrap();
        let a = gth(dense(&t)).unwrap();
        let b = power(&t, None, 1e-14);
        let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        assert!(d < 1e-10, "{d}");
    }
}
