//! Stationary vectors of the backward kernel, the forward matrix, and the
//! Markov fair measure built from them.

mod atoms;
mod classes;
mod measure;
mod solver;
mod verdict;

use std::collections::BTreeMap;

use num_rational::BigRational;
use serde::Serialize;
use thiserror::Error;

use crate::chain::ChainError;
use crate::exact::{int, pow, rat, to_f64};
use crate::state::{IndexRange, StateDomain, StateId};

pub use atoms::{find_atomic_fair_measures, AtomicOrbit};
pub use classes::{analyze_classes, ClassReport};
pub use measure::{
    build_forward_matrix, check_fair_on_cylinders, cylinder_measure, cylinder_measure_exact, fair_entropy,
    integral_log_c, EntropyEstimate, FairMeasure, FairnessCheck, ForwardMatrix,
};
pub use solver::{
    solve_stationary, solve_stationary_with, solve_truncated, verify_stationary, verify_stationary_exact,
    SolverDiagnostics, SolverOptions,
};
pub use verdict::{fair_measure_verdict, FairVerdict};

#[derive(Debug, Error, Clone)]
pub enum FairError {
    #[error("no summable stationary vector: {}", .0.reason)]
    NoSummableSolution(SolverDiagnostics),
    #[error("window exhausted without convergence or divergence evidence: {}", .0.reason)]
    WindowExhausted(SolverDiagnostics),
    #[error("zero stationary mass at state {0}")]
    ZeroMass(StateId),
    #[error("entropy partial sums diverge")]
    EntropyDiverges,
    #[error("matrix is reducible on the window: no path from {0} to {1}")]
    Reducible(StateId, StateId),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// Stationary vectors known in closed form. Weights are exact and need not be
/// normalized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ClosedForm {
    /// `w_i = 2^-(i - min + 1)`.
    HalfPowers { min: i64 },
    /// `w_j = 1 / (j - min)!`, normalizer `e`.
    InverseFactorial { min: i64 },
    /// `w_i = 1` on `min..min + count`.
    Uniform { min: i64, count: i64 },
    /// `w_i = values[i mod len]` on ℤ; never summable.
    Periodic { values: Vec<i64> },
}

impl ClosedForm {
    pub fn weight(&self, i: StateId) -> BigRational {
        match self {
            ClosedForm::HalfPowers { min } => pow(&rat(1, 2), (i.0 - min + 1) as u32),
            ClosedForm::InverseFactorial { min } => {
                BigRational::new(1.into(), crate::exact::factorial((i.0 - min) as u64))
            }
            ClosedForm::Uniform { .. } => int(1),
            ClosedForm::Periodic { values } => int(values[i.0.rem_euclid(values.len() as i64) as usize]),
        }
    }

    /// `Σ w_i`, `None` when the weights are not summable.
    pub fn normalizer(&self) -> Option<f64> {
        match self {
            ClosedForm::HalfPowers { .. } => Some(1.0),
            ClosedForm::InverseFactorial { .. } => Some(std::f64::consts::E),
            ClosedForm::Uniform { count, .. } => Some(*count as f64),
            ClosedForm::Periodic { .. } => None,
        }
    }

    /// `Σ w_i` when it is rational.
    pub fn normalizer_exact(&self) -> Option<BigRational> {
        match self {
            ClosedForm::HalfPowers { .. } => Some(int(1)),
            ClosedForm::Uniform { count, .. } => Some(int(*count)),
            _ => None,
        }
    }

    /// Normalized mass outside `window`.
    pub fn tail_mass(&self, window: IndexRange) -> f64 {
        match self {
            ClosedForm::HalfPowers { min } => 0.5f64.powi((window.hi - min + 1) as i32),
            ClosedForm::InverseFactorial { min } => {
                let mut term = 1.0;
                let mut tail = 0.0;
                for k in 1..(window.hi - min + 40) {
                    term /= k as f64;
                    if k > window.hi - min {
                        tail += term;
                    }
                }
                tail / std::f64::consts::E
            }
            ClosedForm::Uniform { min, count } => {
                if window.lo <= *min && window.hi >= min + count - 1 {
                    0.0
                } else {
                    1.0
                }
            }
            ClosedForm::Periodic { .. } => f64::INFINITY,
        }
    }
}

/// How a stationary vector was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm { form: ClosedForm },
    ExactFinite,
    Truncated { window: i64, tolerance: f64, method: &'static str },
}

/// A solution of `πQ = π` restricted to a window.
///
/// `entries` are probabilities when `normalized`, raw weights otherwise.
/// `weights`, when present, are exact and proportional to `entries`; dividing
/// them by `exact_normalizer` gives π exactly.
#[derive(Debug, Clone, Serialize)]
pub struct StationaryVector {
    pub entries: BTreeMap<StateId, f64>,
    #[serde(skip)]
    pub weights: Option<BTreeMap<StateId, BigRational>>,
    #[serde(skip)]
    pub exact_normalizer: Option<BigRational>,
    pub normalized: bool,
    pub provenance: Provenance,
    pub tail_mass_bound: f64,
    pub window: IndexRange,
}

impl StationaryVector {
    /// The closed form restricted to `window`.
    pub fn from_closed_form(form: &ClosedForm, domain: StateDomain, window: IndexRange) -> Self {
        let weights: BTreeMap<StateId, BigRational> =
            window.states().filter(|s| domain.contains(*s)).map(|s| (s, form.weight(s))).collect();
        let (entries, normalized) = match form.normalizer() {
            Some(z) => (weights.iter().map(|(s, w)| (*s, to_f64(w) / z)).collect(), true),
            None => (weights.iter().map(|(s, w)| (*s, to_f64(w))).collect(), false),
        };
        StationaryVector {
            entries,
            weights: Some(weights),
            exact_normalizer: form.normalizer_exact(),
            normalized,
            provenance: Provenance::ClosedForm { form: form.clone() },
            tail_mass_bound: form.tail_mass(window),
            window,
        }
    }

    /// An exact probability vector.
    pub fn from_exact(pi: BTreeMap<StateId, BigRational>, window: IndexRange) -> Self {
        StationaryVector {
            entries: pi.iter().map(|(s, v)| (*s, to_f64(v))).collect(),
            weights: Some(pi),
            exact_normalizer: Some(int(1)),
            normalized: true,
            provenance: Provenance::ExactFinite,
            tail_mass_bound: 0.0,
            window,
        }
    }

    pub fn get(&self, i: StateId) -> f64 {
        self.entries.get(&i).copied().unwrap_or(0.0)
    }

    /// Exact `π_i`, when known.
    pub fn exact(&self, i: StateId) -> Option<BigRational> {
        let w = self.weights.as_ref()?.get(&i)?;
        Some(w / self.exact_normalizer.as_ref()?)
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }
}
