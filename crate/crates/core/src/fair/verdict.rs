use serde::Serialize;

use super::{
    analyze_classes, find_atomic_fair_measures, solve_stationary_with, AtomicOrbit, ClassReport, ClosedForm, FairError,
    SolverOptions, StationaryVector,
};
use crate::chain::{BackwardKernel, ChainError, TransitionRuleSet};

/// Whether a matrix carries a fair measure, and of which kind.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum FairVerdict {
    /// `Q` has a summable stationary vector; `Markov(π, P)` is the fair measure.
    PositiveRecurrent { tail_mass_bound: f64 },
    /// Only atoms on totally invariant periodic orbits are fair.
    AtomicOnly { orbits: Vec<AtomicOrbit> },
    /// A finite reducible matrix; fair measures live on the closed classes.
    Reducible { classes: Vec<ClassReport> },
    NoFairMeasure { reason: String },
    /// The evidence was inconclusive within the window budget.
    Unknown { reason: String },
}

/// Decides the fair-measure verdict, returning π when it exists.
pub fn fair_measure_verdict(
    m: &TransitionRuleSet,
    options: SolverOptions,
    closed_form: Option<&ClosedForm>,
    max_period: usize,
) -> Result<(FairVerdict, Option<StationaryVector>), FairError> {
    let q = match BackwardKernel::new(m.clone()) {
        Ok(q) => q,
        Err(ChainError::InfinitePreimages(j)) => {
            let reason = format!("state {j} has infinitely many preimages, so no invariant measure can split fairly");
            return Ok((FairVerdict::NoFairMeasure { reason }, None));
        }
        Err(e) => return Err(e.into()),
    };
    let atoms = || find_atomic_fair_measures(m, max_period, m.declared_window().max(max_period as i64));
    match solve_stationary_with(&q, options, closed_form) {
        Ok(pi) => Ok((FairVerdict::PositiveRecurrent { tail_mass_bound: pi.tail_mass_bound }, Some(pi))),
        Err(FairError::NoSummableSolution(d)) => {
            let orbits = atoms()?;
            if orbits.is_empty() {
                let reason = format!("no summable stationary vector ({}) and no totally invariant periodic orbit", d.reason);
                Ok((FairVerdict::NoFairMeasure { reason }, None))
            } else {
                Ok((FairVerdict::AtomicOnly { orbits }, None))
            }
        }
        Err(FairError::Reducible(..)) if m.domain().is_finite() => {
            Ok((FairVerdict::Reducible { classes: analyze_classes(m)? }, None))
        }
        Err(FairError::WindowExhausted(d)) => Ok((FairVerdict::Unknown { reason: d.reason }, None)),
        Err(e) => Err(e),
    }
}
