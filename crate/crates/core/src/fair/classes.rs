use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use super::{integral_log_c, solve_stationary, FairError, FairMeasure, SolverOptions};
use crate::chain::{BackwardKernel, TransitionRuleSet};
use crate::state::StateId;

/// One strongly connected class of a finite matrix. Only classes receiving no
/// edges from outside carry fair measures.
#[derive(Debug, Clone, Serialize)]
pub struct ClassReport {
    pub states: Vec<StateId>,
    pub admits_fair_measure: bool,
    pub fair_entropy: Option<f64>,
}

/// Per-class fair entropies of a finite, possibly reducible matrix.
pub fn analyze_classes(m: &TransitionRuleSet) -> Result<Vec<ClassReport>, FairError> {
    let size = m.domain().size().ok_or_else(|| {
        FairError::Chain(crate::chain::ChainError::InvalidRule("class analysis needs a finite domain".into()))
    })?;
    let window = m.window(size as i64);
    let states: Vec<StateId> = window.states().collect();
    let mut g = DiGraph::<StateId, ()>::with_capacity(size, 0);
    let nodes: Vec<_> = states.iter().map(|s| g.add_node(*s)).collect();
    for (a, &i) in states.iter().enumerate() {
        for j in m.row(i)?.within(window) {
            g.add_edge(nodes[a], nodes[(j.0 - window.lo) as usize], ());
        }
    }
    let mut reports = Vec::new();
    for comp in tarjan_scc(&g) {
        let mut members: Vec<StateId> = comp.iter().map(|n| g[*n]).collect();
        members.sort();
        let nontrivial = members.len() > 1 || m.has_edge(members[0], members[0])?;
        if !nontrivial {
            continue;
        }
        let mut closed = true;
        for &j in &members {
            if m.predecessors(j)?.iter().any(|i| members.binary_search(i).is_err()) {
                closed = false;
                break;
            }
        }
        let fair_entropy = if closed { Some(class_entropy(m, &members)?) } else { None };
        reports.push(ClassReport { states: members, admits_fair_measure: closed, fair_entropy });
    }
    reports.sort_by(|a, b| a.states.cmp(&b.states));
    Ok(reports)
}

fn class_entropy(m: &TransitionRuleSet, members: &[StateId]) -> Result<f64, FairError> {
    let local = |s: &StateId| members.binary_search(s).ok().map(|k| k as i64);
    let rows: Vec<Vec<i64>> = members
        .iter()
        .map(|&i| Ok(m.row(i)?.targets.iter().filter_map(local).collect()))
        .collect::<Result<_, FairError>>()?;
    let sub = TransitionRuleSet::from_rows(format!("{}:class", m.name()), &rows)?;
    let q = BackwardKernel::new(sub)?;
    let pi = solve_stationary(&q, SolverOptions::default())?;
    let window = pi.window;
    let mu = FairMeasure::new(pi, &q)?;
    Ok(integral_log_c(&mu, &q, window)?.value)
}
