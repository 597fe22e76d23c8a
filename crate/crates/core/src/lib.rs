//! Fair measures for countable-state Markov shifts and the interval and graph
//! maps that code them.
//!
//! A 0-1 matrix `M` over integer states defines column counts `c_j` and the
//! backward kernel `q_ji = m_ij / c_j`. When `πQ = π` has a summable solution,
//! `p_ij = π_j q_ji / π_i` defines the unique fair measure `Markov(π, P)`.

pub mod backward;
pub mod builtins;
pub mod chain;
pub mod exact;
pub mod fair;
pub mod graph;
pub mod interval;
pub mod recurrence;
pub mod state;

pub use backward::{sample_backward, BackwardPath};
pub use chain::{BackwardKernel, ChainError, ColumnCount, TransitionRuleSet};
pub use fair::{FairError, FairMeasure, StationaryVector};
pub use graph::{GraphError, TameGraphMapSpec};
pub use interval::{IntervalError, MarkovIntervalMap, PiecewiseAffineMap};
pub use recurrence::{classify, RecurrenceClass, RecurrenceError};
pub use state::{IndexRange, StateDomain, StateId};
