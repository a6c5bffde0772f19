//! The interval-expression abstract domain.

mod interval;
mod state;
mod symexpr;

pub use interval::{Bound, Interval, IntervalSet, MAX_DISJUNCTS};
pub use state::{
    contains_concrete, differ, merge, stop, transfer, union_states, widen_states, AbstractState,
    Precision,
};
pub use symexpr::{apply, SymExpr, SymOp};
