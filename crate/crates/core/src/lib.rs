//! kindle: a k-induction model checker for a small imperative language,
//! strengthened by invariants from an interval-expression abstract
//! interpreter.

pub mod cfa;
pub mod corpus;
pub mod cpa;
pub mod domain;
pub mod encode;
pub mod expr;
pub mod formula;
pub mod harness;
pub mod interp;
pub mod invgen;
pub mod kinduction;
pub mod lang;
pub mod normalize;
pub mod programs;
pub mod smt;
