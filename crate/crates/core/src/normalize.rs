//! Single-loop normalization.
//!
//! Every edge entering one of the original loop heads `h_j` is redirected
//! through a fresh dispatch head `H`: the edge first sets `pc := j`, then
//! control reaches `H`, which branches on `pc == j` to `h_j`. Straight-line
//! code before the first loop stays in front of `H`.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::cfa::{Cfa, Edge, Loc, Op};
use crate::expr::{BinOp, Expr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalizeError {
    #[error("unsupported program: irreducible control flow")]
    Irreducible,
    #[error("unsupported program: normalization left {0} loop heads")]
    MultipleHeads(usize),
}

/// A CFA with at most one loop head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedCfa {
    pub cfa: Cfa,
    /// The single loop head; the entry location for loop-free programs.
    pub loop_head: Loc,
    /// Name of the dispatch variable.
    pub pc_var: String,
    /// Whether `pc_var` occurs in the CFA (only when several loops were fused).
    pub pc_used: bool,
    /// Number of fused loops; `pc_var` ranges over `1..=num_loops`.
    pub num_loops: usize,
    /// Edges whose target is `loop_head` and whose source it dominates.
    pub back_edges: BTreeSet<usize>,
}

impl NormalizedCfa {
    pub fn has_loop(&self) -> bool {
        !self.back_edges.is_empty()
    }

    /// Locations reachable from the loop head without passing through it
    /// again (the loop body together with everything after the loop).
    pub fn loop_region(&self) -> BTreeSet<Loc> {
        let mut seen = BTreeSet::from([self.loop_head]);
        let mut stack = vec![self.loop_head];
        while let Some(l) = stack.pop() {
            for &e in self.cfa.out_edges(l) {
                let d = self.cfa.edge(e).dst;
                if d != self.loop_head && seen.insert(d) {
                    stack.push(d);
                }
            }
        }
        seen
    }

    /// Locations on some cycle through the loop head.
    pub fn loop_body(&self) -> BTreeSet<Loc> {
        if !self.has_loop() {
            return BTreeSet::new();
        }
        // backwards from the back-edge sources, staying inside the region
        let region = self.loop_region();
        let mut body = BTreeSet::from([self.loop_head]);
        let mut stack: Vec<Loc> = self
            .back_edges
            .iter()
            .map(|&e| self.cfa.edge(e).src)
            .collect();
        while let Some(l) = stack.pop() {
            if !region.contains(&l) || !body.insert(l) {
                continue;
            }
            for &e in self.cfa.in_edges(l) {
                stack.push(self.cfa.edge(e).src);
            }
        }
        body
    }

    /// Non-synthetic variables written on any edge inside the loop.
    pub fn loop_modified_vars(&self) -> BTreeSet<String> {
        let body = self.loop_body();
        self.cfa
            .edges()
            .iter()
            .filter(|e| body.contains(&e.src) && body.contains(&e.dst))
            .filter_map(|e| e.op.written_var())
            .filter(|v| !self.cfa.is_synthetic(v))
            .map(str::to_string)
            .collect()
    }

    /// Variables read by assume edges leaving the loop, not counting edges
    /// straight into the error location.
    pub fn termination_condition_vars(&self) -> BTreeSet<String> {
        let body = self.loop_body();
        let mut out = BTreeSet::new();
        for e in self.cfa.edges() {
            if let Op::Assume(c) = &e.op {
                if body.contains(&e.src) && !body.contains(&e.dst) && e.dst != self.cfa.error() {
                    out.extend(c.vars());
                }
            }
        }
        out
    }

    /// Variables that carry state across loop iterations: every variable
    /// except the expression temporaries, which are dead at the loop head.
    pub fn state_vars(&self) -> Vec<String> {
        self.cfa
            .vars()
            .iter()
            .filter(|v| !self.cfa.is_synthetic(v))
            .cloned()
            .collect()
    }
}

fn fresh_pc_name(cfa: &Cfa) -> String {
    let mut name = "__pc".to_string();
    while cfa.vars().contains(&name) {
        name.push('_');
    }
    name
}

/// Fuses all loops of a reducible CFA into one.
pub fn to_single_loop(cfa: &Cfa) -> Result<NormalizedCfa, NormalizeError> {
    if !cfa.is_reducible() {
        return Err(NormalizeError::Irreducible);
    }
    let pc_var = fresh_pc_name(cfa);
    let heads = cfa.loop_heads();
    if heads.len() <= 1 {
        let loop_head = heads.first().copied().unwrap_or(cfa.entry());
        let back_edges = cfa
            .back_edges()
            .into_iter()
            .filter(|&e| cfa.edge(e).dst == loop_head)
            .collect();
        return Ok(NormalizedCfa {
            cfa: cfa.clone(),
            loop_head,
            pc_var,
            pc_used: false,
            num_loops: heads.len(),
            back_edges,
        });
    }

    let mut next = cfa.num_locations();
    let mut fresh = || {
        let l = Loc(next);
        next += 1;
        l
    };
    let head = fresh();
    let mut edges = Vec::new();
    for e in cfa.edges() {
        match heads.iter().position(|h| *h == e.dst) {
            Some(j) => {
                let t = fresh();
                edges.push(Edge {
                    src: e.src,
                    op: e.op.clone(),
                    dst: t,
                });
                edges.push(Edge {
                    src: t,
                    op: Op::Assign(pc_var.clone(), Expr::Const(j as i64 + 1)),
                    dst: head,
                });
            }
            None => edges.push(e.clone()),
        }
    }
    for (j, h) in heads.iter().enumerate() {
        let guard = Expr::binary(BinOp::Eq, Expr::var(&pc_var), Expr::Const(j as i64 + 1));
        edges.push(Edge {
            src: head,
            op: Op::Assume(guard),
            dst: *h,
        });
    }
    let mut vars = cfa.vars().to_vec();
    vars.push(pc_var.clone());
    let out = Cfa::new(
        next,
        cfa.entry(),
        cfa.error(),
        edges,
        vars,
        cfa.synthetic_vars().clone(),
    );
    let out_heads = out.loop_heads();
    if out_heads != [head] {
        return Err(NormalizeError::MultipleHeads(out_heads.len()));
    }
    let back_edges = out.back_edges().into_iter().collect();
    Ok(NormalizedCfa {
        cfa: out,
        loop_head: head,
        pc_var,
        pc_used: true,
        num_loops: heads.len(),
        back_edges,
    })
}
