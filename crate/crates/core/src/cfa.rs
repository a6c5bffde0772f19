//! Control-flow automata and the lowering from the AST.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use crate::expr::{BinOp, Expr, UnOp};
use crate::lang::{Ast, AstExpr, Stmt, StmtKind};

/// Opaque program location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Loc(pub usize);

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Op {
    /// Continue only if the expression evaluates to a non-zero value.
    Assume(Expr),
    Assign(String, Expr),
    /// Nondeterministic input.
    Havoc(String),
}

impl Op {
    pub fn skip() -> Op {
        Op::Assume(Expr::Const(1))
    }

    pub fn is_assume(&self) -> bool {
        matches!(self, Op::Assume(_))
    }

    /// Variable written by the operation, if any.
    pub fn written_var(&self) -> Option<&str> {
        match self {
            Op::Assume(_) => None,
            Op::Assign(v, _) | Op::Havoc(v) => Some(v),
        }
    }

    pub fn read_vars(&self) -> Vec<String> {
        match self {
            Op::Assume(e) | Op::Assign(_, e) => e.vars_in_order(),
            Op::Havoc(_) => Vec::new(),
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::Assume(e) => write!(f, "assume({e})"),
            Op::Assign(v, e) => write!(f, "{v} := {e}"),
            Op::Havoc(v) => write!(f, "havoc({v})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edge {
    pub src: Loc,
    pub op: Op,
    pub dst: Loc,
}

/// A control-flow automaton `(L, l0, l_err, G, X)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfa {
    num_locations: usize,
    entry: Loc,
    error: Loc,
    edges: Vec<Edge>,
    vars: Vec<String>,
    synthetic: BTreeSet<String>,
    out: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
}

impl Cfa {
    /// Builds a CFA; `synthetic` names the temporaries introduced for
    /// `nondet()` calls inside expressions (a subset of `vars`).
    pub fn new(
        num_locations: usize,
        entry: Loc,
        error: Loc,
        edges: Vec<Edge>,
        vars: Vec<String>,
        synthetic: BTreeSet<String>,
    ) -> Cfa {
        let mut out = vec![Vec::new(); num_locations];
        let mut incoming = vec![Vec::new(); num_locations];
        for (i, e) in edges.iter().enumerate() {
            out[e.src.0].push(i);
            incoming[e.dst.0].push(i);
        }
        Cfa {
            num_locations,
            entry,
            error,
            edges,
            vars,
            synthetic,
            out,
            incoming,
        }
    }

    pub fn num_locations(&self) -> usize {
        self.num_locations
    }

    pub fn locations(&self) -> impl Iterator<Item = Loc> {
        (0..self.num_locations).map(Loc)
    }

    pub fn entry(&self) -> Loc {
        self.entry
    }

    pub fn error(&self) -> Loc {
        self.error
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, idx: usize) -> &Edge {
        &self.edges[idx]
    }

    pub fn out_edges(&self, loc: Loc) -> &[usize] {
        &self.out[loc.0]
    }

    pub fn in_edges(&self, loc: Loc) -> &[usize] {
        &self.incoming[loc.0]
    }

    /// Program variables `X`, declared ones first, in a fixed order.
    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    pub fn synthetic_vars(&self) -> &BTreeSet<String> {
        &self.synthetic
    }

    pub fn is_synthetic(&self, var: &str) -> bool {
        self.synthetic.contains(var)
    }

    /// Locations reachable from the entry.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.num_locations];
        let mut queue = VecDeque::from([self.entry]);
        seen[self.entry.0] = true;
        while let Some(l) = queue.pop_front() {
            for &e in self.out_edges(l) {
                let d = self.edges[e].dst;
                if !seen[d.0] {
                    seen[d.0] = true;
                    queue.push_back(d);
                }
            }
        }
        seen
    }

    /// Dominator sets over the reachable part (`dom[l][m]`: m dominates l).
    pub fn dominators(&self) -> Vec<Vec<bool>> {
        let n = self.num_locations;
        let reach = self.reachable();
        let mut dom: Vec<Vec<bool>> = (0..n)
            .map(|l| {
                if l == self.entry.0 {
                    (0..n).map(|m| m == l).collect()
                } else {
                    reach.clone()
                }
            })
            .collect();
        let order = self.reverse_postorder();
        let mut changed = true;
        while changed {
            changed = false;
            for &l in &order {
                if l == self.entry {
                    continue;
                }
                let mut new: Vec<bool> = reach.clone();
                let mut any = false;
                for &e in self.in_edges(l) {
                    let p = self.edges[e].src;
                    if !reach[p.0] {
                        continue;
                    }
                    any = true;
                    for m in 0..n {
                        new[m] = new[m] && dom[p.0][m];
                    }
                }
                if !any {
                    new = vec![false; n];
                }
                new[l.0] = true;
                if new != dom[l.0] {
                    dom[l.0] = new;
                    changed = true;
                }
            }
        }
        dom
    }

    fn reverse_postorder(&self) -> Vec<Loc> {
        let mut seen = vec![false; self.num_locations];
        let mut post = Vec::new();
        // iterative DFS with explicit edge cursor
        let mut stack: Vec<(Loc, usize)> = vec![(self.entry, 0)];
        seen[self.entry.0] = true;
        while let Some((l, i)) = stack.pop() {
            let outs = self.out_edges(l);
            if i < outs.len() {
                stack.push((l, i + 1));
                let d = self.edges[outs[i]].dst;
                if !seen[d.0] {
                    seen[d.0] = true;
                    stack.push((d, 0));
                }
            } else {
                post.push(l);
            }
        }
        post.reverse();
        post
    }

    /// Indices of edges whose target dominates their source.
    pub fn back_edges(&self) -> Vec<usize> {
        let dom = self.dominators();
        let reach = self.reachable();
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| reach[e.src.0] && dom[e.src.0][e.dst.0])
            .map(|(i, _)| i)
            .collect()
    }

    /// Targets of back edges, sorted.
    pub fn loop_heads(&self) -> Vec<Loc> {
        let heads: BTreeSet<Loc> = self
            .back_edges()
            .into_iter()
            .map(|e| self.edges[e].dst)
            .collect();
        heads.into_iter().collect()
    }

    /// A CFA is reducible iff removing its back edges leaves the reachable
    /// part acyclic.
    pub fn is_reducible(&self) -> bool {
        let back: BTreeSet<usize> = self.back_edges().into_iter().collect();
        let reach = self.reachable();
        let mut indeg = vec![0usize; self.num_locations];
        for (i, e) in self.edges.iter().enumerate() {
            if reach[e.src.0] && !back.contains(&i) {
                indeg[e.dst.0] += 1;
            }
        }
        let mut queue: VecDeque<Loc> = self
            .locations()
            .filter(|l| reach[l.0] && indeg[l.0] == 0)
            .collect();
        let mut visited = 0;
        while let Some(l) = queue.pop_front() {
            visited += 1;
            for &e in self.out_edges(l) {
                if back.contains(&e) {
                    continue;
                }
                let d = self.edges[e].dst;
                indeg[d.0] -= 1;
                if indeg[d.0] == 0 {
                    queue.push_back(d);
                }
            }
        }
        visited == reach.iter().filter(|r| **r).count()
    }

    /// Text dump, one edge per line as `src --op--> dst`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for e in &self.edges {
            s.push_str(&format!("{} --{}--> {}\n", e.src, e.op, e.dst));
        }
        s
    }
}

/// Lowers a parsed program into a CFA.
///
/// Location 0 is the entry and location 1 the error location; the remaining
/// locations are numbered in lowering order.
pub fn build_cfa(ast: &Ast) -> Cfa {
    let mut lw = Lowerer {
        next: 2,
        edges: Vec::new(),
        temps: Vec::new(),
    };
    let entry = Loc(0);
    lw.stmts(&ast.statements, entry);
    let mut vars = ast.var_names();
    vars.extend(lw.temps.iter().cloned());
    let synthetic = lw.temps.into_iter().collect();
    Cfa::new(lw.next, entry, ERROR_LOC, lw.edges, vars, synthetic)
}

const ERROR_LOC: Loc = Loc(1);

struct Lowerer {
    next: usize,
    edges: Vec<Edge>,
    temps: Vec<String>,
}

impl Lowerer {
    fn fresh(&mut self) -> Loc {
        let l = Loc(self.next);
        self.next += 1;
        l
    }

    fn edge(&mut self, src: Loc, op: Op, dst: Loc) {
        self.edges.push(Edge { src, op, dst });
    }

    fn stmts(&mut self, stmts: &[Stmt], mut cur: Loc) -> Loc {
        for s in stmts {
            cur = self.stmt(s, cur);
        }
        cur
    }

    /// Replaces every `nondet()` by a fresh temporary, emitting the havoc
    /// edges starting at `cur`.
    fn hoist(&mut self, e: &AstExpr, cur: &mut Loc) -> Expr {
        match e {
            AstExpr::Const(c) => Expr::Const(*c),
            AstExpr::Var(v) => Expr::Var(v.clone()),
            AstExpr::Nondet => {
                let t = format!("__nd{}", self.temps.len());
                self.temps.push(t.clone());
                let next = self.fresh();
                self.edge(*cur, Op::Havoc(t.clone()), next);
                *cur = next;
                Expr::Var(t)
            }
            AstExpr::Unary(op, inner) => Expr::unary(*op, self.hoist(inner, cur)),
            AstExpr::Binary(op, l, r) => {
                let l = self.hoist(l, cur);
                let r = self.hoist(r, cur);
                Expr::binary(*op, l, r)
            }
        }
    }

    /// Branches on `cond` from `from` to `on_true` / `on_false`, splitting
    /// `&&`, `||` and `!` into nested assume edges.
    fn cond(&mut self, cond: &Expr, from: Loc, on_true: Loc, on_false: Loc) {
        match cond {
            Expr::Binary(BinOp::And, a, b) => {
                let mid = self.fresh();
                self.cond(a, from, mid, on_false);
                self.cond(b, mid, on_true, on_false);
            }
            Expr::Binary(BinOp::Or, a, b) => {
                let mid = self.fresh();
                self.cond(a, from, on_true, mid);
                self.cond(b, mid, on_true, on_false);
            }
            Expr::Unary(UnOp::Not, a) => self.cond(a, from, on_false, on_true),
            atom => {
                self.edge(from, Op::Assume(atom.clone()), on_true);
                self.edge(from, Op::Assume(atom.negated()), on_false);
            }
        }
    }

    fn stmt(&mut self, s: &Stmt, cur: Loc) -> Loc {
        match &s.kind {
            StmtKind::Assign(v, e) => {
                let mut cur = cur;
                let e = self.hoist(e, &mut cur);
                let next = self.fresh();
                self.edge(cur, Op::Assign(v.clone(), e), next);
                next
            }
            StmtKind::Havoc(v) => {
                let next = self.fresh();
                self.edge(cur, Op::Havoc(v.clone()), next);
                next
            }
            StmtKind::Assert(e) => {
                let mut cur = cur;
                let e = self.hoist(e, &mut cur);
                let next = self.fresh();
                self.cond(&e, cur, next, ERROR_LOC);
                next
            }
            StmtKind::Error => {
                self.edge(cur, Op::skip(), ERROR_LOC);
                // anything after `error;` is dead code
                self.fresh()
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let mut cur = cur;
                let c = self.hoist(cond, &mut cur);
                let t = self.fresh();
                let f = self.fresh();
                self.cond(&c, cur, t, f);
                let t_end = self.stmts(then_branch, t);
                let f_end = self.stmts(else_branch, f);
                let join = self.fresh();
                self.edge(t_end, Op::skip(), join);
                self.edge(f_end, Op::skip(), join);
                join
            }
            StmtKind::While { cond, body } => {
                let head = if cur.0 == 0 {
                    let h = self.fresh();
                    self.edge(cur, Op::skip(), h);
                    h
                } else {
                    cur
                };
                let mut c_loc = head;
                let c = self.hoist(cond, &mut c_loc);
                let body_start = self.fresh();
                let exit = self.fresh();
                self.cond(&c, c_loc, body_start, exit);
                let body_end = self.stmts(body, body_start);
                self.edge(body_end, Op::skip(), head);
                exit
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::programs;

    fn cfa_of(src: &str) -> Cfa {
        build_cfa(&parse(src).unwrap())
    }

    #[test]
    fn example_safe_has_one_loop_head_and_error_location() {
        let cfa = cfa_of(programs::EXAMPLE_SAFE);
        assert_eq!(cfa.loop_heads().len(), 1);
        assert_eq!(cfa.error(), Loc(1));
        assert!(cfa.in_edges(cfa.error()).len() >= 1);
        assert!(cfa.out_edges(cfa.error()).is_empty());
        assert!(cfa.is_reducible());
    }

    #[test]
    fn empty_program_has_only_entry() {
        let cfa = cfa_of("");
        assert!(cfa.edges().is_empty());
        assert!(cfa.loop_heads().is_empty());
    }

    #[test]
    fn sequential_loops_give_two_heads() {
        let cfa = cfa_of("int i; int j; i = 0; while (i < 3) { i = i + 1; } j = 0; while (j < i) { j = j + 1; }");
        assert_eq!(cfa.loop_heads().len(), 2);
    }

    #[test]
    fn entry_has_no_incoming_edges() {
        let cfa = cfa_of("int x; while (x < 3) { x = x + 1; }");
        assert!(cfa.in_edges(cfa.entry()).is_empty());
        assert_eq!(cfa.loop_heads().len(), 1);
        assert_ne!(cfa.loop_heads()[0], cfa.entry());
    }

    #[test]
    fn assert_lowers_to_guarded_edges() {
        let cfa = cfa_of("int x; x = 1; assert(x == 0);");
        let into_err: Vec<_> = cfa
            .in_edges(cfa.error())
            .iter()
            .map(|&e| cfa.edge(e).op.to_string())
            .collect();
        assert_eq!(into_err, vec!["assume(!(x == 0))"]);
    }

    #[test]
    fn short_circuit_conditions_become_nested_branches() {
        let cfa = cfa_of("int a; int b; if (a < 1 && b < 2) { a = 0; }");
        for e in cfa.edges() {
            if let Op::Assume(c) = &e.op {
                assert!(
                    !matches!(c, Expr::Binary(BinOp::And | BinOp::Or, ..)),
                    "compound condition survived: {c}"
                );
            }
        }
    }

    #[test]
    fn nondet_in_condition_is_hoisted_to_a_temporary() {
        let cfa = cfa_of("int x; while (nondet()) { x = 1; }");
        assert_eq!(cfa.vars(), &["x".to_string(), "__nd0".to_string()]);
        assert!(cfa.is_synthetic("__nd0"));
        assert!(cfa.edges().iter().any(|e| e.op == Op::Havoc("__nd0".into())));
    }

    #[test]
    fn lowering_is_deterministic() {
        let a = cfa_of(programs::EXAMPLE_UNSAFE);
        let b = cfa_of(programs::EXAMPLE_UNSAFE);
        assert_eq!(a, b);
        assert_eq!(a.dump(), b.dump());
    }

    #[test]
    fn dump_format() {
        let cfa = cfa_of("int x; x = nondet(); x = x + 1;");
        assert_eq!(cfa.dump(), "L0 --havoc(x)--> L2\nL2 --x := x + 1--> L3\n");
    }
}
