use std::fmt;

use crate::expr::{BinOp, UnOp};

/// Line/column of a token, both 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Source-level expression. Unlike [`crate::expr::Expr`] it may contain
/// `nondet()` calls, which lowering hoists into havoc edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AstExpr {
    Const(i64),
    Var(String),
    Nondet,
    Unary(UnOp, Box<AstExpr>),
    Binary(BinOp, Box<AstExpr>, Box<AstExpr>),
}

impl AstExpr {
    pub fn unary(op: UnOp, e: AstExpr) -> AstExpr {
        AstExpr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinOp, l: AstExpr, r: AstExpr) -> AstExpr {
        AstExpr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn contains_nondet(&self) -> bool {
        match self {
            AstExpr::Nondet => true,
            AstExpr::Const(_) | AstExpr::Var(_) => false,
            AstExpr::Unary(_, e) => e.contains_nondet(),
            AstExpr::Binary(_, l, r) => l.contains_nondet() || r.contains_nondet(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decl {
    pub name: String,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Assign(String, AstExpr),
    /// `x = nondet();`
    Havoc(String),
    If {
        cond: AstExpr,
        then_branch: Vec<Stmt>,
        else_branch: Vec<Stmt>,
    },
    While {
        cond: AstExpr,
        body: Vec<Stmt>,
    },
    Assert(AstExpr),
    /// `error;` jumps straight to the error location.
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub pos: Pos,
}

/// A parsed program: integer declarations followed by statements.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Ast {
    pub declarations: Vec<Decl>,
    pub statements: Vec<Stmt>,
}

impl Ast {
    pub fn var_names(&self) -> Vec<String> {
        self.declarations.iter().map(|d| d.name.clone()).collect()
    }

    /// Number of `while` statements at any nesting level.
    pub fn loop_count(&self) -> usize {
        fn count(stmts: &[Stmt]) -> usize {
            stmts
                .iter()
                .map(|s| match &s.kind {
                    StmtKind::While { body, .. } => 1 + count(body),
                    StmtKind::If {
                        then_branch,
                        else_branch,
                        ..
                    } => count(then_branch) + count(else_branch),
                    _ => 0,
                })
                .sum()
        }
        count(&self.statements)
    }
}
