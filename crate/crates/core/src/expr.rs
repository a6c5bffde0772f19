//! Side-effect free integer expressions shared by the CFA, the interpreter,
//! the abstract domain and the encoder.
//!
//! The operator set is deliberately small: surface operators such as `-`,
//! `!=`, `<=`, `>` and `>=` are desugared by the parser into the binary set
//! `+ * / % == < ^ | || & && >> <<` and the unary set `! ~ -`.

use std::collections::BTreeSet;
use std::fmt;

/// Binary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Mul,
    /// Division truncating towards zero.
    Div,
    /// Euclidean remainder (always non-negative).
    Rem,
    Eq,
    Lt,
    BitXor,
    BitOr,
    /// Logical or, short-circuiting, yields 0/1.
    Or,
    BitAnd,
    /// Logical and, short-circuiting, yields 0/1.
    And,
    /// Arithmetic shift right.
    Shr,
    Shl,
}

/// Unary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnOp {
    /// Logical negation, yields 0/1.
    Not,
    /// Bitwise complement, `-x - 1`.
    BitNot,
    Neg,
}

impl BinOp {
    pub const ALL: [BinOp; 13] = [
        BinOp::Add,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Rem,
        BinOp::Eq,
        BinOp::Lt,
        BinOp::BitXor,
        BinOp::BitOr,
        BinOp::Or,
        BinOp::BitAnd,
        BinOp::And,
        BinOp::Shr,
        BinOp::Shl,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Eq => "==",
            BinOp::Lt => "<",
            BinOp::BitXor => "^",
            BinOp::BitOr => "|",
            BinOp::Or => "||",
            BinOp::BitAnd => "&",
            BinOp::And => "&&",
            BinOp::Shr => ">>",
            BinOp::Shl => "<<",
        }
    }

    /// True for operators whose result is always 0 or 1.
    pub fn is_boolean(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Lt | BinOp::Or | BinOp::And)
    }
}

impl UnOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnOp::Not => "!",
            UnOp::BitNot => "~",
            UnOp::Neg => "-",
        }
    }
}

/// An integer expression over program variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Const(i64),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn unary(op: UnOp, e: Expr) -> Expr {
        Expr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::unary(UnOp::Not, e)
    }

    /// Logical negation that removes a double `!`.
    pub fn negated(&self) -> Expr {
        match self {
            Expr::Unary(UnOp::Not, inner) if inner.is_boolean() => (**inner).clone(),
            other => Expr::not(other.clone()),
        }
    }

    /// True if the expression always evaluates to 0 or 1.
    pub fn is_boolean(&self) -> bool {
        match self {
            Expr::Const(c) => *c == 0 || *c == 1,
            Expr::Var(_) => false,
            Expr::Unary(op, _) => *op == UnOp::Not,
            Expr::Binary(op, _, _) => op.is_boolean(),
        }
    }

    /// Variables in order of first occurrence (left to right).
    pub fn vars_in_order(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Expr::Unary(_, e) => e.collect_vars(out),
            Expr::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.vars_in_order().into_iter().collect()
    }

    pub fn mentions(&self, var: &str) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => v == var,
            Expr::Unary(_, e) => e.mentions(var),
            Expr::Binary(_, l, r) => l.mentions(var) || r.mentions(var),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Const(c) if *c < 0 => 11,
            Expr::Const(_) | Expr::Var(_) => 12,
            Expr::Unary(..) => 11,
            Expr::Binary(op, ..) => binop_precedence(*op),
        }
    }
}

pub(crate) fn binop_precedence(op: BinOp) -> u8 {
    match op {
        BinOp::Mul | BinOp::Div | BinOp::Rem => 10,
        BinOp::Add => 9,
        BinOp::Shl | BinOp::Shr => 8,
        BinOp::Lt => 7,
        BinOp::Eq => 6,
        BinOp::BitAnd => 5,
        BinOp::BitXor => 4,
        BinOp::BitOr => 3,
        BinOp::And => 2,
        BinOp::Or => 1,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Unary(op, e) => {
                if e.precedence() < 11 {
                    write!(f, "{}({})", op.symbol(), e)
                } else {
                    write!(f, "{}{}", op.symbol(), e)
                }
            }
            Expr::Binary(op, l, r) => {
                let p = binop_precedence(*op);
                if l.precedence() < p {
                    write!(f, "({l})")?;
                } else {
                    write!(f, "{l}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if r.precedence() <= p {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_parenthesizes_by_precedence() {
        let e = Expr::binary(
            BinOp::Mul,
            Expr::binary(BinOp::Add, Expr::var("a"), Expr::Const(1)),
            Expr::var("b"),
        );
        assert_eq!(e.to_string(), "(a + 1) * b");
        let e = Expr::not(Expr::binary(BinOp::Eq, Expr::var("x"), Expr::Const(-2)));
        assert_eq!(e.to_string(), "!(x == -2)");
    }

    #[test]
    fn vars_keep_source_order() {
        let e = Expr::binary(
            BinOp::Lt,
            Expr::var("y"),
            Expr::binary(BinOp::Add, Expr::var("x"), Expr::var("y")),
        );
        assert_eq!(e.vars_in_order(), vec!["y".to_string(), "x".to_string()]);
    }

    #[test]
    fn negated_strips_double_not() {
        let cmp = Expr::binary(BinOp::Lt, Expr::var("i"), Expr::var("n"));
        assert_eq!(Expr::not(cmp.clone()).negated(), cmp);
        assert_eq!(cmp.negated(), Expr::not(cmp.clone()));
    }
}
