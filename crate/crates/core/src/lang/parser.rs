use std::collections::HashSet;

use super::ast::{Ast, AstExpr, Decl, Pos, Stmt, StmtKind};
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;
use crate::expr::{BinOp, UnOp};

const KEYWORDS: [&str; 7] = ["int", "if", "else", "while", "assert", "nondet", "error"];

/// Parses a program of the toy language.
pub fn parse(source: &str) -> Result<Ast, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser {
        tokens,
        idx: 0,
        declared: HashSet::new(),
    };
    p.program()
}

struct Parser {
    tokens: Vec<Token>,
    idx: usize,
    declared: HashSet<String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.idx].tok
    }

    fn peek_at(&self, off: usize) -> &Tok {
        let i = (self.idx + off).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.idx].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.idx].clone();
        if self.idx + 1 < self.tokens.len() {
            self.idx += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.is_punct(p) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{p}`, found {}", Self::describe(self.peek())))
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                self.bump();
                Ok((name, pos))
            }
            other => self.error(format!("expected identifier, found {}", Self::describe(&other))),
        }
    }

    fn use_var(&mut self) -> Result<String, ParseError> {
        let (name, pos) = self.ident()?;
        if !self.declared.contains(&name) {
            return Err(ParseError::UndeclaredVariable { name, pos });
        }
        Ok(name)
    }

    fn program(&mut self) -> Result<Ast, ParseError> {
        let mut ast = Ast::default();
        while self.is_keyword("int") {
            self.bump();
            let (name, pos) = self.ident()?;
            if !self.declared.insert(name.clone()) {
                return Err(ParseError::DuplicateDeclaration { name, pos });
            }
            self.expect_punct(";")?;
            ast.declarations.push(Decl { name, pos });
        }
        while *self.peek() != Tok::Eof {
            if self.is_keyword("int") {
                return self.error("declarations must precede statements");
            }
            ast.statements.push(self.stmt()?);
        }
        Ok(ast)
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if *self.peek() == Tok::Eof {
                return self.error("unterminated block, expected `}`");
            }
            stmts.push(self.stmt()?);
        }
        self.bump();
        Ok(stmts)
    }

    fn paren_cond(&mut self) -> Result<AstExpr, ParseError> {
        self.expect_punct("(")?;
        let e = self.expr()?;
        self.expect_punct(")")?;
        Ok(e)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let pos = self.pos();
        let kind = if self.is_keyword("if") {
            self.bump();
            let cond = self.paren_cond()?;
            let then_branch = self.block()?;
            let else_branch = if self.is_keyword("else") {
                self.bump();
                if self.is_keyword("if") {
                    vec![self.stmt()?]
                } else {
                    self.block()?
                }
            } else {
                Vec::new()
            };
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            }
        } else if self.is_keyword("while") {
            self.bump();
            let cond = self.paren_cond()?;
            let body = self.block()?;
            StmtKind::While { cond, body }
        } else if self.is_keyword("assert") {
            self.bump();
            let cond = self.paren_cond()?;
            self.expect_punct(";")?;
            StmtKind::Assert(cond)
        } else if self.is_keyword("error") {
            self.bump();
            self.expect_punct(";")?;
            StmtKind::Error
        } else {
            let name = self.use_var()?;
            self.expect_punct("=")?;
            let is_plain_nondet = self.is_keyword("nondet")
                && *self.peek_at(1) == Tok::Punct("(")
                && *self.peek_at(2) == Tok::Punct(")")
                && *self.peek_at(3) == Tok::Punct(";");
            let kind = if is_plain_nondet {
                self.bump();
                self.bump();
                self.bump();
                StmtKind::Havoc(name)
            } else {
                StmtKind::Assign(name, self.expr()?)
            };
            self.expect_punct(";")?;
            kind
        };
        Ok(Stmt { kind, pos })
    }

    fn expr(&mut self) -> Result<AstExpr, ParseError> {
        self.binary(1)
    }

    /// Precedence climbing; level 1 is `||`, level 10 is `* / %`.
    fn binary(&mut self, level: u8) -> Result<AstExpr, ParseError> {
        if level > 10 {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let op = match (level, self.peek()) {
                (1, Tok::Punct("||")) => "||",
                (2, Tok::Punct("&&")) => "&&",
                (3, Tok::Punct("|")) => "|",
                (4, Tok::Punct("^")) => "^",
                (5, Tok::Punct("&")) => "&",
                (6, Tok::Punct(p @ ("==" | "!="))) => p,
                (7, Tok::Punct(p @ ("<" | "<=" | ">" | ">="))) => p,
                (8, Tok::Punct(p @ ("<<" | ">>"))) => p,
                (9, Tok::Punct(p @ ("+" | "-"))) => p,
                (10, Tok::Punct(p @ ("*" | "/" | "%"))) => p,
                _ => break,
            };
            self.bump();
            let rhs = self.binary(level + 1)?;
            lhs = desugar_binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<AstExpr, ParseError> {
        let op = match self.peek() {
            Tok::Punct("!") => Some(UnOp::Not),
            Tok::Punct("~") => Some(UnOp::BitNot),
            Tok::Punct("-") => Some(UnOp::Neg),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let inner = self.unary()?;
            return Ok(match (op, inner) {
                (UnOp::Neg, AstExpr::Const(c)) if c != i64::MIN => AstExpr::Const(-c),
                (op, inner) => AstExpr::unary(op, inner),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<AstExpr, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(AstExpr::Const(v))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(kw) if kw == "nondet" => {
                self.bump();
                self.expect_punct("(")?;
                self.expect_punct(")")?;
                Ok(AstExpr::Nondet)
            }
            Tok::Ident(_) => Ok(AstExpr::Var(self.use_var()?)),
            other => self.error(format!("expected expression, found {}", Self::describe(&other))),
        }
    }
}

/// Maps surface operators onto the core operator set.
fn desugar_binary(op: &str, l: AstExpr, r: AstExpr) -> AstExpr {
    let bin = AstExpr::binary;
    let not = |e| AstExpr::unary(UnOp::Not, e);
    match op {
        "-" => match r {
            AstExpr::Const(c) if c != i64::MIN => bin(BinOp::Add, l, AstExpr::Const(-c)),
            r => bin(BinOp::Add, l, AstExpr::unary(UnOp::Neg, r)),
        },
        "!=" => not(bin(BinOp::Eq, l, r)),
        "<=" => not(bin(BinOp::Lt, r, l)),
        ">" => bin(BinOp::Lt, r, l),
        ">=" => not(bin(BinOp::Lt, l, r)),
        "+" => bin(BinOp::Add, l, r),
        "*" => bin(BinOp::Mul, l, r),
        "/" => bin(BinOp::Div, l, r),
        "%" => bin(BinOp::Rem, l, r),
        "==" => bin(BinOp::Eq, l, r),
        "<" => bin(BinOp::Lt, l, r),
        "^" => bin(BinOp::BitXor, l, r),
        "|" => bin(BinOp::BitOr, l, r),
        "||" => bin(BinOp::Or, l, r),
        "&" => bin(BinOp::BitAnd, l, r),
        "&&" => bin(BinOp::And, l, r),
        ">>" => bin(BinOp::Shr, l, r),
        "<<" => bin(BinOp::Shl, l, r),
        _ => unreachable!("operator table out of sync: {op}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::programs;

    #[test]
    fn parses_example_safe() {
        let ast = parse(programs::EXAMPLE_SAFE).unwrap();
        assert_eq!(ast.var_names(), vec!["s", "x1", "x2"]);
        assert_eq!(ast.loop_count(), 1);
    }

    #[test]
    fn parses_minimal_program() {
        let ast = parse("int x; x = 0;").unwrap();
        assert_eq!(ast.declarations.len(), 1);
        assert_eq!(ast.statements.len(), 1);
        assert_eq!(
            ast.statements[0].kind,
            StmtKind::Assign("x".into(), AstExpr::Const(0))
        );
    }

    #[test]
    fn rejects_undeclared_variable() {
        let err = parse("x = 1;").unwrap_err();
        assert_eq!(
            err,
            ParseError::UndeclaredVariable {
                name: "x".into(),
                pos: Pos { line: 1, col: 1 }
            }
        );
        let err = parse("int x;\nx = y + 1;").unwrap_err();
        assert!(matches!(err, ParseError::UndeclaredVariable { ref name, pos } if name == "y" && pos.line == 2 && pos.col == 5));
    }

    #[test]
    fn rejects_duplicate_declaration() {
        let err = parse("int x;\nint x;").unwrap_err();
        assert!(matches!(err, ParseError::DuplicateDeclaration { ref name, pos } if name == "x" && pos.line == 2));
    }

    #[test]
    fn reports_syntax_error_position() {
        let err = parse("int x;\nx = (1 + ;").unwrap_err();
        match err {
            ParseError::Syntax { pos, .. } => assert_eq!(pos, Pos { line: 2, col: 10 }),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse("int x; while (x) { x = 0;").is_err());
        assert!(parse("int x; x = 1; int y;").is_err());
    }

    #[test]
    fn desugars_comparisons() {
        let ast = parse("int a; int b; assert(a >= b - 2);").unwrap();
        let StmtKind::Assert(e) = &ast.statements[0].kind else {
            panic!()
        };
        assert_eq!(
            *e,
            AstExpr::unary(
                UnOp::Not,
                AstExpr::binary(
                    BinOp::Lt,
                    AstExpr::Var("a".into()),
                    AstExpr::binary(BinOp::Add, AstExpr::Var("b".into()), AstExpr::Const(-2))
                )
            )
        );
    }

    #[test]
    fn plain_nondet_assignment_is_havoc() {
        let ast = parse("int x; x = nondet(); x = nondet() + 1;").unwrap();
        assert_eq!(ast.statements[0].kind, StmtKind::Havoc("x".into()));
        assert!(matches!(&ast.statements[1].kind, StmtKind::Assign(_, e) if e.contains_nondet()));
    }

    #[test]
    fn else_if_chains() {
        let ast = parse("int s; if (s == 1) { s = 2; } else if (s == 2) { s = 3; } else { s = 1; }")
            .unwrap();
        let StmtKind::If { else_branch, .. } = &ast.statements[0].kind else {
            panic!()
        };
        assert!(matches!(else_branch[0].kind, StmtKind::If { .. }));
    }
}
