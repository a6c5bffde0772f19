//! Front end for the toy imperative language: lexing, parsing and the AST.

mod ast;
mod lexer;
mod parser;

pub use ast::{Ast, AstExpr, Decl, Pos, Stmt, StmtKind};
pub use parser::parse;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("{pos}: syntax error: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("{pos}: use of undeclared variable `{name}`")]
    UndeclaredVariable { name: String, pos: Pos },
    #[error("{pos}: duplicate declaration of `{name}`")]
    DuplicateDeclaration { name: String, pos: Pos },
}
