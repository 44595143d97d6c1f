//! Expression and problem-file parsing.

mod expr;
mod problem;

use thiserror::Error;

pub use expr::{parse_expr, parse_expr_at, parse_expr_in, Scope};
pub use problem::{
    parse_matrix, parse_problem, render_form, render_problem, render_rules, scope_of, AssertLine, Assertion, FieldDecl, FormRef, NamedField,
    NamedMorphism, Problem, SearchDecl, SolitonDecl, Target, ZcrForm,
};

/// Syntax or declaration error with a 1-based position.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}, column {col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}
