//! Symbolic jet calculus over rational functions in transcendental kernels.

pub mod corpus;
pub mod covering;
pub mod expr;
pub mod forms;
pub mod jet;
pub mod morphism;
pub mod numeric;
pub mod parser;
pub mod pseudosym;
pub mod search;
pub mod verify;

pub use expr::{Expr, MultiIndex, Oracle, Verdict};
