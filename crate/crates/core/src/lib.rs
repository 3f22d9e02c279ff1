//! Probabilistic single-pass instruction sequences.
//!
//! * [`meadow`]: exact rational arithmetic with a total inverse.
//! * [`syntax`]: instructions, terms, the parser/printer and canonical forms.
//! * [`projection`]: passes that compile probabilistic instructions away.
//! * [`semantics`]: reactive probabilistic transition systems, exact Markov
//!   analysis, trace distributions and bisimilarity.
//! * [`exec`]: seeded simulator and services.

use std::fmt;

mod assemble;
pub mod exec;
pub mod meadow;
pub mod projection;
pub mod semantics;
pub mod syntax;

pub use meadow::Rational;
pub use syntax::{BasicAction, Instruction, InstructionSequence, Prob, Term};

/// Syntax error with a 1-based source position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("parse error at {0}")]
    Parse(ParseError),
    #[error("invalid name `{0}`")]
    InvalidName(String),
    #[error("empty instruction sequence")]
    EmptySequence,
    #[error("unit instruction where a unit-free sequence is required")]
    UnexpectedUnit,
    #[error("probabilistic choice must be desugared first")]
    UnexpectedChoice,
    #[error("repetition inside a unit instruction")]
    RepetitionInUnit,
    #[error("unbounded geometric jump inside a unit instruction")]
    UnboundedJumpInUnit,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("cannot relocate jumps: {0}")]
    Relocation(String),
    #[error("line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("unknown pass `{0}`")]
    UnknownPass(String),
}
