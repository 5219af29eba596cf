//! Text format for systems, regions, control laws and metrics.
//!
//! Expressions use `+ - * / ^`, parentheses and the functions `sin cos tan
//! atan exp abs sqrt`. `^` binds tightest and is right-associative, then
//! unary minus, then `* /`, then `+ -`. Integer and integer-ratio constant
//! exponents such as `x1^(4/3)` are evaluated with real odd roots.

mod ast;
mod file;
mod lexer;
mod parser;

use thiserror::Error;

pub use ast::{rational_pow, BinOp, Compiled, Expr, Func};
pub use file::{load_system, load_system_path, parse_system_file, LoadedSystem, SystemFile};
pub use lexer::{tokenize, tokenize_at, Token, TokenKind};
pub use parser::{parse_expr, parse_expr_at};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum DslError {
    #[error("{line}:{col}: illegal character '{ch}'")]
    IllegalChar { line: usize, col: usize, ch: char },

    #[error("{line}:{col}: expected {expected}, found {found}")]
    Syntax {
        line: usize,
        col: usize,
        expected: String,
        found: String,
    },

    #[error("{line}:{col}: unknown function '{name}'")]
    UnknownFunction {
        line: usize,
        col: usize,
        name: String,
    },

    #[error("{line}:{col}: variable '{name}' is not declared for this entry")]
    UndeclaredVariable {
        line: usize,
        col: usize,
        name: String,
    },

    #[error("{}{msg}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Validation { line: Option<usize>, msg: String },

    #[error("missing required section [{0}]")]
    MissingSection(String),

    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
}

impl DslError {
    /// `(line, column)` for errors tied to a source position.
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            DslError::IllegalChar { line, col, .. }
            | DslError::Syntax { line, col, .. }
            | DslError::UnknownFunction { line, col, .. }
            | DslError::UndeclaredVariable { line, col, .. } => Some((*line, *col)),
            _ => None,
        }
    }

    pub(crate) fn validation(line: impl Into<Option<usize>>, msg: impl Into<String>) -> Self {
        DslError::Validation {
            line: line.into(),
            msg: msg.into(),
        }
    }
}
