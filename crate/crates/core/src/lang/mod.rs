//! A restricted stochastic-module language for continuous-time models.
//!
//! Supported constructs: the `ctmc` marker, `const double` constants (with or
//! without a value), `formula` definitions (inlined at parse time), modules
//! with bounded integer variables and guarded commands, optional
//! synchronization labels, rate-weighted branches joined by `+`, named
//! `rewards` blocks, and expressions with arithmetic, comparisons, `&`, `|`,
//! `!` and `c ? a : b`. Anything else is rejected.
//!
//! ```text
//! ctmc
//! const double rate;
//! module m
//!     s : [0..1] init 0;
//!     [] s=0 -> rate:(s'=1);
//!     [] s=1 -> 2.0:(s'=0);
//! endmodule
//! rewards "up"
//!     s=1 : 1;
//! endrewards
//! ```

mod ast;
mod compose;
mod eval;
mod lexer;
mod parser;
mod print;

use alloc::string::String;

pub use ast::{
    BinaryOp, Branch, Command, Constant, Expr, ModelSpec, ModuleSpec, RewardItem, RewardStructure, UnaryOp, Update,
    Variable,
};
pub use compose::{compose, equivalent, ComposedChain, Equivalence, StateVariable, EQUIVALENCE_TOLERANCE};
pub use eval::{compile, resolve_constants, Compiled, Value};
pub use parser::{parse, parse_expression};

use crate::markov::MarkovError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LangError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("duplicate variable '{0}'")]
    DuplicateVariable(String),
    #[error("duplicate {0}")]
    Duplicate(String),
    #[error("undeclared identifier '{name}' in {context}")]
    UndeclaredIdentifier { name: String, context: String },
    #[error("initial value {init} of '{variable}' outside [{low}..{high}]")]
    InitOutOfRange {
        variable: String,
        init: i64,
        low: i64,
        high: i64,
    },
    #[error("unbound parameter '{0}'")]
    UnboundParameter(String),
    #[error("binding for unknown parameter '{0}'")]
    UnknownBinding(String),
    #[error("cyclic definition of '{0}'")]
    Cyclic(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("module '{module}' has invalid rate {rate} in state ({state})")]
    NegativeRate { module: String, state: String, rate: f64 },
    #[error("update sets '{variable}' to {value}, outside its range")]
    UpdateOutOfRange { variable: String, value: f64 },
    #[error("inconsistent chain: {0}")]
    Structure(String),
    #[error(transparent)]
    Markov(#[from] MarkovError),
}

impl LangError {
    pub(crate) fn syntax(line: usize, col: usize, message: impl Into<String>) -> Self {
        LangError::Syntax {
            line,
            col,
            message: message.into(),
        }
    }
}

/// The plain ABPS listing, byte-for-byte.
pub const PLAIN_LISTING: &str = include_str!("../../fixtures/abps-plain.sm");
/// The ABPS+oracle listing, byte-for-byte.
pub const ORACLE_LISTING: &str = include_str!("../../fixtures/abps-oracle.sm");
