//! Specification mining for linear temporal logic over symbolic lasso
//! traces.
//!
//! The crate covers the whole pipeline: the formula and trace grammars
//! ([`ltl`], [`trace`], [`vocab`]), universal satisfaction checking via
//! Büchi automata ([`semantics`]), an exhaustive enumeration baseline
//! ([`miner`]), syntax-enforcing beam search over pluggable next-token
//! scorers ([`decode`]), evaluation metrics ([`metrics`]) and dataset
//! generation ([`dataset`]).

pub mod dataset;
pub mod decode;
pub mod error;
pub mod ltl;
pub mod metrics;
pub mod miner;
pub mod semantics;
pub mod trace;
pub mod vocab;

pub use error::{Error, ParseError, ParseErrorKind, Result};
pub use ltl::{parse_formula, Alphabet, Formula, Notation, Prop};
pub use semantics::{check_existential, check_universal, eval_concrete, CheckOptions, CheckResult, ConcreteLasso};
pub use trace::{parse_trace, print_trace, PropConstraint, SymbolicTrace};
pub use vocab::{Domain, TokenId, TokenSeq, Vocabulary};
