use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Empty,
    /// An operand is missing, e.g. `Ua`.
    PrematureEnd,
    /// Tokens remain after a complete formula, e.g. `Uabc`.
    ExcessTokens,
    UnknownCharacter(char),
    MalformedLasso(&'static str),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Empty => f.write_str("empty input"),
            ParseErrorKind::PrematureEnd => f.write_str("formula ends prematurely"),
            ParseErrorKind::ExcessTokens => f.write_str("excess tokens after a complete formula"),
            ParseErrorKind::UnknownCharacter(c) => write!(f, "unknown character {c:?}"),
            ParseErrorKind::MalformedLasso(why) => write!(f, "malformed lasso: {why}"),
        }
    }
}

/// A parse failure with the character offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at position {position}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub position: usize,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("alphabet size must be between 1 and 26, got {0}")]
    InvalidAlphabet(u8),
    #[error("character {0:?} is not valid in the {1} domain")]
    UnknownToken(char, &'static str),
    #[error("token id {0} is not a formula token")]
    NotAFormulaToken(u32),
    #[error("token id {0} is out of range for the vocabulary")]
    InvalidTokenId(u32),
    #[error("automaton state cap of {0} states exceeded")]
    ResourceLimit(usize),
    #[error("non-EOS token at prefix position {0} follows a complete formula")]
    TokenAfterComplete(usize),
    #[error("logit vector has length {got}, expected {expected}")]
    VectorLengthMismatch { expected: usize, got: usize },
    #[error("scorer protocol error: {0}")]
    Protocol(String),
    #[error("scorer peer closed the connection")]
    PeerClosed,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no formula satisfies the trace")]
    NoSatisfyingFormula,
    #[error("formula does not hold on its own trace")]
    NotCorrectForOwnTrace,
    #[error("{predictions} predictions for {pairs} dataset pairs")]
    LengthMismatch { pairs: usize, predictions: usize },
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("pair does not satisfy its trace")]
    InvariantViolation,
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_line(self, line: usize) -> Error {
        Error::Line { line, source: Box::new(self) }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
