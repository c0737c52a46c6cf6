use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// A syntax or schema error located in DSL source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    /// Tokens that would have been accepted at the error position. Empty for
    /// schema-level errors such as an unknown feature.
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected one of: {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("unknown feature {0}")]
    UnknownFeature(String),
    #[error("unknown value {value} for feature {feature}")]
    UnknownValue { feature: String, value: String },
    #[error("unknown class {0}")]
    UnknownClass(String),
    #[error("duplicate rule id {0}")]
    DuplicateRuleId(String),
    #[error("rule {id} is not an instance rule: {reason}")]
    NotInstanceRule { id: String, reason: String },
    #[error("schema mismatch between {0}")]
    SchemaMismatch(String),
    #[error("grid over features [{}] has {cells} cells, above the 2^20 limit", features.join(", "))]
    GridTooLarge { features: Vec<String>, cells: u128 },
    #[error("table error: {0}")]
    Table(String),
    #[error("{what} exceeded the limit of {limit} (reached {found})")]
    CapExceeded { what: String, limit: usize, found: usize },
    #[error("input rule {0} is inconsistent on its own (satisfiable body, empty head)")]
    InputSelfInconsistent(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("feedback conflicts with data rules [{}] and K_d updates are forbidden", .0.join(", "))]
    KdUpdateForbidden(Vec<String>),
    #[error("oracle limit exceeded: {0}")]
    OracleLimit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
