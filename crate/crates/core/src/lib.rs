//! Logical representation of a discrete classifier and its rule explanations,
//! with belief-change operators for incorporating feedback rules and checkers
//! for the postulates those operators are expected to satisfy.

pub mod error;
pub mod language;
pub mod semantics;
pub mod kb;
pub mod revision;
pub mod postulates;

pub use error::{Error, ParseError, Result};
