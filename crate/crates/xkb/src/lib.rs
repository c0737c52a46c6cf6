//! Command-line front end and HTTP session service over `xkb-core`.

pub mod cli;
pub mod error;
pub mod server;
pub mod session;
pub mod store;

pub use error::ApiError;
