//! Command-line front end and HTTP service for `lingeval-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod ops;
pub mod server;

pub use commands::{run, Cli};
pub use error::{AppError, AppResult};
