//! Streaming detection server and command-line front end for `denom-core`.
//!
//! - [`protocol`]: the JSON wire messages.
//! - [`session`]: per-connection state and message handling.
//! - [`server`]: the axum routes (`/ws`, `/healthz`, `/`).
//! - [`cli`]: the `denom` subcommands.
//! - [`bench`]: pipeline timing on synthetic frames.

pub mod bench;
pub mod cli;
pub mod protocol;
pub mod server;
pub mod session;
