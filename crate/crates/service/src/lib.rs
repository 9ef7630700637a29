//! Stateless HTTP JSON API over the delaylab toolchain.

pub mod api;
pub mod server;

pub use api::{handle, ApiError, Limits, Reply, Route};
pub use server::{resolve_addr, router, serve, serve_on, DEFAULT_ADDR};
