//! HTTP forum service over the core library, plus adapters for external
//! generation and embedding endpoints.

pub mod adapters;
pub mod api;
pub mod auth;
pub mod config;
pub mod server;

pub use config::ServiceConfig;
pub use server::{Service, ServerHandle, StartupError};
