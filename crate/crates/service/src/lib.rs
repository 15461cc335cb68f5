//! HTTP/JSON API over an analyzed corpus.
//!
//! [`views`] holds the query semantics as plain functions; [`api`] maps them
//! onto routes. Every response is derived from an immutable
//! [`AnalysisBundle`](oodlens_core::analysis::AnalysisBundle), so the threshold
//! is a per-request parameter and never server state.

pub mod api;
pub mod error;
pub mod views;

pub use api::{router, serve, serve_on, AppState};
pub use error::{ErrorBody, ViewError};
pub use views::{InstanceRecord, Page, QuerySpec, SetFilter, SortKey};
