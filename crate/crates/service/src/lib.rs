//! Command-line tools and a read-only HTTP API over [`imgspec_core`].

pub mod api;
pub mod cli;
pub mod query;
pub mod state;

pub use query::{BrowseFilter, QueryRequest, RequestError, SearchMethod, MAX_FILTER_WORDS};
pub use state::AppState;
