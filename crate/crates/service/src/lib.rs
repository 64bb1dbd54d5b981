//! HTTP API, workspace persistence, background jobs and command-line verbs
//! for the synroute workbench.

pub mod api;
pub mod app;
pub mod cli;
pub mod config;
pub mod error;
pub mod http_providers;
pub mod jobs;
pub mod store;
pub mod workspace;
