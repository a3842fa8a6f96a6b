//! File formats, configuration and pipeline orchestration on top of `rom-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod mesh;
pub mod mtx;
pub mod pipeline;

pub use error::{ToolError, ToolResult};
