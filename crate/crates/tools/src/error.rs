use std::path::{Path, PathBuf};

use thiserror::Error;

pub type ToolResult<T> = std::result::Result<T, ToolError>;

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("{}: {source}", path.as_ref().map_or("<stream>".into(), |p| p.display().to_string()))]
    Io {
        path: Option<PathBuf>,
        #[source]
        source: std::io::Error,
    },

    #[error("{}line {line}: {message}", path.as_ref().map_or(String::new(), |p| format!("{}: ", p.display())))]
    Format {
        path: Option<PathBuf>,
        line: usize,
        message: String,
    },

    #[error("configuration: {0}")]
    Config(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: rom_core::Error,
    },
}

impl From<std::io::Error> for ToolError {
    fn from(source: std::io::Error) -> Self {
        ToolError::Io { path: None, source }
    }
}

impl ToolError {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        ToolError::Format {
            path: None,
            line,
            message: message.into(),
        }
    }

    /// Attaches `path` to I/O and format errors that lack one.
    pub fn at(self, p: &Path) -> Self {
        match self {
            ToolError::Io { path: None, source } => ToolError::Io {
                path: Some(p.to_path_buf()),
                source,
            },
            ToolError::Format {
                path: None,
                line,
                message,
            } => ToolError::Format {
                path: Some(p.to_path_buf()),
                line,
                message,
            },
            other => other,
        }
    }

    /// 1 for bad input, 2 for a failed computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            ToolError::Stage { .. } => 2,
            _ => 1,
        }
    }
}

/// Tags a core error with the pipeline stage it came from.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> ToolResult<T>;
}

impl<T> StageExt<T> for rom_core::Result<T> {
    fn stage(self, stage: &'static str) -> ToolResult<T> {
        self.map_err(|source| ToolError::Stage { stage, source })
    }
}
