use std::io;

use abps_core::coverage::CoverageError;
use abps_core::lang::LangError;
use abps_core::models::ModelError;
use abps_core::sim::SimError;

/// Malformed or unreadable user input.
#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{source_name}:{line}: {message}")]
    Line {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
}

impl InputError {
    pub fn line(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        InputError::Line {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        InputError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Coverage(#[from] CoverageError),
    #[error("output: {0}")]
    Output(#[from] io::Error),
}
