use std::path::PathBuf;

use seamforge_core::Error;
use serde::Serialize;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug)]
pub struct CliError(pub Error);

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError(e)
    }
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError(Error::io(path, source))
    }

    pub fn exit_code(&self) -> i32 {
        match self.0 {
            Error::Io { .. } => EXIT_IO,
            _ => EXIT_DOMAIN,
        }
    }

    /// Single-line JSON for stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Wire<'a> {
            error: &'a str,
            message: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            path: Option<String>,
        }
        let path = match &self.0 {
            Error::Io { path, .. } => Some(path.display().to_string()),
            _ => None,
        };
        serde_json::to_string(&Wire {
            error: self.0.kind(),
            message: self.0.to_string(),
            path,
        })
        .expect("error serializes")
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = std::result::Result<T, CliError>;
