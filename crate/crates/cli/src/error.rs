use std::path::PathBuf;
use std::process::ExitCode;

use mrct_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}", render_core(.0))]
    Core(#[from] CoreError),

    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn render_core(e: &CoreError) -> String {
    match e {
        CoreError::Stage { stage, source } => format!("[{stage}] {source}"),
        other => other.to_string(),
    }
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            _ => ExitCode::from(1),
        }
    }
}
