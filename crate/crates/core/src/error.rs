use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::channel::ChannelError;
use crate::config::ConfigError;
use crate::model::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid scenario:\n{}", format_violations(.0))]
    InvalidScenario(Vec<Violation>),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("{scheduler} run with seed {seed} failed: {source}")]
    RunFailed {
        scheduler: String,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
    #[error("{0}")]
    Plan(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("  - {x}"))
        .collect::<Vec<_>>()
        .join("\n")
}
