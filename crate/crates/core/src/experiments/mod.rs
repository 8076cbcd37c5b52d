//! Monte Carlo harness: fixtures, bound checks, figure runs and the
//! verification experiments behind the command-line tool.

pub mod bounds;
pub mod config;
pub mod figures;
pub mod fixtures;
pub mod verify;

use thiserror::Error;

use crate::bnsl::BnslError;
use crate::linalg::LinalgError;
use crate::oracle::{IdealOracle, QueryOracle, ResponseFamily};
use crate::radiosim::{ChannelSet, MeasurementConfig, PowerControlModel, RadioError, RadioOracle};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unsupported parameter: {0}")]
    Unsupported(String),
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error(transparent)]
    Bnsl(#[from] BnslError),
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv failure: {0}")]
    Csv(#[from] csv::Error),
    #[error("json failure: {0}")]
    Json(#[from] serde_json::Error),
    #[error("configuration error: {0}")]
    Config(String),
}

/// Which measurement model answers the probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    #[default]
    Ideal,
    Radio,
}

/// Oracle for a channel: the exact quadratic form, or the power-control
/// simulator in SNR-target mode with noise off.
pub fn build_oracle(channels: &ChannelSet, kind: OracleKind) -> Result<Box<dyn QueryOracle + Send>, ExperimentError> {
    Ok(match kind {
        OracleKind::Ideal => Box::new(IdealOracle::new(channels.gram(), ResponseFamily::Identity).map_err(BnslError::from)?),
        OracleKind::Radio => Box::new(RadioOracle::new(
            channels.clone(),
            PowerControlModel::default(),
            MeasurementConfig::default(),
        )?),
    })
}
