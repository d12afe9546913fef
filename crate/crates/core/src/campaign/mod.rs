//! End-to-end link runs: payload file to packets, modulation, simulated
//! channel, receiver, packet accounting and report export, plus SNR sweeps,
//! raw I/Q file I/O and the key-value configuration format.

mod config;
mod iq;
mod link;
mod sweep;

pub use config::{parse_pairs, parse_snr_list, CampaignConfig, ConfigError};
pub use iq::{read_iq, read_iq_meta, sidecar_path, write_iq, write_iq_meta, IqError, IqMeta};
pub use link::{load_payload, receive, run_link, transmit, write_outputs, LinkOutcome, TxBurst};
pub use sweep::{sweep, write_tables, SweepFailure, SweepOutcome, SweepPoint, TABLE_METRICS};

use std::fmt;
use thiserror::Error;

/// Pipeline stage that produced a [`CampaignError`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Input,
    Framing,
    Modulation,
    Channel,
    Measurement,
    Receiver,
    Report,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Input => "input",
            Stage::Framing => "framing",
            Stage::Modulation => "modulation",
            Stage::Channel => "channel",
            Stage::Measurement => "measurement",
            Stage::Receiver => "receiver",
            Stage::Report => "report",
            Stage::Output => "output",
        })
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct CampaignError {
    pub stage: Stage,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

impl CampaignError {
    pub fn new(stage: Stage, source: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> Self {
        Self { stage, source: source.into() }
    }
}

/// Tags a stage onto any error result.
pub(crate) trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, CampaignError>;
}

impl<T, E: std::error::Error + Send + Sync + 'static> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, CampaignError> {
        self.map_err(|e| CampaignError::new(stage, e))
    }
}
