//! Narrowband modem and link benchmarking for TV white space channels.
//!
//! The pipeline runs payload bytes through [`framing`] and [`txmodem`],
//! a simulated [`channelsim`] channel, and back through [`rxfront`].
//! [`spectral`] and [`linkstats`] measure the result, [`regulation`] checks
//! a transmission plan against the white-space rules and [`campaign`] ties
//! it all together.

// Negated float comparisons are used on purpose so NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod channelsim;
pub mod framing;
pub mod linkstats;
pub mod regulation;
pub mod rxfront;
pub mod signal;
pub mod spectral;
pub mod txmodem;

pub use campaign::{CampaignConfig, CampaignError};
pub use channelsim::ChannelProfile;
pub use framing::{Frame, FrameConfig};
pub use linkstats::{LinkReport, ReportMeta};
pub use regulation::{RegVerdict, Rule};
pub use rxfront::SyncConfig;
pub use signal::{SampleBlock, C64};
pub use spectral::PowerSpectrum;
pub use txmodem::{ModParams, Scheme};
