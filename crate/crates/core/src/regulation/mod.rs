//! Narrowband white-space device rules: the 100 kHz subchannel plan inside
//! a 6 MHz TV channel, the 602 MHz ceiling, EIRP and aggregate power limits,
//! the 36 s/hour duty cycle, adjacent-channel emissions, and the gain to
//! output power calibration.

mod calibration;
mod duty;
mod emissions;

pub use calibration::{CalibrationRow, CalibrationTable};
pub use duty::{DutyCycleLedger, DutyDecision, DUTY_LIMIT_S, DUTY_WINDOW_S};
pub use emissions::{adjacent_slices, check_adjacent_emissions, EmissionSlice, ADJACENT_LIMIT_DBM};

use std::fmt;
use thiserror::Error;

pub const TV_CHANNEL_WIDTH_HZ: f64 = 6e6;
pub const SUBCHANNEL_SPACING_HZ: f64 = 100e3;
pub const EDGE_GUARD_HZ: f64 = 250e3;
/// Center frequencies must stay strictly below this.
pub const FREQUENCY_CEILING_HZ: f64 = 602e6;
pub const MAX_CONDUCTED_DBM: f64 = 12.6;
pub const MAX_EIRP_DBM: f64 = 18.6;
/// Antenna gain above which the conducted limit is reduced dB for dB.
pub const GAIN_ALLOWANCE_DBI: f64 = 6.0;
pub const AGGREGATE_LIMIT_DBM: f64 = 30.0;

/// Slack for comparisons of dB quantities that are exact in decimal but pass
/// through decimal parsing and float arithmetic.
const DB_TOLERANCE: f64 = 1e-9;
/// Frequencies within this many Hz of a grid point count as on it.
const FREQ_TOLERANCE_HZ: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum RegError {
    #[error("invalid regulation input: {0}")]
    Config(String),
    #[error("interval [{start}, {end}) s overlaps an existing transmission")]
    Overlap { start: f64, end: f64 },
    #[error("{0} dBm is outside the calibrated range")]
    OutOfCalibration(f64),
    #[error("spectrum does not cover any full 100 kHz slice outside the channel")]
    Coverage,
    #[error("calibration table: {0}")]
    Table(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    SubchannelGrid,
    FrequencyCeiling,
    Eirp,
    AggregatePower,
    DutyCycle,
    AdjacentEmission,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::SubchannelGrid => "subchannel-grid",
            Rule::FrequencyCeiling => "frequency-ceiling",
            Rule::Eirp => "eirp",
            Rule::AggregatePower => "aggregate-power",
            Rule::DutyCycle => "duty-cycle",
            Rule::AdjacentEmission => "adjacent-emission",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegVerdict {
    Pass,
    Fail { rule: Rule, detail: String },
}

impl RegVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, RegVerdict::Pass)
    }

    fn fail(rule: Rule, detail: impl Into<String>) -> Self {
        RegVerdict::Fail { rule, detail: detail.into() }
    }
}

impl fmt::Display for RegVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegVerdict::Pass => f.write_str("pass"),
            RegVerdict::Fail { rule, detail } => write!(f, "fail [{rule}]: {detail}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Low,
    High,
}

/// A 6 MHz TV channel and the status of its neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct TvChannel {
    pub f_low: f64,
    pub f_high: f64,
    pub adjacent_low_vacant: bool,
    pub adjacent_high_vacant: bool,
    /// Edge shared with a bonded neighbouring channel, if any.
    pub bonded_with: Option<Edge>,
}

impl TvChannel {
    /// Channel with occupied neighbours on both sides.
    pub fn new(f_low: f64, f_high: f64) -> Self {
        Self { f_low, f_high, adjacent_low_vacant: false, adjacent_high_vacant: false, bonded_with: None }
    }

    pub fn validate(&self) -> Result<(), RegError> {
        if !(self.f_low.is_finite() && self.f_high.is_finite() && self.f_low > 0.0) {
            return Err(RegError::Config(format!("bad channel edges {} .. {}", self.f_low, self.f_high)));
        }
        if ((self.f_high - self.f_low) - TV_CHANNEL_WIDTH_HZ).abs() > FREQ_TOLERANCE_HZ {
            return Err(RegError::Config(format!(
                "channel {} .. {} Hz is not 6 MHz wide",
                self.f_low, self.f_high
            )));
        }
        if (self.f_low / 1e3 - (self.f_low / 1e3).round()).abs() > 1e-6 {
            return Err(RegError::Config(format!("lower edge {} Hz is not on a 1 kHz grid", self.f_low)));
        }
        Ok(())
    }

    fn guard(&self, edge: Edge) -> f64 {
        let open = match edge {
            Edge::Low => self.adjacent_low_vacant,
            Edge::High => self.adjacent_high_vacant,
        };
        if open || self.bonded_with == Some(edge) {
            0.0
        } else {
            EDGE_GUARD_HZ
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubchannelPlan {
    /// Subchannel centers in Hz, ascending.
    pub centers: Vec<f64>,
    pub spacing: f64,
    pub guard_low: f64,
    pub guard_high: f64,
}

/// 100 kHz subchannels whose centers are multiples of 100 kHz and whose
/// edges stay clear of any required guard band.
pub fn subchannel_grid(ch: &TvChannel) -> Result<SubchannelPlan, RegError> {
    ch.validate()?;
    let guard_low = ch.guard(Edge::Low);
    let guard_high = ch.guard(Edge::High);
    let half = SUBCHANNEL_SPACING_HZ / 2.0;
    // Work in integer units of 100 kHz to keep the grid exact.
    let unit = SUBCHANNEL_SPACING_HZ;
    let first = ((ch.f_low + guard_low + half - FREQ_TOLERANCE_HZ) / unit).ceil() as i64;
    let last = ((ch.f_high - guard_high - half + FREQ_TOLERANCE_HZ) / unit).floor() as i64;
    let centers = (first..=last).map(|k| k as f64 * unit).collect();
    Ok(SubchannelPlan { centers, spacing: SUBCHANNEL_SPACING_HZ, guard_low, guard_high })
}

/// Passes iff `f` is a subchannel center of `ch` and below 602 MHz.
pub fn check_center_frequency(f: f64, ch: &TvChannel) -> RegVerdict {
    if !(f < FREQUENCY_CEILING_HZ) {
        return RegVerdict::fail(
            Rule::FrequencyCeiling,
            format!("{:.4} MHz is not below {:.0} MHz", f / 1e6, FREQUENCY_CEILING_HZ / 1e6),
        );
    }
    let plan = match subchannel_grid(ch) {
        Ok(p) => p,
        Err(e) => return RegVerdict::fail(Rule::SubchannelGrid, e.to_string()),
    };
    if plan.centers.iter().any(|c| (c - f).abs() <= FREQ_TOLERANCE_HZ) {
        return RegVerdict::Pass;
    }
    let (lo, hi) = (plan.centers.first().copied(), plan.centers.last().copied());
    let detail = match (lo, hi) {
        (Some(lo), Some(hi)) if f < lo || f > hi => format!(
            "{:.4} MHz lies in the edge guard; usable centers are {:.1} to {:.1} MHz",
            f / 1e6,
            lo / 1e6,
            hi / 1e6
        ),
        (Some(_), Some(_)) => format!("{:.4} MHz is not a multiple of 100 kHz", f / 1e6),
        _ => "channel has no usable subchannels".into(),
    };
    RegVerdict::fail(Rule::SubchannelGrid, detail)
}

/// Conducted power limit per 100 kHz for an antenna of `gain_dbi`.
pub fn conducted_limit_dbm(antenna_gain_dbi: f64) -> f64 {
    MAX_CONDUCTED_DBM - (antenna_gain_dbi - GAIN_ALLOWANCE_DBI).max(0.0)
}

pub fn check_eirp(p_conducted_dbm: f64, antenna_gain_dbi: f64) -> RegVerdict {
    let limit = conducted_limit_dbm(antenna_gain_dbi);
    if p_conducted_dbm <= limit + DB_TOLERANCE {
        RegVerdict::Pass
    } else {
        RegVerdict::fail(
            Rule::Eirp,
            format!(
                "{p_conducted_dbm} dBm conducted exceeds the {limit:.1} dBm limit for a {antenna_gain_dbi} dBi antenna (EIRP {:.1} dBm)",
                p_conducted_dbm + antenna_gain_dbi
            ),
        )
    }
}

/// Sum of conducted powers of all active subchannels in one TV channel.
pub fn check_aggregate_power(subchannel_powers_dbm: &[f64]) -> RegVerdict {
    let total_mw: f64 = subchannel_powers_dbm.iter().map(|p| 10f64.powf(p / 10.0)).sum();
    if total_mw <= 0.0 {
        return RegVerdict::Pass;
    }
    let total = 10.0 * total_mw.log10();
    if total <= AGGREGATE_LIMIT_DBM + DB_TOLERANCE {
        RegVerdict::Pass
    } else {
        RegVerdict::fail(
            Rule::AggregatePower,
            format!("aggregate {total:.2} dBm exceeds {AGGREGATE_LIMIT_DBM} dBm per TV channel"),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn standard_grid() {
        let plan = subchannel_grid(&TvChannel::new(470e6, 476e6)).unwrap();
        assert_eq!(plan.centers.len(), 55);
        assert_eq!(plan.centers[0], 470.3e6);
        assert_eq!(*plan.centers.last().unwrap(), 475.7e6);
        for c in &plan.centers {
            assert_eq!(c % 100e3, 0.0);
        }
    }

    #[test]
    fn bonded_and_vacant_edges_drop_guard() {
        let ch = TvChannel { bonded_with: Some(Edge::Low), ..TvChannel::new(470e6, 476e6) };
        let plan = subchannel_grid(&ch).unwrap();
        // The first 100 kHz multiple whose subchannel fits above 470 MHz.
        assert_eq!(plan.centers[0], 470.1e6);
        assert_eq!(plan.centers.len(), 57);
        let ch = TvChannel { adjacent_low_vacant: true, adjacent_high_vacant: true, ..TvChannel::new(470e6, 476e6) };
        let plan = subchannel_grid(&ch).unwrap();
        assert_eq!((plan.centers[0], *plan.centers.last().unwrap()), (470.1e6, 475.9e6));
        assert_eq!(plan.centers.len(), 59);
    }

    #[test]
    fn malformed_channel() {
        assert!(subchannel_grid(&TvChannel::new(470e6, 477e6)).is_err());
        assert!(subchannel_grid(&TvChannel::new(470.0005e6, 476.0005e6)).is_err());
    }

    #[test]
    fn center_frequency_rules() {
        let ch = TvChannel::new(596e6, 602e6);
        assert!(check_center_frequency(600e6, &ch).passed());
        assert!(matches!(check_center_frequency(601.95e6, &ch), RegVerdict::Fail { rule: Rule::SubchannelGrid, .. }));
        assert!(matches!(
            check_center_frequency(603e6, &TvChannel::new(602e6, 608e6)),
            RegVerdict::Fail { rule: Rule::FrequencyCeiling, .. }
        ));
        assert!(matches!(check_center_frequency(600.05e6, &ch), RegVerdict::Fail { rule: Rule::SubchannelGrid, .. }));
        // A channel entirely above the ceiling fails even on its own grid.
        assert!(!check_center_frequency(605e6, &TvChannel::new(602e6, 608e6)).passed());
    }

    #[test]
    fn eirp_rule() {
        assert!(check_eirp(12.6, 5.0).passed());
        assert!(check_eirp(12.6, 6.0).passed());
        assert_eq!(conducted_limit_dbm(9.0), 12.6 - 3.0);
        match check_eirp(12.6, 9.0) {
            RegVerdict::Fail { rule: Rule::Eirp, detail } => assert!(detail.contains("9.6 dBm"), "{detail}"),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn aggregate_rule() {
        // 12.6 dBm is 18.197 mW: 54 subchannels sum to 29.92 dBm, 55 to 30.003 dBm.
        assert!(check_aggregate_power(&[12.6; 54]).passed());
        assert!(!check_aggregate_power(&[12.6; 55]).passed());
        assert!(check_aggregate_power(&[]).passed());
        assert!(check_aggregate_power(&[30.0]).passed());
        assert!(!check_aggregate_power(&[30.01]).passed());
    }

    proptest! {
        #[test]
        fn any_standard_channel_has_55(k in 0u32..60) {
            let f_low = 470e6 + 6e6 * f64::from(k);
            let plan = subchannel_grid(&TvChannel::new(f_low, f_low + 6e6)).unwrap();
            prop_assert_eq!(plan.centers.len(), 55);
            prop_assert!((plan.centers[54] - plan.centers[0] - 5.4e6).abs() < 1e-3);
        }

        #[test]
        fn eirp_monotone(p in -20.0f64..30.0, g in 0.0f64..15.0, d in 0.0f64..10.0) {
            if check_eirp(p, g).passed() {
                prop_assert!(check_eirp(p - d, g).passed());
            }
        }
    }
}
