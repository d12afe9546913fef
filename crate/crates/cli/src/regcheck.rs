use anyhow::Result;
use clap::Args;
use nbwsd::campaign::load_payload;
use nbwsd::regulation::{
    check_adjacent_emissions, check_aggregate_power, check_center_frequency, check_eirp, DutyCycleLedger,
    DutyDecision, RegError, TvChannel, TV_CHANNEL_WIDTH_HZ,
};
use nbwsd::signal::bytes_to_bits;
use nbwsd::spectral::avg_fft_power;
use nbwsd::txmodem::modulate;
use nbwsd::{CampaignConfig, ModParams, RegVerdict, Rule, Scheme};
use std::path::PathBuf;
use std::process::ExitCode;

/// Lower edge of the first 6 MHz TV channel in the band plan.
const BAND_START_HZ: f64 = 470e6;

#[derive(Debug, Args)]
pub struct RegcheckArgs {
    /// Carrier frequency, Hz.
    #[arg(long, default_value_t = 600e6)]
    fc: f64,
    /// TV channel edges as LOW:HIGH in Hz. Defaults to the 6 MHz channel holding --fc.
    #[arg(long, value_parser = parse_pair)]
    channel: Option<(f64, f64)>,
    /// The channel below is vacant, so no guard band is needed at the low edge.
    #[arg(long)]
    low_vacant: bool,
    #[arg(long)]
    high_vacant: bool,
    /// Transmit antenna gain, dBi.
    #[arg(long, default_value_t = 5.0)]
    gain_dbi: f64,
    /// Conducted power per 100 kHz, dBm.
    #[arg(long, conflicts_with = "gain_setting")]
    power_dbm: Option<f64>,
    /// Normalized transmitter gain; the power is read from the calibration table.
    #[arg(long)]
    gain_setting: Option<f64>,
    /// Calibration CSV replacing the bundled table.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Number of 100 kHz subchannels transmitting at this power in the channel.
    #[arg(long, default_value_t = 1)]
    subchannels: usize,
    /// Planned transmission as START:DURATION in seconds (repeatable).
    #[arg(long = "tx", value_parser = parse_pair)]
    transmissions: Vec<(f64, f64)>,
    /// Also check out-of-channel emissions of this scheme's default waveform.
    #[arg(long)]
    emissions: Option<Scheme>,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected A:B, got '{s}'"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}"));
    Ok((num(a)?, num(b)?))
}

fn channel_holding(fc: f64) -> (f64, f64) {
    let low = BAND_START_HZ + ((fc - BAND_START_HZ) / TV_CHANNEL_WIDTH_HZ).floor() * TV_CHANNEL_WIDTH_HZ;
    (low, low + TV_CHANNEL_WIDTH_HZ)
}

fn duty_verdict(transmissions: &[(f64, f64)]) -> Result<RegVerdict, RegError> {
    let mut ledger = DutyCycleLedger::new();
    for &(start, duration) in transmissions {
        if ledger.request(start, duration)? == DutyDecision::Denied {
            return Ok(RegVerdict::Fail {
                rule: Rule::DutyCycle,
                detail: format!(
                    "{duration} s at t = {start} s would exceed 36 s in an hour ({:.1} s already scheduled)",
                    ledger.airtime_in_window(start + duration)
                ),
            });
        }
    }
    Ok(RegVerdict::Pass)
}

/// Spectrum of the default waveform, oversampled so the estimate spans
/// several 100 kHz slices on each side of the carrier.
fn emission_verdict(
    scheme: Scheme,
    fc: f64,
    ch: &TvChannel,
    cal: &nbwsd::regulation::CalibrationTable,
    gain_setting: f64,
) -> Result<Option<RegVerdict>> {
    let p = ModParams { sps: 32, ..ModParams::default_for(scheme) };
    let cfg = CampaignConfig { file_size: 2048, ..CampaignConfig::default_for(scheme) };
    let bits = bytes_to_bits(&load_payload(&cfg)?);
    let ps = avg_fft_power(&modulate(&bits, &p)?, 4096, 32)?.with_center(fc);
    match check_adjacent_emissions(&ps, ch, cal, gain_setting) {
        Ok(v) => Ok(Some(v)),
        Err(RegError::Coverage) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn report(name: &str, verdict: &RegVerdict) -> bool {
    println!("{name:<18} {verdict}");
    verdict.passed()
}

pub fn run(args: &RegcheckArgs) -> Result<ExitCode> {
    let cal = crate::load_calibration(args.calibration.as_deref())?;
    let (f_low, f_high) = args.channel.unwrap_or_else(|| channel_holding(args.fc));
    let ch = TvChannel {
        adjacent_low_vacant: args.low_vacant,
        adjacent_high_vacant: args.high_vacant,
        ..TvChannel::new(f_low, f_high)
    };
    ch.validate().map_err(|e| crate::UsageError(e.to_string()))?;
    let (power, gain_setting) = match (args.power_dbm, args.gain_setting) {
        (_, Some(g)) => (cal.gain_to_power(g)?, g),
        (p, None) => {
            let p = p.unwrap_or(12.6);
            // Only the emission check needs a gain setting.
            (p, cal.power_to_gain(p).unwrap_or(f64::NAN))
        }
    };
    println!(
        "carrier {:.4} MHz in {:.3}-{:.3} MHz, {power} dBm conducted, {} dBi antenna",
        args.fc / 1e6,
        f_low / 1e6,
        f_high / 1e6,
        args.gain_dbi
    );

    let mut ok = report("frequency", &check_center_frequency(args.fc, &ch));
    ok &= report("eirp", &check_eirp(power, args.gain_dbi));
    ok &= report("aggregate-power", &check_aggregate_power(&vec![power; args.subchannels]));
    if !args.transmissions.is_empty() {
        ok &= report("duty-cycle", &duty_verdict(&args.transmissions)?);
    }
    if let Some(scheme) = args.emissions {
        if gain_setting.is_nan() {
            return Err(RegError::OutOfCalibration(power).into());
        }
        match emission_verdict(scheme, args.fc, &ch, &cal, gain_setting)? {
            Some(v) => ok &= report("adjacent-emission", &v),
            None => println!("{:<18} not evaluated: the waveform does not reach the channel edge", "adjacent-emission"),
        }
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
