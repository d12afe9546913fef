use super::{CalibrationTable, RegError, RegVerdict, Rule, TvChannel, SUBCHANNEL_SPACING_HZ};
use crate::spectral::PowerSpectrum;

/// Maximum power in any 100 kHz slice outside the TV channel.
pub const ADJACENT_LIMIT_DBM: f64 = -42.8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionSlice {
    pub f_low: f64,
    pub f_high: f64,
    pub power_dbm: f64,
}

fn sum_between(ps: &PowerSpectrum, f_lo: f64, f_hi: f64) -> f64 {
    ps.bins_in(f_lo, f_hi).map(|r| ps.bins[r].iter().sum()).unwrap_or(0.0)
}

/// Absolute power in every full 100 kHz slice of `ps` lying outside
/// `[ch.f_low, ch.f_high]`. The relative spectrum is scaled so the 100 kHz
/// subchannel around `ps.center_freq` carries the calibrated power at
/// `gain_setting`.
pub fn adjacent_slices(
    ps: &PowerSpectrum,
    ch: &TvChannel,
    cal: &CalibrationTable,
    gain_setting: f64,
) -> Result<Vec<EmissionSlice>, RegError> {
    ch.validate()?;
    let half = SUBCHANNEL_SPACING_HZ / 2.0;
    let reference = sum_between(ps, ps.center_freq - half, ps.center_freq + half);
    if !(reference > 0.0) {
        return Err(RegError::Config("spectrum has no power in the transmit subchannel".into()));
    }
    let scale_mw = 10f64.powf(cal.gain_to_power(gain_setting)? / 10.0) / reference;
    // Span covered by whole bins.
    let bw = ps.bin_width();
    let span_lo = ps.bin_frequency(0) - bw / 2.0;
    let span_hi = ps.bin_frequency(ps.fft_size - 1) + bw / 2.0;
    let to_dbm = |p: f64| if p > 0.0 { 10.0 * (p * scale_mw).log10() } else { f64::NEG_INFINITY };

    let mut slices = Vec::new();
    let mut lo = ch.f_high;
    while lo + SUBCHANNEL_SPACING_HZ <= span_hi + 1e-6 {
        let hi = lo + SUBCHANNEL_SPACING_HZ;
        slices.push(EmissionSlice { f_low: lo, f_high: hi, power_dbm: to_dbm(sum_between(ps, lo, hi)) });
        lo = hi;
    }
    let mut hi = ch.f_low;
    while hi - SUBCHANNEL_SPACING_HZ >= span_lo - 1e-6 {
        let lo = hi - SUBCHANNEL_SPACING_HZ;
        slices.push(EmissionSlice { f_low: lo, f_high: hi, power_dbm: to_dbm(sum_between(ps, lo, hi)) });
        hi = lo;
    }
    if slices.is_empty() {
        return Err(RegError::Coverage);
    }
    slices.sort_by(|a, b| a.f_low.total_cmp(&b.f_low));
    Ok(slices)
}

/// Passes iff every out-of-channel 100 kHz slice is at or below -42.8 dBm.
pub fn check_adjacent_emissions(
    ps: &PowerSpectrum,
    ch: &TvChannel,
    cal: &CalibrationTable,
    gain_setting: f64,
) -> Result<RegVerdict, RegError> {
    let slices = adjacent_slices(ps, ch, cal, gain_setting)?;
    let worst = slices.iter().max_by(|a, b| a.power_dbm.total_cmp(&b.power_dbm)).expect("non-empty");
    if worst.power_dbm <= ADJACENT_LIMIT_DBM + 1e-9 {
        Ok(RegVerdict::Pass)
    } else {
        Ok(RegVerdict::Fail {
            rule: Rule::AdjacentEmission,
            detail: format!(
                "{:.2} dBm in {:.1}-{:.1} kHz offset slice {:.3}-{:.3} MHz exceeds {ADJACENT_LIMIT_DBM} dBm",
                worst.power_dbm,
                (worst.f_low - ps.center_freq) / 1e3,
                (worst.f_high - ps.center_freq) / 1e3,
                worst.f_low / 1e6,
                worst.f_high / 1e6
            ),
        })
    }
}
