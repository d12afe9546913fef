//! Seedable baseband channel: gain, static multipath, carrier offset with
//! optional Wiener phase noise, and additive white Gaussian noise.

use crate::signal::{mean_power, SampleBlock, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use thiserror::Error;

/// Bandwidth over which a profile's SNR is defined.
pub const NOISE_BANDWIDTH_HZ: f64 = 100e3;

/// Stream used for the phase-noise walk, kept apart from the AWGN stream so
/// toggling one impairment does not reshuffle the other.
const PHASE_NOISE_STREAM: u64 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("input has zero power; cannot scale noise to an SNR")]
    CannotScale,
    #[error("multipath tap vector is empty")]
    EmptyTaps,
    #[error("invalid channel profile: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    /// In-band SNR over [`NOISE_BANDWIDTH_HZ`]; `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub cfo_hz: f64,
    pub phase0: f64,
    pub taps: Vec<C64>,
    pub gain_db: f64,
    /// Standard deviation of the per-sample phase increment of a Wiener
    /// phase-noise process, radians. Zero disables it.
    pub phase_noise_std: f64,
    pub seed: u64,
}

impl Default for ChannelProfile {
    fn default() -> Self {
        Self::ideal()
    }
}

impl ChannelProfile {
    /// No impairments at all.
    pub fn ideal() -> Self {
        Self {
            snr_db: f64::INFINITY,
            cfo_hz: 0.0,
            phase0: 0.0,
            taps: vec![C64::new(1.0, 0.0)],
            gain_db: 0.0,
            phase_noise_std: 0.0,
            seed: 0,
        }
    }

    pub fn awgn(snr_db: f64, seed: u64) -> Self {
        Self { snr_db, seed, ..Self::ideal() }
    }

    pub fn validate(&self, sample_rate: f64) -> Result<(), ChannelError> {
        if self.taps.is_empty() {
            return Err(ChannelError::EmptyTaps);
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(ChannelError::Config(format!("bad SNR {}", self.snr_db)));
        }
        if !(self.cfo_hz.abs() < sample_rate / 2.0) {
            return Err(ChannelError::Config(format!(
                "carrier offset {} Hz outside +-{} Hz",
                self.cfo_hz,
                sample_rate / 2.0
            )));
        }
        if !(self.phase_noise_std >= 0.0 && self.phase_noise_std.is_finite()) {
            return Err(ChannelError::Config(format!("bad phase-noise std {}", self.phase_noise_std)));
        }
        if !self.gain_db.is_finite() || !self.phase0.is_finite() {
            return Err(ChannelError::Config("gain and phase must be finite".into()));
        }
        Ok(())
    }
}

fn gaussian_noise(n: usize, variance: f64, rng: &mut ChaCha8Rng) -> impl Iterator<Item = C64> + '_ {
    let sigma = (variance / 2.0).sqrt();
    (0..n).map(move |_| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * sigma, im * sigma)
    })
}

fn add_noise(x: &SampleBlock, variance: f64, seed: u64) -> SampleBlock {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = gaussian_noise(x.len(), variance, &mut rng);
    x.with_samples(x.samples.iter().zip(noise).map(|(s, n)| s + n).collect())
}

/// Adds complex white noise so that full-band signal power over noise power
/// equals `10^(snr_db/10)`.
pub fn apply_awgn(x: &SampleBlock, snr_db: f64, seed: u64) -> Result<SampleBlock, ChannelError> {
    if snr_db == f64::INFINITY {
        return Ok(x.clone());
    }
    let p = x.mean_power();
    if !(p > 0.0) {
        return Err(ChannelError::CannotScale);
    }
    Ok(add_noise(x, p / 10f64.powf(snr_db / 10.0), seed))
}

/// `y[n] = x[n] * exp(j(2 pi cfo n / fs + phase0))`.
pub fn apply_cfo(x: &SampleBlock, cfo_hz: f64, phase0: f64) -> SampleBlock {
    let w = 2.0 * PI * cfo_hz / x.sample_rate;
    x.with_samples(
        x.samples
            .iter()
            .enumerate()
            .map(|(n, s)| s * C64::from_polar(1.0, (w * n as f64 + phase0).rem_euclid(2.0 * PI)))
            .collect(),
    )
}

/// Causal convolution with `taps`, truncated to the input length.
pub fn apply_multipath(x: &SampleBlock, taps: &[C64]) -> Result<SampleBlock, ChannelError> {
    if taps.is_empty() {
        return Err(ChannelError::EmptyTaps);
    }
    if taps.len() == 1 && taps[0] == C64::new(1.0, 0.0) {
        return Ok(x.clone());
    }
    let out = (0..x.len())
        .map(|n| {
            taps.iter()
                .enumerate()
                .take(n + 1)
                .map(|(k, h)| h * x.samples[n - k])
                .sum()
        })
        .collect();
    Ok(x.with_samples(out))
}

/// Per-sample Wiener step giving an oscillator of 3 dB `linewidth_hz`
/// (`2 pi linewidth / fs` radians squared per sample). Lets schemes with
/// different sample rates see the same physical oscillator.
pub fn phase_noise_std_for_linewidth(linewidth_hz: f64, sample_rate: f64) -> f64 {
    (2.0 * PI * linewidth_hz / sample_rate).sqrt()
}

/// Multiplies by `exp(j phi[n])` where `phi` is a random walk with
/// per-sample increments of standard deviation `std`.
pub fn apply_phase_noise(x: &SampleBlock, std: f64, seed: u64) -> SampleBlock {
    if std == 0.0 {
        return x.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PHASE_NOISE_STREAM);
    let mut phi = 0.0f64;
    x.with_samples(
        x.samples
            .iter()
            .map(|s| {
                let step: f64 = rng.sample(StandardNormal);
                phi = (phi + std * step).rem_euclid(2.0 * PI);
                s * C64::from_polar(1.0, phi)
            })
            .collect(),
    )
}

/// Applies the whole profile in the order gain, multipath, carrier offset
/// and phase noise, then noise. Signal power for the SNR is measured over the
/// whole block.
pub fn apply_channel(x: &SampleBlock, profile: &ChannelProfile) -> Result<SampleBlock, ChannelError> {
    apply_channel_burst(x, profile, x.len())
}

/// As [`apply_channel`], but the signal power that sets the noise level is
/// measured over the first `burst_len` samples only, so trailing silence in
/// the capture does not dilute it.
pub fn apply_channel_burst(
    x: &SampleBlock,
    profile: &ChannelProfile,
    burst_len: usize,
) -> Result<SampleBlock, ChannelError> {
    profile.validate(x.sample_rate)?;
    let g = 10f64.powf(profile.gain_db / 20.0);
    let y = x.with_samples(x.samples.iter().map(|s| s * g).collect());
    let y = apply_multipath(&y, &profile.taps)?;
    let y = apply_cfo(&y, profile.cfo_hz, profile.phase0);
    let y = apply_phase_noise(&y, profile.phase_noise_std, profile.seed);
    if profile.snr_db == f64::INFINITY {
        return Ok(y);
    }
    let p = mean_power(&y.samples[..burst_len.min(y.len())]);
    if !(p > 0.0) {
        return Err(ChannelError::CannotScale);
    }
    // In-band SNR: only the NOISE_BANDWIDTH_HZ share of white noise counts.
    let band_ratio = y.sample_rate / NOISE_BANDWIDTH_HZ;
    let variance = p * band_ratio / 10f64.powf(profile.snr_db / 10.0);
    Ok(add_noise(&y, variance, profile.seed))
}
