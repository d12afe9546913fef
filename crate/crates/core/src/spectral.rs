//! Averaged FFT power spectra and the channel-power, occupied-bandwidth and
//! adjacent-channel measurements built on them.

use crate::signal::{SampleBlock, C64};
use rustfft::FftPlanner;
use std::ops::RangeInclusive;
use thiserror::Error;

/// Floor used by [`to_db`] for empty bins.
pub const DB_FLOOR: f64 = -200.0;
pub const DEFAULT_FFT_SIZE: usize = 1024;
pub const DEFAULT_ITERATIONS: usize = 100;

/// Bandwidth both sides of an ACP ratio are normalized to.
const ACP_REFERENCE_BW: f64 = 100e3;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("need {needed} samples for the requested averaging, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("bin range {first}..={last} invalid for {size} bins")]
    BinRange { first: usize, last: usize, size: usize },
    #[error("spectrum has no power")]
    ZeroPower,
    #[error("invalid spectral parameter: {0}")]
    Config(String),
}

/// Average bin powers, stored with DC in the middle: bin `k` sits at
/// `center_freq + (k - N/2) * sample_rate / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub bins: Vec<f64>,
    pub fft_size: usize,
    pub iterations: usize,
    pub sample_rate: f64,
    pub center_freq: f64,
}

impl PowerSpectrum {
    pub fn bin_width(&self) -> f64 {
        self.sample_rate / self.fft_size as f64
    }

    pub fn bin_frequency(&self, k: usize) -> f64 {
        self.center_freq + (k as f64 - (self.fft_size / 2) as f64) * self.bin_width()
    }

    /// Nearest bin to an absolute frequency, if it lies inside the span.
    pub fn bin_of(&self, f: f64) -> Option<usize> {
        let k = ((f - self.center_freq) / self.bin_width()).round() + (self.fft_size / 2) as f64;
        (k >= 0.0 && k < self.fft_size as f64).then_some(k as usize)
    }

    /// Bins whose center frequency lies in `[f_lo, f_hi)`.
    pub fn bins_in(&self, f_lo: f64, f_hi: f64) -> Option<RangeInclusive<usize>> {
        let ks: Vec<usize> = (0..self.fft_size)
            .filter(|&k| {
                let f = self.bin_frequency(k);
                f >= f_lo && f < f_hi
            })
            .collect();
        Some(*ks.first()?..=*ks.last()?)
    }

    pub fn total_power(&self) -> f64 {
        self.bins.iter().sum()
    }

    pub fn with_center(mut self, center_freq: f64) -> Self {
        self.center_freq = center_freq;
        self
    }
}

/// `P_k = sum_i |Y_i(k)|^2 / (M N^2)` over `M` consecutive, non-overlapping,
/// untapered windows of length `N` taken from the start of `x`.
pub fn avg_fft_power(x: &SampleBlock, fft_size: usize, iterations: usize) -> Result<PowerSpectrum, SpectralError> {
    if fft_size == 0 || iterations == 0 {
        return Err(SpectralError::Config("FFT size and iteration count must be positive".into()));
    }
    let needed = fft_size * iterations;
    if x.len() < needed {
        return Err(SpectralError::InsufficientSamples { needed, got: x.len() });
    }
    let fft = FftPlanner::new().plan_fft_forward(fft_size);
    let mut acc = vec![0.0f64; fft_size];
    let mut buf: Vec<C64> = Vec::with_capacity(fft_size);
    for seg in x.samples[..needed].chunks_exact(fft_size) {
        buf.clear();
        buf.extend_from_slice(seg);
        fft.process(&mut buf);
        for (a, y) in acc.iter_mut().zip(&buf) {
            *a += y.norm_sqr();
        }
    }
    let scale = 1.0 / (iterations as f64 * (fft_size * fft_size) as f64);
    let half = fft_size / 2;
    // fftshift: natural bin (k + N/2) mod N goes to position k.
    let bins = (0..fft_size).map(|k| acc[(k + fft_size - half) % fft_size] * scale).collect();
    Ok(PowerSpectrum { bins, fft_size, iterations, sample_rate: x.sample_rate, center_freq: 0.0 })
}

/// `P_s = sum_{k = first..=last} P_k`.
pub fn channel_power(ps: &PowerSpectrum, n_first: usize, n_last: usize) -> Result<f64, SpectralError> {
    if n_first > n_last || n_last >= ps.bins.len() {
        return Err(SpectralError::BinRange { first: n_first, last: n_last, size: ps.bins.len() });
    }
    Ok(ps.bins[n_first..=n_last].iter().sum())
}

pub fn to_db(ps: &PowerSpectrum) -> Vec<f64> {
    ps.bins.iter().map(|&p| power_db(p)).collect()
}

fn power_db(p: f64) -> f64 {
    if p > 0.0 {
        (10.0 * p.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

/// Width between the frequencies below and above which `(1 - fraction)/2`
/// of the total power lies. Counted in whole bins.
pub fn occupied_bandwidth(ps: &PowerSpectrum, fraction: f64) -> Result<f64, SpectralError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(SpectralError::Config(format!("fraction {fraction} outside (0, 1]")));
    }
    let total = ps.total_power();
    if !(total > 0.0) {
        return Err(SpectralError::ZeroPower);
    }
    let tail = (1.0 - fraction) / 2.0 * total;
    // Tolerance so that exact fractions of uniform mass are not lost to rounding.
    let eps = 1e-12 * total;
    let mut acc = 0.0;
    let mut lo = 0;
    for (k, p) in ps.bins.iter().enumerate() {
        if acc + p > tail + eps {
            lo = k;
            break;
        }
        acc += p;
    }
    acc = 0.0;
    let mut hi = ps.bins.len() - 1;
    for (k, p) in ps.bins.iter().enumerate().rev() {
        if acc + p > tail + eps {
            hi = k;
            break;
        }
        acc += p;
    }
    Ok((hi.saturating_sub(lo) + 1) as f64 * ps.bin_width())
}

/// Adjacent-to-in-band power ratio in dB, with each side normalized to
/// power per 100 kHz.
pub fn adjacent_channel_power(
    ps: &PowerSpectrum,
    in_band: RangeInclusive<usize>,
    adj_band: RangeInclusive<usize>,
) -> Result<f64, SpectralError> {
    if in_band.start() <= adj_band.end() && adj_band.start() <= in_band.end() {
        return Err(SpectralError::Config("in-band and adjacent ranges overlap".into()));
    }
    let p_in = channel_power(ps, *in_band.start(), *in_band.end())?;
    let p_adj = channel_power(ps, *adj_band.start(), *adj_band.end())?;
    if !(p_in > 0.0) {
        return Err(SpectralError::ZeroPower);
    }
    let per_ref = |p: f64, r: &RangeInclusive<usize>| p / ((r.end() - r.start() + 1) as f64 * ps.bin_width()) * ACP_REFERENCE_BW;
    Ok(power_db(per_ref(p_adj, &adj_band) / per_ref(p_in, &in_band)))
}
