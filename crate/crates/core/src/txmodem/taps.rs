//! Pulse-shaping filter design.

use super::ModError;
use std::f64::consts::PI;

/// Number of taps for `span` symbols at `sps`, forced odd so a center tap exists.
fn odd_len(sps: usize, span: usize) -> usize {
    let n = sps * span;
    if n.is_multiple_of(2) {
        n + 1
    } else {
        n
    }
}

/// Root-raised-cosine impulse response at `t` symbol periods.
pub(crate) fn rrc_impulse(alpha: f64, t: f64) -> f64 {
    if t.abs() < 1e-12 {
        return 1.0 - alpha + 4.0 * alpha / PI;
    }
    let singular = 1.0 / (4.0 * alpha);
    if (t.abs() - singular).abs() < 1e-9 {
        let a = PI / (4.0 * alpha);
        return alpha / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - alpha)).sin() + 4.0 * alpha * t * (PI * t * (1.0 + alpha)).cos();
    let den = PI * t * (1.0 - (4.0 * alpha * t).powi(2));
    num / den
}

/// Root-raised-cosine taps normalized to unit energy, so a TX/RX pair of these
/// filters has unit gain at the symbol centers.
pub fn rrc_taps(rolloff: f64, sps: usize, span: usize) -> Result<Vec<f64>, ModError> {
    if !(rolloff > 0.0 && rolloff <= 1.0) {
        return Err(ModError::Config(format!("RRC rolloff {rolloff} outside (0, 1]")));
    }
    if sps < 1 || span < 1 {
        return Err(ModError::Config("RRC needs sps >= 1 and span >= 1".into()));
    }
    let n = odd_len(sps, span);
    let center = (n - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = (0..n)
        .map(|i| rrc_impulse(rolloff, (i as f64 - center) / sps as f64))
        .collect();
    let energy = taps.iter().map(|h| h * h).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|h| *h /= energy);
    Ok(taps)
}

/// Sampled Gaussian pulse with 3 dB bandwidth `bt * symbol_rate`, normalized to unit sum.
pub fn gaussian_taps(bt: f64, sps: usize, span: usize) -> Result<Vec<f64>, ModError> {
    if !(bt > 0.0 && bt <= 1.0) {
        return Err(ModError::Config(format!("Gaussian BT {bt} outside (0, 1]")));
    }
    if sps < 1 || span < 1 {
        return Err(ModError::Config("Gaussian filter needs sps >= 1 and span >= 1".into()));
    }
    // H(f) = exp(-(2 pi f sigma)^2 / 2) is 3 dB down at f = BT.
    let sigma = 2f64.ln().sqrt() / (2.0 * PI * bt);
    let n = odd_len(sps, span);
    let center = (n - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = (0..n)
        .map(|i| {
            let t = (i as f64 - center) / sps as f64;
            (-t * t / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|h| *h /= sum);
    Ok(taps)
}
