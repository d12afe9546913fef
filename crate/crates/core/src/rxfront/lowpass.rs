use super::RxError;
use crate::signal::{fir_same, SampleBlock};
use std::f64::consts::PI;

/// Design stopband attenuation; leaves margin over the 60 dB requirement.
const ATTENUATION_DB: f64 = 70.0;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc lowpass. `cutoff` is the passband edge and the
/// stopband starts at `cutoff + transition`. Unit DC gain, odd length.
pub fn design_lowpass(cutoff: f64, transition: f64, sample_rate: f64) -> Result<Vec<f64>, RxError> {
    let nyquist = sample_rate / 2.0;
    if !(cutoff > 0.0 && cutoff < nyquist) {
        return Err(RxError::Config(format!("cutoff {cutoff} Hz outside (0, {nyquist}) Hz")));
    }
    if !(transition > 0.0 && transition.is_finite()) {
        return Err(RxError::Config(format!("bad transition width {transition} Hz")));
    }
    let dw = 2.0 * PI * transition / sample_rate;
    let mut n = ((ATTENUATION_DB - 7.95) / (2.285 * dw)).ceil() as usize + 1;
    if n.is_multiple_of(2) {
        n += 1;
    }
    let beta = 0.1102 * (ATTENUATION_DB - 8.7);
    let fc = (cutoff + transition / 2.0) / sample_rate;
    let m = (n - 1) as f64 / 2.0;
    let i0_beta = bessel_i0(beta);
    let mut taps: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 - m;
            let sinc = if t == 0.0 { 2.0 * fc } else { (2.0 * PI * fc * t).sin() / (PI * t) };
            let r = t / m;
            let w = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
            sinc * w
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|h| *h /= sum);
    Ok(taps)
}

pub fn fir_lowpass(x: &SampleBlock, cutoff: f64, transition: f64) -> Result<SampleBlock, RxError> {
    let taps = design_lowpass(cutoff, transition, x.sample_rate)?;
    Ok(x.with_samples(fir_same(&x.samples, &taps)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::C64;

    /// DFT magnitude of the taps at `f` Hz, in dB.
    fn response_db(taps: &[f64], f: f64, fs: f64) -> f64 {
        let h: C64 = taps
            .iter()
            .enumerate()
            .map(|(k, &t)| C64::from_polar(t, -2.0 * PI * f / fs * k as f64))
            .sum();
        20.0 * h.norm().log10()
    }

    #[test]
    fn passband_and_stopband() {
        for &(cutoff, transition, fs) in &[(50e3, 25e3, 392e3), (43.2e3, 16e3, 256e3), (10e3, 5e3, 100e3)] {
            let taps = design_lowpass(cutoff, transition, fs).unwrap();
            assert!(response_db(&taps, 0.5 * cutoff, fs).abs() < 0.1);
            assert!(response_db(&taps, cutoff, fs).abs() < 0.1);
            let stop = cutoff + 2.0 * transition;
            if stop < fs / 2.0 {
                assert!(response_db(&taps, stop, fs) <= -60.0);
            }
            assert!(response_db(&taps, cutoff + transition, fs) <= -60.0);
        }
    }

    #[test]
    fn dc_unchanged_and_tone_preserved() {
        let fs = 392e3;
        let dc = SampleBlock::new(vec![C64::new(0.7, -0.2); 2000], fs).unwrap();
        let y = fir_lowpass(&dc, 50e3, 25e3).unwrap();
        for s in &y.samples[200..1800] {
            assert!((s - C64::new(0.7, -0.2)).norm() < 1e-9);
        }
        let f = 25e3;
        let tone: Vec<C64> = (0..4000).map(|n| C64::from_polar(1.0, 2.0 * PI * f * n as f64 / fs)).collect();
        let y = fir_lowpass(&SampleBlock::new(tone, fs).unwrap(), 50e3, 25e3).unwrap();
        for s in &y.samples[500..3500] {
            assert!((20.0 * s.norm().log10()).abs() < 0.1);
        }
    }

    #[test]
    fn cutoff_at_nyquist_rejected() {
        assert!(design_lowpass(200e3, 10e3, 400e3).is_err());
        assert!(design_lowpass(0.0, 10e3, 400e3).is_err());
    }
}
