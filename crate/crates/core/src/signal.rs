//! Complex baseband sample blocks, bit helpers and FIR convolution.

use num_complex::Complex64;
use thiserror::Error;

/// Complex baseband sample.
pub type C64 = Complex64;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("sample rate must be positive and finite, got {0}")]
    BadSampleRate(f64),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
}

/// A run of complex baseband samples at a known sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlock {
    pub samples: Vec<C64>,
    pub sample_rate: f64,
}

impl SampleBlock {
    /// Builds a block, rejecting non-finite samples and bad sample rates.
    pub fn new(samples: Vec<C64>, sample_rate: f64) -> Result<Self, SignalError> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(SignalError::BadSampleRate(sample_rate));
        }
        if let Some(i) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(SignalError::NonFinite(i));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean `|x|^2` over the block, zero for an empty block.
    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }

    /// Same sample rate, new samples.
    pub fn with_samples(&self, samples: Vec<C64>) -> Self {
        Self { samples, sample_rate: self.sample_rate }
    }
}

pub fn mean_power(x: &[C64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|s| s.norm_sqr()).sum::<f64>() / x.len() as f64
}

/// Unpacks bytes into bits (one `u8` per bit, value 0 or 1), most significant bit first.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    let mut bits = Vec::with_capacity(bytes.len() * 8);
    for &b in bytes {
        for i in (0..8).rev() {
            bits.push((b >> i) & 1);
        }
    }
    bits
}

/// Packs MSB-first bits into bytes. A trailing partial byte is zero-filled.
pub fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | ((b & 1) << (7 - i)))
        })
        .collect()
}

/// Pushes the low `width` bits of `value`, MSB first.
pub(crate) fn push_bits(out: &mut Vec<u8>, value: u64, width: u32) {
    for i in (0..width).rev() {
        out.push(((value >> i) & 1) as u8);
    }
}

/// Reads `width` MSB-first bits as an integer.
pub(crate) fn read_bits(bits: &[u8], width: usize) -> u64 {
    bits[..width].iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b & 1))
}

/// Linear-phase FIR filtering with the group delay removed: output sample `n`
/// is aligned with input sample `n` (`y[n] = sum_k h[k] x[n + d - k]`,
/// `d = (len - 1) / 2`). Output length equals input length.
pub fn fir_same(x: &[C64], taps: &[f64]) -> Vec<C64> {
    let n = x.len();
    let l = taps.len();
    if l == 0 || n == 0 {
        return vec![C64::new(0.0, 0.0); n];
    }
    let d = (l - 1) / 2;
    let rev: Vec<f64> = taps.iter().rev().copied().collect();
    let mut y = vec![C64::new(0.0, 0.0); n];
    for (i, out) in y.iter_mut().enumerate() {
        // Input index for reversed tap j is i + d - (l - 1) + j.
        let base = i as isize + d as isize - (l as isize - 1);
        let j0 = (-base).max(0) as usize;
        let j1 = ((n as isize - base).min(l as isize)).max(0) as usize;
        if j0 >= j1 {
            continue;
        }
        let xs = &x[(base + j0 as isize) as usize..(base + j1 as isize) as usize];
        let (mut re, mut im) = (0.0, 0.0);
        for (h, s) in rev[j0..j1].iter().zip(xs) {
            re += h * s.re;
            im += h * s.im;
        }
        *out = C64::new(re, im);
    }
    y
}

/// Real-input variant of [`fir_same`].
pub fn fir_same_real(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let n = x.len();
    let l = taps.len();
    if l == 0 || n == 0 {
        return vec![0.0; n];
    }
    let d = (l - 1) / 2;
    let rev: Vec<f64> = taps.iter().rev().copied().collect();
    let mut y = vec![0.0; n];
    for (i, out) in y.iter_mut().enumerate() {
        let base = i as isize + d as isize - (l as isize - 1);
        let j0 = (-base).max(0) as usize;
        let j1 = ((n as isize - base).min(l as isize)).max(0) as usize;
        if j0 >= j1 {
            continue;
        }
        let xs = &x[(base + j0 as isize) as usize..(base + j1 as isize) as usize];
        *out = rev[j0..j1].iter().zip(xs).map(|(h, s)| h * s).sum();
    }
    y
}

/// Frequency response of real taps at a normalized frequency (cycles/sample).
pub fn freq_response(taps: &[f64], f_norm: f64) -> C64 {
    taps.iter()
        .enumerate()
        .map(|(k, &h)| C64::from_polar(h, -2.0 * std::f64::consts::PI * f_norm * k as f64))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fir_same_naive(x: &[C64], h: &[f64]) -> Vec<C64> {
        let d = (h.len() - 1) / 2;
        (0..x.len())
            .map(|n| {
                let mut acc = C64::new(0.0, 0.0);
                for (k, &hk) in h.iter().enumerate() {
                    let idx = n as isize + d as isize - k as isize;
                    if idx >= 0 && (idx as usize) < x.len() {
                        acc += x[idx as usize] * hk;
                    }
                }
                acc
            })
            .collect()
    }

    #[test]
    fn fir_same_matches_naive() {
        let x: Vec<C64> = (0..37).map(|i| C64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        for l in [1usize, 2, 5, 8, 45, 60] {
            let h: Vec<f64> = (0..l).map(|k| 1.0 / (k as f64 + 1.5)).collect();
            let a = fir_same(&x, &h);
            let b = fir_same_naive(&x, &h);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).norm() < 1e-12, "len {l}");
            }
        }
    }

    #[test]
    fn block_rejects_nan_and_bad_rate() {
        assert!(SampleBlock::new(vec![C64::new(f64::NAN, 0.0)], 1.0).is_err());
        assert!(SampleBlock::new(vec![], 0.0).is_err());
        assert!(SampleBlock::new(vec![], 1.0).is_ok());
    }

    proptest! {
        #[test]
        fn bit_packing_round_trips(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            prop_assert_eq!(bits_to_bytes(&bytes_to_bits(&bytes)), bytes);
        }
    }
}
