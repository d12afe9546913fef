//! Bits-to-baseband modulators: DBPSK and DQPSK with root-raised-cosine
//! shaping, GFSK and GMSK with a Gaussian frequency pulse.

mod taps;

pub use taps::{gaussian_taps, rrc_taps};

use crate::signal::{fir_same_real, SampleBlock, C64};
use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModError {
    #[error("invalid modulation parameters: {0}")]
    Config(String),
    #[error("DQPSK needs an even number of bits, got {0}")]
    OddBitCount(usize),
    #[error("no bits to modulate")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Dbpsk,
    Dqpsk,
    Gfsk,
    Gmsk,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Dbpsk, Scheme::Dqpsk, Scheme::Gfsk, Scheme::Gmsk];

    pub fn is_psk(self) -> bool {
        matches!(self, Scheme::Dbpsk | Scheme::Dqpsk)
    }

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Scheme::Dqpsk => 2,
            _ => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Dbpsk => "dbpsk",
            Scheme::Dqpsk => "dqpsk",
            Scheme::Gfsk => "gfsk",
            Scheme::Gmsk => "gmsk",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = ModError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dbpsk" => Ok(Scheme::Dbpsk),
            "dqpsk" => Ok(Scheme::Dqpsk),
            "gfsk" => Ok(Scheme::Gfsk),
            "gmsk" => Ok(Scheme::Gmsk),
            other => Err(ModError::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModParams {
    pub scheme: Scheme,
    /// Samples per symbol.
    pub sps: usize,
    pub rrc_rolloff: f64,
    pub gauss_bt: f64,
    pub mod_index: f64,
    /// Pulse-shaping filter span in symbols.
    pub filter_span: usize,
    pub symbol_rate: f64,
}

impl ModParams {
    /// Default profile for a scheme; each keeps its 99% occupied bandwidth
    /// inside a 100 kHz channel.
    pub fn default_for(scheme: Scheme) -> Self {
        match scheme {
            Scheme::Gmsk | Scheme::Gfsk => Self {
                scheme,
                sps: 4,
                rrc_rolloff: 0.35,
                gauss_bt: 0.3,
                mod_index: 0.5,
                filter_span: 4,
                symbol_rate: 98_000.0,
            },
            Scheme::Dbpsk => Self {
                scheme,
                sps: 4,
                rrc_rolloff: 0.35,
                gauss_bt: 0.3,
                mod_index: 0.5,
                filter_span: 11,
                symbol_rate: 64_000.0,
            },
            Scheme::Dqpsk => Self {
                scheme,
                sps: 4,
                rrc_rolloff: 0.35,
                gauss_bt: 0.3,
                mod_index: 0.5,
                filter_span: 11,
                symbol_rate: 49_000.0,
            },
        }
    }

    pub fn sample_rate(&self) -> f64 {
        self.sps as f64 * self.symbol_rate
    }

    pub fn bit_rate(&self) -> f64 {
        self.symbol_rate * self.scheme.bits_per_symbol() as f64
    }

    pub fn validate(&self) -> Result<(), ModError> {
        if self.sps < 2 {
            return Err(ModError::Config(format!("sps must be >= 2, got {}", self.sps)));
        }
        if !(self.symbol_rate.is_finite() && self.symbol_rate > 0.0) {
            return Err(ModError::Config(format!("bad symbol rate {}", self.symbol_rate)));
        }
        if self.filter_span < 1 {
            return Err(ModError::Config("filter span must be at least one symbol".into()));
        }
        if self.scheme.is_psk() {
            if !(self.rrc_rolloff > 0.0 && self.rrc_rolloff <= 1.0) {
                return Err(ModError::Config(format!("RRC rolloff {} outside (0, 1]", self.rrc_rolloff)));
            }
        } else {
            if !(self.gauss_bt > 0.0 && self.gauss_bt <= 1.0) {
                return Err(ModError::Config(format!("Gaussian BT {} outside (0, 1]", self.gauss_bt)));
            }
            if !(self.mod_index.is_finite() && self.mod_index > 0.0) {
                return Err(ModError::Config(format!("bad modulation index {}", self.mod_index)));
            }
            if self.scheme == Scheme::Gmsk && self.mod_index != 0.5 {
                return Err(ModError::Config("GMSK requires modulation index 0.5".into()));
            }
        }
        Ok(())
    }
}

/// `out[n] = (out[n-1] + in[n]) mod order`, with `out[-1] = 0`.
pub fn differential_encode(symbols: &[u8], order: u8) -> Vec<u8> {
    let mut prev = 0u8;
    symbols
        .iter()
        .map(|&s| {
            prev = (prev + s) % order;
            prev
        })
        .collect()
}

/// Inverse of [`differential_encode`]: `out[n] = (in[n] - in[n-1]) mod order`.
pub fn differential_decode(symbols: &[u8], order: u8) -> Vec<u8> {
    let mut prev = 0u8;
    symbols
        .iter()
        .map(|&s| {
            let d = (s + order - prev % order) % order;
            prev = s;
            d
        })
        .collect()
}

/// Gray map of a dibit to a phase-step index (units of 90 degrees):
/// 00 -> 0, 01 -> +90, 11 -> 180, 10 -> -90.
pub(crate) fn dibit_to_index(hi: u8, lo: u8) -> u8 {
    match (hi, lo) {
        (0, 0) => 0,
        (0, 1) => 1,
        (1, 1) => 2,
        _ => 3,
    }
}

pub(crate) fn index_to_dibit(index: u8) -> (u8, u8) {
    match index & 3 {
        0 => (0, 0),
        1 => (0, 1),
        2 => (1, 1),
        _ => (1, 0),
    }
}

/// Constellation point for a (differentially encoded) symbol index.
/// BPSK sits on the real axis, QPSK on the diagonals.
pub(crate) fn constellation_point(index: u8, order: u8) -> C64 {
    if order == 2 {
        if index == 0 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(-1.0, 0.0)
        }
    } else {
        C64::from_polar(1.0, FRAC_PI_4 + f64::from(index) * PI / 2.0)
    }
}

/// Symbol index per bit-group before differential encoding.
pub(crate) fn bits_to_indices(bits: &[u8], scheme: Scheme) -> Result<Vec<u8>, ModError> {
    match scheme {
        Scheme::Dqpsk => {
            if !bits.len().is_multiple_of(2) {
                return Err(ModError::OddBitCount(bits.len()));
            }
            Ok(bits.chunks(2).map(|d| dibit_to_index(d[0] & 1, d[1] & 1)).collect())
        }
        _ => Ok(bits.iter().map(|b| b & 1).collect()),
    }
}

/// A configured modulator; tap vectors are designed once at construction.
#[derive(Debug, Clone)]
pub struct Modulator {
    params: ModParams,
    taps: Vec<f64>,
}

impl Modulator {
    pub fn new(params: ModParams) -> Result<Self, ModError> {
        params.validate()?;
        let taps = if params.scheme.is_psk() {
            rrc_taps(params.rrc_rolloff, params.sps, params.filter_span)?
        } else {
            gaussian_taps(params.gauss_bt, params.sps, params.filter_span)?
        };
        Ok(Self { params, taps })
    }

    pub fn params(&self) -> &ModParams {
        &self.params
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Modulates `bits` into `symbols * sps` samples. Symbol `k` is centered
    /// on sample `k * sps`.
    pub fn modulate(&self, bits: &[u8]) -> Result<SampleBlock, ModError> {
        if bits.is_empty() {
            return Err(ModError::Empty);
        }
        let samples = if self.params.scheme.is_psk() {
            self.modulate_psk(bits)?
        } else {
            self.modulate_fsk(bits)
        };
        Ok(SampleBlock { samples, sample_rate: self.params.sample_rate() })
    }

    fn modulate_psk(&self, bits: &[u8]) -> Result<Vec<C64>, ModError> {
        let order = if self.params.scheme == Scheme::Dqpsk { 4 } else { 2 };
        let indices = differential_encode(&bits_to_indices(bits, self.params.scheme)?, order);
        let sps = self.params.sps;
        let n_out = indices.len() * sps;
        let half = (self.taps.len() - 1) / 2;
        let mut out = vec![C64::new(0.0, 0.0); n_out];
        // Scatter each symbol's pulse around its center sample.
        for (k, &idx) in indices.iter().enumerate() {
            let s = constellation_point(idx, order);
            let center = k * sps;
            let lo = center.saturating_sub(half);
            let hi = (center + half + 1).min(n_out);
            for (n, o) in out[lo..hi].iter_mut().enumerate() {
                let tap = self.taps[lo + n + half - center];
                *o += s * tap;
            }
        }
        Ok(out)
    }

    fn modulate_fsk(&self, bits: &[u8]) -> Vec<C64> {
        let sps = self.params.sps;
        let nrz: Vec<f64> = bits
            .iter()
            .flat_map(|&b| std::iter::repeat_n(if b & 1 == 1 { 1.0 } else { -1.0 }, sps))
            .collect();
        let freq = fir_same_real(&nrz, &self.taps);
        // A full symbol at +1 advances the phase by pi * h.
        let step = PI * self.params.mod_index / sps as f64;
        let mut phase = 0.0f64;
        freq.iter()
            .map(|f| {
                phase += step * f;
                if phase > PI {
                    phase -= 2.0 * PI;
                } else if phase < -PI {
                    phase += 2.0 * PI;
                }
                C64::from_polar(1.0, phase)
            })
            .collect()
    }
}

/// One-shot modulation.
pub fn modulate(bits: &[u8], params: &ModParams) -> Result<SampleBlock, ModError> {
    Modulator::new(params.clone())?.modulate(bits)
}
