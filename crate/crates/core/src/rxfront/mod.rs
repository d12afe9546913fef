//! Receiver front end: gain control, channel filtering, symbol timing,
//! blind equalization, carrier recovery and the per-scheme detectors.

mod agc;
mod cma;
mod costas;
mod fsk;
mod lowpass;
mod timing;

pub use agc::{agc, Agc};
pub use cma::{cma_equalize, CmaEqualizer};
pub use costas::{costas_loop, CostasLoop};
pub use fsk::quadrature_demod;
pub use lowpass::{design_lowpass, fir_lowpass};
pub use timing::{lock_metric, symbol_sync, SymbolSync, LOCK_THRESHOLD};

use crate::signal::{SampleBlock, C64};
use crate::txmodem::{differential_decode, index_to_dibit, rrc_taps, ModError, ModParams, Scheme};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RxError {
    #[error("invalid receiver configuration: {0}")]
    Config(String),
    #[error("symbol synchronizer never locked")]
    NoLock,
    #[error("equalizer diverged")]
    Diverged,
}

impl From<ModError> for RxError {
    fn from(e: ModError) -> Self {
        RxError::Config(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncConfig {
    pub agc_reference: f64,
    pub agc_rate: f64,
    /// Lowpass passband edge, Hz.
    pub lpf_cutoff: f64,
    pub lpf_transition: f64,
    pub timing_loop_bw: f64,
    pub cma_taps: usize,
    pub cma_mu: f64,
    pub costas_loop_bw: f64,
    /// 2 for DBPSK, 4 for DQPSK. Unused by the FSK chain.
    pub costas_order: u8,
}

impl SyncConfig {
    /// Receiver defaults matched to a modulation profile. The lowpass passes
    /// the occupied band of the signal: `(1 + rolloff) * Rs / 2` for PSK and
    /// half the 100 kHz channel for the FSK schemes.
    pub fn default_for(p: &ModParams) -> Self {
        let (lpf_cutoff, lpf_transition) = if p.scheme.is_psk() {
            ((1.0 + p.rrc_rolloff) * p.symbol_rate / 2.0, 0.25 * p.symbol_rate)
        } else {
            (50e3_f64.min(0.4 * p.sample_rate()), 25e3_f64.min(0.05 * p.sample_rate()))
        };
        Self {
            agc_reference: 1.0,
            agc_rate: 1e-3,
            lpf_cutoff,
            lpf_transition,
            timing_loop_bw: 0.045,
            cma_taps: 11,
            cma_mu: 1e-3,
            costas_loop_bw: 0.02,
            costas_order: if p.scheme == Scheme::Dqpsk { 4 } else { 2 },
        }
    }

    pub fn validate(&self) -> Result<(), RxError> {
        let in_unit = |v: f64| v > 0.0 && v < 0.1;
        if !(self.agc_reference > 0.0 && self.agc_reference.is_finite()) {
            return Err(RxError::Config(format!("AGC reference {} must be positive", self.agc_reference)));
        }
        if !(self.agc_rate > 0.0 && self.agc_rate < 1.0) {
            return Err(RxError::Config(format!("AGC rate {} outside (0, 1)", self.agc_rate)));
        }
        if !in_unit(self.timing_loop_bw) || !in_unit(self.costas_loop_bw) {
            return Err(RxError::Config("loop bandwidths must lie in (0, 0.1)".into()));
        }
        if !in_unit(self.cma_mu) {
            return Err(RxError::Config(format!("CMA step size {} outside (0, 0.1)", self.cma_mu)));
        }
        if self.cma_taps.is_multiple_of(2) {
            return Err(RxError::Config(format!("CMA tap count must be odd, got {}", self.cma_taps)));
        }
        if self.costas_order != 2 && self.costas_order != 4 {
            return Err(RxError::Config(format!("Costas order must be 2 or 4, got {}", self.costas_order)));
        }
        Ok(())
    }
}

/// Quadrant slicer for the diagonal QPSK constellation, returning the
/// index whose point is `pi/4 + k*pi/2`.
fn qpsk_index(s: C64) -> u8 {
    match (s.re >= 0.0, s.im >= 0.0) {
        (true, true) => 0,
        (false, true) => 1,
        (false, false) => 2,
        (true, false) => 3,
    }
}

fn demodulate_psk(x: &SampleBlock, p: &ModParams, s: &SyncConfig) -> Result<Vec<u8>, RxError> {
    let matched = rrc_taps(p.rrc_rolloff, p.sps, p.filter_span)?;
    let symbols = SymbolSync::new(p.sps, matched, s.timing_loop_bw)?.run(&x.samples)?;
    let equalized = CmaEqualizer::new(s.cma_taps, s.cma_mu)?.equalize(&symbols)?;
    let derotated = CostasLoop::new(s.costas_order, s.costas_loop_bw)?.process(&equalized);
    if p.scheme == Scheme::Dqpsk {
        let idx: Vec<u8> = derotated.iter().map(|&v| qpsk_index(v)).collect();
        Ok(differential_decode(&idx, 4)
            .into_iter()
            .flat_map(|i| {
                let (hi, lo) = index_to_dibit(i);
                [hi, lo]
            })
            .collect())
    } else {
        let idx: Vec<u8> = derotated.iter().map(|v| u8::from(v.re < 0.0)).collect();
        Ok(differential_decode(&idx, 2))
    }
}

fn demodulate_fsk(x: &SampleBlock, p: &ModParams, s: &SyncConfig) -> Result<Vec<u8>, RxError> {
    // Scale so a full-deviation symbol reads +-1.
    let gain = p.sps as f64 / (std::f64::consts::PI * p.mod_index);
    let freq: Vec<C64> = fsk::quadrature_demod_slice(&x.samples, gain)
        .into_iter()
        .map(|v| C64::new(v, 0.0))
        .collect();
    let boxcar = vec![1.0 / p.sps as f64; p.sps];
    let symbols = SymbolSync::new(p.sps, boxcar, s.timing_loop_bw)?.run(&freq)?;
    Ok(symbols.iter().map(|v| u8::from(v.re > 0.0)).collect())
}

/// Runs the full receive chain for `p.scheme` and returns hard bits.
pub fn demodulate(scheme: Scheme, x: &SampleBlock, p: &ModParams, s: &SyncConfig) -> Result<Vec<u8>, RxError> {
    if scheme != p.scheme {
        return Err(RxError::Config(format!("scheme {scheme} does not match parameters for {}", p.scheme)));
    }
    p.validate()?;
    s.validate()?;
    let expected = p.sample_rate();
    if (x.sample_rate - expected).abs() > 1e-6 * expected {
        return Err(RxError::Config(format!(
            "input sampled at {} Hz, expected {expected} Hz",
            x.sample_rate
        )));
    }
    let gained = agc(x, s.agc_reference, s.agc_rate);
    let filtered = fir_lowpass(&gained, s.lpf_cutoff, s.lpf_transition)?;
    if scheme.is_psk() {
        demodulate_psk(&filtered, p, s)
    } else {
        demodulate_fsk(&filtered, p, s)
    }
}
