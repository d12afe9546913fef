//! Gardner timing recovery behind a matched filter.

use super::RxError;
use crate::signal::{fir_same, C64};

/// Below this whole-burst lock metric the loop is considered never locked.
pub const LOCK_THRESHOLD: f64 = 0.1;

/// Gardner detector slope per sample of timing offset for unit-power
/// raised-cosine symbols, taken at a rolloff of 0.35.
const TED_GAIN_PER_SYMBOL: f64 = 2.6;

/// Maximum clock-rate deviation the integrator may absorb, as a fraction of sps.
const MAX_RATE_OFFSET: f64 = 1e-3;

/// Per-symbol decay of the rate integrator. Runs without transitions give a
/// zero detector output, and a plain integrator would coast on whatever
/// rate it last held; the leak bounds that drift to `rate / RATE_LEAK`.
const RATE_LEAK: f64 = 0.01;

/// Second-order loop gains `(proportional, integral)` for a normalized
/// noise bandwidth `bn` and damping `zeta`.
pub(crate) fn loop_gains(bn: f64, zeta: f64) -> (f64, f64) {
    let theta = bn / (zeta + 1.0 / (4.0 * zeta));
    let denom = 1.0 + 2.0 * zeta * theta + theta * theta;
    (4.0 * zeta * theta / denom, 4.0 * theta * theta / denom)
}

/// Cubic Lagrange interpolation of `y` at fractional index `t`.
fn interp(y: &[C64], t: f64) -> C64 {
    let i = t.floor();
    let mu = t - i;
    let i = i as isize;
    let at = |k: isize| -> C64 {
        if k >= 0 && (k as usize) < y.len() {
            y[k as usize]
        } else {
            C64::new(0.0, 0.0)
        }
    };
    let (ym1, y0, y1, y2) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    let c0 = -mu * (mu - 1.0) * (mu - 2.0) / 6.0;
    let c1 = (mu + 1.0) * (mu - 1.0) * (mu - 2.0) / 2.0;
    let c2 = -(mu + 1.0) * mu * (mu - 2.0) / 2.0;
    let c3 = (mu + 1.0) * mu * (mu - 1.0) / 6.0;
    ym1 * c0 + y0 * c1 + y1 * c2 + y2 * c3
}

/// `1 - var(|y|^2) / mean(|y|^2)^2`: near 1 for a locked constant-modulus
/// constellation, near 0 for complex Gaussian noise.
pub fn lock_metric(symbols: &[C64]) -> f64 {
    if symbols.is_empty() {
        return 0.0;
    }
    let n = symbols.len() as f64;
    let p: Vec<f64> = symbols.iter().map(|s| s.norm_sqr()).collect();
    let mean = p.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return 0.0;
    }
    let var = p.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    1.0 - var / (mean * mean)
}

#[derive(Debug, Clone)]
pub struct SymbolSync {
    sps: f64,
    matched: Vec<f64>,
    kp: f64,
    ki: f64,
}

impl SymbolSync {
    pub fn new(sps: usize, matched: Vec<f64>, loop_bw: f64) -> Result<Self, RxError> {
        if sps < 2 {
            return Err(RxError::Config(format!("symbol sync needs sps >= 2, got {sps}")));
        }
        if !(loop_bw > 0.0 && loop_bw < 0.1) {
            return Err(RxError::Config(format!("timing loop bandwidth {loop_bw} outside (0, 0.1)")));
        }
        let (kp, ki) = loop_gains(loop_bw, std::f64::consts::FRAC_1_SQRT_2);
        let ted_gain = TED_GAIN_PER_SYMBOL / sps as f64;
        Ok(Self { sps: sps as f64, matched, kp: kp / ted_gain, ki: ki / ted_gain })
    }

    /// Filters, then emits one interpolated sample per symbol.
    pub fn run(&self, x: &[C64]) -> Result<Vec<C64>, RxError> {
        let y = if self.matched.is_empty() { x.to_vec() } else { fir_same(x, &self.matched) };
        let n = y.len() as f64;
        let mut out = Vec::with_capacity((n / self.sps) as usize + 1);
        let mut t = 0.0f64;
        let mut rate = 0.0f64;
        // Seed the detector normalization from the opening stretch so the
        // first errors are not scaled by a near-zero power estimate.
        let head = &y[..y.len().min(64 * self.sps as usize)];
        let mut power = head.iter().map(|s| s.norm_sqr()).sum::<f64>() / head.len().max(1) as f64;
        let mut prev: Option<C64> = None;
        let max_rate = MAX_RATE_OFFSET * self.sps;
        while t + 2.0 < n {
            let yk = interp(&y, t);
            power = 0.99 * power + 0.01 * yk.norm_sqr();
            let mut step = self.sps + rate;
            if let Some(yp) = prev {
                let mid = interp(&y, t - step / 2.0);
                // Late sampling gives a negative error and pulls the next strobe in.
                let e = ((yp - yk) * mid.conj()).re / power.max(1e-30);
                let e = e.clamp(-1.0, 1.0);
                rate = ((1.0 - RATE_LEAK) * rate + self.ki * e).clamp(-max_rate, max_rate);
                step = self.sps + rate + self.kp * e;
            }
            out.push(yk);
            prev = Some(yk);
            t += step;
        }
        if lock_metric(&out) < LOCK_THRESHOLD {
            return Err(RxError::NoLock);
        }
        Ok(out)
    }
}

/// One-shot symbol synchronization.
pub fn symbol_sync(x: &[C64], sps: usize, matched: &[f64], loop_bw: f64) -> Result<Vec<C64>, RxError> {
    SymbolSync::new(sps, matched.to_vec(), loop_bw)?.run(x)
}
