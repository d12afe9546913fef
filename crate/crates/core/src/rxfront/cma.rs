use super::RxError;
use crate::signal::C64;

/// Symbols used to scale the center-spike initialization.
const INIT_LEN: usize = 64;
/// Block over which output power is checked for divergence.
const DIVERGENCE_BLOCK: usize = 256;
const DIVERGENCE_RATIO: f64 = 100.0;

/// Blind linear equalizer adapted by the constant modulus cost
/// `(|y|^2 - 1)^2`. One sample per symbol in, one out.
///
/// Output `n` is aligned with input `n`: the center tap weights the current
/// symbol, the taps either side weight past and future symbols.
#[derive(Debug, Clone)]
pub struct CmaEqualizer {
    taps: Vec<C64>,
    mu: f64,
    primed: bool,
}

impl CmaEqualizer {
    pub fn new(n_taps: usize, mu: f64) -> Result<Self, RxError> {
        if n_taps == 0 || n_taps.is_multiple_of(2) {
            return Err(RxError::Config(format!("CMA tap count must be odd, got {n_taps}")));
        }
        if !(mu > 0.0 && mu < 0.1) {
            return Err(RxError::Config(format!("CMA step size {mu} outside (0, 0.1)")));
        }
        let mut taps = vec![C64::new(0.0, 0.0); n_taps];
        taps[n_taps / 2] = C64::new(1.0, 0.0);
        Ok(Self { taps, mu, primed: false })
    }

    pub fn taps(&self) -> &[C64] {
        &self.taps
    }

    pub fn equalize(&mut self, x: &[C64]) -> Result<Vec<C64>, RxError> {
        let l = self.taps.len();
        let c = l / 2;
        if !self.primed {
            let head = &x[..x.len().min(INIT_LEN)];
            let p = head.iter().map(|s| s.norm_sqr()).sum::<f64>() / head.len().max(1) as f64;
            if p > 0.0 {
                self.taps[c] = C64::new(1.0 / p.sqrt(), 0.0);
                self.primed = true;
            }
        }
        let zero = C64::new(0.0, 0.0);
        // Pad so the window for output n is padded[n .. n + l], reversed.
        let mut padded = vec![zero; c];
        padded.extend_from_slice(x);
        padded.extend(std::iter::repeat_n(zero, c));

        let mut out = Vec::with_capacity(x.len());
        let mut block_power = 0.0;
        for n in 0..x.len() {
            let window = &padded[n..n + l];
            // y[n] = sum_k w_k x[n + c - k]
            let y: C64 = self.taps.iter().zip(window.iter().rev()).map(|(w, s)| w * s).sum();
            let err = (y.norm_sqr() - 1.0) * y;
            let step = err * self.mu;
            for (w, s) in self.taps.iter_mut().zip(window.iter().rev()) {
                *w -= step * s.conj();
            }
            block_power += y.norm_sqr();
            if (n + 1) % DIVERGENCE_BLOCK == 0 {
                if !(block_power / DIVERGENCE_BLOCK as f64 <= DIVERGENCE_RATIO) {
                    return Err(RxError::Diverged);
                }
                block_power = 0.0;
            }
            out.push(y);
        }
        if self.taps.iter().any(|w| !(w.re.is_finite() && w.im.is_finite())) {
            return Err(RxError::Diverged);
        }
        Ok(out)
    }
}

pub fn cma_equalize(x: &[C64], n_taps: usize, mu: f64) -> Result<Vec<C64>, RxError> {
    CmaEqualizer::new(n_taps, mu)?.equalize(x)
}
