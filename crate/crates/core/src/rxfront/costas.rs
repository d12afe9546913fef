use super::timing::loop_gains;
use super::RxError;
use crate::signal::C64;
use std::f64::consts::PI;

/// Second-order decision-directed Costas loop at one sample per symbol.
/// BPSK points are expected on the real axis, QPSK points on the diagonals.
#[derive(Debug, Clone)]
pub struct CostasLoop {
    order: u8,
    alpha: f64,
    beta: f64,
    phase: f64,
    freq: f64,
}

impl CostasLoop {
    pub fn new(order: u8, loop_bw: f64) -> Result<Self, RxError> {
        if order != 2 && order != 4 {
            return Err(RxError::Config(format!("Costas order must be 2 or 4, got {order}")));
        }
        if !(loop_bw > 0.0 && loop_bw < 0.1) {
            return Err(RxError::Config(format!("Costas loop bandwidth {loop_bw} outside (0, 0.1)")));
        }
        let (alpha, beta) = loop_gains(loop_bw, std::f64::consts::FRAC_1_SQRT_2);
        Ok(Self { order, alpha, beta, phase: 0.0, freq: 0.0 })
    }

    /// Current frequency estimate in radians per symbol.
    pub fn frequency(&self) -> f64 {
        self.freq
    }

    fn phase_error(&self, y: C64) -> f64 {
        let sign = |v: f64| if v >= 0.0 { 1.0 } else { -1.0 };
        if self.order == 2 {
            sign(y.re) * y.im
        } else {
            sign(y.re) * y.im - sign(y.im) * y.re
        }
    }

    pub fn process(&mut self, x: &[C64]) -> Vec<C64> {
        x.iter()
            .map(|&s| {
                let y = s * C64::from_polar(1.0, -self.phase);
                let e = self.phase_error(y).clamp(-1.0, 1.0);
                self.freq = (self.freq + self.beta * e).clamp(-1.0, 1.0);
                self.phase += self.freq + self.alpha * e;
                if self.phase > PI {
                    self.phase -= 2.0 * PI;
                } else if self.phase < -PI {
                    self.phase += 2.0 * PI;
                }
                y
            })
            .collect()
    }
}

pub fn costas_loop(x: &[C64], order: u8, loop_bw: f64) -> Result<Vec<C64>, RxError> {
    Ok(CostasLoop::new(order, loop_bw)?.process(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::txmodem::{differential_decode, differential_encode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bpsk_bits(n: usize, seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(0..2u8)).collect()
    }

    fn to_bpsk(indices: &[u8]) -> Vec<C64> {
        indices.iter().map(|&i| C64::new(if i == 0 { 1.0 } else { -1.0 }, 0.0)).collect()
    }

    fn slice_bpsk(y: &[C64]) -> Vec<u8> {
        y.iter().map(|s| u8::from(s.re < 0.0)).collect()
    }

    #[test]
    fn zero_offset_passes_through() {
        let x = to_bpsk(&bpsk_bits(1000, 1));
        let y = costas_loop(&x, 2, 0.02).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn tracks_residual_frequency_offset() {
        let bits = bpsk_bits(20_000, 2);
        let tx = to_bpsk(&differential_encode(&bits, 2));
        // 1e-3 of the symbol rate: 2 pi 1e-3 rad per symbol.
        let w = 2.0 * PI * 1e-3;
        let rx: Vec<C64> = tx.iter().enumerate().map(|(n, s)| s * C64::from_polar(1.0, w * n as f64 + 0.4)).collect();
        let mut costas = CostasLoop::new(2, 0.02).unwrap();
        let y = costas.process(&rx);
        let decoded = differential_decode(&slice_bpsk(&y), 2);
        let errors = (500..bits.len()).filter(|&i| decoded[i] != bits[i]).count();
        assert_eq!(errors, 0);
        assert!((costas.frequency() - w).abs() < 1e-4);
        // Locked with zero steady-state phase error: the imaginary parts vanish.
        for s in &y[15_000..] {
            assert!(s.im.abs() < 1e-6);
        }
    }

    #[test]
    fn pi_ambiguity_cancels_in_differential_decode() {
        let bits = bpsk_bits(3000, 3);
        let tx = to_bpsk(&differential_encode(&bits, 2));
        // Loop locks onto the inverted constellation.
        let rx: Vec<C64> = tx.iter().map(|s| -s).collect();
        let y = costas_loop(&rx, 2, 0.02).unwrap();
        let hard = slice_bpsk(&y);
        let tx_hard = slice_bpsk(&tx);
        assert!(hard.iter().zip(&tx_hard).all(|(a, b)| a != b));
        let decoded = differential_decode(&hard, 2);
        assert_eq!(&decoded[1..], &bits[1..]);
    }

    #[test]
    fn qpsk_quarter_turn_ambiguity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sym: Vec<u8> = (0..3000).map(|_| rng.random_range(0..4u8)).collect();
        let enc = differential_encode(&sym, 4);
        let pts: Vec<C64> = enc
            .iter()
            .map(|&i| C64::from_polar(1.0, PI / 4.0 + PI / 2.0 * f64::from(i) + PI / 2.0 + 0.2))
            .collect();
        let y = costas_loop(&pts, 4, 0.02).unwrap();
        let idx: Vec<u8> = y[200..]
            .iter()
            .map(|s| match (s.re >= 0.0, s.im >= 0.0) {
                (true, true) => 0,
                (false, true) => 1,
                (false, false) => 2,
                (true, false) => 3,
            })
            .collect();
        let decoded = differential_decode(&idx, 4);
        assert_eq!(&decoded[1..], &sym[201..]);
    }
}
