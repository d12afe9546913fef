use crate::signal::{SampleBlock, C64};

const MIN_GAIN: f64 = 1e-9;
const MAX_GAIN: f64 = 1e9;
/// Samples used to seed the gain before the loop takes over.
const PRIME_LEN: usize = 64;

/// Running automatic gain control driving mean `|y|` towards a reference.
///
/// The gain update is multiplicative, so scaling the input by a constant only
/// rescales the gain trajectory and leaves the output unchanged.
#[derive(Debug, Clone)]
pub struct Agc {
    reference: f64,
    rate: f64,
    gain: f64,
    primed: bool,
}

impl Agc {
    pub fn new(reference: f64, rate: f64) -> Self {
        Self { reference, rate, gain: 1.0, primed: false }
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn process(&mut self, x: &mut [C64]) {
        if !self.primed {
            let head = &x[..x.len().min(PRIME_LEN)];
            let mean = head.iter().map(|s| s.norm()).sum::<f64>() / head.len().max(1) as f64;
            if mean > 0.0 {
                self.gain = (self.reference / mean).clamp(MIN_GAIN, MAX_GAIN);
                self.primed = true;
            }
        }
        for s in x.iter_mut() {
            *s *= self.gain;
            let err = (self.reference - s.norm()) / self.reference;
            self.gain = (self.gain * (1.0 + self.rate * err)).clamp(MIN_GAIN, MAX_GAIN);
        }
    }
}

pub fn agc(x: &SampleBlock, reference: f64, rate: f64) -> SampleBlock {
    let mut out = x.samples.clone();
    Agc::new(reference, rate).process(&mut out);
    x.with_samples(out)
}
