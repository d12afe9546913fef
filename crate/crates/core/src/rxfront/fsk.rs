use crate::signal::{SampleBlock, C64};

/// `y[n] = gain * arg(x[n] * conj(x[n-1]))`, with `y[0] = 0`.
pub fn quadrature_demod(x: &SampleBlock, gain: f64) -> Vec<f64> {
    quadrature_demod_slice(&x.samples, gain)
}

pub(crate) fn quadrature_demod_slice(x: &[C64], gain: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    if x.is_empty() {
        return out;
    }
    out.push(0.0);
    out.extend(x.windows(2).map(|w| gain * (w[1] * w[0].conj()).arg()));
    out
}
