use crate::signal::{SampleBlock, C64};
use crate::txmodem::Scheme;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IqError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: length {len} bytes is not a whole number of complex f32 samples")]
    Truncated { path: PathBuf, len: usize },
    #[error("{path}: {reason}")]
    Meta { path: PathBuf, reason: String },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IqError + '_ {
    move |source| IqError::Io { path: path.to_path_buf(), source }
}

/// Writes interleaved little-endian `f32` I/Q pairs.
pub fn write_iq(path: &Path, x: &SampleBlock) -> Result<(), IqError> {
    if let Some(i) = x.samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
        return Err(IqError::NonFinite(i));
    }
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for s in &x.samples {
        w.write_all(&(s.re as f32).to_le_bytes()).map_err(io_err(path))?;
        w.write_all(&(s.im as f32).to_le_bytes()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_iq(path: &Path, sample_rate: f64) -> Result<SampleBlock, IqError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut raw = Vec::new();
    BufReader::new(file).read_to_end(&mut raw).map_err(io_err(path))?;
    if raw.len() % 8 != 0 {
        return Err(IqError::Truncated { path: path.to_path_buf(), len: raw.len() });
    }
    let samples = raw
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            C64::new(f64::from(re), f64::from(im))
        })
        .collect();
    SampleBlock::new(samples, sample_rate).map_err(|e| IqError::Meta { path: path.to_path_buf(), reason: e.to_string() })
}

/// Facts about a capture that the receiver cannot recover from the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct IqMeta {
    pub scheme: Scheme,
    pub sample_rate: f64,
    pub n_tx: u64,
    pub payload_bytes: usize,
    pub packet_len: usize,
    /// Samples carrying the burst; the rest of the capture is the noise window.
    pub burst_samples: usize,
}

/// `capture.iq` -> `capture.iq.meta`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn write_iq_meta(path: &Path, meta: &IqMeta) -> Result<(), IqError> {
    let text = format!(
        "scheme = {}\nsample_rate = {}\nn_tx = {}\npayload_bytes = {}\npacket_len = {}\nburst_samples = {}\n",
        meta.scheme.as_str(),
        meta.sample_rate,
        meta.n_tx,
        meta.payload_bytes,
        meta.packet_len,
        meta.burst_samples
    );
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_iq_meta(path: &Path) -> Result<IqMeta, IqError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let meta_err = |reason: String| IqError::Meta { path: path.to_path_buf(), reason };
    let pairs = super::parse_pairs(&text).map_err(|e| meta_err(e.to_string()))?;
    let get = |key: &str| {
        pairs
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| meta_err(format!("missing '{key}'")))
    };
    fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
        v.parse().map_err(|_| format!("bad value '{v}' for '{key}'"))
    }
    let meta = IqMeta {
        scheme: get("scheme")?.parse().map_err(|e: crate::txmodem::ModError| meta_err(e.to_string()))?,
        sample_rate: num("sample_rate", get("sample_rate")?).map_err(meta_err)?,
        n_tx: num("n_tx", get("n_tx")?).map_err(meta_err)?,
        payload_bytes: num("payload_bytes", get("payload_bytes")?).map_err(meta_err)?,
        packet_len: num("packet_len", get("packet_len")?).map_err(meta_err)?,
        burst_samples: num("burst_samples", get("burst_samples")?).map_err(meta_err)?,
    };
    if !(meta.sample_rate > 0.0) || meta.packet_len == 0 {
        return Err(meta_err("sample_rate and packet_len must be positive".into()));
    }
    Ok(meta)
}
