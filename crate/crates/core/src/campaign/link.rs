use super::{AtStage, CampaignConfig, CampaignError, Stage};
use crate::channelsim::apply_channel_burst;
use crate::framing::{build_packet, deframe, CrcStatus};
use crate::linkstats::{estimate_snr, export_csv, FrameResult, LinkCounters, LinkReport, ReportMeta};
use crate::rxfront::{demodulate, RxError};
use crate::signal::{SampleBlock, C64};
use crate::spectral::{avg_fft_power, channel_power};
use crate::txmodem::modulate;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Alternating bits after the last packet so its CRC clears the filters.
const TAIL_BITS: usize = 64;

/// A modulated transmission: the burst followed by a silent window used to
/// measure the noise floor.
#[derive(Debug, Clone)]
pub struct TxBurst {
    pub samples: SampleBlock,
    pub burst_len: usize,
    pub n_tx: u64,
    pub payload_bytes: usize,
}

#[derive(Debug, Clone)]
pub struct LinkOutcome {
    pub report: LinkReport,
    /// Reassembled payload; bytes of lost packets are zero.
    pub received: Vec<u8>,
    /// Per transmitted packet, whether it arrived intact.
    pub delivered: Vec<bool>,
    /// Set when the receiver gave up on the capture.
    pub receiver_failure: Option<RxError>,
}

impl LinkOutcome {
    pub fn is_exact(&self, payload: &[u8]) -> bool {
        self.received == payload
    }
}

/// Reads the input file, or generates `file_size` pseudo-random bytes from
/// the seed when no input is configured.
pub fn load_payload(cfg: &CampaignConfig) -> Result<Vec<u8>, CampaignError> {
    match &cfg.input_path {
        Some(path) => std::fs::read(path)
            .map_err(|e| CampaignError::new(Stage::Input, format!("{}: {e}", path.display()))),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(2);
            let mut buf = vec![0u8; cfg.file_size];
            rng.fill_bytes(&mut buf);
            Ok(buf)
        }
    }
}

fn alternating(n: usize) -> impl Iterator<Item = u8> {
    (0..n).map(|k| (k % 2 == 0) as u8)
}

/// Splits `payload` into packets (the last one zero-padded), frames and
/// modulates them, and appends `fft_size * fft_iterations` silent samples.
pub fn transmit(cfg: &CampaignConfig, payload: &[u8]) -> Result<TxBurst, CampaignError> {
    cfg.validate().at(Stage::Config)?;
    if payload.is_empty() {
        return Err(CampaignError::new(Stage::Input, "payload is empty"));
    }
    let l_p = cfg.frame.payload_len;
    let n_tx = payload.len().div_ceil(l_p);
    if cfg.frame.with_seq && n_tx > usize::from(u16::MAX) + 1 {
        return Err(CampaignError::new(
            Stage::Framing,
            format!("{n_tx} packets exceed the 16-bit sequence space"),
        ));
    }
    let mut bits: Vec<u8> = alternating(cfg.lead_in_bits).collect();
    bits.reserve(n_tx * cfg.frame.packet_bits() + TAIL_BITS);
    let mut chunk = vec![0u8; l_p];
    for (i, part) in payload.chunks(l_p).enumerate() {
        chunk.fill(0);
        chunk[..part.len()].copy_from_slice(part);
        let packet = build_packet(&chunk, &cfg.frame, i as u16).at(Stage::Framing)?;
        bits.extend(packet);
    }
    bits.extend(alternating(TAIL_BITS));
    let mut x = modulate(&bits, &cfg.modulation).at(Stage::Modulation)?;
    drop(bits);
    let burst_len = x.len();
    x.samples.resize(burst_len + cfg.fft_size * cfg.fft_iterations, C64::new(0.0, 0.0));
    Ok(TxBurst { samples: x, burst_len, n_tx: n_tx as u64, payload_bytes: payload.len() })
}

fn meta(cfg: &CampaignConfig) -> ReportMeta {
    ReportMeta {
        scheme: cfg.scheme.as_str().to_string(),
        fc_hz: cfg.fc_hz,
        bw_hz: cfg.bw_hz,
        symbol_rate: cfg.modulation.symbol_rate,
        sps: cfg.modulation.sps,
        seed: cfg.seed,
    }
}

/// In-band power of `x` over up to `fft_iterations` FFT frames, or `None`
/// when `x` holds less than one frame.
fn in_band_power(cfg: &CampaignConfig, x: &[C64], fs: f64) -> Result<Option<f64>, CampaignError> {
    let n = cfg.fft_size;
    let m = cfg.fft_iterations.min(x.len() / n);
    if m == 0 {
        return Ok(None);
    }
    let block = SampleBlock::new(x[..m * n].to_vec(), fs).at(Stage::Measurement)?;
    let ps = avg_fft_power(&block, n, m).at(Stage::Measurement)?;
    let range = ps
        .bins_in(-cfg.bw_hz / 2.0, cfg.bw_hz / 2.0)
        .ok_or_else(|| CampaignError::new(Stage::Measurement, "measurement band holds no FFT bin"))?;
    Ok(Some(channel_power(&ps, *range.start(), *range.end()).at(Stage::Measurement)?))
}

/// Demodulates the first `burst_len` samples of `rx`, deframes and accounts
/// packets, and measures SNR against the samples after the burst.
pub fn receive(
    cfg: &CampaignConfig,
    rx: &SampleBlock,
    burst_len: usize,
    n_tx: u64,
    payload_bytes: usize,
) -> Result<LinkOutcome, CampaignError> {
    cfg.validate().at(Stage::Config)?;
    if burst_len == 0 || burst_len > rx.len() {
        return Err(CampaignError::new(
            Stage::Input,
            format!("burst of {burst_len} samples does not fit a capture of {}", rx.len()),
        ));
    }
    let l_p = cfg.frame.payload_len;
    if (n_tx as usize).saturating_mul(l_p) < payload_bytes {
        return Err(CampaignError::new(Stage::Input, "payload larger than the packets sent"));
    }
    let fs = rx.sample_rate;
    let p_s = in_band_power(cfg, &rx.samples[..burst_len], fs)?;
    let p_n = in_band_power(cfg, &rx.samples[burst_len..], fs)?;
    let snr_db = match (p_s, p_n) {
        (Some(s), Some(n)) => estimate_snr(s, n).ok(),
        _ => None,
    };

    let burst = SampleBlock::new(rx.samples[..burst_len].to_vec(), fs).at(Stage::Receiver)?;
    let (bits, receiver_failure) = match demodulate(cfg.scheme, &burst, &cfg.modulation, &cfg.sync) {
        Ok(bits) => (bits, None),
        Err(e @ (RxError::NoLock | RxError::Diverged)) => (Vec::new(), Some(e)),
        Err(e) => return Err(CampaignError::new(Stage::Receiver, e)),
    };
    drop(burst);
    let frames = deframe(&bits, &cfg.frame, cfg.max_bit_errors).at(Stage::Framing)?;
    drop(bits);

    let mut counters = LinkCounters::new(l_p, cfg.n_discarded);
    let mut received = vec![0u8; n_tx as usize * l_p];
    let mut delivered = vec![false; n_tx as usize];
    let mut observed = 0u64;
    for (arrival, frame) in frames.iter().enumerate() {
        if observed >= n_tx {
            break;
        }
        let index = match frame.seq {
            Some(seq) => usize::from(seq),
            None => arrival,
        };
        let intact = frame.crc_ok == CrcStatus::Ok && frame.payload.len() == l_p && index < delivered.len();
        if intact && delivered[index] {
            // Repeat detection of a packet already counted.
            continue;
        }
        observed += 1;
        if intact {
            delivered[index] = true;
            received[index * l_p..(index + 1) * l_p].copy_from_slice(&frame.payload);
            counters.record(FrameResult::Ok).at(Stage::Report)?;
        } else {
            counters.record(FrameResult::Fail).at(Stage::Report)?;
        }
    }
    received.truncate(payload_bytes);
    let t_total = burst_len as f64 / fs;
    let report = counters.finalize(n_tx, t_total, snr_db, meta(cfg)).at(Stage::Report)?;
    Ok(LinkOutcome { report, received, delivered, receiver_failure })
}

/// Transmit, channel and receive for an in-memory payload; no files touched.
pub(crate) fn simulate(cfg: &CampaignConfig, payload: &[u8]) -> Result<LinkOutcome, CampaignError> {
    let tx = transmit(cfg, payload)?;
    let mut profile = cfg.channel.clone();
    profile.seed = cfg.seed;
    let rx = apply_channel_burst(&tx.samples, &profile, tx.burst_len).at(Stage::Channel)?;
    drop(tx.samples);
    receive(cfg, &rx, tx.burst_len, tx.n_tx, tx.payload_bytes)
}

/// Writes the reassembled payload and the CSV report where configured.
pub fn write_outputs(cfg: &CampaignConfig, outcome: &LinkOutcome) -> Result<(), CampaignError> {
    if let Some(path) = &cfg.output_path {
        std::fs::write(path, &outcome.received)
            .map_err(|e| CampaignError::new(Stage::Output, format!("{}: {e}", path.display())))?;
    }
    if let Some(path) = &cfg.csv_path {
        export_csv(&outcome.report, path).at(Stage::Output)?;
    }
    Ok(())
}

/// One complete simulated run: load the payload, send it through the
/// configured channel, receive, and write the configured outputs.
pub fn run_link(cfg: &CampaignConfig) -> Result<LinkOutcome, CampaignError> {
    cfg.validate().at(Stage::Config)?;
    let payload = load_payload(cfg)?;
    let outcome = simulate(cfg, &payload)?;
    write_outputs(cfg, &outcome)?;
    Ok(outcome)
}
