//! Packet construction and recovery.
//!
//! Over-the-air layout, MSB first within every field:
//!
//! ```text
//! preamble (alternating 1010..) | access code | len16 | len16 | [seq16] | payload | crc32
//! ```
//!
//! The length field counts payload plus CRC bytes and is sent twice; a receiver
//! that sees the two copies disagree drops the frame.

mod crc;

pub use crc::{crc32, crc32_append, crc32_check, CrcCheck, CRC_LEN, MAX_PAYLOAD};

use crate::signal::{bits_to_bytes, push_bits, read_bits};
use thiserror::Error;

pub const DEFAULT_ACCESS_CODE: u64 = 0xE15A_E893_E15A_E893;
const LENGTH_FIELD_BITS: usize = 16;
const SEQ_FIELD_BITS: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FramingError {
    #[error("payload of {0} bytes does not fit the 16-bit length field")]
    PayloadTooLong(usize),
    #[error("frame of {0} bytes is shorter than the CRC trailer")]
    Malformed(usize),
    #[error("payload is {got} bytes, configuration expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid frame configuration: {0}")]
    Config(String),
    #[error("length copies disagree ({0} vs {1})")]
    LengthCopiesDisagree(u16, u16),
    #[error("declared length {0} is shorter than the CRC trailer")]
    LengthTooShort(u16),
    #[error("frame needs {needed} bits past the access code, only {available} remain")]
    Truncated { needed: usize, available: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameConfig {
    pub preamble_bits: usize,
    pub access_code: u64,
    /// Access-code length in bits; a multiple of 8 in `32..=64`.
    pub access_code_bits: u32,
    /// Payload bytes per packet, excluding the CRC trailer.
    pub payload_len: usize,
    pub with_seq: bool,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            preamble_bits: 32,
            access_code: DEFAULT_ACCESS_CODE,
            access_code_bits: 64,
            payload_len: 500,
            with_seq: true,
        }
    }
}

impl FrameConfig {
    pub fn with_payload_len(payload_len: usize) -> Self {
        Self { payload_len, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), FramingError> {
        if !self.access_code_bits.is_multiple_of(8) || !(32..=64).contains(&self.access_code_bits) {
            return Err(FramingError::Config(format!(
                "access code length {} must be a multiple of 8 between 32 and 64",
                self.access_code_bits
            )));
        }
        if self.payload_len > MAX_PAYLOAD {
            return Err(FramingError::PayloadTooLong(self.payload_len));
        }
        Ok(())
    }

    fn code_mask(&self) -> u64 {
        if self.access_code_bits == 64 {
            u64::MAX
        } else {
            (1u64 << self.access_code_bits) - 1
        }
    }

    fn header_bits(&self) -> usize {
        2 * LENGTH_FIELD_BITS + if self.with_seq { SEQ_FIELD_BITS } else { 0 }
    }

    /// Bits per packet on air.
    pub fn packet_bits(&self) -> usize {
        self.preamble_bits
            + self.access_code_bits as usize
            + self.header_bits()
            + 8 * (self.payload_len + CRC_LEN)
    }

    /// Bytes of framing overhead per packet (preamble, code, header, CRC).
    pub fn overhead_bytes(&self) -> f64 {
        (self.packet_bits() - 8 * self.payload_len) as f64 / 8.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrcStatus {
    Unchecked,
    Ok,
    Fail,
}

/// A received frame. `payload` excludes the CRC trailer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub seq: Option<u16>,
    pub payload: Vec<u8>,
    pub trailer: u32,
    pub crc_ok: CrcStatus,
}

impl Frame {
    pub fn check(&mut self) -> CrcStatus {
        self.crc_ok = if crc32(&self.payload) == self.trailer { CrcStatus::Ok } else { CrcStatus::Fail };
        self.crc_ok
    }
}

/// Serializes one packet into a bitstream (one `u8` per bit).
pub fn build_packet(payload: &[u8], cfg: &FrameConfig, seq: u16) -> Result<Vec<u8>, FramingError> {
    cfg.validate()?;
    if payload.len() != cfg.payload_len {
        return Err(FramingError::LengthMismatch { expected: cfg.payload_len, got: payload.len() });
    }
    let body = crc32_append(payload)?;
    let len_field = body.len() as u64;

    let mut bits = Vec::with_capacity(cfg.packet_bits());
    bits.extend((0..cfg.preamble_bits).map(|i| u8::from(i % 2 == 0)));
    push_bits(&mut bits, cfg.access_code & cfg.code_mask(), cfg.access_code_bits);
    push_bits(&mut bits, len_field, LENGTH_FIELD_BITS as u32);
    push_bits(&mut bits, len_field, LENGTH_FIELD_BITS as u32);
    if cfg.with_seq {
        push_bits(&mut bits, u64::from(seq), SEQ_FIELD_BITS as u32);
    }
    for &b in &body {
        push_bits(&mut bits, u64::from(b), 8);
    }
    Ok(bits)
}

/// Returns every bit offset at which the access code starts with at most
/// `max_bit_errors` mismatching bits.
pub fn correlate_access_code(
    bits: &[u8],
    cfg: &FrameConfig,
    max_bit_errors: u32,
) -> Result<Vec<usize>, FramingError> {
    if max_bit_errors > 3 {
        return Err(FramingError::Config(format!("max_bit_errors {max_bit_errors} exceeds 3")));
    }
    cfg.validate()?;
    let width = cfg.access_code_bits as usize;
    let mask = cfg.code_mask();
    let code = cfg.access_code & mask;
    let mut reg = 0u64;
    let mut hits = Vec::new();
    for (i, &b) in bits.iter().enumerate() {
        reg = ((reg << 1) | u64::from(b & 1)) & mask;
        if i + 1 >= width && (reg ^ code).count_ones() <= max_bit_errors {
            hits.push(i + 1 - width);
        }
    }
    Ok(hits)
}

/// Parses the header following an access code at `offset` and returns the
/// unchecked frame plus the bit index just past it.
pub fn extract_payload(
    bits: &[u8],
    offset: usize,
    cfg: &FrameConfig,
) -> Result<(Frame, usize), FramingError> {
    let start = offset + cfg.access_code_bits as usize;
    let available = bits.len().saturating_sub(start);
    let header = cfg.header_bits();
    if available < header {
        return Err(FramingError::Truncated { needed: header, available });
    }
    let h = &bits[start..];
    let len_a = read_bits(h, LENGTH_FIELD_BITS) as u16;
    let len_b = read_bits(&h[LENGTH_FIELD_BITS..], LENGTH_FIELD_BITS) as u16;
    if len_a != len_b {
        return Err(FramingError::LengthCopiesDisagree(len_a, len_b));
    }
    if (len_a as usize) < CRC_LEN {
        return Err(FramingError::LengthTooShort(len_a));
    }
    let seq = cfg
        .with_seq
        .then(|| read_bits(&h[2 * LENGTH_FIELD_BITS..], SEQ_FIELD_BITS) as u16);
    let needed = header + 8 * len_a as usize;
    if available < needed {
        return Err(FramingError::Truncated { needed, available });
    }
    let mut bytes = bits_to_bytes(&h[header..needed]);
    let trailer_bytes = bytes.split_off(bytes.len() - CRC_LEN);
    let trailer = u32::from_be_bytes(trailer_bytes.try_into().expect("4-byte trailer"));
    let frame = Frame { seq, payload: bytes, trailer, crc_ok: CrcStatus::Unchecked };
    Ok((frame, start + needed))
}

/// Scans a demodulated bitstream and returns every frame whose header parsed,
/// CRC-checked. Access-code hits inside an already accepted frame are skipped;
/// frames with unusable headers are dropped (they surface as lost packets).
pub fn deframe(bits: &[u8], cfg: &FrameConfig, max_bit_errors: u32) -> Result<Vec<Frame>, FramingError> {
    let mut frames = Vec::new();
    let mut next_free = 0usize;
    for offset in correlate_access_code(bits, cfg, max_bit_errors)? {
        if offset < next_free {
            continue;
        }
        if let Ok((mut frame, end)) = extract_payload(bits, offset, cfg) {
            frame.check();
            frames.push(frame);
            next_free = end;
        }
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bits(n: usize, seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(0..2u8)).collect()
    }

    fn code_bits() -> Vec<u8> {
        let mut v = Vec::new();
        push_bits(&mut v, DEFAULT_ACCESS_CODE, 64);
        v
    }

    fn length_field(bits: &[u8], cfg: &FrameConfig) -> u64 {
        read_bits(&bits[cfg.preamble_bits + 64..], 16)
    }

    #[test]
    fn length_field_counts_crc() {
        let cfg = FrameConfig::with_payload_len(500);
        let bits = build_packet(&[7u8; 500], &cfg, 3).unwrap();
        assert_eq!(length_field(&bits, &cfg), 504);
        assert_eq!(bits.len(), cfg.packet_bits());

        let cfg0 = FrameConfig::with_payload_len(0);
        let bits0 = build_packet(&[], &cfg0, 0).unwrap();
        assert_eq!(length_field(&bits0, &cfg0), 4);
        let frames = deframe(&bits0, &cfg0, 0).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].crc_ok, CrcStatus::Ok);
        assert!(frames[0].payload.is_empty());
    }

    #[test]
    fn payload_length_mismatch() {
        let cfg = FrameConfig::with_payload_len(10);
        assert_eq!(
            build_packet(&[0; 9], &cfg, 0),
            Err(FramingError::LengthMismatch { expected: 10, got: 9 })
        );
    }

    #[test]
    fn identical_payloads_differ_only_in_seq() {
        let cfg = FrameConfig::with_payload_len(20);
        let a = build_packet(&[9u8; 20], &cfg, 1).unwrap();
        let b = build_packet(&[9u8; 20], &cfg, 2).unwrap();
        let seq_at = cfg.preamble_bits + 64 + 32;
        let diff: Vec<usize> = (0..a.len()).filter(|&i| a[i] != b[i]).collect();
        assert!(!diff.is_empty());
        assert!(diff.iter().all(|&i| (seq_at..seq_at + 16).contains(&i)));
    }

    #[test]
    fn correlator_finds_embedded_code_only() {
        let cfg = FrameConfig::default();
        let mut bits = random_bits(1000, 11);
        bits.splice(100..164, code_bits());
        // Exhaustive scan for any other window within 0 errors of the code.
        let code = code_bits();
        let brute: Vec<usize> = (0..=bits.len() - 64).filter(|&i| bits[i..i + 64] == code[..]).collect();
        assert_eq!(brute, vec![100]);
        assert_eq!(correlate_access_code(&bits, &cfg, 0).unwrap(), vec![100]);
    }

    #[test]
    fn correlator_empty_and_tolerance() {
        let cfg = FrameConfig::default();
        assert!(correlate_access_code(&[0u8; 500], &cfg, 3).unwrap().is_empty());
        let mut bits = random_bits(400, 5);
        let mut code = code_bits();
        code[17] ^= 1;
        bits.splice(50..114, code);
        assert_eq!(correlate_access_code(&bits, &cfg, 0).unwrap(), Vec::<usize>::new());
        assert_eq!(correlate_access_code(&bits, &cfg, 1).unwrap(), vec![50]);
        assert!(correlate_access_code(&bits, &cfg, 4).is_err());
    }

    #[test]
    fn disagreeing_length_copies_drop_the_frame() {
        let cfg = FrameConfig::with_payload_len(16);
        let mut bits = build_packet(&[1u8; 16], &cfg, 0).unwrap();
        let len_at = cfg.preamble_bits + 64;
        bits[len_at + 15] ^= 1;
        bits[len_at + 16 + 3] ^= 1;
        let off = correlate_access_code(&bits, &cfg, 0).unwrap()[0];
        assert!(matches!(
            extract_payload(&bits, off, &cfg),
            Err(FramingError::LengthCopiesDisagree(_, _))
        ));
        assert!(deframe(&bits, &cfg, 0).unwrap().is_empty());
    }

    #[test]
    fn corrupted_payload_fails_crc() {
        let cfg = FrameConfig::with_payload_len(16);
        let mut bits = build_packet(&[1u8; 16], &cfg, 0).unwrap();
        let payload_at = cfg.preamble_bits + 64 + 48;
        bits[payload_at + 40] ^= 1;
        let frames = deframe(&bits, &cfg, 0).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].crc_ok, CrcStatus::Fail);
    }

    #[test]
    fn truncated_frame() {
        let cfg = FrameConfig::with_payload_len(16);
        let bits = build_packet(&[1u8; 16], &cfg, 0).unwrap();
        let cut = &bits[..bits.len() - 9];
        let off = correlate_access_code(cut, &cfg, 0).unwrap()[0];
        assert!(matches!(extract_payload(cut, off, &cfg), Err(FramingError::Truncated { .. })));
    }

    #[test]
    fn short_access_code() {
        let cfg = FrameConfig { access_code: 0x1ACF_FC1D, access_code_bits: 32, ..FrameConfig::with_payload_len(8) };
        let bits = build_packet(b"abcdefgh", &cfg, 4).unwrap();
        let frames = deframe(&bits, &cfg, 0).unwrap();
        assert_eq!(frames[0].payload, b"abcdefgh");
        assert_eq!(frames[0].seq, Some(4));
        let bad = FrameConfig { access_code_bits: 36, ..cfg };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn false_positive_rate_matches_binomial_tail() {
        // Expected hits per offset: sum_{e<=k} C(w,e) 2^-w. A 32-bit code with
        // k = 3 makes the rate measurable: (1 + 32 + 496 + 4960) / 2^32.
        let cfg = FrameConfig { access_code: 0x1ACF_FC1D, access_code_bits: 32, ..FrameConfig::default() };
        let n = 20_000_000usize;
        let bits = random_bits(n, 99);
        let hits = correlate_access_code(&bits, &cfg, 3).unwrap().len() as f64;
        let p = 5489.0 / 2f64.powi(32);
        let mean = p * (n - 31) as f64;
        let sigma = mean.sqrt();
        assert!((hits - mean).abs() <= 3.0 * sigma + 1.0, "hits {hits}, mean {mean}");
    }

    proptest! {
        #[test]
        fn loopback_recovers_payload(payload in proptest::collection::vec(any::<u8>(), 0..200), seq in any::<u16>(), lead in 0usize..50) {
            let cfg = FrameConfig::with_payload_len(payload.len());
            let mut bits = random_bits(lead, seq as u64);
            bits.extend(build_packet(&payload, &cfg, seq).unwrap());
            let frames = deframe(&bits, &cfg, 0).unwrap();
            prop_assert_eq!(frames.len(), 1);
            prop_assert_eq!(&frames[0].payload, &payload);
            prop_assert_eq!(frames[0].seq, Some(seq));
            prop_assert_eq!(frames[0].crc_ok, CrcStatus::Ok);
        }
    }
}
