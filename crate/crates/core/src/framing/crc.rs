//! Reflected CRC-32 (poly 0x04C11DB7, init and final xor 0xFFFFFFFF).

use super::FramingError;

/// Trailer length in bytes.
pub const CRC_LEN: usize = 4;

/// Largest payload that still fits the 16-bit length field with its trailer.
pub const MAX_PAYLOAD: usize = u16::MAX as usize - CRC_LEN;

const REFLECTED_POLY: u32 = 0xEDB8_8320;

const TABLE: [u32; 256] = build_table();

const fn build_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut c = i as u32;
        let mut k = 0;
        while k < 8 {
            c = if c & 1 != 0 { (c >> 1) ^ REFLECTED_POLY } else { c >> 1 };
            k += 1;
        }
        table[i] = c;
        i += 1;
    }
    table
}

pub fn crc32(data: &[u8]) -> u32 {
    let mut crc = 0xFFFF_FFFFu32;
    for &b in data {
        crc = TABLE[((crc ^ u32::from(b)) & 0xFF) as usize] ^ (crc >> 8);
    }
    crc ^ 0xFFFF_FFFF
}

/// Appends the CRC trailer, big-endian, to a copy of `payload`.
pub fn crc32_append(payload: &[u8]) -> Result<Vec<u8>, FramingError> {
    if payload.len() > MAX_PAYLOAD {
        return Err(FramingError::PayloadTooLong(payload.len()));
    }
    let mut out = Vec::with_capacity(payload.len() + CRC_LEN);
    out.extend_from_slice(payload);
    out.extend_from_slice(&crc32(payload).to_be_bytes());
    Ok(out)
}

/// Outcome of checking a frame's trailer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CrcCheck {
    Ok(Vec<u8>),
    Fail,
}

/// Verifies the trailing four bytes against the CRC of the leading bytes.
pub fn crc32_check(frame: &[u8]) -> Result<CrcCheck, FramingError> {
    if frame.len() < CRC_LEN {
        return Err(FramingError::Malformed(frame.len()));
    }
    let (body, trailer) = frame.split_at(frame.len() - CRC_LEN);
    let expected = u32::from_be_bytes(trailer.try_into().expect("4-byte trailer"));
    Ok(if crc32(body) == expected { CrcCheck::Ok(body.to_vec()) } else { CrcCheck::Fail })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Bit-at-a-time reference, no table.
    fn crc32_bitwise(data: &[u8]) -> u32 {
        let mut crc = 0xFFFF_FFFFu32;
        for &b in data {
            crc ^= u32::from(b);
            for _ in 0..8 {
                let mask = (crc & 1).wrapping_neg();
                crc = (crc >> 1) ^ (REFLECTED_POLY & mask);
            }
        }
        !crc
    }

    #[test]
    fn check_value() {
        assert_eq!(crc32_bitwise(b"123456789"), 0xCBF4_3926);
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
        let framed = crc32_append(b"123456789").unwrap();
        assert_eq!(&framed[9..], &[0xCB, 0xF4, 0x39, 0x26]);
        assert_eq!(crc32_check(&framed).unwrap(), CrcCheck::Ok(b"123456789".to_vec()));
    }

    #[test]
    fn empty_payload_trailer_is_zero() {
        assert_eq!(crc32_append(&[]).unwrap(), vec![0, 0, 0, 0]);
        assert_eq!(crc32_check(&[0, 0, 0, 0]).unwrap(), CrcCheck::Ok(vec![]));
    }

    #[test]
    fn short_input_is_malformed_not_fail() {
        assert_eq!(crc32_check(&[1, 2, 3]), Err(FramingError::Malformed(3)));
    }

    #[test]
    fn too_long_payload() {
        assert!(crc32_append(&vec![0; MAX_PAYLOAD]).is_ok());
        assert_eq!(
            crc32_append(&vec![0; MAX_PAYLOAD + 1]),
            Err(FramingError::PayloadTooLong(MAX_PAYLOAD + 1))
        );
    }

    #[test]
    fn every_single_and_double_bit_error_detected_small() {
        let payload: Vec<u8> = (0..12u8).map(|i| i.wrapping_mul(37)).collect();
        let frame = crc32_append(&payload).unwrap();
        let nbits = frame.len() * 8;
        for i in 0..nbits {
            let mut f = frame.clone();
            f[i / 8] ^= 0x80 >> (i % 8);
            assert_eq!(crc32_check(&f).unwrap(), CrcCheck::Fail);
            for j in i + 1..nbits {
                let mut g = f.clone();
                g[j / 8] ^= 0x80 >> (j % 8);
                assert_eq!(crc32_check(&g).unwrap(), CrcCheck::Fail, "bits {i},{j}");
            }
        }
    }

    proptest! {
        #[test]
        fn table_matches_bitwise(data in proptest::collection::vec(any::<u8>(), 0..300)) {
            prop_assert_eq!(crc32(&data), crc32_bitwise(&data));
        }

        #[test]
        fn round_trip(data in proptest::collection::vec(any::<u8>(), 0..300)) {
            let framed = crc32_append(&data).unwrap();
            prop_assert_eq!(crc32_check(&framed).unwrap(), CrcCheck::Ok(data));
        }

        #[test]
        fn sampled_two_bit_errors_in_500_byte_frame(
            seed in any::<u64>(), i in 0usize..504 * 8, j in 0usize..504 * 8
        ) {
            prop_assume!(i != j);
            let payload: Vec<u8> = (0..500u64).map(|k| (seed.wrapping_mul(k + 1) >> 17) as u8).collect();
            let mut frame = crc32_append(&payload).unwrap();
            frame[i / 8] ^= 0x80 >> (i % 8);
            prop_assert_eq!(crc32_check(&frame).unwrap(), CrcCheck::Fail);
            frame[j / 8] ^= 0x80 >> (j % 8);
            prop_assert_eq!(crc32_check(&frame).unwrap(), CrcCheck::Fail);
        }
    }
}
