//! UDP-Lite style datagrams with partial checksum coverage.
//!
//! ```text
//! 0        2        4       6          8
//! | src    | dst    | cscov | checksum | payload ...
//! ```
//!
//! Big-endian fields. `cscov` is the number of leading octets covered by the
//! Internet checksum; 0 means the whole datagram. The 8-byte header is always
//! covered, so `cscov` values 1..=7 are invalid. There is no pseudo-header.

use thiserror::Error;

pub const HEADER_LEN: usize = 8;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum TransportError {
    #[error("datagram of {0} bytes is shorter than the header")]
    TooShort(usize),
    #[error("checksum coverage {cscov} invalid for a {len}-byte datagram")]
    InvalidCscov { cscov: u16, len: usize },
    #[error("checksum mismatch over covered range")]
    ChecksumMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiteDatagram {
    pub src_port: u16,
    pub dst_port: u16,
    pub cscov: u16,
    /// Filled in by [`lite_encode`]; ignored on input.
    pub checksum: u16,
    pub payload: Vec<u8>,
}

impl LiteDatagram {
    pub fn new(src_port: u16, dst_port: u16, cscov: u16, payload: Vec<u8>) -> Self {
        Self { src_port, dst_port, cscov, checksum: 0, payload }
    }

    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    /// Number of leading octets protected by the checksum.
    pub fn covered_len(&self) -> usize {
        effective_coverage(self.cscov, self.wire_len())
    }
}

pub fn effective_coverage(cscov: u16, total_len: usize) -> usize {
    if cscov == 0 {
        total_len
    } else {
        usize::from(cscov)
    }
}

fn cscov_valid(cscov: u16, total_len: usize) -> bool {
    cscov == 0 || (HEADER_LEN..=total_len).contains(&usize::from(cscov))
}

/// Internet checksum: complement of the one's-complement sum of big-endian
/// 16-bit words, odd input padded with a zero byte.
pub fn internet_checksum(bytes: &[u8]) -> u16 {
    !ones_complement_sum(bytes)
}

fn ones_complement_sum(bytes: &[u8]) -> u16 {
    let mut chunks = bytes.chunks_exact(2);
    let mut sum: u64 = chunks
        .by_ref()
        .map(|w| u64::from(u16::from_be_bytes([w[0], w[1]])))
        .sum();
    if let [last] = chunks.remainder() {
        sum += u64::from(*last) << 8;
    }
    while sum > 0xFFFF {
        sum = (sum & 0xFFFF) + (sum >> 16);
    }
    sum as u16
}

fn checksum_over(covered: &[u8]) -> u16 {
    // the checksum field (bytes 6..8) counts as zero
    let sum = ones_complement_sum(&covered[..6]) as u64 + ones_complement_sum(&covered[HEADER_LEN..]) as u64;
    let folded = ((sum & 0xFFFF) + (sum >> 16)) as u16;
    match !folded {
        0 => 0xFFFF,
        c => c,
    }
}

pub fn lite_encode(dgram: &LiteDatagram) -> Result<Vec<u8>, TransportError> {
    let len = dgram.wire_len();
    if !cscov_valid(dgram.cscov, len) {
        return Err(TransportError::InvalidCscov { cscov: dgram.cscov, len });
    }
    let mut out = Vec::with_capacity(len);
    out.extend_from_slice(&dgram.src_port.to_be_bytes());
    out.extend_from_slice(&dgram.dst_port.to_be_bytes());
    out.extend_from_slice(&dgram.cscov.to_be_bytes());
    out.extend_from_slice(&[0, 0]);
    out.extend_from_slice(&dgram.payload);
    let checksum = checksum_over(&out[..effective_coverage(dgram.cscov, len)]);
    out[6..8].copy_from_slice(&checksum.to_be_bytes());
    Ok(out)
}

/// Parses and verifies a datagram. Damage beyond the covered range passes
/// through untouched.
pub fn lite_decode(bytes: &[u8]) -> Result<LiteDatagram, TransportError> {
    if bytes.len() < HEADER_LEN {
        return Err(TransportError::TooShort(bytes.len()));
    }
    let word = |i: usize| u16::from_be_bytes([bytes[i], bytes[i + 1]]);
    let cscov = word(4);
    if !cscov_valid(cscov, bytes.len()) {
        return Err(TransportError::InvalidCscov { cscov, len: bytes.len() });
    }
    let checksum = word(6);
    if checksum_over(&bytes[..effective_coverage(cscov, bytes.len())]) != checksum {
        return Err(TransportError::ChecksumMismatch);
    }
    Ok(LiteDatagram {
        src_port: word(0),
        dst_port: word(2),
        cscov,
        checksum,
        payload: bytes[HEADER_LEN..].to_vec(),
    })
}

/// Coverage field of something that looks like a datagram, when it is a valid
/// coverage for that length. Nothing is checksummed.
pub fn peek_cscov(bytes: &[u8]) -> Option<u16> {
    if bytes.len() < HEADER_LEN {
        return None;
    }
    let cscov = u16::from_be_bytes([bytes[4], bytes[5]]);
    let valid = cscov == 0 || (usize::from(cscov) >= HEADER_LEN && usize::from(cscov) <= bytes.len());
    valid.then_some(cscov)
}
