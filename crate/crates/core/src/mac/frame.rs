use std::fmt;

use super::MacError;

pub const HEADER_LEN: usize = 15;
pub const FCS_LEN: usize = 4;
pub const MIN_FRAME_LEN: usize = HEADER_LEN + FCS_LEN;
pub const MTU: usize = 2304;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MacAddr(pub [u8; 6]);

impl MacAddr {
    /// Locally administered address with the station index in the last byte.
    pub fn station(index: u8) -> Self {
        Self([0x02, 0x5a, 0x50, 0x00, 0x00, index])
    }
}

impl fmt::Debug for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0;
        write!(f, "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}", b[0], b[1], b[2], b[3], b[4], b[5])
    }
}

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum FrameType {
    Data = 0,
    Ack = 1,
}

impl FrameType {
    fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Self::Data),
            1 => Some(Self::Ack),
            _ => None,
        }
    }
}

/// Link-layer frame.
///
/// Wire layout, all multi-byte fields big-endian:
///
/// ```text
/// 0       6       12    14   15            15+n    19+n
/// | dst   | src   | seq | ty | payload ... | fcs   |
/// ```
///
/// `fcs` is the CRC-32 of every preceding byte.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacFrame {
    pub dst: MacAddr,
    pub src: MacAddr,
    pub seq: u16,
    pub frame_type: FrameType,
    pub payload: Vec<u8>,
    pub fcs: u32,
}

impl MacFrame {
    pub fn data(dst: MacAddr, src: MacAddr, seq: u16, payload: Vec<u8>) -> Self {
        Self::with_fcs(dst, src, seq, FrameType::Data, payload)
    }

    pub fn ack(dst: MacAddr, src: MacAddr, seq: u16) -> Self {
        Self::with_fcs(dst, src, seq, FrameType::Ack, Vec::new())
    }

    fn with_fcs(dst: MacAddr, src: MacAddr, seq: u16, frame_type: FrameType, payload: Vec<u8>) -> Self {
        let mut f = Self { dst, src, seq, frame_type, payload, fcs: 0 };
        let mut buf = Vec::with_capacity(HEADER_LEN + f.payload.len());
        f.write_body(&mut buf);
        f.fcs = compute_fcs(&buf);
        f
    }

    pub fn encoded_len(&self) -> usize {
        MIN_FRAME_LEN + self.payload.len()
    }

    fn write_body(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.dst.0);
        out.extend_from_slice(&self.src.0);
        out.extend_from_slice(&self.seq.to_be_bytes());
        out.push(self.frame_type as u8);
        out.extend_from_slice(&self.payload);
    }
}

/// CRC-32 frame check sequence (reflected 0xEDB88320, init and final XOR
/// 0xFFFFFFFF).
pub fn compute_fcs(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}

/// Encodes a frame, recomputing the FCS over header and payload.
pub fn encode_frame(frame: &MacFrame) -> Result<Vec<u8>, MacError> {
    if frame.payload.len() > MTU {
        return Err(MacError::PayloadTooLarge(frame.payload.len()));
    }
    let mut out = Vec::with_capacity(frame.encoded_len());
    frame.write_body(&mut out);
    let fcs = compute_fcs(&out);
    out.extend_from_slice(&fcs.to_be_bytes());
    Ok(out)
}

/// Result of decoding raw bytes: the frame as received plus whether its FCS
/// matched. `None` for an unknown frame type byte.
pub(crate) fn decode_raw(bytes: &[u8]) -> Result<Option<(MacFrame, bool)>, MacError> {
    if bytes.len() < MIN_FRAME_LEN {
        return Err(MacError::TooShort(bytes.len()));
    }
    let body_len = bytes.len() - FCS_LEN;
    let fcs = u32::from_be_bytes(bytes[body_len..].try_into().unwrap());
    let fcs_ok = compute_fcs(&bytes[..body_len]) == fcs;
    let Some(frame_type) = FrameType::from_byte(bytes[14]) else {
        return Ok(None);
    };
    let frame = MacFrame {
        dst: MacAddr(bytes[0..6].try_into().unwrap()),
        src: MacAddr(bytes[6..12].try_into().unwrap()),
        seq: u16::from_be_bytes([bytes[12], bytes[13]]),
        frame_type,
        payload: bytes[HEADER_LEN..body_len].to_vec(),
        fcs,
    };
    Ok(Some((frame, fcs_ok)))
}

/// Destination address of raw frame bytes, if long enough to carry one.
pub(crate) fn peek_dst(bytes: &[u8]) -> Option<MacAddr> {
    bytes.get(0..6).map(|b| MacAddr(b.try_into().unwrap()))
}
