//! SAP message wire format, carried as the UDP-Lite payload.
//!
//! ```text
//! 0      1       2          6          8
//! | type | flags | seq (BE) | reserved | payload ...
//! ```
//!
//! Types: 1 PING, 2 PING_ACK, 3 DATA, 4 DATA_ACK, 5 FIN, 6 FIN_ACK.
//! Flags: bit 0 approximate, bit 1 acknowledgment requested (set on
//! approximate datagrams that carry a precise prefix). Precise DATA is always
//! acknowledged. DATA_ACK carries the acknowledged sequence number in `seq`.
//! Reserved bytes are sent as zero and ignored on receipt.

use thiserror::Error;

pub const SAP_HEADER_LEN: usize = 8;

pub const FLAG_APPROX: u8 = 0x01;
pub const FLAG_ACK_REQUESTED: u8 = 0x02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum MsgType {
    Ping = 1,
    PingAck = 2,
    Data = 3,
    DataAck = 4,
    Fin = 5,
    FinAck = 6,
}

impl MsgType {
    pub const ALL: [MsgType; 6] = [Self::Ping, Self::PingAck, Self::Data, Self::DataAck, Self::Fin, Self::FinAck];

    fn from_byte(b: u8) -> Option<Self> {
        Self::ALL.get(usize::from(b).wrapping_sub(1)).copied()
    }

    pub fn is_control(self) -> bool {
        self != Self::Data
    }

    pub(crate) fn index(self) -> usize {
        self as usize - 1
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum WireError {
    #[error("SAP message of {0} bytes is shorter than its header")]
    TooShort(usize),
    #[error("unknown SAP message type {0}")]
    UnknownType(u8),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SapMessage {
    pub msg_type: MsgType,
    pub flags: u8,
    pub seq: u32,
    pub payload: Vec<u8>,
}

impl SapMessage {
    pub fn control(msg_type: MsgType, seq: u32) -> Self {
        Self { msg_type, flags: 0, seq, payload: Vec::new() }
    }

    pub fn data(seq: u32, flags: u8, payload: Vec<u8>) -> Self {
        Self { msg_type: MsgType::Data, flags, seq, payload }
    }

    pub fn is_approximate(&self) -> bool {
        self.flags & FLAG_APPROX != 0
    }

    /// Whether the receiver must answer with DATA_ACK.
    pub fn wants_ack(&self) -> bool {
        self.msg_type == MsgType::Data && (!self.is_approximate() || self.flags & FLAG_ACK_REQUESTED != 0)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(SAP_HEADER_LEN + self.payload.len());
        out.push(self.msg_type as u8);
        out.push(self.flags);
        out.extend_from_slice(&self.seq.to_be_bytes());
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() < SAP_HEADER_LEN {
            return Err(WireError::TooShort(bytes.len()));
        }
        let msg_type = MsgType::from_byte(bytes[0]).ok_or(WireError::UnknownType(bytes[0]))?;
        Ok(Self {
            msg_type,
            flags: bytes[1],
            seq: u32::from_be_bytes(bytes[2..6].try_into().unwrap()),
            payload: bytes[SAP_HEADER_LEN..].to_vec(),
        })
    }
}
