use thiserror::Error;

/// Encoded size of every control datagram.
pub const WIRE_LEN: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum MessageKind {
    Hello = 0x01,
    Ready = 0x02,
    AdvanceAck = 0x03,
    Quit = 0x04,
}

impl MessageKind {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0x01 => Some(Self::Hello),
            0x02 => Some(Self::Ready),
            0x03 => Some(Self::AdvanceAck),
            0x04 => Some(Self::Quit),
            _ => None,
        }
    }

    /// Whether the `tx_index` field is meaningful for this kind.
    pub fn carries_index(self) -> bool {
        matches!(self, Self::Hello | Self::AdvanceAck)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("datagram is {0} bytes, expected {WIRE_LEN}")]
    Length(usize),
    #[error("unknown message kind 0x{0:02x}")]
    Kind(u8),
    #[error("{kind:?} carries nonzero tx_index {index}")]
    UnusedIndex { kind: MessageKind, index: u16 },
}

/// One control datagram.
///
/// Layout: byte 0 kind, bytes 1..5 `seq` big-endian, bytes 5..7 `tx_index`
/// big-endian (zero for READY and QUIT).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ControlMessage {
    pub kind: MessageKind,
    pub seq: u32,
    pub tx_index: u16,
}

impl ControlMessage {
    pub fn hello(seq: u32, tx_index: u16) -> Self {
        Self {
            kind: MessageKind::Hello,
            seq,
            tx_index,
        }
    }

    pub fn ready(seq: u32) -> Self {
        Self {
            kind: MessageKind::Ready,
            seq,
            tx_index: 0,
        }
    }

    pub fn advance_ack(seq: u32, tx_index: u16) -> Self {
        Self {
            kind: MessageKind::AdvanceAck,
            seq,
            tx_index,
        }
    }

    pub fn quit(seq: u32) -> Self {
        Self {
            kind: MessageKind::Quit,
            seq,
            tx_index: 0,
        }
    }

    pub fn encode(&self) -> [u8; WIRE_LEN] {
        let mut out = [0u8; WIRE_LEN];
        out[0] = self.kind as u8;
        out[1..5].copy_from_slice(&self.seq.to_be_bytes());
        let index = if self.kind.carries_index() {
            self.tx_index
        } else {
            0
        };
        out[5..7].copy_from_slice(&index.to_be_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let bytes: &[u8; WIRE_LEN] = bytes
            .try_into()
            .map_err(|_| WireError::Length(bytes.len()))?;
        let kind = MessageKind::from_byte(bytes[0]).ok_or(WireError::Kind(bytes[0]))?;
        let seq = u32::from_be_bytes([bytes[1], bytes[2], bytes[3], bytes[4]]);
        let tx_index = u16::from_be_bytes([bytes[5], bytes[6]]);
        if !kind.carries_index() && tx_index != 0 {
            return Err(WireError::UnusedIndex {
                kind,
                index: tx_index,
            });
        }
        Ok(Self {
            kind,
            seq,
            tx_index,
        })
    }
}
