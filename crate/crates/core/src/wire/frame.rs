// SPDX-License-Identifier: Apache-2.0
//! Transport framing: `type (1) ‖ length (2, big-endian) ‖ payload`.

use std::fmt;

use super::WireError;

pub const FRAME_HEADER_LEN: usize = 3;
/// Largest frame, header included, that fits one datagram.
pub const MAX_FRAME_LEN: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MsgType {
    Challenge,
    Evidence,
    ResultToAttester,
    ResultToRp,
    KdcHashAnnounce,
    KdcChallenge,
    KdcEvidence,
    KdcResultToAttester,
    KdcResultToRp,
    KdcApplication,
    KeyTransferRequest,
    KeyMaterial,
}

impl MsgType {
    pub const ALL: [MsgType; 12] = [
        MsgType::Challenge,
        MsgType::Evidence,
        MsgType::ResultToAttester,
        MsgType::ResultToRp,
        MsgType::KdcHashAnnounce,
        MsgType::KdcChallenge,
        MsgType::KdcEvidence,
        MsgType::KdcResultToAttester,
        MsgType::KdcResultToRp,
        MsgType::KdcApplication,
        MsgType::KeyTransferRequest,
        MsgType::KeyMaterial,
    ];

    pub fn tag(self) -> u8 {
        match self {
            MsgType::Challenge => 0xa1,
            MsgType::Evidence => 0xa2,
            MsgType::ResultToAttester => 0xa3,
            MsgType::ResultToRp => 0xa4,
            MsgType::KdcHashAnnounce => 0xb0,
            MsgType::KdcChallenge => 0xb1,
            MsgType::KdcEvidence => 0xb2,
            MsgType::KdcResultToAttester => 0xb3,
            MsgType::KdcResultToRp => 0xb4,
            MsgType::KdcApplication => 0xb5,
            MsgType::KeyTransferRequest => 0xc0,
            MsgType::KeyMaterial => 0xc1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        MsgType::ALL.into_iter().find(|t| t.tag() == tag)
    }
}

impl fmt::Display for MsgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}(0x{:02x})", self, self.tag())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MsgType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MsgType, payload: impl Into<Vec<u8>>) -> Self {
        Frame {
            msg_type,
            payload: payload.into(),
        }
    }

    pub fn encoded_len(&self) -> usize {
        FRAME_HEADER_LEN + self.payload.len()
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        if self.encoded_len() > MAX_FRAME_LEN {
            return Err(WireError::format(format!(
                "frame of {} bytes exceeds {MAX_FRAME_LEN}",
                self.encoded_len()
            )));
        }
        let mut out = Vec::with_capacity(self.encoded_len());
        out.push(self.msg_type.tag());
        out.extend_from_slice(&(self.payload.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.payload);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() < FRAME_HEADER_LEN {
            return Err(WireError::format("frame shorter than header"));
        }
        if bytes.len() > MAX_FRAME_LEN {
            return Err(WireError::format("frame exceeds datagram limit"));
        }
        let msg_type = MsgType::from_tag(bytes[0])
            .ok_or_else(|| WireError::format(format!("unknown message type 0x{:02x}", bytes[0])))?;
        let declared = u16::from_be_bytes([bytes[1], bytes[2]]) as usize;
        let payload = &bytes[FRAME_HEADER_LEN..];
        if declared != payload.len() {
            return Err(WireError::format(format!(
                "declared length {declared} but payload is {} bytes",
                payload.len()
            )));
        }
        Ok(Frame {
            msg_type,
            payload: payload.to_vec(),
        })
    }
}
