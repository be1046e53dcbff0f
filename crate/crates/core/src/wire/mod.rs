// SPDX-License-Identifier: Apache-2.0
//! Bit-exact encodings of the protocol messages.
//!
//! Inner tuples are plain concatenations: fixed-size fields are raw and
//! variable-size fields carry a 2-byte big-endian length prefix. The one
//! exception is the attestation-result plaintext, `CBOR(R_A) ‖ c ‖ id`,
//! where the CBOR item is the only variable part and its length is implied
//! by the 32-byte fixed suffix.

mod buf;
pub mod ear;
pub mod frame;
pub mod kdc;
pub mod lpm;
pub mod metrics;

use thiserror::Error;

use crate::crypto::CryptoError;

pub use ear::{EarResult, EarVerdict, EAR_PROFILE};
pub use frame::{Frame, MsgType, FRAME_HEADER_LEN, MAX_FRAME_LEN};
pub use lpm::{ChallengeMsg, EvidenceMsg, ResultMsg, CHALLENGE_LEN, RESULT_FIXED_OVERHEAD};
pub use metrics::Metrics;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("malformed message: {0}")]
    Format(String),
    #[error("integrity check failed")]
    Integrity,
    #[error("signature verification failed")]
    Signature,
}

impl WireError {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        WireError::Format(msg.into())
    }
}

impl From<CryptoError> for WireError {
    fn from(e: CryptoError) -> Self {
        match e {
            CryptoError::Integrity => WireError::Integrity,
            CryptoError::Signature => WireError::Signature,
            other => WireError::Format(other.to_string()),
        }
    }
}
