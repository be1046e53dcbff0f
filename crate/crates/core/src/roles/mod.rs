// SPDX-License-Identifier: Apache-2.0
//! Session state machines for the relying party, attester and verifier.
//!
//! All three are transport agnostic: they consume and produce message octets
//! and leave delivery to the caller.

mod attester;
mod policy;
mod rp;
mod verifier;

use std::fmt;

use thiserror::Error;

use crate::wire::{EarResult, EarVerdict};

pub use attester::{AttesterError, AttesterSession, AttesterState, MetricsProvider};
pub use policy::{validate_metrics, IssuedAt, Policy, ResultIssuer};
pub use rp::{RpError, RpSession, RpState, DEFAULT_RP_TIMEOUT};
pub use verifier::{VerifierAccept, VerifierContext};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Decision {
    Trust,
    NoTrust,
}

/// Outcome of a result the RP accepted as authentic and fresh.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub decision: Decision,
    pub result: EarResult,
}

impl Verdict {
    /// Trust only an affirming result.
    pub fn from_result(result: EarResult) -> Self {
        let decision = if result.verdict == EarVerdict::Affirming {
            Decision::Trust
        } else {
            Decision::NoTrust
        };
        Verdict { decision, result }
    }
}

/// Why the RP refused a result message.
#[derive(Clone, Copy, Debug, Error, PartialEq, Eq, Hash)]
pub enum RejectReason {
    #[error("result failed authentication (tampered or not from the expected verifier)")]
    TamperOrWrongVerifier,
    #[error("result carries a nonce from another run")]
    Replay,
    #[error("result names a different attester")]
    WrongAttester,
    #[error("result names a different attester key hash")]
    HashMismatch,
    #[error("result arrived after the deadline")]
    Timeout,
    #[error("authentic result with malformed contents")]
    Malformed,
}

/// Why the verifier stopped processing evidence. Ordered by protocol step.
#[derive(Clone, Copy, Debug, Error, PartialEq, Eq, Hash)]
pub enum AbortReason {
    #[error("evidence message is malformed")]
    Malformed,
    #[error("evidence signed by an untrusted key")]
    UnknownAttester,
    #[error("evidence signature invalid")]
    BadSignature,
    #[error("evidence envelope cannot be opened")]
    BadEnvelope,
    #[error("challenge cannot be opened with any relying-party key")]
    BadChallenge,
    #[error("key attestation invalid")]
    BadKeyAttestation,
    #[error("attester id in challenge does not match the evidence")]
    IdBindingMismatch,
    #[error("attester key hash in challenge does not match the evidence")]
    HashBindingMismatch,
    #[error("challenge already answered")]
    DuplicateChallenge,
    #[error("verifier failed to produce a result")]
    Internal,
}

impl AbortReason {
    /// Protocol step at which the pre-shared-key verifier aborts, if any.
    pub fn lpm_step(&self) -> Option<u8> {
        match self {
            AbortReason::UnknownAttester | AbortReason::BadSignature => Some(8),
            AbortReason::BadEnvelope => Some(9),
            AbortReason::BadChallenge => Some(10),
            AbortReason::BadKeyAttestation => Some(11),
            AbortReason::IdBindingMismatch => Some(13),
            _ => None,
        }
    }
}

/// Operation invoked in the wrong session state.
#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub struct StateError {
    pub operation: &'static str,
    pub state: &'static str,
}

impl fmt::Display for StateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} not allowed in state {}", self.operation, self.state)
    }
}
