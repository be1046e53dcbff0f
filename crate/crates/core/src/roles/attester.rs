// SPDX-License-Identifier: Apache-2.0
use std::sync::Arc;

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::crypto::{self, CryptoError, KemPublicKey, KeyAttestor, SigKeyPair, SymKey, VerificationKey};
use crate::wire::{self, ChallengeMsg, EvidenceMsg, Metrics, WireError};

use super::StateError;

/// Source of the attestation metrics `M_A`.
pub trait MetricsProvider {
    fn collect(&self) -> Metrics;
}

impl MetricsProvider for Metrics {
    fn collect(&self) -> Metrics {
        self.clone()
    }
}

impl<F: Fn() -> Metrics> MetricsProvider for F {
    fn collect(&self) -> Metrics {
        self()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AttesterState {
    Idle,
    /// Holds the verbatim challenge octets the evidence was built over.
    AwaitingVerdict { cha: Vec<u8> },
    Done,
}

impl AttesterState {
    fn name(&self) -> &'static str {
        match self {
            AttesterState::Idle => "Idle",
            AttesterState::AwaitingVerdict { .. } => "AwaitingVerdict",
            AttesterState::Done => "Done",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AttesterError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error("evidence generation failed: {0}")]
    Evidence(#[from] CryptoError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Attester side. Treats the challenge and the verifier's result as opaque.
pub struct AttesterSession {
    k_a: SymKey,
    signer: SigKeyPair,
    verifier_pk: KemPublicKey,
    tee: Arc<dyn KeyAttestor>,
    state: AttesterState,
}

impl AttesterSession {
    pub fn new(
        k_a: SymKey,
        signer: SigKeyPair,
        verifier_pk: KemPublicKey,
        tee: Arc<dyn KeyAttestor>,
    ) -> Self {
        AttesterSession {
            k_a,
            signer,
            verifier_pk,
            tee,
            state: AttesterState::Idle,
        }
    }

    pub fn state(&self) -> &AttesterState {
        &self.state
    }

    pub fn public_key(&self) -> VerificationKey {
        self.signer.public()
    }

    pub fn application_key(&self) -> &SymKey {
        &self.k_a
    }

    /// Steps 4-7: key attestation over `hash(K_A)`, metrics, then signed
    /// hybrid-encrypted evidence around the verbatim challenge.
    pub fn handle_challenge<R: RngCore + CryptoRng>(
        &mut self,
        cha: &[u8],
        metrics: &dyn MetricsProvider,
        rng: &mut R,
    ) -> Result<EvidenceMsg, AttesterError> {
        if self.state != AttesterState::Idle {
            return Err(StateError {
                operation: "handle_challenge",
                state: self.state.name(),
            }
            .into());
        }
        let cha_msg = ChallengeMsg::from_bytes(cha)?;
        let ak = crypto::attest_key(&crypto::hash(self.k_a.as_bytes()), self.tee.as_ref())?;
        let m = metrics.collect();
        let ev = wire::lpm::encode_evidence(&ak, &m, &cha_msg, &self.verifier_pk, &self.signer, rng)?;
        self.state = AttesterState::AwaitingVerdict { cha: cha.to_vec() };
        Ok(ev)
    }

    /// Relays `Res` byte for byte; the attester cannot check it.
    pub fn forward_result(&mut self, res: &[u8]) -> Result<Vec<u8>, AttesterError> {
        if !matches!(self.state, AttesterState::AwaitingVerdict { .. }) {
            return Err(StateError {
                operation: "forward_result",
                state: self.state.name(),
            }
            .into());
        }
        self.state = AttesterState::Done;
        Ok(res.to_vec())
    }

    pub fn reset(&mut self) {
        self.state = AttesterState::Idle;
    }
}

impl std::fmt::Debug for AttesterSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AttesterSession")
            .field("public_key", &self.signer.public())
            .field("state", &self.state)
            .finish_non_exhaustive()
    }
}
