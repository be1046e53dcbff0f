// SPDX-License-Identifier: Apache-2.0
use std::sync::Arc;
use std::time::Duration;

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::clock::{Clock, SystemClock};
use crate::crypto::{self, AttesterId, CryptoError, Nonce128, SymKey, VerificationKey};
use crate::wire::{self, ChallengeMsg, EarResult, ResultMsg, WireError};

use super::{RejectReason, StateError, Verdict};

pub const DEFAULT_RP_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RpState {
    Idle,
    AwaitingResult { c: Nonce128 },
    Accepted(EarResult),
    Rejected(RejectReason),
}

impl RpState {
    fn name(&self) -> &'static str {
        match self {
            RpState::Idle => "Idle",
            RpState::AwaitingResult { .. } => "AwaitingResult",
            RpState::Accepted(_) => "Accepted",
            RpState::Rejected(_) => "Rejected",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, RpState::Accepted(_) | RpState::Rejected(_))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RpError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error("rejected: {0}")]
    Rejected(RejectReason),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Relying-party side of one attestation run at a time.
pub struct RpSession {
    k_a: SymKey,
    k_v: SymKey,
    id_a: AttesterId,
    state: RpState,
    timeout: Option<Duration>,
    clock: Arc<dyn Clock>,
    deadline: Option<Duration>,
}

impl RpSession {
    pub fn new(k_a: SymKey, k_v: SymKey, id_a: AttesterId) -> Self {
        RpSession {
            k_a,
            k_v,
            id_a,
            state: RpState::Idle,
            timeout: Some(DEFAULT_RP_TIMEOUT),
            clock: Arc::new(SystemClock::new()),
            deadline: None,
        }
    }

    /// Derives `id_A = hash(hash(K_A), PK_A)` for the intended attester.
    pub fn for_attester(k_a: SymKey, k_v: SymKey, attester_pk: &VerificationKey) -> Self {
        let id = crypto::attester_id(&crypto::hash(k_a.as_bytes()), attester_pk);
        Self::new(k_a, k_v, id)
    }

    pub fn with_timeout(mut self, timeout: Option<Duration>) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn state(&self) -> &RpState {
        &self.state
    }

    pub fn attester_id(&self) -> AttesterId {
        self.id_a
    }

    /// Key for application traffic with the attester.
    pub fn application_key(&self) -> &SymKey {
        &self.k_a
    }

    /// Steps 1-2: fresh `c`, `Cha = senc(c ‖ id_A, K_V)`.
    pub fn create_challenge<R: RngCore + CryptoRng>(
        &mut self,
        rng: &mut R,
    ) -> Result<ChallengeMsg, RpError> {
        if self.state != RpState::Idle {
            return Err(StateError {
                operation: "create_challenge",
                state: self.state.name(),
            }
            .into());
        }
        let c = crypto::rand_nonce(rng)?;
        let cha = wire::lpm::encode_challenge(&c, &self.id_a, &self.k_v, rng)?;
        self.deadline = self.timeout.map(|t| self.clock.now() + t);
        self.state = RpState::AwaitingResult { c };
        Ok(cha)
    }

    /// The nonce of the run in flight, if any.
    pub fn pending_nonce(&self) -> Option<Nonce128> {
        match self.state {
            RpState::AwaitingResult { c } => Some(c),
            _ => None,
        }
    }

    fn reject(&mut self, reason: RejectReason) -> RpError {
        self.state = RpState::Rejected(reason);
        self.deadline = None;
        RpError::Rejected(reason)
    }

    /// Steps 16-18. Every call in `AwaitingResult` ends the run.
    pub fn process_result(&mut self, msg: &[u8]) -> Result<Verdict, RpError> {
        let c = match self.state {
            RpState::AwaitingResult { c } => c,
            _ => {
                return Err(StateError {
                    operation: "process_result",
                    state: self.state.name(),
                }
                .into())
            }
        };
        if self.deadline_passed() {
            return Err(self.reject(RejectReason::Timeout));
        }
        let Ok(res) = ResultMsg::from_bytes(msg) else {
            return Err(self.reject(RejectReason::TamperOrWrongVerifier));
        };
        let (result, c_res, id_res) = match wire::lpm::decode_result(&res, &self.k_v) {
            Ok(v) => v,
            Err(WireError::Format(_)) => return Err(self.reject(RejectReason::Malformed)),
            Err(_) => return Err(self.reject(RejectReason::TamperOrWrongVerifier)),
        };
        if c_res != c {
            return Err(self.reject(RejectReason::Replay));
        }
        if id_res != self.id_a {
            return Err(self.reject(RejectReason::WrongAttester));
        }
        self.state = RpState::Accepted(result.clone());
        self.deadline = None;
        Ok(Verdict::from_result(result))
    }

    fn deadline_passed(&self) -> bool {
        self.deadline.is_some_and(|d| self.clock.now() > d)
    }

    /// Moves a stale run to `Rejected(Timeout)`; returns whether it did.
    pub fn check_timeout(&mut self) -> bool {
        if matches!(self.state, RpState::AwaitingResult { .. }) && self.deadline_passed() {
            self.reject(RejectReason::Timeout);
            true
        } else {
            false
        }
    }

    /// Abandons the run in flight, e.g. after the transport gave up waiting.
    pub fn expire(&mut self) {
        if matches!(self.state, RpState::AwaitingResult { .. }) {
            self.reject(RejectReason::Timeout);
        }
    }

    /// Returns a finished session to `Idle` for the next run.
    pub fn reset(&mut self) -> Result<(), StateError> {
        if !self.state.is_terminal() {
            return Err(StateError {
                operation: "reset",
                state: self.state.name(),
            });
        }
        self.state = RpState::Idle;
        Ok(())
    }
}

impl std::fmt::Debug for RpSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RpSession")
            .field("id_a", &self.id_a)
            .field("state", &self.state)
            .field("timeout", &self.timeout)
            .finish_non_exhaustive()
    }
}
