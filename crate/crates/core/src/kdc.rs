// SPDX-License-Identifier: Apache-2.0
//! Session-key variant: no pre-shared `K_A`. The verifier generates `K_S`
//! and hands it to the RP inside `Res_RP` and to the attester inside `Res_A`.
//!
//! The RP and attester never confirm possession of `K_S` to each other; the
//! first application message under `K_S` is the only confirmation.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::clock::{Clock, SystemClock};
use crate::crypto::{
    self, record, AttesterId, CallLog, Digest, KemKeyPair, KemPublicKey, Nonce128, Primitive,
    SigKeyPair, SymKey, VerificationKey, ID_LEN,
};
use crate::roles::{
    validate_metrics, AbortReason, MetricsProvider, Policy, RejectReason, ResultIssuer, RpError,
    StateError, Verdict, DEFAULT_RP_TIMEOUT,
};
use crate::wire::kdc::{
    self as kdc_wire, AttesterResultMsg, KdcChallengeMsg, RpResult, RpResultMsg,
};
use crate::wire::{EarResult, EvidenceMsg, Metrics, WireError};

/// EAR attester id for this variant: the leading bytes of `hash(PK_A)`.
pub fn kdc_attester_id(h: &Digest) -> AttesterId {
    let mut id = [0u8; ID_LEN];
    id.copy_from_slice(&h.0[..ID_LEN]);
    AttesterId(id)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KdcRpState {
    Idle,
    AwaitingResult { c: Nonce128, h: Digest },
    Accepted { result: EarResult, session_key: SymKey },
    Rejected(RejectReason),
}

impl KdcRpState {
    fn name(&self) -> &'static str {
        match self {
            KdcRpState::Idle => "Idle",
            KdcRpState::AwaitingResult { .. } => "AwaitingResult",
            KdcRpState::Accepted { .. } => "Accepted",
            KdcRpState::Rejected(_) => "Rejected",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, KdcRpState::Accepted { .. } | KdcRpState::Rejected(_))
    }
}

/// What the RP holds after accepting `Res_RP`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KdcVerdict {
    pub verdict: Verdict,
    pub session_key: SymKey,
}

pub struct KdcRpSession {
    k_v: SymKey,
    state: KdcRpState,
    timeout: Option<Duration>,
    clock: Arc<dyn Clock>,
    deadline: Option<Duration>,
}

impl KdcRpSession {
    pub fn new(k_v: SymKey) -> Self {
        KdcRpSession {
            k_v,
            state: KdcRpState::Idle,
            timeout: Some(DEFAULT_RP_TIMEOUT),
            clock: Arc::new(SystemClock::new()),
            deadline: None,
        }
    }

    pub fn with_timeout(mut self, timeout: Option<Duration>) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn state(&self) -> &KdcRpState {
        &self.state
    }

    pub fn pending(&self) -> Option<(Nonce128, Digest)> {
        match self.state {
            KdcRpState::AwaitingResult { c, h } => Some((c, h)),
            _ => None,
        }
    }

    pub fn session_key(&self) -> Option<&SymKey> {
        match &self.state {
            KdcRpState::Accepted { session_key, .. } => Some(session_key),
            _ => None,
        }
    }

    /// Step 2: `Cha = senc(c ‖ h, K_V)` for the announced `h`.
    pub fn create_challenge<R: RngCore + CryptoRng>(
        &mut self,
        h: &Digest,
        rng: &mut R,
    ) -> Result<KdcChallengeMsg, RpError> {
        if self.state != KdcRpState::Idle {
            return Err(StateError {
                operation: "create_challenge",
                state: self.state.name(),
            }
            .into());
        }
        let c = crypto::rand_nonce(rng)?;
        let cha = kdc_wire::encode_challenge(&c, h, &self.k_v, rng)?;
        self.deadline = self.timeout.map(|t| self.clock.now() + t);
        self.state = KdcRpState::AwaitingResult { c, h: *h };
        Ok(cha)
    }

    fn reject(&mut self, reason: RejectReason) -> RpError {
        self.state = KdcRpState::Rejected(reason);
        self.deadline = None;
        RpError::Rejected(reason)
    }

    fn deadline_passed(&self) -> bool {
        self.deadline.is_some_and(|d| self.clock.now() > d)
    }

    /// Steps 17-19.
    pub fn process_result(&mut self, msg: &[u8]) -> Result<KdcVerdict, RpError> {
        let (c, h) = match self.state {
            KdcRpState::AwaitingResult { c, h } => (c, h),
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
        let Ok(res) = RpResultMsg::from_bytes(msg) else {
            return Err(self.reject(RejectReason::TamperOrWrongVerifier));
        };
        let contents = match kdc_wire::decode_rp_result(&res, &self.k_v) {
            Ok(v) => v,
            Err(WireError::Format(_)) => return Err(self.reject(RejectReason::Malformed)),
            Err(_) => return Err(self.reject(RejectReason::TamperOrWrongVerifier)),
        };
        if contents.c != c {
            return Err(self.reject(RejectReason::Replay));
        }
        if contents.h != h {
            return Err(self.reject(RejectReason::HashMismatch));
        }
        let RpResult {
            result,
            session_key,
            ..
        } = contents;
        self.state = KdcRpState::Accepted {
            result: result.clone(),
            session_key: session_key.clone(),
        };
        self.deadline = None;
        Ok(KdcVerdict {
            verdict: Verdict::from_result(result),
            session_key,
        })
    }

    pub fn check_timeout(&mut self) -> bool {
        if matches!(self.state, KdcRpState::AwaitingResult { .. }) && self.deadline_passed() {
            self.reject(RejectReason::Timeout);
            true
        } else {
            false
        }
    }

    pub fn expire(&mut self) {
        if matches!(self.state, KdcRpState::AwaitingResult { .. }) {
            self.reject(RejectReason::Timeout);
        }
    }

    pub fn reset(&mut self) -> Result<(), StateError> {
        if !self.state.is_terminal() {
            return Err(StateError {
                operation: "reset",
                state: self.state.name(),
            });
        }
        self.state = KdcRpState::Idle;
        Ok(())
    }
}

impl std::fmt::Debug for KdcRpSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KdcRpSession")
            .field("state", &self.state)
            .field("timeout", &self.timeout)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KdcAttesterState {
    Idle,
    SentHash,
    AwaitingVerdict,
    Done(SymKey),
}

impl KdcAttesterState {
    fn name(&self) -> &'static str {
        match self {
            KdcAttesterState::Idle => "Idle",
            KdcAttesterState::SentHash => "SentHash",
            KdcAttesterState::AwaitingVerdict => "AwaitingVerdict",
            KdcAttesterState::Done(_) => "Done",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KdcAttesterError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

pub struct KdcAttesterSession {
    signer: SigKeyPair,
    kem: KemKeyPair,
    verifier_sig: VerificationKey,
    verifier_kem: KemPublicKey,
    state: KdcAttesterState,
}

impl KdcAttesterSession {
    pub fn new(
        signer: SigKeyPair,
        kem: KemKeyPair,
        verifier_sig: VerificationKey,
        verifier_kem: KemPublicKey,
    ) -> Self {
        KdcAttesterSession {
            signer,
            kem,
            verifier_sig,
            verifier_kem,
            state: KdcAttesterState::Idle,
        }
    }

    pub fn state(&self) -> &KdcAttesterState {
        &self.state
    }

    pub fn public_key(&self) -> VerificationKey {
        self.signer.public()
    }

    pub fn kem_public_key(&self) -> &KemPublicKey {
        self.kem.public()
    }

    /// `hash(PK_A)`.
    pub fn key_hash(&self) -> Digest {
        self.signer.public().key_id()
    }

    pub fn session_key(&self) -> Option<&SymKey> {
        match &self.state {
            KdcAttesterState::Done(k) => Some(k),
            _ => None,
        }
    }

    /// Message (a).
    pub fn announce(&mut self) -> Result<Digest, KdcAttesterError> {
        if self.state != KdcAttesterState::Idle {
            return Err(StateError {
                operation: "announce",
                state: self.state.name(),
            }
            .into());
        }
        self.state = KdcAttesterState::SentHash;
        Ok(self.key_hash())
    }

    /// Steps 3-5: `Ev = aenc(M_A ‖ h ‖ Cha, PK_V')`, signed under `SK_A`.
    pub fn handle_challenge<R: RngCore + CryptoRng>(
        &mut self,
        cha: &[u8],
        metrics: &dyn MetricsProvider,
        rng: &mut R,
    ) -> Result<EvidenceMsg, KdcAttesterError> {
        if self.state != KdcAttesterState::SentHash {
            return Err(StateError {
                operation: "handle_challenge",
                state: self.state.name(),
            }
            .into());
        }
        let cha = KdcChallengeMsg::from_bytes(cha)?;
        let ev = kdc_wire::encode_evidence(
            &metrics.collect(),
            &self.key_hash(),
            &cha,
            &self.verifier_kem,
            &self.signer,
            rng,
        )?;
        self.state = KdcAttesterState::AwaitingVerdict;
        Ok(ev)
    }

    /// Steps 15-16: checks `δ_V`, opens `Res_A`, keeps `K_S` and returns
    /// `Res_RP` for relay. A message that fails leaves the session waiting.
    pub fn unwrap_result(&mut self, msg: &[u8]) -> Result<Vec<u8>, KdcAttesterError> {
        if self.state != KdcAttesterState::AwaitingVerdict {
            return Err(StateError {
                operation: "unwrap_result",
                state: self.state.name(),
            }
            .into());
        }
        let msg = AttesterResultMsg::from_bytes(msg)?;
        let (res_rp, ks) = kdc_wire::decode_attester_result(&msg, &self.verifier_sig, &self.kem)?;
        self.state = KdcAttesterState::Done(ks);
        Ok(res_rp.to_bytes())
    }

    pub fn reset(&mut self) {
        self.state = KdcAttesterState::Idle;
    }
}

impl std::fmt::Debug for KdcAttesterSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KdcAttesterSession")
            .field("public_key", &self.signer.public())
            .field("state", &self.state.name())
            .finish_non_exhaustive()
    }
}

/// Public keys the verifier holds for one attester.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KdcAttesterKeys {
    pub sig: VerificationKey,
    pub kem: KemPublicKey,
}

/// Everything the verifier established while answering one evidence message.
#[derive(Clone, Debug)]
pub struct KdcVerifierAccept {
    pub res_a: AttesterResultMsg,
    pub c: Nonce128,
    pub h: Digest,
    pub metrics: Metrics,
    pub result: EarResult,
    pub session_key: SymKey,
    pub rp: String,
}

pub struct KdcVerifierContext {
    signer: SigKeyPair,
    kem: KemKeyPair,
    rp_keys: Vec<(String, SymKey)>,
    attesters: HashMap<Digest, KdcAttesterKeys>,
    policy: Policy,
    issuer: ResultIssuer,
    seen: Mutex<HashSet<(Nonce128, Digest)>>,
    call_log: Option<CallLog>,
}

impl KdcVerifierContext {
    pub fn new(signer: SigKeyPair, kem: KemKeyPair, policy: Policy, issuer: ResultIssuer) -> Self {
        KdcVerifierContext {
            signer,
            kem,
            rp_keys: Vec::new(),
            attesters: HashMap::new(),
            policy,
            issuer,
            seen: Mutex::new(HashSet::new()),
            call_log: None,
        }
    }

    pub fn add_rp_key(&mut self, name: impl Into<String>, k_v: SymKey) -> &mut Self {
        self.rp_keys.push((name.into(), k_v));
        self
    }

    pub fn trust_attester(&mut self, sig: VerificationKey, kem: KemPublicKey) -> &mut Self {
        self.attesters
            .insert(sig.key_id(), KdcAttesterKeys { sig, kem });
        self
    }

    pub fn set_call_log(&mut self, log: CallLog) -> &mut Self {
        self.call_log = Some(log);
        self
    }

    pub fn public_key(&self) -> VerificationKey {
        self.signer.public()
    }

    pub fn kem_public_key(&self) -> &KemPublicKey {
        self.kem.public()
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    /// Steps 6-14.
    pub fn process_evidence<R: RngCore + CryptoRng>(
        &self,
        msg: &[u8],
        rng: &mut R,
    ) -> Result<KdcVerifierAccept, AbortReason> {
        let ev = EvidenceMsg::from_bytes(msg).map_err(|_| AbortReason::Malformed)?;
        let keys = self
            .attesters
            .get(&ev.key_id)
            .ok_or(AbortReason::UnknownAttester)?;

        record(&self.call_log, Primitive::Checksig);
        ev.verify(&keys.sig).map_err(|_| AbortReason::BadSignature)?;

        record(&self.call_log, Primitive::Adec);
        let pt = ev.decrypt(&self.kem).map_err(|_| AbortReason::BadEnvelope)?;
        let (metrics, h_a, cha) =
            kdc_wire::parse_evidence_plaintext(&pt).map_err(|_| AbortReason::BadEnvelope)?;

        let (c, h_rp, rp, k_v) = self
            .rp_keys
            .iter()
            .find_map(|(name, k_v)| {
                record(&self.call_log, Primitive::Sdec);
                kdc_wire::decode_challenge(&cha, k_v)
                    .ok()
                    .map(|(c, h)| (c, h, name.as_str(), k_v))
            })
            .ok_or(AbortReason::BadChallenge)?;

        if h_rp != h_a || h_a != keys.sig.key_id() {
            return Err(AbortReason::HashBindingMismatch);
        }

        if !self
            .seen
            .lock()
            .expect("seen-challenge set poisoned")
            .insert((c, h_rp))
        {
            return Err(AbortReason::DuplicateChallenge);
        }

        let result = validate_metrics(&self.policy, &metrics, kdc_attester_id(&h_a), &self.issuer);
        let session_key = SymKey::generate(rng).map_err(|_| AbortReason::Internal)?;
        let contents = RpResult {
            result: result.clone(),
            c,
            h: h_rp,
            session_key: session_key.clone(),
        };
        record(&self.call_log, Primitive::Senc);
        let res_rp =
            kdc_wire::encode_rp_result(&contents, k_v, rng).map_err(|_| AbortReason::Internal)?;
        record(&self.call_log, Primitive::Aenc);
        record(&self.call_log, Primitive::Sign);
        let res_a =
            kdc_wire::encode_attester_result(&res_rp, &session_key, &keys.kem, &self.signer, rng)
                .map_err(|_| AbortReason::Internal)?;
        Ok(KdcVerifierAccept {
            res_a,
            c,
            h: h_rp,
            metrics,
            result,
            session_key,
            rp: rp.to_owned(),
        })
    }
}

impl std::fmt::Debug for KdcVerifierContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KdcVerifierContext")
            .field("public_key", &self.signer.public())
            .field("rp_keys", &self.rp_keys.len())
            .field("attesters", &self.attesters.len())
            .field("issuer", &self.issuer)
            .finish_non_exhaustive()
    }
}

impl AbortReason {
    /// Protocol step at which the session-key verifier aborts, if any.
    pub fn kdc_step(&self) -> Option<u8> {
        match self {
            AbortReason::UnknownAttester | AbortReason::BadSignature => Some(6),
            AbortReason::BadEnvelope => Some(7),
            AbortReason::BadChallenge => Some(8),
            AbortReason::HashBindingMismatch => Some(9),
            _ => None,
        }
    }
}
