// SPDX-License-Identifier: Apache-2.0
use std::collections::{HashMap, HashSet};
use std::sync::Mutex;

use rand::{CryptoRng, RngCore};

use crate::crypto::{
    self, record, AttesterId, CallLog, Digest, KemKeyPair, KemPublicKey, Nonce128, Primitive,
    SymKey, VerificationKey,
};
use crate::wire::{self, EarResult, EvidenceMsg, Metrics, ResultMsg};

use super::{validate_metrics, AbortReason, Policy, ResultIssuer};

/// Everything the verifier established while answering one evidence message.
#[derive(Clone, Debug)]
pub struct VerifierAccept {
    pub res: ResultMsg,
    pub c: Nonce128,
    pub id: AttesterId,
    pub metrics: Metrics,
    pub result: EarResult,
    pub attester_pk: VerificationKey,
    /// Name of the relying-party key that opened the challenge.
    pub rp: String,
}

/// Verifier state shared by concurrent sessions.
///
/// Registries are configured up front and only read afterwards; the set of
/// answered challenges is the only state that changes per session.
pub struct VerifierContext {
    kem: KemKeyPair,
    rp_keys: Vec<(String, SymKey)>,
    attesters: HashMap<Digest, VerificationKey>,
    trusted_tees: Vec<VerificationKey>,
    policy: Policy,
    issuer: ResultIssuer,
    seen: Mutex<HashSet<(Nonce128, AttesterId)>>,
    call_log: Option<CallLog>,
}

impl VerifierContext {
    pub fn new(kem: KemKeyPair, policy: Policy, issuer: ResultIssuer) -> Self {
        VerifierContext {
            kem,
            rp_keys: Vec::new(),
            attesters: HashMap::new(),
            trusted_tees: Vec::new(),
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

    pub fn trust_attester(&mut self, pk: VerificationKey) -> &mut Self {
        self.attesters.insert(pk.key_id(), pk);
        self
    }

    pub fn trust_tee(&mut self, pk: VerificationKey) -> &mut Self {
        self.trusted_tees.push(pk);
        self
    }

    pub fn set_call_log(&mut self, log: CallLog) -> &mut Self {
        self.call_log = Some(log);
        self
    }

    pub fn public_key(&self) -> &KemPublicKey {
        self.kem.public()
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn issuer(&self) -> &ResultIssuer {
        &self.issuer
    }

    fn open_challenge(
        &self,
        cha: &wire::ChallengeMsg,
    ) -> Option<(Nonce128, AttesterId, &str, &SymKey)> {
        self.rp_keys.iter().find_map(|(name, k_v)| {
            record(&self.call_log, Primitive::Sdec);
            wire::lpm::decode_challenge(cha, k_v)
                .ok()
                .map(|(c, id)| (c, id, name.as_str(), k_v))
        })
    }

    /// Steps 8-15. Aborts at the first failing check; nothing is emitted on
    /// abort.
    pub fn process_evidence<R: RngCore + CryptoRng>(
        &self,
        msg: &[u8],
        rng: &mut R,
    ) -> Result<VerifierAccept, AbortReason> {
        let ev = EvidenceMsg::from_bytes(msg).map_err(|_| AbortReason::Malformed)?;
        let pk_a = *self
            .attesters
            .get(&ev.key_id)
            .ok_or(AbortReason::UnknownAttester)?;

        record(&self.call_log, Primitive::Checksig);
        ev.verify(&pk_a).map_err(|_| AbortReason::BadSignature)?;

        record(&self.call_log, Primitive::Adec);
        let pt = ev.decrypt(&self.kem).map_err(|_| AbortReason::BadEnvelope)?;
        let (ak, metrics, cha) =
            wire::lpm::parse_evidence_plaintext(&pt).map_err(|_| AbortReason::BadEnvelope)?;

        let (c, id_cha, rp, k_v) = self.open_challenge(&cha).ok_or(AbortReason::BadChallenge)?;

        record(&self.call_log, Primitive::ValidateKeyAttestation);
        let h = crypto::validate_key_attestation(&ak, &self.trusted_tees)
            .map_err(|_| AbortReason::BadKeyAttestation)?;

        let id_a = crypto::attester_id(&h, &pk_a);
        if id_a != id_cha {
            return Err(AbortReason::IdBindingMismatch);
        }

        if !self
            .seen
            .lock()
            .expect("seen-challenge set poisoned")
            .insert((c, id_cha))
        {
            return Err(AbortReason::DuplicateChallenge);
        }

        let result = validate_metrics(&self.policy, &metrics, id_cha, &self.issuer);
        record(&self.call_log, Primitive::Senc);
        let res = wire::lpm::encode_result(&result, &c, &id_cha, k_v, rng)
            .map_err(|_| AbortReason::Internal)?;
        Ok(VerifierAccept {
            res,
            c,
            id: id_cha,
            metrics,
            result,
            attester_pk: pk_a,
            rp: rp.to_owned(),
        })
    }
}

impl std::fmt::Debug for VerifierContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VerifierContext")
            .field("public_key", self.kem.public())
            .field("rp_keys", &self.rp_keys.len())
            .field("attesters", &self.attesters.len())
            .field("issuer", &self.issuer)
            .finish_non_exhaustive()
    }
}
