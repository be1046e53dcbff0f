// SPDX-License-Identifier: Apache-2.0
//! The network attacker.
//!
//! It holds its own keys, keys the topology explicitly hands over, the
//! public directory and whatever it has observed on the wire. It has no
//! handle on any honest session object.

use apcr_core::crypto::{
    self, AttesterId, Digest, KemPublicKey, Nonce128, SigKeyPair, SymKey,
};
use apcr_core::wire::kdc as kdc_wire;
use apcr_core::wire::{self, EarResult, EarVerdict, EvidenceMsg, Frame, MsgType, EAR_PROFILE};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::script::KeyRef;
use crate::topology::PublicDirectory;
use crate::HarnessError;

pub struct Adversary {
    own_key: SymKey,
    own_sig: SigKeyPair,
    known: Vec<(String, SymKey)>,
    public: PublicDirectory,
    observed: Vec<Vec<u8>>,
    rng: ChaCha20Rng,
}

fn config(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl Adversary {
    pub fn new(seed: u64, public: PublicDirectory) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Adversary {
            own_key: SymKey::generate(&mut rng).expect("seeded rng"),
            own_sig: SigKeyPair::generate(&mut rng),
            known: Vec::new(),
            public,
            observed: Vec::new(),
            rng,
        }
    }

    /// Hands the adversary a key, as when a device is compromised.
    pub fn learn_key(&mut self, name: impl Into<String>, key: SymKey) {
        self.known.push((name.into(), key));
    }

    /// Records octets seen on the wire.
    pub fn observe(&mut self, octets: &[u8]) {
        self.observed.push(octets.to_vec());
    }

    /// Everything the adversary holds, as raw octets.
    pub fn knowledge(&self) -> Vec<Vec<u8>> {
        let mut out = vec![
            self.own_key.as_bytes().to_vec(),
            self.own_sig.secret_bytes().to_vec(),
            self.public.attester_sig.to_bytes().to_vec(),
            self.public.attester_kem.to_bytes().to_vec(),
            self.public.mallory_sig.to_bytes().to_vec(),
            self.public.verifier_sig.to_bytes().to_vec(),
            self.public.verifier_kem.to_bytes().to_vec(),
        ];
        out.extend(self.known.iter().map(|(_, k)| k.as_bytes().to_vec()));
        out.extend(self.observed.iter().cloned());
        out
    }

    fn key(&self, r: &KeyRef) -> Result<SymKey, HarnessError> {
        match r {
            KeyRef::Own => Ok(self.own_key.clone()),
            KeyRef::Known(name) => self
                .known
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, k)| k.clone())
                .ok_or_else(|| config(format!("adversary does not know key {name:?}"))),
        }
    }

    fn random<const N: usize>(&mut self) -> [u8; N] {
        let mut b = [0u8; N];
        self.rng.fill_bytes(&mut b);
        b
    }

    fn forged_ear(&mut self) -> EarResult {
        EarResult {
            ear_version: EAR_PROFILE.to_owned(),
            issued_at: 1_700_000_000,
            verifier_id: "https://verifier.example.org/apcr-lpm/keytag01".to_owned(),
            attester_id: AttesterId(self.random()),
            verdict: EarVerdict::Affirming,
        }
    }

    /// An affirming result the adversary built itself, framed as `t`.
    pub fn forge_result(&mut self, t: MsgType, key: &KeyRef) -> Result<Vec<u8>, HarnessError> {
        let k = self.key(key)?;
        let ear = self.forged_ear();
        let c = Nonce128(self.random());
        let payload = match t {
            MsgType::ResultToAttester | MsgType::ResultToRp => {
                let id = AttesterId(self.random());
                wire::lpm::encode_result(&ear, &c, &id, &k, &mut self.rng)
                    .map_err(|e| config(e.to_string()))?
                    .to_bytes()
            }
            MsgType::KdcResultToRp | MsgType::KdcResultToAttester => {
                let contents = kdc_wire::RpResult {
                    result: ear,
                    c,
                    h: Digest(self.random()),
                    session_key: SymKey::from_bytes(self.random()),
                };
                let res_rp = kdc_wire::encode_rp_result(&contents, &k, &mut self.rng)
                    .map_err(|e| config(e.to_string()))?;
                if t == MsgType::KdcResultToRp {
                    res_rp.to_bytes()
                } else {
                    let attester_kem: KemPublicKey = self.public.attester_kem.clone();
                    kdc_wire::encode_attester_result(
                        &res_rp,
                        &contents.session_key,
                        &attester_kem,
                        &self.own_sig,
                        &mut self.rng,
                    )
                    .map_err(|e| config(e.to_string()))?
                    .to_bytes()
                }
            }
            other => return Err(config(format!("forge_result does not apply to {other}"))),
        };
        frame(t, payload)
    }

    /// Same evidence ciphertext, signed and keyed under the adversary's key.
    pub fn resign(&mut self, octets: &[u8]) -> Result<Vec<u8>, HarnessError> {
        let f = Frame::decode(octets).map_err(|e| config(e.to_string()))?;
        if !matches!(f.msg_type, MsgType::Evidence | MsgType::KdcEvidence) {
            return Err(config(format!("resign does not apply to {}", f.msg_type)));
        }
        let mut ev = EvidenceMsg::from_bytes(&f.payload).map_err(|e| config(e.to_string()))?;
        ev.sig = crypto::sign(&ev.ev.to_bytes(), &self.own_sig);
        ev.key_id = self.own_sig.public().key_id();
        frame(f.msg_type, ev.to_bytes())
    }

    /// A well-formed challenge under the adversary's own key, for use of
    /// the honest attester as an oracle.
    pub fn forge_challenge(&mut self, t: MsgType) -> Result<Vec<u8>, HarnessError> {
        let c = Nonce128(self.random());
        let payload = match t {
            MsgType::Challenge => {
                let id = AttesterId(self.random());
                wire::lpm::encode_challenge(&c, &id, &self.own_key, &mut self.rng)
                    .map_err(|e| config(e.to_string()))?
                    .to_bytes()
            }
            MsgType::KdcChallenge => {
                let h = self.public.attester_sig.key_id();
                kdc_wire::encode_challenge(&c, &h, &self.own_key, &mut self.rng)
                    .map_err(|e| config(e.to_string()))?
                    .to_bytes()
            }
            other => return Err(config(format!("no challenge of type {other}"))),
        };
        frame(t, payload)
    }
}

fn frame(t: MsgType, payload: Vec<u8>) -> Result<Vec<u8>, HarnessError> {
    Frame::new(t, payload)
        .encode()
        .map_err(|e| config(e.to_string()))
}

impl std::fmt::Debug for Adversary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Adversary")
            .field("known_keys", &self.known.iter().map(|(n, _)| n).collect::<Vec<_>>())
            .field("observed", &self.observed.len())
            .finish_non_exhaustive()
    }
}
