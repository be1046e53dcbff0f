// SPDX-License-Identifier: Apache-2.0
//! Messages (a)-(d) of the pre-shared-key protocol.

use rand::{CryptoRng, RngCore};

use crate::crypto::{
    self, AeadCiphertext, AttesterId, Digest, HybridCiphertext, KemKeyPair, KemPublicKey,
    KeyAttestation, Nonce128, SigKeyPair, Signature, SymKey, VerificationKey, AEAD_OVERHEAD,
    DIGEST_LEN, ID_LEN, NONCE_LEN, SIGNATURE_LEN,
};

use super::buf::{put_var, Reader};
use super::{EarResult, Metrics, WireError};

/// `Cha` is always 13 + 32 + 10 bytes.
pub const CHALLENGE_LEN: usize = AEAD_OVERHEAD + NONCE_LEN + ID_LEN;
/// `|Res| = |CBOR(R_A)| + RESULT_FIXED_OVERHEAD`.
pub const RESULT_FIXED_OVERHEAD: usize = NONCE_LEN + ID_LEN + AEAD_OVERHEAD;

/// Challenge `Cha = senc(c ‖ id_A, K_V)`; opaque to the attester.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChallengeMsg(AeadCiphertext);

impl ChallengeMsg {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() != CHALLENGE_LEN {
            return Err(WireError::format(format!(
                "challenge must be {CHALLENGE_LEN} bytes, got {}",
                bytes.len()
            )));
        }
        Ok(ChallengeMsg(AeadCiphertext::from_bytes(bytes)?))
    }

    pub fn ciphertext(&self) -> &AeadCiphertext {
        &self.0
    }
}

pub fn encode_challenge<R: RngCore + CryptoRng>(
    c: &Nonce128,
    id: &AttesterId,
    k_v: &SymKey,
    rng: &mut R,
) -> Result<ChallengeMsg, WireError> {
    let mut pt = [0u8; NONCE_LEN + ID_LEN];
    pt[..NONCE_LEN].copy_from_slice(c.as_bytes());
    pt[NONCE_LEN..].copy_from_slice(id.as_bytes());
    Ok(ChallengeMsg(crypto::senc_random(&pt, k_v, rng)?))
}

pub fn decode_challenge(
    msg: &ChallengeMsg,
    k_v: &SymKey,
) -> Result<(Nonce128, AttesterId), WireError> {
    let pt = crypto::sdec(&msg.0, k_v)?;
    if pt.len() != NONCE_LEN + ID_LEN {
        return Err(WireError::format("challenge plaintext must be 32 bytes"));
    }
    Ok((
        Nonce128::from_slice(&pt[..NONCE_LEN])?,
        AttesterId::from_slice(&pt[NONCE_LEN..])?,
    ))
}

/// Signed hybrid-encrypted evidence.
///
/// Encoded as `key-id (32) ‖ len ‖ Ev ‖ δ (64)`, where key-id is
/// `hash(PK_A)` and δ signs exactly the `Ev` octets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvidenceMsg {
    pub key_id: Digest,
    pub ev: HybridCiphertext,
    pub sig: Signature,
}

impl EvidenceMsg {
    /// Encrypts `plaintext` to the verifier and signs the ciphertext.
    pub fn seal<R: RngCore + CryptoRng>(
        plaintext: &[u8],
        verifier_pk: &KemPublicKey,
        signer: &SigKeyPair,
        rng: &mut R,
    ) -> Result<Self, WireError> {
        let ev = crypto::aenc(plaintext, verifier_pk, rng)?;
        let sig = crypto::sign(&ev.to_bytes(), signer);
        Ok(EvidenceMsg {
            key_id: signer.public().key_id(),
            ev,
            sig,
        })
    }

    pub fn verify(&self, pk: &VerificationKey) -> Result<(), WireError> {
        crypto::checksig(&self.sig, &self.ev.to_bytes(), pk)?;
        Ok(())
    }

    pub fn decrypt(&self, kem: &KemKeyPair) -> Result<Vec<u8>, WireError> {
        Ok(crypto::adec(&self.ev, kem)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let ev = self.ev.to_bytes();
        let mut out = Vec::with_capacity(DIGEST_LEN + 2 + ev.len() + SIGNATURE_LEN);
        out.extend_from_slice(self.key_id.as_bytes());
        put_var(&mut out, &ev);
        out.extend_from_slice(&self.sig.0);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let key_id = Digest(r.take_array("evidence key id")?);
        let ev = HybridCiphertext::from_bytes(r.take_var("evidence body")?)?;
        let sig = Signature(r.take_array("evidence signature")?);
        r.finish("evidence")?;
        Ok(EvidenceMsg { key_id, ev, sig })
    }
}

fn evidence_plaintext(ak: &KeyAttestation, m: &Metrics, cha: &ChallengeMsg) -> Vec<u8> {
    let mut pt = Vec::new();
    put_var(&mut pt, &ak.to_bytes());
    put_var(&mut pt, &m.encode());
    pt.extend_from_slice(&cha.to_bytes());
    pt
}

pub fn parse_evidence_plaintext(
    pt: &[u8],
) -> Result<(KeyAttestation, Metrics, ChallengeMsg), WireError> {
    let mut r = Reader::new(pt);
    let ak = KeyAttestation::from_bytes(r.take_var("key attestation")?)?;
    let m = Metrics::decode(r.take_var("metrics")?)?;
    let cha = ChallengeMsg::from_bytes(r.take(CHALLENGE_LEN, "challenge")?)?;
    r.finish("evidence plaintext")?;
    Ok((ak, m, cha))
}

pub fn encode_evidence<R: RngCore + CryptoRng>(
    ak: &KeyAttestation,
    m: &Metrics,
    cha: &ChallengeMsg,
    verifier_pk: &KemPublicKey,
    signer: &SigKeyPair,
    rng: &mut R,
) -> Result<EvidenceMsg, WireError> {
    EvidenceMsg::seal(&evidence_plaintext(ak, m, cha), verifier_pk, signer, rng)
}

/// Checks the signature before attempting any decryption.
pub fn decode_evidence(
    msg: &EvidenceMsg,
    kem: &KemKeyPair,
    attester_pk: &VerificationKey,
) -> Result<(KeyAttestation, Metrics, ChallengeMsg), WireError> {
    msg.verify(attester_pk)?;
    parse_evidence_plaintext(&msg.decrypt(kem)?)
}

/// `Res = senc(CBOR(R_A) ‖ c ‖ id_Cha, K_V)`; the attester relays it untouched.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResultMsg(AeadCiphertext);

impl ResultMsg {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() < RESULT_FIXED_OVERHEAD {
            return Err(WireError::format("result message too short"));
        }
        Ok(ResultMsg(AeadCiphertext::from_bytes(bytes)?))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub fn encode_result<R: RngCore + CryptoRng>(
    r: &EarResult,
    c: &Nonce128,
    id_cha: &AttesterId,
    k_v: &SymKey,
    rng: &mut R,
) -> Result<ResultMsg, WireError> {
    let mut pt = r.encode();
    pt.extend_from_slice(c.as_bytes());
    pt.extend_from_slice(id_cha.as_bytes());
    Ok(ResultMsg(crypto::senc_random(&pt, k_v, rng)?))
}

pub fn decode_result(
    msg: &ResultMsg,
    k_v: &SymKey,
) -> Result<(EarResult, Nonce128, AttesterId), WireError> {
    let pt = crypto::sdec(&msg.0, k_v)?;
    if pt.len() < NONCE_LEN + ID_LEN {
        return Err(WireError::format("result plaintext too short"));
    }
    let (ear, tail) = pt.split_at(pt.len() - NONCE_LEN - ID_LEN);
    let r = EarResult::decode(ear)?;
    Ok((
        r,
        Nonce128::from_slice(&tail[..NONCE_LEN])?,
        AttesterId::from_slice(&tail[NONCE_LEN..])?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{hash, SoftTee, KeyAttestor};
    use crate::wire::{EarVerdict, EAR_PROFILE};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(11)
    }

    fn ear(id: AttesterId) -> EarResult {
        EarResult {
            ear_version: EAR_PROFILE.into(),
            issued_at: 1_700_000_000,
            verifier_id: "https://verifier.example.org/apcr-lpm/keytag01".into(),
            attester_id: id,
            verdict: EarVerdict::Affirming,
        }
    }

    #[test]
    fn challenge_is_55_bytes_and_roundtrips() {
        let mut rng = rng();
        let kv = SymKey::generate(&mut rng).unwrap();
        let c = crypto::rand_nonce(&mut rng).unwrap();
        let id = AttesterId([9; 16]);
        let cha = encode_challenge(&c, &id, &kv, &mut rng).unwrap();
        assert_eq!(cha.to_bytes().len(), 55);
        let back = ChallengeMsg::from_bytes(&cha.to_bytes()).unwrap();
        assert_eq!(decode_challenge(&back, &kv).unwrap(), (c, id));
    }

    #[test]
    fn truncated_challenge_never_decodes() {
        let mut rng = rng();
        let kv = SymKey::generate(&mut rng).unwrap();
        let c = crypto::rand_nonce(&mut rng).unwrap();
        let bytes = encode_challenge(&c, &AttesterId([1; 16]), &kv, &mut rng)
            .unwrap()
            .to_bytes();
        for len in 0..bytes.len() {
            let res = ChallengeMsg::from_bytes(&bytes[..len])
                .and_then(|m| decode_challenge(&m, &kv));
            assert!(
                matches!(res, Err(WireError::Format(_)) | Err(WireError::Integrity)),
                "length {len}"
            );
        }
    }

    #[test]
    fn challenge_with_wrong_plaintext_size() {
        let mut rng = rng();
        let kv = SymKey::generate(&mut rng).unwrap();
        // Bypasses the 55-byte wire check to reach the plaintext-size guard.
        let ct = crypto::senc_random(&[0u8; 33], &kv, &mut rng).unwrap();
        let msg = ChallengeMsg(ct);
        assert!(matches!(decode_challenge(&msg, &kv), Err(WireError::Format(_))));
    }

    #[test]
    fn evidence_roundtrip_and_failures() {
        let mut rng = rng();
        let kv = SymKey::generate(&mut rng).unwrap();
        let sk_a = SigKeyPair::generate(&mut rng);
        let other = SigKeyPair::generate(&mut rng);
        let kem = KemKeyPair::generate(&mut rng);
        let tee = SoftTee::new(SigKeyPair::generate(&mut rng));
        let ak = tee.attest_key(&hash(b"K_A")).unwrap();
        let m = Metrics::new().with("boot", vec![1, 2, 3]);
        let c = crypto::rand_nonce(&mut rng).unwrap();
        let cha = encode_challenge(&c, &AttesterId([3; 16]), &kv, &mut rng).unwrap();

        let msg = encode_evidence(&ak, &m, &cha, kem.public(), &sk_a, &mut rng).unwrap();
        let parsed = EvidenceMsg::from_bytes(&msg.to_bytes()).unwrap();
        assert_eq!(parsed, msg);
        assert_eq!(parsed.key_id, sk_a.public().key_id());
        let (ak2, m2, cha2) = decode_evidence(&parsed, &kem, &sk_a.public()).unwrap();
        assert_eq!((ak2, m2, cha2.to_bytes()), (ak.clone(), m.clone(), cha.to_bytes()));

        assert_eq!(
            decode_evidence(&parsed, &kem, &other.public()),
            Err(WireError::Signature)
        );

        // Re-sign a tampered ciphertext: signature passes, decryption fails.
        let body = msg.ev.to_bytes();
        for i in 0..body.len() {
            let mut t = body.clone();
            t[i] ^= 0x01;
            let ev = HybridCiphertext::from_bytes(&t).unwrap();
            let tampered = EvidenceMsg {
                sig: crypto::sign(&ev.to_bytes(), &sk_a),
                ev,
                key_id: msg.key_id,
            };
            assert_eq!(
                decode_evidence(&tampered, &kem, &sk_a.public()),
                Err(WireError::Integrity),
                "byte {i}"
            );
        }
    }

    #[test]
    fn result_size_formula_and_roundtrip() {
        let mut rng = rng();
        let kv = SymKey::generate(&mut rng).unwrap();
        let ka = SymKey::generate(&mut rng).unwrap();
        let c = crypto::rand_nonce(&mut rng).unwrap();
        let id = AttesterId([5; 16]);
        let r = ear(id);
        let res = encode_result(&r, &c, &id, &kv, &mut rng).unwrap();
        assert_eq!(res.len(), r.encode().len() + 32 + 23);
        assert_eq!(res.to_bytes().len(), 174);
        let back = ResultMsg::from_bytes(&res.to_bytes()).unwrap();
        assert_eq!(decode_result(&back, &kv).unwrap(), (r, c, id));
        assert_eq!(decode_result(&back, &ka), Err(WireError::Integrity));
    }

    #[test]
    fn reflected_challenge_is_not_a_result() {
        let mut rng = rng();
        let kv = SymKey::generate(&mut rng).unwrap();
        let c = crypto::rand_nonce(&mut rng).unwrap();
        let cha = encode_challenge(&c, &AttesterId([1; 16]), &kv, &mut rng).unwrap();
        let as_result = ResultMsg::from_bytes(&cha.to_bytes()).unwrap();
        assert!(matches!(decode_result(&as_result, &kv), Err(WireError::Format(_))));
    }
}
