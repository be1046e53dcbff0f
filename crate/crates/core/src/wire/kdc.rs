// SPDX-License-Identifier: Apache-2.0
//! Messages of the verifier-generated session key variant.
//!
//! - (a) hash announce: `h = hash(PK_A)`, 32 bytes
//! - (b) challenge: `senc(c ‖ h, K_V)`, 71 bytes
//! - (c) evidence: [`EvidenceMsg`] over `len ‖ M_A ‖ h ‖ Cha`
//! - (d) `len ‖ Res_A ‖ δ_V` with `Res_A = aenc(len ‖ Res_RP ‖ K_S, PK_A')`
//! - (e) `Res_RP = senc(len ‖ CBOR(R_A) ‖ c ‖ h ‖ K_S, K_V)`

use rand::{CryptoRng, RngCore};

use crate::crypto::{
    self, AeadCiphertext, Digest, HybridCiphertext, KemKeyPair, KemPublicKey, Nonce128,
    SigKeyPair, Signature, SymKey, VerificationKey, AEAD_OVERHEAD, DIGEST_LEN, NONCE_LEN,
    SYM_KEY_LEN,
};

use super::buf::{put_var, Reader};
use super::lpm::EvidenceMsg;
use super::{EarResult, Metrics, WireError};

pub const KDC_CHALLENGE_LEN: usize = AEAD_OVERHEAD + NONCE_LEN + DIGEST_LEN;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KdcChallengeMsg(AeadCiphertext);

impl KdcChallengeMsg {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() != KDC_CHALLENGE_LEN {
            return Err(WireError::format(format!(
                "challenge must be {KDC_CHALLENGE_LEN} bytes, got {}",
                bytes.len()
            )));
        }
        Ok(KdcChallengeMsg(AeadCiphertext::from_bytes(bytes)?))
    }
}

pub fn encode_challenge<R: RngCore + CryptoRng>(
    c: &Nonce128,
    h: &Digest,
    k_v: &SymKey,
    rng: &mut R,
) -> Result<KdcChallengeMsg, WireError> {
    let mut pt = Vec::with_capacity(NONCE_LEN + DIGEST_LEN);
    pt.extend_from_slice(c.as_bytes());
    pt.extend_from_slice(h.as_bytes());
    Ok(KdcChallengeMsg(crypto::senc_random(&pt, k_v, rng)?))
}

pub fn decode_challenge(
    msg: &KdcChallengeMsg,
    k_v: &SymKey,
) -> Result<(Nonce128, Digest), WireError> {
    let pt = crypto::sdec(&msg.0, k_v)?;
    if pt.len() != NONCE_LEN + DIGEST_LEN {
        return Err(WireError::format("challenge plaintext must be 48 bytes"));
    }
    Ok((
        Nonce128::from_slice(&pt[..NONCE_LEN])?,
        Digest::from_slice(&pt[NONCE_LEN..])?,
    ))
}

pub fn encode_evidence<R: RngCore + CryptoRng>(
    m: &Metrics,
    h: &Digest,
    cha: &KdcChallengeMsg,
    verifier_pk: &KemPublicKey,
    signer: &SigKeyPair,
    rng: &mut R,
) -> Result<EvidenceMsg, WireError> {
    let mut pt = Vec::new();
    put_var(&mut pt, &m.encode());
    pt.extend_from_slice(h.as_bytes());
    pt.extend_from_slice(&cha.to_bytes());
    EvidenceMsg::seal(&pt, verifier_pk, signer, rng)
}

pub fn parse_evidence_plaintext(
    pt: &[u8],
) -> Result<(Metrics, Digest, KdcChallengeMsg), WireError> {
    let mut r = Reader::new(pt);
    let m = Metrics::decode(r.take_var("metrics")?)?;
    let h = Digest(r.take_array("attester hash")?);
    let cha = KdcChallengeMsg::from_bytes(r.take(KDC_CHALLENGE_LEN, "challenge")?)?;
    r.finish("evidence plaintext")?;
    Ok((m, h, cha))
}

/// Checks the signature before attempting any decryption.
pub fn decode_evidence(
    msg: &EvidenceMsg,
    kem: &KemKeyPair,
    attester_pk: &VerificationKey,
) -> Result<(Metrics, Digest, KdcChallengeMsg), WireError> {
    msg.verify(attester_pk)?;
    parse_evidence_plaintext(&msg.decrypt(kem)?)
}

/// `Res_RP`, relayed untouched by the attester.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RpResultMsg(AeadCiphertext);

impl RpResultMsg {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        Ok(RpResultMsg(AeadCiphertext::from_bytes(bytes)?))
    }
}

/// Contents of `Res_RP`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RpResult {
    pub result: EarResult,
    pub c: Nonce128,
    pub h: Digest,
    pub session_key: SymKey,
}

pub fn encode_rp_result<R: RngCore + CryptoRng>(
    contents: &RpResult,
    k_v: &SymKey,
    rng: &mut R,
) -> Result<RpResultMsg, WireError> {
    let mut pt = Vec::new();
    put_var(&mut pt, &contents.result.encode());
    pt.extend_from_slice(contents.c.as_bytes());
    pt.extend_from_slice(contents.h.as_bytes());
    pt.extend_from_slice(contents.session_key.as_bytes());
    Ok(RpResultMsg(crypto::senc_random(&pt, k_v, rng)?))
}

pub fn decode_rp_result(msg: &RpResultMsg, k_v: &SymKey) -> Result<RpResult, WireError> {
    let pt = crypto::sdec(&msg.0, k_v)?;
    let mut r = Reader::new(&pt);
    let result = EarResult::decode(r.take_var("attestation result")?)?;
    let c = Nonce128(r.take_array("nonce")?);
    let h = Digest(r.take_array("attester hash")?);
    let session_key = SymKey::from_bytes(r.take_array::<SYM_KEY_LEN>("session key")?);
    r.finish("result plaintext")?;
    Ok(RpResult {
        result,
        c,
        h,
        session_key,
    })
}

/// Message (d): `Res_A` signed by the verifier.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttesterResultMsg {
    pub res_a: HybridCiphertext,
    pub sig: Signature,
}

impl AttesterResultMsg {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_var(&mut out, &self.res_a.to_bytes());
        out.extend_from_slice(&self.sig.0);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let res_a = HybridCiphertext::from_bytes(r.take_var("Res_A")?)?;
        let sig = Signature(r.take_array("verifier signature")?);
        r.finish("attester result")?;
        Ok(AttesterResultMsg { res_a, sig })
    }
}

pub fn encode_attester_result<R: RngCore + CryptoRng>(
    res_rp: &RpResultMsg,
    session_key: &SymKey,
    attester_kem: &KemPublicKey,
    verifier_signer: &SigKeyPair,
    rng: &mut R,
) -> Result<AttesterResultMsg, WireError> {
    let mut pt = Vec::new();
    put_var(&mut pt, &res_rp.to_bytes());
    pt.extend_from_slice(session_key.as_bytes());
    let res_a = crypto::aenc(&pt, attester_kem, rng)?;
    let sig = crypto::sign(&res_a.to_bytes(), verifier_signer);
    Ok(AttesterResultMsg { res_a, sig })
}

/// Checks `δ_V` first, then opens `Res_A` into `(Res_RP, K_S)`.
pub fn decode_attester_result(
    msg: &AttesterResultMsg,
    verifier_pk: &VerificationKey,
    attester_kem: &KemKeyPair,
) -> Result<(RpResultMsg, SymKey), WireError> {
    crypto::checksig(&msg.sig, &msg.res_a.to_bytes(), verifier_pk)?;
    let pt = crypto::adec(&msg.res_a, attester_kem)?;
    let mut r = Reader::new(&pt);
    let res_rp = RpResultMsg::from_bytes(r.take_var("Res_RP")?)?;
    let ks = SymKey::from_bytes(r.take_array::<SYM_KEY_LEN>("session key")?);
    r.finish("Res_A plaintext")?;
    Ok((res_rp, ks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{AttesterId, SigKeyPair};
    use crate::wire::{EarVerdict, EAR_PROFILE};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn challenge_is_71_bytes() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let kv = SymKey::generate(&mut rng).unwrap();
        let c = crypto::rand_nonce(&mut rng).unwrap();
        let h = crypto::hash(b"pk");
        let cha = encode_challenge(&c, &h, &kv, &mut rng).unwrap();
        assert_eq!(cha.to_bytes().len(), 71);
        let back = KdcChallengeMsg::from_bytes(&cha.to_bytes()).unwrap();
        assert_eq!(decode_challenge(&back, &kv).unwrap(), (c, h));
    }

    #[test]
    fn result_layers_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let kv = SymKey::generate(&mut rng).unwrap();
        let ks = SymKey::generate(&mut rng).unwrap();
        let sv = SigKeyPair::generate(&mut rng);
        let akem = KemKeyPair::generate(&mut rng);
        let contents = RpResult {
            result: EarResult {
                ear_version: EAR_PROFILE.into(),
                issued_at: 42,
                verifier_id: "v".into(),
                attester_id: AttesterId([1; 16]),
                verdict: EarVerdict::Warning,
            },
            c: crypto::rand_nonce(&mut rng).unwrap(),
            h: crypto::hash(b"pk"),
            session_key: ks.clone(),
        };
        let res_rp = encode_rp_result(&contents, &kv, &mut rng).unwrap();
        assert_eq!(decode_rp_result(&res_rp, &kv).unwrap(), contents);

        let d = encode_attester_result(&res_rp, &ks, akem.public(), &sv, &mut rng).unwrap();
        let d = AttesterResultMsg::from_bytes(&d.to_bytes()).unwrap();
        let (inner, ks2) = decode_attester_result(&d, &sv.public(), &akem).unwrap();
        assert_eq!(inner, res_rp);
        assert_eq!(ks2, ks);

        let other = SigKeyPair::generate(&mut rng);
        assert_eq!(
            decode_attester_result(&d, &other.public(), &akem),
            Err(WireError::Signature)
        );
    }
}
