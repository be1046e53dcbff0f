// SPDX-License-Identifier: Apache-2.0
//! Primitive contracts used by all three roles.
//!
//! The default suite is:
//!
//! - `senc`/`sdec`: AES-128-CCM, 13-byte nonce, 10-byte tag. A serialized
//!   [`AeadCiphertext`] is `nonce ‖ body ‖ tag`, i.e. plaintext plus 23 bytes.
//! - `aenc`/`adec`: HPKE base mode, DHKEM(X25519, HKDF-SHA256), HKDF-SHA256,
//!   AES-128-GCM. Confidentiality towards the recipient only; sender
//!   authentication comes from a separate signature.
//! - `sign`/`checksig`: Ed25519.
//! - `hash`: SHA-256.
//!
//! Key attestation is provided by [`SoftTee`], a software stand-in for a TEE
//! that signs the digest of a key with its own identity key.

use std::fmt;
use std::sync::{Arc, Mutex};

use aes::Aes128;
use ccm::aead::generic_array::GenericArray;
use ccm::aead::{AeadInPlace, KeyInit};
use ccm::consts::{U10, U13};
use ccm::Ccm;
use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use hpke::{Deserializable, Kem as _, OpModeR, OpModeS, Serializable};
use rand::{CryptoRng, RngCore};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub const SYM_KEY_LEN: usize = 16;
pub const NONCE_LEN: usize = 16;
pub const DIGEST_LEN: usize = 32;
pub const ID_LEN: usize = 16;
pub const AEAD_NONCE_LEN: usize = 13;
pub const AEAD_TAG_LEN: usize = 10;
/// Bytes added by `senc` on top of the plaintext.
pub const AEAD_OVERHEAD: usize = AEAD_NONCE_LEN + AEAD_TAG_LEN;
pub const SIGNATURE_LEN: usize = 64;
pub const PUBLIC_KEY_LEN: usize = 32;
/// Encapsulated X25519 key plus the AES-GCM tag.
pub const HYBRID_OVERHEAD: usize = 32 + 16;

type Aes128Ccm = Ccm<Aes128, U10, U13>;
type HybridKem = hpke::kem::X25519HkdfSha256;
type HybridAead = hpke::aead::AesGcm128;
type HybridKdf = hpke::kdf::HkdfSha256;

const HYBRID_INFO: &[u8] = b"apcr hybrid evidence v1";
const KEY_ATTESTATION_LABEL: &[u8] = b"apcr soft-tee key attestation v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("invalid {what} length: expected {expected}, got {actual}")]
    InvalidLength {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("integrity check failed")]
    Integrity,
    #[error("signature verification failed")]
    Signature,
    #[error("key attestation rejected")]
    Attestation,
    #[error("TEE unavailable")]
    TeeUnavailable,
    #[error("entropy source failure")]
    Entropy,
    #[error("malformed public key")]
    PublicKey,
}

fn fixed<const N: usize>(what: &'static str, bytes: &[u8]) -> Result<[u8; N], CryptoError> {
    bytes.try_into().map_err(|_| CryptoError::InvalidLength {
        what,
        expected: N,
        actual: bytes.len(),
    })
}

/// 128-bit symmetric key (K_A, K_V or a session key).
#[derive(Clone, PartialEq, Eq)]
pub struct SymKey([u8; SYM_KEY_LEN]);

impl SymKey {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Result<Self, CryptoError> {
        let mut k = [0u8; SYM_KEY_LEN];
        rng.try_fill_bytes(&mut k).map_err(|_| CryptoError::Entropy)?;
        Ok(SymKey(k))
    }

    pub const fn from_bytes(bytes: [u8; SYM_KEY_LEN]) -> Self {
        SymKey(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        fixed("symmetric key", bytes).map(SymKey)
    }

    pub fn as_bytes(&self) -> &[u8; SYM_KEY_LEN] {
        &self.0
    }
}

impl fmt::Debug for SymKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SymKey(..)")
    }
}

impl Drop for SymKey {
    fn drop(&mut self) {
        self.0 = [0u8; SYM_KEY_LEN];
    }
}

macro_rules! octet_newtype {
    ($(#[$m:meta])* $name:ident, $len:expr, $what:literal) => {
        $(#[$m])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
                fixed($what, bytes).map($name)
            }

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!(stringify!($name), "({})"), hex::encode(self.0))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&hex::encode(self.0))
            }
        }
    };
}

octet_newtype!(
    /// Fresh 128-bit challenge nonce `c`.
    Nonce128,
    NONCE_LEN,
    "nonce"
);
octet_newtype!(
    /// SHA-256 output.
    Digest,
    DIGEST_LEN,
    "digest"
);
octet_newtype!(
    /// Attester identifier `id_A`: truncated `hash(hash(K_A) ‖ PK_A)`.
    AttesterId,
    ID_LEN,
    "attester id"
);

/// Draws a fresh challenge nonce.
pub fn rand_nonce<R: RngCore + CryptoRng>(rng: &mut R) -> Result<Nonce128, CryptoError> {
    let mut c = [0u8; NONCE_LEN];
    rng.try_fill_bytes(&mut c).map_err(|_| CryptoError::Entropy)?;
    Ok(Nonce128(c))
}

pub fn hash(m: &[u8]) -> Digest {
    Digest(Sha256::digest(m).into())
}

/// Serialized form is `nonce ‖ body ‖ tag`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AeadCiphertext {
    pub nonce: [u8; AEAD_NONCE_LEN],
    pub body: Vec<u8>,
    pub tag: [u8; AEAD_TAG_LEN],
}

impl AeadCiphertext {
    pub fn len(&self) -> usize {
        AEAD_OVERHEAD + self.body.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&self.body);
        out.extend_from_slice(&self.tag);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() < AEAD_OVERHEAD {
            return Err(CryptoError::InvalidLength {
                what: "AEAD ciphertext",
                expected: AEAD_OVERHEAD,
                actual: bytes.len(),
            });
        }
        let (nonce, rest) = bytes.split_at(AEAD_NONCE_LEN);
        let (body, tag) = rest.split_at(rest.len() - AEAD_TAG_LEN);
        Ok(AeadCiphertext {
            nonce: nonce.try_into().expect("split length"),
            body: body.to_vec(),
            tag: tag.try_into().expect("split length"),
        })
    }
}

fn ccm_seal(
    key: &SymKey,
    nonce: [u8; AEAD_NONCE_LEN],
    aad: &[u8],
    plaintext: &[u8],
) -> AeadCiphertext {
    let cipher = Aes128Ccm::new(GenericArray::from_slice(key.as_bytes()));
    let mut body = plaintext.to_vec();
    let tag = cipher
        .encrypt_in_place_detached(GenericArray::from_slice(&nonce), aad, &mut body)
        // Only fails for payloads above 2^16 bytes with a 13-byte nonce.
        .expect("AES-CCM payload within 64 KiB");
    AeadCiphertext {
        nonce,
        body,
        tag: tag.into(),
    }
}

fn ccm_open(key: &SymKey, ct: &AeadCiphertext, aad: &[u8]) -> Result<Vec<u8>, CryptoError> {
    let cipher = Aes128Ccm::new(GenericArray::from_slice(key.as_bytes()));
    let mut body = ct.body.clone();
    cipher
        .decrypt_in_place_detached(
            GenericArray::from_slice(&ct.nonce),
            aad,
            &mut body,
            GenericArray::from_slice(&ct.tag),
        )
        .map_err(|_| CryptoError::Integrity)?;
    Ok(body)
}

/// Authenticated encryption under a shared key with a caller-chosen nonce.
pub fn senc(plaintext: &[u8], key: &SymKey, nonce: &[u8]) -> Result<AeadCiphertext, CryptoError> {
    let nonce = fixed("AEAD nonce", nonce)?;
    Ok(ccm_seal(key, nonce, &[], plaintext))
}

/// `senc` with a fresh random nonce.
pub fn senc_random<R: RngCore + CryptoRng>(
    plaintext: &[u8],
    key: &SymKey,
    rng: &mut R,
) -> Result<AeadCiphertext, CryptoError> {
    let mut nonce = [0u8; AEAD_NONCE_LEN];
    rng.try_fill_bytes(&mut nonce)
        .map_err(|_| CryptoError::Entropy)?;
    Ok(ccm_seal(key, nonce, &[], plaintext))
}

pub fn sdec(ct: &AeadCiphertext, key: &SymKey) -> Result<Vec<u8>, CryptoError> {
    ccm_open(key, ct, &[])
}

/// Recipient public key of the hybrid encryption scheme.
#[derive(Clone, PartialEq, Eq)]
pub struct KemPublicKey(<HybridKem as hpke::Kem>::PublicKey);

impl KemPublicKey {
    pub fn to_bytes(&self) -> [u8; PUBLIC_KEY_LEN] {
        self.0.to_bytes().into()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        <HybridKem as hpke::Kem>::PublicKey::from_bytes(bytes)
            .map(KemPublicKey)
            .map_err(|_| CryptoError::PublicKey)
    }
}

impl fmt::Debug for KemPublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KemPublicKey({})", hex::encode(self.to_bytes()))
    }
}

#[derive(Clone)]
pub struct KemKeyPair {
    secret: <HybridKem as hpke::Kem>::PrivateKey,
    public: KemPublicKey,
}

impl KemKeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let (secret, public) = HybridKem::gen_keypair(rng);
        KemKeyPair {
            secret,
            public: KemPublicKey(public),
        }
    }

    pub fn from_secret_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let secret = <HybridKem as hpke::Kem>::PrivateKey::from_bytes(bytes).map_err(|_| {
            CryptoError::InvalidLength {
                what: "KEM secret key",
                expected: 32,
                actual: bytes.len(),
            }
        })?;
        let public = <HybridKem as hpke::Kem>::sk_to_pk(&secret);
        Ok(KemKeyPair {
            secret,
            public: KemPublicKey(public),
        })
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.secret.to_bytes().into()
    }

    pub fn public(&self) -> &KemPublicKey {
        &self.public
    }
}

impl fmt::Debug for KemKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KemKeyPair")
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

/// Serialized form is `encapsulated-key (32) ‖ ciphertext-with-tag`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HybridCiphertext {
    pub encapped: [u8; 32],
    pub body: Vec<u8>,
}

impl HybridCiphertext {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.body.len());
        out.extend_from_slice(&self.encapped);
        out.extend_from_slice(&self.body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() < HYBRID_OVERHEAD {
            return Err(CryptoError::InvalidLength {
                what: "hybrid ciphertext",
                expected: HYBRID_OVERHEAD,
                actual: bytes.len(),
            });
        }
        let (encapped, body) = bytes.split_at(32);
        Ok(HybridCiphertext {
            encapped: encapped.try_into().expect("split length"),
            body: body.to_vec(),
        })
    }
}

pub fn aenc<R: RngCore + CryptoRng>(
    plaintext: &[u8],
    pk: &KemPublicKey,
    rng: &mut R,
) -> Result<HybridCiphertext, CryptoError> {
    let (encapped, body) = hpke::single_shot_seal::<HybridAead, HybridKdf, HybridKem, _>(
        &OpModeS::Base,
        &pk.0,
        HYBRID_INFO,
        plaintext,
        &[],
        rng,
    )
    .map_err(|_| CryptoError::Integrity)?;
    Ok(HybridCiphertext {
        encapped: encapped.to_bytes().into(),
        body,
    })
}

pub fn adec(ct: &HybridCiphertext, kp: &KemKeyPair) -> Result<Vec<u8>, CryptoError> {
    let encapped = <HybridKem as hpke::Kem>::EncappedKey::from_bytes(&ct.encapped)
        .map_err(|_| CryptoError::Integrity)?;
    hpke::single_shot_open::<HybridAead, HybridKdf, HybridKem>(
        &OpModeR::Base,
        &kp.secret,
        &encapped,
        HYBRID_INFO,
        &ct.body,
        &[],
    )
    .map_err(|_| CryptoError::Integrity)
}

/// Ed25519 verification key; canonical encoding is the 32-byte compressed point.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct VerificationKey(VerifyingKey);

impl VerificationKey {
    pub fn to_bytes(&self) -> [u8; PUBLIC_KEY_LEN] {
        self.0.to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let raw: [u8; PUBLIC_KEY_LEN] = fixed("verification key", bytes)?;
        VerifyingKey::from_bytes(&raw)
            .map(VerificationKey)
            .map_err(|_| CryptoError::PublicKey)
    }

    /// Key identifier carried in evidence framing; also `h` in the KDC variant.
    pub fn key_id(&self) -> Digest {
        hash(&self.to_bytes())
    }
}

impl fmt::Debug for VerificationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VerificationKey({})", hex::encode(self.to_bytes()))
    }
}

#[derive(Clone)]
pub struct SigKeyPair(SigningKey);

impl SigKeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        SigKeyPair(SigningKey::generate(rng))
    }

    pub fn from_secret_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let seed: [u8; 32] = fixed("signing key", bytes)?;
        Ok(SigKeyPair(SigningKey::from_bytes(&seed)))
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.0.to_bytes()
    }

    pub fn public(&self) -> VerificationKey {
        VerificationKey(self.0.verifying_key())
    }
}

impl fmt::Debug for SigKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SigKeyPair")
            .field("public", &self.public())
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub [u8; SIGNATURE_LEN]);

impl Signature {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        fixed("signature", bytes).map(Signature)
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", hex::encode(self.0))
    }
}

pub fn sign(m: &[u8], sk: &SigKeyPair) -> Signature {
    Signature(sk.0.sign(m).to_bytes())
}

/// Returns `m` iff `sig` is a valid signature over exactly `m` under `pk`.
pub fn checksig<'m>(
    sig: &Signature,
    m: &'m [u8],
    pk: &VerificationKey,
) -> Result<&'m [u8], CryptoError> {
    let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
    pk.0.verify_strict(m, &sig)
        .map(|_| m)
        .map_err(|_| CryptoError::Signature)
}

/// `id_A`: first 16 bytes of `SHA-256(h ‖ PK_A)`.
pub fn attester_id(h: &Digest, pk: &VerificationKey) -> AttesterId {
    let mut hasher = Sha256::new();
    hasher.update(h.as_bytes());
    hasher.update(pk.to_bytes());
    let full: [u8; DIGEST_LEN] = hasher.finalize().into();
    let mut id = [0u8; ID_LEN];
    id.copy_from_slice(&full[..ID_LEN]);
    AttesterId(id)
}

/// TEE statement that the key with digest `attested_digest` is held inside it.
///
/// The envelope is `digest (32) ‖ Ed25519 signature (64)`, where the
/// signature covers a fixed label followed by the digest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyAttestation {
    pub attested_digest: Digest,
    pub envelope: Vec<u8>,
}

pub const KEY_ATTESTATION_LEN: usize = DIGEST_LEN + SIGNATURE_LEN;

impl KeyAttestation {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.envelope.clone()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != KEY_ATTESTATION_LEN {
            return Err(CryptoError::InvalidLength {
                what: "key attestation",
                expected: KEY_ATTESTATION_LEN,
                actual: bytes.len(),
            });
        }
        Ok(KeyAttestation {
            attested_digest: Digest::from_slice(&bytes[..DIGEST_LEN])?,
            envelope: bytes.to_vec(),
        })
    }
}

fn key_attestation_message(h: &Digest) -> Vec<u8> {
    let mut m = KEY_ATTESTATION_LABEL.to_vec();
    m.extend_from_slice(h.as_bytes());
    m
}

/// Source of key attestations.
pub trait KeyAttestor: Send + Sync {
    fn attest_key(&self, h: &Digest) -> Result<KeyAttestation, CryptoError>;
}

/// Software TEE simulator holding its own identity key.
#[derive(Debug)]
pub struct SoftTee {
    identity: SigKeyPair,
    available: bool,
}

impl SoftTee {
    pub fn new(identity: SigKeyPair) -> Self {
        SoftTee {
            identity,
            available: true,
        }
    }

    /// A TEE that refuses every request.
    pub fn unavailable(identity: SigKeyPair) -> Self {
        SoftTee {
            identity,
            available: false,
        }
    }

    pub fn public(&self) -> VerificationKey {
        self.identity.public()
    }
}

impl KeyAttestor for SoftTee {
    fn attest_key(&self, h: &Digest) -> Result<KeyAttestation, CryptoError> {
        if !self.available {
            return Err(CryptoError::TeeUnavailable);
        }
        let sig = sign(&key_attestation_message(h), &self.identity);
        let mut envelope = Vec::with_capacity(KEY_ATTESTATION_LEN);
        envelope.extend_from_slice(h.as_bytes());
        envelope.extend_from_slice(&sig.0);
        Ok(KeyAttestation {
            attested_digest: *h,
            envelope,
        })
    }
}

pub fn attest_key(h: &Digest, tee: &dyn KeyAttestor) -> Result<KeyAttestation, CryptoError> {
    tee.attest_key(h)
}

/// Returns the digest vouched for by one of the trusted TEE identities.
pub fn validate_key_attestation(
    ak: &KeyAttestation,
    trusted_tees: &[VerificationKey],
) -> Result<Digest, CryptoError> {
    if ak.envelope.len() != KEY_ATTESTATION_LEN {
        return Err(CryptoError::Attestation);
    }
    let (digest, sig) = ak.envelope.split_at(DIGEST_LEN);
    let digest = Digest::from_slice(digest).map_err(|_| CryptoError::Attestation)?;
    if digest != ak.attested_digest {
        return Err(CryptoError::Attestation);
    }
    let sig = Signature::from_slice(sig).map_err(|_| CryptoError::Attestation)?;
    let m = key_attestation_message(&digest);
    if trusted_tees
        .iter()
        .any(|tee| checksig(&sig, &m, tee).is_ok())
    {
        Ok(digest)
    } else {
        Err(CryptoError::Attestation)
    }
}

/// Primitive invocations, as recorded by an instrumented role.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Primitive {
    Senc,
    Sdec,
    Aenc,
    Adec,
    Sign,
    Checksig,
    AttestKey,
    ValidateKeyAttestation,
}

/// Shared append-only log of primitive calls.
#[derive(Clone, Debug, Default)]
pub struct CallLog(Arc<Mutex<Vec<Primitive>>>);

impl CallLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, p: Primitive) {
        self.0.lock().expect("call log poisoned").push(p);
    }

    pub fn calls(&self) -> Vec<Primitive> {
        self.0.lock().expect("call log poisoned").clone()
    }

    pub fn clear(&self) {
        self.0.lock().expect("call log poisoned").clear();
    }
}

pub(crate) fn record(log: &Option<CallLog>, p: Primitive) {
    if let Some(log) = log {
        log.record(p);
    }
}
