// SPDX-License-Identifier: Apache-2.0
//! Remote attestation for a relying party that only has symmetric keys.
//!
//! The relying party (RP) sends an encrypted challenge to the attester, the
//! attester wraps it together with a TEE key attestation and its metrics into
//! signed evidence for the verifier, and the verifier answers with a result
//! encrypted under the key it shares with the RP. The attester only ferries
//! opaque ciphertexts, so the RP needs a single channel and no public-key
//! cryptography.
//!
//! - [`crypto`]: primitive contracts and the default suite.
//! - [`wire`]: byte-exact message encodings and transport framing.
//! - [`roles`]: RP, attester and verifier session state machines.
//! - [`kdc`]: variant where the verifier also issues a session key.

pub mod clock;
pub mod crypto;
pub mod kdc;
pub mod roles;
pub mod vectors;
pub mod wire;

pub use clock::{Clock, ManualClock, SystemClock};
