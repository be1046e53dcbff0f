// SPDX-License-Identifier: Apache-2.0
//! Application messages around the attestation run: the key-transfer
//! request that starts it and the key material the RP releases after it.

use apcr_core::crypto::{self, AeadCiphertext, SymKey, AEAD_OVERHEAD};
use rand::{CryptoRng, RngCore};

use crate::CliError;

/// Fixture standing in for the door key; not real key material.
pub const DOOR_KEY: [u8; 96] =
    *b"apcr demo door key. Fixture value for the lock-and-key demo. It opens nothing and is not secret.";

pub const KEY_REQUEST_TYPE: u8 = 0x01;
pub const DOOR_APP_ID: u8 = 0x01;
pub const KEY_REQUEST_BODY_LEN: usize = 17;
pub const KEY_REQUEST_LEN: usize = 3 + KEY_REQUEST_BODY_LEN;
pub const KEY_MATERIAL_LEN: usize = AEAD_OVERHEAD + DOOR_KEY.len();

/// `type(1) ‖ len(2, BE) ‖ app_id(1) ‖ request nonce(16)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyRequest {
    pub app_id: u8,
    pub nonce: [u8; 16],
}

impl KeyRequest {
    pub fn new<R: RngCore>(rng: &mut R) -> Self {
        let mut nonce = [0u8; 16];
        rng.fill_bytes(&mut nonce);
        KeyRequest {
            app_id: DOOR_APP_ID,
            nonce,
        }
    }

    pub fn encode(&self) -> [u8; KEY_REQUEST_LEN] {
        let mut out = [0u8; KEY_REQUEST_LEN];
        out[0] = KEY_REQUEST_TYPE;
        out[1..3].copy_from_slice(&(KEY_REQUEST_BODY_LEN as u16).to_be_bytes());
        out[3] = self.app_id;
        out[4..].copy_from_slice(&self.nonce);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CliError> {
        if bytes.len() != KEY_REQUEST_LEN {
            return Err(CliError::App(format!(
                "key request of {} bytes, expected {KEY_REQUEST_LEN}",
                bytes.len()
            )));
        }
        if bytes[0] != KEY_REQUEST_TYPE {
            return Err(CliError::App(format!("key request type {:#04x}", bytes[0])));
        }
        let len = u16::from_be_bytes([bytes[1], bytes[2]]) as usize;
        if len != KEY_REQUEST_BODY_LEN {
            return Err(CliError::App(format!("key request length field {len}")));
        }
        Ok(KeyRequest {
            app_id: bytes[3],
            nonce: bytes[4..].try_into().expect("length checked"),
        })
    }
}

/// The door key sealed under the application key.
pub fn seal_key_material<R: RngCore + CryptoRng>(
    key: &SymKey,
    rng: &mut R,
) -> Result<Vec<u8>, CliError> {
    let ct = crypto::senc_random(&DOOR_KEY, key, rng).map_err(|e| CliError::App(e.to_string()))?;
    Ok(ct.to_bytes())
}

/// Random octets of the same length as sealed key material.
pub fn dummy_key_material<R: RngCore>(rng: &mut R) -> Vec<u8> {
    let mut out = vec![0u8; KEY_MATERIAL_LEN];
    rng.fill_bytes(&mut out);
    out
}

pub fn open_key_material(key: &SymKey, msg: &[u8]) -> Result<Vec<u8>, CliError> {
    let ct = AeadCiphertext::from_bytes(msg).map_err(|e| CliError::App(e.to_string()))?;
    crypto::sdec(&ct, key).map_err(|_| CliError::App("key material does not open".into()))
}
