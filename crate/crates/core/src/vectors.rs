// SPDX-License-Identifier: Apache-2.0
//! Deterministic test vectors: one message of each family built from fixed
//! keys and a seeded generator. The pinned hex lives under
//! `fixtures/golden/` in this crate.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::crypto::{
    self, AttesterId, Digest, KemKeyPair, Nonce128, SigKeyPair, SoftTee, SymKey,
};
use crate::wire::kdc::{self as kdc_wire, RpResult};
use crate::wire::{lpm, EarResult, EarVerdict, Frame, Metrics, MsgType, EAR_PROFILE};

/// Directory holding the pinned `<name>.hex` files.
pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/golden")
}

fn key(start: u8) -> SymKey {
    SymKey::from_bytes(std::array::from_fn(|i| start + i as u8))
}

fn sig(secret: &str) -> SigKeyPair {
    SigKeyPair::from_secret_bytes(&hex::decode(secret).unwrap()).unwrap()
}

/// One `(name, octets)` pair per message family, identical on every call.
pub fn golden_messages() -> Vec<(&'static str, Vec<u8>)> {
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let k_a = key(0x00);
    let k_v = key(0x40);
    let sk_a = sig("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60");
    let tee = SoftTee::new(sig(
        "4ccd089b28ff96da9db6c346ec114e0f5b8a319f35aba624da8cf6ed4fb8a6fb",
    ));
    let sk_v = sig(&"99".repeat(32));
    let kem_v = KemKeyPair::from_secret_bytes(&[0x77; 32]).unwrap();
    let kem_a = KemKeyPair::from_secret_bytes(&[0x88; 32]).unwrap();

    let c = Nonce128([0xc0; 16]);
    let id = crypto::attester_id(&crypto::hash(k_a.as_bytes()), &sk_a.public());
    let metrics = Metrics::new()
        .with("boot-hash", vec![0xb0; 32])
        .with("firmware-version", b"1.0.3".to_vec());
    let ear = EarResult {
        ear_version: EAR_PROFILE.to_owned(),
        issued_at: 1_700_000_000,
        verifier_id: "https://verifier.example.org/apcr-lpm/keytag01".to_owned(),
        attester_id: id,
        verdict: EarVerdict::Affirming,
    };

    let cha = lpm::encode_challenge(&c, &id, &k_v, &mut rng).unwrap();
    let ak = crypto::attest_key(&crypto::hash(k_a.as_bytes()), &tee).unwrap();
    let ev = lpm::encode_evidence(&ak, &metrics, &cha, kem_v.public(), &sk_a, &mut rng).unwrap();
    let res = lpm::encode_result(&ear, &c, &id, &k_v, &mut rng).unwrap();

    let h = sk_a.public().key_id();
    let kcha = kdc_wire::encode_challenge(&c, &h, &k_v, &mut rng).unwrap();
    let kev = kdc_wire::encode_evidence(&metrics, &h, &kcha, kem_v.public(), &sk_a, &mut rng)
        .unwrap();
    let contents = RpResult {
        result: EarResult {
            attester_id: AttesterId(h.0[..16].try_into().unwrap()),
            ..ear.clone()
        },
        c,
        h: Digest(h.0),
        session_key: key(0x50),
    };
    let res_rp = kdc_wire::encode_rp_result(&contents, &k_v, &mut rng).unwrap();
    let res_a =
        kdc_wire::encode_attester_result(&res_rp, &contents.session_key, kem_a.public(), &sk_v, &mut rng)
            .unwrap();

    vec![
        ("metrics", metrics.encode()),
        ("ear", ear.encode()),
        ("frame_challenge", Frame::new(MsgType::Challenge, cha.to_bytes()).encode().unwrap()),
        ("challenge", cha.to_bytes()),
        ("evidence", ev.to_bytes()),
        ("result", res.to_bytes()),
        ("kdc_challenge", kcha.to_bytes()),
        ("kdc_evidence", kev.to_bytes()),
        ("kdc_result_rp", res_rp.to_bytes()),
        ("kdc_result_attester", res_a.to_bytes()),
    ]
}
