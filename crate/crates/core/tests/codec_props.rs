// SPDX-License-Identifier: Apache-2.0
//! decode(encode(x)) = x for every message family, plus the length laws.

use std::sync::OnceLock;

use apcr_core::crypto::{
    AttesterId, Digest, KemKeyPair, KeyAttestation, Nonce128, SigKeyPair, SymKey,
    HYBRID_OVERHEAD, KEY_ATTESTATION_LEN,
};
use apcr_core::wire::kdc::{self as kdc_wire, AttesterResultMsg, KdcChallengeMsg, RpResult, RpResultMsg};
use apcr_core::wire::{
    lpm, ChallengeMsg, EarResult, EarVerdict, EvidenceMsg, Frame, Metrics, MsgType, ResultMsg,
    MAX_FRAME_LEN,
};
use proptest::collection::{btree_map, vec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const CASES: u32 = 10_000;

struct Keys {
    k_v: SymKey,
    signer: SigKeyPair,
    kem: KemKeyPair,
}

fn keys() -> &'static Keys {
    static KEYS: OnceLock<Keys> = OnceLock::new();
    KEYS.get_or_init(|| {
        let mut rng = ChaCha20Rng::seed_from_u64(0xc0de);
        Keys {
            k_v: SymKey::generate(&mut rng).unwrap(),
            signer: SigKeyPair::generate(&mut rng),
            kem: KemKeyPair::generate(&mut rng),
        }
    })
}

fn metrics() -> impl Strategy<Value = Metrics> {
    btree_map("[a-z][a-z0-9-]{0,23}", vec(any::<u8>(), 0..48), 0..6)
        .prop_map(|claims| Metrics { claims })
}

fn verdict() -> impl Strategy<Value = EarVerdict> {
    prop_oneof![
        Just(EarVerdict::Affirming),
        Just(EarVerdict::Warning),
        Just(EarVerdict::Contraindicated),
    ]
}

fn ear() -> impl Strategy<Value = EarResult> {
    (
        "\\PC{0,40}",
        any::<i64>(),
        "\\PC{0,60}",
        any::<[u8; 16]>(),
        verdict(),
    )
        .prop_map(|(ear_version, issued_at, verifier_id, id, verdict)| EarResult {
            ear_version,
            issued_at,
            verifier_id,
            attester_id: AttesterId(id),
            verdict,
        })
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn metrics_roundtrip(m in metrics()) {
        let enc = m.encode();
        prop_assert_eq!(&enc, &m.encode());
        prop_assert_eq!(Metrics::decode(&enc).unwrap(), m);
    }

    #[test]
    fn ear_roundtrip(r in ear()) {
        let enc = r.encode();
        prop_assert_eq!(&enc, &r.encode());
        prop_assert_eq!(EarResult::decode(&enc).unwrap(), r);
    }

    #[test]
    fn frame_roundtrip(t in 0usize..MsgType::ALL.len(), payload in vec(any::<u8>(), 0..=MAX_FRAME_LEN - 3)) {
        let f = Frame::new(MsgType::ALL[t], payload);
        let enc = f.encode().unwrap();
        prop_assert_eq!(enc.len(), f.encoded_len());
        prop_assert_eq!(Frame::decode(&enc).unwrap(), f);
    }

    #[test]
    fn challenge_roundtrip(c in any::<[u8; 16]>(), id in any::<[u8; 16]>(), seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let k = keys();
        let cha = lpm::encode_challenge(&Nonce128(c), &AttesterId(id), &k.k_v, &mut rng).unwrap();
        let bytes = cha.to_bytes();
        prop_assert_eq!(bytes.len(), 55);
        prop_assert!(!contains(&bytes, &c) && !contains(&bytes, &id));
        let back = ChallengeMsg::from_bytes(&bytes).unwrap();
        prop_assert_eq!(lpm::decode_challenge(&back, &k.k_v).unwrap(), (Nonce128(c), AttesterId(id)));
    }

    #[test]
    fn evidence_roundtrip(
        ak in any::<[u8; KEY_ATTESTATION_LEN]>(),
        m in metrics(),
        cha in any::<[u8; 55]>(),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let k = keys();
        let ak = KeyAttestation::from_bytes(&ak).unwrap();
        let cha = ChallengeMsg::from_bytes(&cha).unwrap();
        let ev = lpm::encode_evidence(&ak, &m, &cha, k.kem.public(), &k.signer, &mut rng).unwrap();
        let bytes = ev.to_bytes();
        let inner = 2 + KEY_ATTESTATION_LEN + 2 + m.encode().len() + 55;
        prop_assert_eq!(bytes.len(), 32 + 2 + inner + HYBRID_OVERHEAD + 64);
        if m.encode().len() >= 8 {
            prop_assert!(!contains(&bytes, &m.encode()));
        }
        let back = EvidenceMsg::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &ev);
        let (ak2, m2, cha2) = lpm::decode_evidence(&back, &k.kem, &k.signer.public()).unwrap();
        prop_assert_eq!((ak2, m2, cha2), (ak, m, cha));
    }

    #[test]
    fn result_roundtrip(r in ear(), c in any::<[u8; 16]>(), id in any::<[u8; 16]>(), seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let k = keys();
        let res = lpm::encode_result(&r, &Nonce128(c), &AttesterId(id), &k.k_v, &mut rng).unwrap();
        let bytes = res.to_bytes();
        let cbor = r.encode();
        prop_assert_eq!(bytes.len(), cbor.len() + 32 + 23);
        prop_assert!(!contains(&bytes, &cbor) && !contains(&bytes, &c) && !contains(&bytes, &id));
        let back = ResultMsg::from_bytes(&bytes).unwrap();
        prop_assert_eq!(lpm::decode_result(&back, &k.k_v).unwrap(), (r, Nonce128(c), AttesterId(id)));
    }

    #[test]
    fn kdc_challenge_roundtrip(c in any::<[u8; 16]>(), h in any::<[u8; 32]>(), seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let k = keys();
        let cha = kdc_wire::encode_challenge(&Nonce128(c), &Digest(h), &k.k_v, &mut rng).unwrap();
        let bytes = cha.to_bytes();
        prop_assert_eq!(bytes.len(), 71);
        let back = KdcChallengeMsg::from_bytes(&bytes).unwrap();
        prop_assert_eq!(kdc_wire::decode_challenge(&back, &k.k_v).unwrap(), (Nonce128(c), Digest(h)));
    }

    #[test]
    fn kdc_evidence_roundtrip(m in metrics(), h in any::<[u8; 32]>(), cha in any::<[u8; 71]>(), seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let k = keys();
        let cha = KdcChallengeMsg::from_bytes(&cha).unwrap();
        let ev = kdc_wire::encode_evidence(&m, &Digest(h), &cha, k.kem.public(), &k.signer, &mut rng).unwrap();
        let back = EvidenceMsg::from_bytes(&ev.to_bytes()).unwrap();
        let got = kdc_wire::decode_evidence(&back, &k.kem, &k.signer.public()).unwrap();
        prop_assert_eq!(got, (m, Digest(h), cha));
    }

    #[test]
    fn kdc_results_roundtrip(
        r in ear(),
        c in any::<[u8; 16]>(),
        h in any::<[u8; 32]>(),
        ks in any::<[u8; 16]>(),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let k = keys();
        let contents = RpResult { result: r, c: Nonce128(c), h: Digest(h), session_key: SymKey::from_bytes(ks) };
        let res_rp = kdc_wire::encode_rp_result(&contents, &k.k_v, &mut rng).unwrap();
        let rp_bytes = res_rp.to_bytes();
        prop_assert_eq!(rp_bytes.len(), 2 + contents.result.encode().len() + 16 + 32 + 16 + 23);
        prop_assert!(!contains(&rp_bytes, &ks));
        let res_a = kdc_wire::encode_attester_result(&res_rp, &contents.session_key, k.kem.public(), &k.signer, &mut rng).unwrap();
        let a_bytes = res_a.to_bytes();
        prop_assert_eq!(a_bytes.len(), 2 + 2 + rp_bytes.len() + 16 + HYBRID_OVERHEAD + 64);
        prop_assert!(!contains(&a_bytes, &ks));
        let back = AttesterResultMsg::from_bytes(&a_bytes).unwrap();
        let (rp2, ks2) = kdc_wire::decode_attester_result(&back, &k.signer.public(), &k.kem).unwrap();
        prop_assert_eq!(&rp2, &res_rp);
        prop_assert_eq!(&ks2, &contents.session_key);
        let opened = kdc_wire::decode_rp_result(&RpResultMsg::from_bytes(&rp_bytes).unwrap(), &k.k_v).unwrap();
        prop_assert_eq!(opened, contents);
    }
}
