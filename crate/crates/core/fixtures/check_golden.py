#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Opens every golden message with the fixture keys and checks its contents.

Uses only pyca/cryptography and cbor2, with HPKE base mode written out from
RFC 9180, so that the Rust codec is checked against separate code.
"""
import hashlib
import pathlib
import sys

import cbor2
from cryptography.hazmat.primitives import hashes, hmac
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESCCM, AESGCM
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

HERE = pathlib.Path(__file__).parent / "golden"
INFO = b"apcr hybrid evidence v1"
TEE_LABEL = b"apcr soft-tee key attestation v1"


def load(name):
    return bytes.fromhex((HERE / f"{name}.hex").read_text().strip())


def raw(pk):
    return pk.public_bytes(Encoding.Raw, PublicFormat.Raw)


def ed(secret_hex):
    return Ed25519PrivateKey.from_private_bytes(bytes.fromhex(secret_hex))


K_A = bytes(range(0x00, 0x10))
K_V = bytes(range(0x40, 0x50))
K_S = bytes(range(0x50, 0x60))
SK_A = ed("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60")
TEE = ed("4ccd089b28ff96da9db6c346ec114e0f5b8a319f35aba624da8cf6ed4fb8a6fb")
SK_V = ed("99" * 32)
KEM_V = X25519PrivateKey.from_private_bytes(b"\x77" * 32)
KEM_A = X25519PrivateKey.from_private_bytes(b"\x88" * 32)
C = b"\xc0" * 16
PK_A = raw(SK_A.public_key())
H = hashlib.sha256(PK_A).digest()
ID = hashlib.sha256(hashlib.sha256(K_A).digest() + PK_A).digest()[:16]


def sdec(ct, key):
    return AESCCM(key, tag_length=10).decrypt(ct[:13], ct[13:], None)


# RFC 9180, DHKEM(X25519, HKDF-SHA256) + HKDF-SHA256 + AES-128-GCM, base mode.
def _extract(salt, ikm):
    h = hmac.HMAC(salt or b"\x00" * 32, hashes.SHA256())
    h.update(ikm)
    return h.finalize()


def _expand(prk, info, n):
    out, t, i = b"", b"", 1
    while len(out) < n:
        h = hmac.HMAC(prk, hashes.SHA256())
        h.update(t + info + bytes([i]))
        t = h.finalize()
        out += t
        i += 1
    return out[:n]


def _lx(suite, salt, label, ikm):
    return _extract(salt, b"HPKE-v1" + suite + label + ikm)


def _le(suite, prk, label, info, n):
    return _expand(prk, n.to_bytes(2, "big") + b"HPKE-v1" + suite + label + info, n)


def adec(ct, sk):
    enc, body = ct[:32], ct[32:]
    kem = b"KEM" + (0x20).to_bytes(2, "big")
    dh = sk.exchange(X25519PublicKey.from_public_bytes(enc))
    prk = _lx(kem, b"", b"eae_prk", dh)
    shared = _le(kem, prk, b"shared_secret", enc + raw(sk.public_key()), 32)
    suite = b"HPKE" + bytes([0, 0x20, 0, 1, 0, 1])
    ctx = b"\x00" + _lx(suite, b"", b"psk_id_hash", b"") + _lx(suite, b"", b"info_hash", INFO)
    secret = _lx(suite, shared, b"secret", b"")
    key = _le(suite, secret, b"key", ctx, 16)
    nonce = _le(suite, secret, b"base_nonce", ctx, 12)
    return AESGCM(key).decrypt(nonce, body, None)


def var(buf, at):
    n = int.from_bytes(buf[at : at + 2], "big")
    return buf[at + 2 : at + 2 + n], at + 2 + n


def metrics_bytes(claims):
    out = len(claims).to_bytes(2, "big")
    for name in sorted(claims):
        n = name.encode()
        out += len(n).to_bytes(2, "big") + n
        out += len(claims[name]).to_bytes(2, "big") + claims[name]
    return out


METRICS = {"boot-hash": b"\xb0" * 32, "firmware-version": b"1.0.3"}


def ear(attester_id):
    return cbor2.dumps(
        {
            6: 1700000000,
            256: attester_id,
            265: "tag:github.com,2023:veraison/ear",
            1000: 2,
            1004: "https://verifier.example.org/apcr-lpm/keytag01",
        },
        canonical=True,
    )


def check_evidence(blob, expect_pt):
    assert blob[:32] == H, "key id"
    ev, at = var(blob, 32)
    sig = blob[at:]
    assert len(sig) == 64
    SK_A.public_key().verify(sig, ev)
    assert adec(ev, KEM_V) == expect_pt


def main():
    assert load("metrics") == metrics_bytes(METRICS)
    assert load("ear") == ear(ID)

    cha = load("challenge")
    assert len(cha) == 55 and sdec(cha, K_V) == C + ID
    assert load("frame_challenge") == b"\xa1\x00\x37" + cha

    ak = hashlib.sha256(K_A).digest()
    ak += TEE.sign(TEE_LABEL + ak)
    pt = len(ak).to_bytes(2, "big") + ak
    m = metrics_bytes(METRICS)
    pt += len(m).to_bytes(2, "big") + m + cha
    check_evidence(load("evidence"), pt)

    res = load("result")
    assert len(res) == 174 and sdec(res, K_V) == ear(ID) + C + ID

    kcha = load("kdc_challenge")
    assert len(kcha) == 71 and sdec(kcha, K_V) == C + H
    check_evidence(load("kdc_evidence"), len(m).to_bytes(2, "big") + m + H + kcha)

    rp = load("kdc_result_rp")
    e = ear(H[:16])
    assert sdec(rp, K_V) == len(e).to_bytes(2, "big") + e + C + H + K_S

    ra = load("kdc_result_attester")
    res_a, at = var(ra, 0)
    SK_V.public_key().verify(ra[at:], res_a)
    assert adec(res_a, KEM_A) == len(rp).to_bytes(2, "big") + rp + K_S
    print("all golden messages check out")


if __name__ == "__main__":
    try:
        main()
    except Exception as exc:  # noqa: BLE001
        print(f"FAIL: {exc!r}")
        sys.exit(1)
