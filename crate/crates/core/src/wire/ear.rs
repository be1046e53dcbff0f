// SPDX-License-Identifier: Apache-2.0
//! Attestation result object (`R_A`), modelled on the EAT Attestation
//! Result profile and serialized as a deterministic CBOR map.
//!
//! | key  | field        | CBOR type |
//! |------|--------------|-----------|
//! | 6    | `issued_at`  | int       |
//! | 256  | `attester_id`| bstr (16) |
//! | 265  | `ear_version`| tstr      |
//! | 1000 | `verdict`    | uint (trust tier) |
//! | 1004 | `verifier_id`| tstr      |
//!
//! Keys are emitted in ascending order and every integer and length uses its
//! shortest encoding. The decoder accepts exactly that form.

use std::fmt;

use crate::crypto::AttesterId;

use super::WireError;

pub const EAR_PROFILE: &str = "tag:github.com,2023:veraison/ear";

const KEY_IAT: u64 = 6;
const KEY_UEID: u64 = 256;
const KEY_PROFILE: u64 = 265;
const KEY_STATUS: u64 = 1000;
const KEY_VERIFIER_ID: u64 = 1004;

const MAJOR_UINT: u8 = 0;
const MAJOR_NINT: u8 = 1;
const MAJOR_BYTES: u8 = 2;
const MAJOR_TEXT: u8 = 3;
const MAJOR_MAP: u8 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EarVerdict {
    Affirming,
    Warning,
    Contraindicated,
}

impl EarVerdict {
    /// EAR trust-tier code.
    pub fn code(self) -> u64 {
        match self {
            EarVerdict::Affirming => 2,
            EarVerdict::Warning => 32,
            EarVerdict::Contraindicated => 96,
        }
    }

    pub fn from_code(code: u64) -> Option<Self> {
        match code {
            2 => Some(EarVerdict::Affirming),
            32 => Some(EarVerdict::Warning),
            96 => Some(EarVerdict::Contraindicated),
            _ => None,
        }
    }
}

impl fmt::Display for EarVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EarVerdict::Affirming => "affirming",
            EarVerdict::Warning => "warning",
            EarVerdict::Contraindicated => "contraindicated",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EarResult {
    pub ear_version: String,
    pub issued_at: i64,
    pub verifier_id: String,
    pub attester_id: AttesterId,
    pub verdict: EarVerdict,
}

fn put_head(out: &mut Vec<u8>, major: u8, arg: u64) {
    let m = major << 5;
    if arg < 24 {
        out.push(m | arg as u8);
    } else if arg <= u8::MAX as u64 {
        out.extend_from_slice(&[m | 24, arg as u8]);
    } else if arg <= u16::MAX as u64 {
        out.push(m | 25);
        out.extend_from_slice(&(arg as u16).to_be_bytes());
    } else if arg <= u32::MAX as u64 {
        out.push(m | 26);
        out.extend_from_slice(&(arg as u32).to_be_bytes());
    } else {
        out.push(m | 27);
        out.extend_from_slice(&arg.to_be_bytes());
    }
}

fn put_int(out: &mut Vec<u8>, v: i64) {
    if v >= 0 {
        put_head(out, MAJOR_UINT, v as u64);
    } else {
        // -1 - n encoded as n
        put_head(out, MAJOR_NINT, !(v as u64));
    }
}

impl EarResult {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(128);
        put_head(&mut out, MAJOR_MAP, 5);
        put_head(&mut out, MAJOR_UINT, KEY_IAT);
        put_int(&mut out, self.issued_at);
        put_head(&mut out, MAJOR_UINT, KEY_UEID);
        put_head(&mut out, MAJOR_BYTES, self.attester_id.0.len() as u64);
        out.extend_from_slice(&self.attester_id.0);
        put_head(&mut out, MAJOR_UINT, KEY_PROFILE);
        put_head(&mut out, MAJOR_TEXT, self.ear_version.len() as u64);
        out.extend_from_slice(self.ear_version.as_bytes());
        put_head(&mut out, MAJOR_UINT, KEY_STATUS);
        put_head(&mut out, MAJOR_UINT, self.verdict.code());
        put_head(&mut out, MAJOR_UINT, KEY_VERIFIER_ID);
        put_head(&mut out, MAJOR_TEXT, self.verifier_id.len() as u64);
        out.extend_from_slice(self.verifier_id.as_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut d = Decoder { rest: bytes };
        let (major, n) = d.head()?;
        if major != MAJOR_MAP {
            return Err(WireError::format("EAR is not a CBOR map"));
        }
        let mut iat = None;
        let mut ueid = None;
        let mut profile = None;
        let mut status = None;
        let mut vid = None;
        let mut last_key: Option<u64> = None;
        for _ in 0..n {
            let key = d.uint()?;
            if last_key.is_some_and(|k| k >= key) {
                return Err(WireError::format("EAR map keys not in canonical order"));
            }
            last_key = Some(key);
            match key {
                KEY_IAT => iat = Some(d.int()?),
                KEY_UEID => {
                    let b = d.bytes(MAJOR_BYTES)?;
                    ueid = Some(
                        AttesterId::from_slice(b)
                            .map_err(|_| WireError::format("attester id must be 16 bytes"))?,
                    );
                }
                KEY_PROFILE => profile = Some(d.text()?),
                KEY_STATUS => {
                    let code = d.uint()?;
                    status = Some(EarVerdict::from_code(code).ok_or_else(|| {
                        WireError::format(format!("unknown verdict code {code}"))
                    })?);
                }
                KEY_VERIFIER_ID => vid = Some(d.text()?),
                other => return Err(WireError::format(format!("unknown EAR key {other}"))),
            }
        }
        if !d.rest.is_empty() {
            return Err(WireError::format("trailing bytes after EAR"));
        }
        let missing = |name: &str| WireError::format(format!("EAR missing {name}"));
        Ok(EarResult {
            ear_version: profile.ok_or_else(|| missing("ear version"))?,
            issued_at: iat.ok_or_else(|| missing("issued-at"))?,
            verifier_id: vid.ok_or_else(|| missing("verifier id"))?,
            attester_id: ueid.ok_or_else(|| missing("attester id"))?,
            verdict: status.ok_or_else(|| missing("verdict"))?,
        })
    }
}

struct Decoder<'a> {
    rest: &'a [u8],
}

impl<'a> Decoder<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.rest.len() < n {
            return Err(WireError::format("truncated CBOR"));
        }
        let (h, t) = self.rest.split_at(n);
        self.rest = t;
        Ok(h)
    }

    fn head(&mut self) -> Result<(u8, u64), WireError> {
        let b = self.take(1)?[0];
        let major = b >> 5;
        let info = b & 0x1f;
        let (arg, min) = match info {
            0..=23 => return Ok((major, info as u64)),
            24 => (self.take(1)?[0] as u64, 24),
            25 => (
                u16::from_be_bytes(self.take(2)?.try_into().unwrap()) as u64,
                0x100,
            ),
            26 => (
                u32::from_be_bytes(self.take(4)?.try_into().unwrap()) as u64,
                0x1_0000,
            ),
            27 => (
                u64::from_be_bytes(self.take(8)?.try_into().unwrap()),
                0x1_0000_0000,
            ),
            _ => return Err(WireError::format("indefinite or reserved CBOR item")),
        };
        if arg < min {
            return Err(WireError::format("non-shortest CBOR integer"));
        }
        Ok((major, arg))
    }

    fn uint(&mut self) -> Result<u64, WireError> {
        match self.head()? {
            (MAJOR_UINT, v) => Ok(v),
            _ => Err(WireError::format("expected CBOR unsigned integer")),
        }
    }

    fn int(&mut self) -> Result<i64, WireError> {
        match self.head()? {
            (MAJOR_UINT, v) => {
                i64::try_from(v).map_err(|_| WireError::format("integer out of range"))
            }
            (MAJOR_NINT, v) => i64::try_from(v)
                .map(|n| -1 - n)
                .map_err(|_| WireError::format("integer out of range")),
            _ => Err(WireError::format("expected CBOR integer")),
        }
    }

    fn bytes(&mut self, major: u8) -> Result<&'a [u8], WireError> {
        let (m, len) = self.head()?;
        if m != major {
            return Err(WireError::format("unexpected CBOR major type"));
        }
        let len = usize::try_from(len).map_err(|_| WireError::format("length overflow"))?;
        self.take(len)
    }

    fn text(&mut self) -> Result<String, WireError> {
        let b = self.bytes(MAJOR_TEXT)?;
        String::from_utf8(b.to_vec()).map_err(|_| WireError::format("CBOR text is not UTF-8"))
    }
}
