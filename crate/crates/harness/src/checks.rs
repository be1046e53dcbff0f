// SPDX-License-Identifier: Apache-2.0
//! Security properties as predicates over a [`RunReport`].

use apcr_core::crypto::{AttesterId, Digest};
use apcr_core::kdc::kdc_attester_id;
use apcr_core::roles::validate_metrics;
use apcr_core::wire::Metrics;
use thiserror::Error;

use crate::report::{Event, Octets, RunReport};
use crate::topology::Variant;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("correspondence fails for the RP accept at event {accept}: {reason}")]
pub struct CorrespondenceError {
    pub accept: usize,
    pub reason: String,
}

fn unique<'a>(
    events: &'a [Event],
    before: usize,
    used: &[usize],
    what: &str,
    pred: impl Fn(&Event) -> bool,
) -> Result<(usize, &'a Event), String> {
    let hits: Vec<usize> = (0..before).filter(|&i| pred(&events[i])).collect();
    match hits.as_slice() {
        [i] if used.contains(i) => Err(format!("{what} already matched another accept")),
        [i] => Ok((*i, &events[*i])),
        [] => Err(format!("no matching {what}")),
        _ => Err(format!("{} matching {what} events", hits.len())),
    }
}

/// Every `relyingPartyAccepts` must be preceded by exactly one matching
/// `relyingPartyBegins` (same c, id), one `attesterBegins` over the same
/// challenge octets and one `verifierAccepts` (same c, id, metrics, result),
/// none of them shared with another accept, and the result must equal a
/// fresh appraisal of the metrics the attester sent.
pub fn check_correspondence(report: &RunReport) -> Result<(), CorrespondenceError> {
    let events = &report.events;
    let mut used_begin = Vec::new();
    let mut used_att = Vec::new();
    let mut used_ver = Vec::new();
    for (i, e) in events.iter().enumerate() {
        let Event::RelyingPartyAccepts { c, id, result, .. } = e else {
            continue;
        };
        let fail = |reason: String| CorrespondenceError { accept: i, reason };

        let (bi, begin) = unique(events, i, &used_begin, "relyingPartyBegins", |x| {
            matches!(x, Event::RelyingPartyBegins { c: c2, id: id2, .. } if c2 == c && id2 == id)
        })
        .map_err(fail)?;
        let Event::RelyingPartyBegins { cha, .. } = begin else {
            unreachable!()
        };

        let (ai, att) = unique(events, i, &used_att, "attesterBegins", |x| {
            matches!(x, Event::AttesterBegins { cha: cha2, .. } if cha2 == cha)
        })
        .map_err(fail)?;
        let Event::AttesterBegins { metrics, .. } = att else {
            unreachable!()
        };

        let (vi, ver) = unique(events, i, &used_ver, "verifierAccepts", |x| {
            matches!(x, Event::VerifierAccepts { c: c2, id: id2, .. } if c2 == c && id2 == id)
        })
        .map_err(fail)?;
        let Event::VerifierAccepts {
            metrics: v_metrics,
            result: v_result,
            ..
        } = ver
        else {
            unreachable!()
        };
        if v_metrics != metrics {
            return Err(fail("verifier appraised other metrics than the attester sent".into()));
        }
        if v_result != result {
            return Err(fail("RP holds a different result than the verifier issued".into()));
        }
        if !(bi < ai && ai < vi) {
            return Err(fail("events out of protocol order".into()));
        }

        let m = Metrics::decode(metrics).map_err(|e| fail(format!("attester metrics: {e}")))?;
        let attester_id = match report.variant {
            Variant::Lpm => AttesterId::from_slice(id),
            Variant::Kdc => Digest::from_slice(id).map(|h| kdc_attester_id(&h)),
        }
        .map_err(|e| fail(format!("id: {e}")))?;
        let expected = validate_metrics(
            &report.appraisal.policy,
            &m,
            attester_id,
            &report.appraisal.issuer,
        );
        if expected.encode() != result.0 {
            return Err(fail("result is not the appraisal of the attester's metrics".into()));
        }
        used_begin.push(bi);
        used_att.push(ai);
        used_ver.push(vi);
    }
    Ok(())
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("run {run}: {reason}")]
pub struct KeyAgreementError {
    pub run: u32,
    pub reason: String,
}

/// Session-key variant: whenever the RP accepts, the attester forwarded
/// under the same `K_S` and the verifier issued that `K_S`. Compares hashes.
pub fn check_key_agreement(report: &RunReport) -> Result<(), KeyAgreementError> {
    for e in &report.events {
        let Event::RelyingPartyAccepts {
            run,
            c,
            session_key_hash,
            ..
        } = e
        else {
            continue;
        };
        let fail = |reason: &str| KeyAgreementError {
            run: *run,
            reason: reason.to_owned(),
        };
        let ks: &Octets = session_key_hash.as_ref().ok_or_else(|| fail("RP accepted without K_S"))?;
        let verifier = report.events.iter().any(|x| {
            matches!(x, Event::VerifierAccepts { c: c2, session_key_hash: Some(k), .. } if c2 == c && k == ks)
        });
        if !verifier {
            return Err(fail("no verifier issued this K_S for this nonce"));
        }
        let attester = report.events.iter().any(|x| {
            matches!(x, Event::AttesterForwards { run: r2, session_key_hash: Some(k), .. } if r2 == run && k == ks)
        });
        if !attester {
            return Err(fail("attester does not hold the RP's K_S"));
        }
    }
    Ok(())
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("secret #{secret} visible in transcript entry {entry}")]
pub struct SecrecyViolation {
    pub secret: usize,
    pub entry: usize,
}

/// Scans every message the adversary saw for each secret as a contiguous
/// substring. This under-approximates what a Dolev-Yao attacker can deduce.
pub fn check_secrecy(report: &RunReport, secrets: &[Vec<u8>]) -> Result<(), SecrecyViolation> {
    for entry in report.transcript.entries() {
        for (si, s) in secrets.iter().enumerate() {
            if s.is_empty() || s.len() > entry.octets.len() {
                continue;
            }
            if entry.octets.windows(s.len()).any(|w| w == s.as_slice()) {
                return Err(SecrecyViolation {
                    secret: si,
                    entry: entry.index,
                });
            }
        }
    }
    Ok(())
}
