// SPDX-License-Identifier: Apache-2.0
//! Reference-value appraisal: claim name to the set of allowed measurements.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::crypto::AttesterId;
use crate::wire::{EarResult, EarVerdict, Metrics, EAR_PROFILE};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Policy {
    claims: BTreeMap<String, BTreeSet<Vec<u8>>>,
}

impl Policy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn allow(mut self, claim: impl Into<String>, value: impl Into<Vec<u8>>) -> Self {
        self.insert(claim, value);
        self
    }

    pub fn insert(&mut self, claim: impl Into<String>, value: impl Into<Vec<u8>>) {
        self.claims
            .entry(claim.into())
            .or_default()
            .insert(value.into());
    }

    pub fn claims(&self) -> impl Iterator<Item = (&str, &BTreeSet<Vec<u8>>)> {
        self.claims.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Affirming when every policy claim is present with an allowed value and
    /// nothing else was reported, warning when extra claims accompany a full
    /// match, contraindicated on any missing or mismatched claim.
    pub fn appraise(&self, metrics: &Metrics) -> EarVerdict {
        let all_match = self.claims.iter().all(|(name, allowed)| {
            metrics
                .get(name)
                .is_some_and(|v| allowed.contains(v))
        });
        if !all_match {
            return EarVerdict::Contraindicated;
        }
        let has_extra = metrics
            .claims
            .keys()
            .any(|name| !self.claims.contains_key(name));
        if has_extra {
            EarVerdict::Warning
        } else {
            EarVerdict::Affirming
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IssuedAt {
    /// Seconds since the Unix epoch at issue time.
    Now,
    Fixed(i64),
}

impl IssuedAt {
    fn resolve(self) -> i64 {
        match self {
            IssuedAt::Now => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs() as i64)
                .unwrap_or(0),
            IssuedAt::Fixed(t) => t,
        }
    }
}

/// Verifier metadata stamped into every result.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResultIssuer {
    pub verifier_id: String,
    pub ear_version: String,
    pub issued_at: IssuedAt,
}

impl ResultIssuer {
    pub fn new(verifier_id: impl Into<String>) -> Self {
        ResultIssuer {
            verifier_id: verifier_id.into(),
            ear_version: EAR_PROFILE.to_owned(),
            issued_at: IssuedAt::Now,
        }
    }

    pub fn issued_at(mut self, at: IssuedAt) -> Self {
        self.issued_at = at;
        self
    }
}

pub fn validate_metrics(
    policy: &Policy,
    metrics: &Metrics,
    attester_id: AttesterId,
    issuer: &ResultIssuer,
) -> EarResult {
    EarResult {
        ear_version: issuer.ear_version.clone(),
        issued_at: issuer.issued_at.resolve(),
        verifier_id: issuer.verifier_id.clone(),
        attester_id,
        verdict: policy.appraise(metrics),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone, Copy, Debug)]
    enum Claim {
        Match,
        Mismatch,
        Missing,
    }

    const NAMES: [&str; 3] = ["boot-hash", "firmware-version", "kernel-hash"];

    fn policy() -> Policy {
        let mut p = Policy::new();
        for (i, name) in NAMES.iter().enumerate() {
            p.insert(*name, vec![i as u8; 32]);
            p.insert(*name, vec![0xf0 | i as u8; 32]);
        }
        p
    }

    // Independent statement of the contract, written as a lookup over the cases.
    fn expected(cases: [Claim; 3], extra: bool) -> EarVerdict {
        let mut matched = 0;
        for c in cases {
            match c {
                Claim::Match => matched += 1,
                Claim::Mismatch | Claim::Missing => return EarVerdict::Contraindicated,
            }
        }
        assert_eq!(matched, 3);
        if extra {
            EarVerdict::Warning
        } else {
            EarVerdict::Affirming
        }
    }

    #[test]
    fn exhaustive_three_claim_truth_table() {
        let p = policy();
        let options = [Claim::Match, Claim::Mismatch, Claim::Missing];
        let mut seen = 0;
        for a in options {
            for b in options {
                for c in options {
                    for extra in [false, true] {
                        let cases = [a, b, c];
                        let mut m = Metrics::new();
                        for (i, case) in cases.iter().enumerate() {
                            match case {
                                Claim::Match => m.insert(NAMES[i], vec![0xf0 | i as u8; 32]),
                                Claim::Mismatch => m.insert(NAMES[i], vec![0xee; 32]),
                                Claim::Missing => {}
                            }
                        }
                        if extra {
                            m.insert("debug-port", vec![1]);
                        }
                        assert_eq!(p.appraise(&m), expected(cases, extra), "{cases:?} {extra}");
                        seen += 1;
                    }
                }
            }
        }
        assert_eq!(seen, 54);
    }

    #[test]
    fn empty_metrics_are_contraindicated() {
        assert_eq!(policy().appraise(&Metrics::new()), EarVerdict::Contraindicated);
        assert_eq!(Policy::new().appraise(&Metrics::new()), EarVerdict::Affirming);
    }

    #[test]
    fn validate_metrics_is_deterministic() {
        let issuer = ResultIssuer::new("v").issued_at(IssuedAt::Fixed(10));
        let m = Metrics::new().with("boot-hash", vec![0xf0; 32]);
        let a = validate_metrics(&policy(), &m, AttesterId([1; 16]), &issuer);
        let b = validate_metrics(&policy(), &m, AttesterId([1; 16]), &issuer);
        assert_eq!(a, b);
        assert_eq!(a.verdict, EarVerdict::Contraindicated);
        assert_eq!(a.issued_at, 10);
    }
}
