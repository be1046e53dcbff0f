// SPDX-License-Identifier: Apache-2.0
//! Protocol events, per-run outcomes and the JSON-lines export.

use std::fmt;
use std::io::{self, Write};
use std::ops::Deref;

use apcr_core::crypto::Digest;
use apcr_core::roles::{AbortReason, Policy, RejectReason, ResultIssuer};
use serde::{Serialize, Serializer};

use crate::topology::{Target, Variant};
use crate::transcript::Transcript;
use crate::Node;

/// Byte string rendered as lowercase hex.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Octets(pub Vec<u8>);

impl Deref for Octets {
    type Target = [u8];

    fn deref(&self) -> &[u8] {
        &self.0
    }
}

impl From<Vec<u8>> for Octets {
    fn from(v: Vec<u8>) -> Self {
        Octets(v)
    }
}

impl From<&[u8]> for Octets {
    fn from(v: &[u8]) -> Self {
        Octets(v.to_vec())
    }
}

impl fmt::Debug for Octets {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(&self.0))
    }
}

impl Serialize for Octets {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(&self.0))
    }
}

fn as_debug<T: fmt::Debug, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{v:?}"))
}

/// Named protocol events. `id` is `id_A` in the pre-shared-key variant and
/// `h = hash(PK_A)` in the session-key variant. Session keys only appear
/// as their hash.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "camelCase")]
pub enum Event {
    RelyingPartyBegins {
        run: u32,
        c: Octets,
        id: Octets,
        cha: Octets,
    },
    AttesterAnnounces {
        run: u32,
        h: Octets,
    },
    AttesterBegins {
        run: u32,
        cha: Octets,
        metrics: Octets,
    },
    VerifierAccepts {
        run: u32,
        c: Octets,
        id: Octets,
        metrics: Octets,
        result: Octets,
        #[serde(skip_serializing_if = "Option::is_none")]
        session_key_hash: Option<Octets>,
    },
    VerifierAborts {
        run: u32,
        #[serde(serialize_with = "as_debug")]
        reason: AbortReason,
        step: Option<u8>,
    },
    /// Attester relayed a result; digests of what it got and what it sent.
    AttesterForwards {
        run: u32,
        received: Octets,
        sent: Octets,
        #[serde(skip_serializing_if = "Option::is_none")]
        session_key_hash: Option<Octets>,
    },
    RelyingPartyAccepts {
        run: u32,
        c: Octets,
        id: Octets,
        result: Octets,
        trust: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        session_key_hash: Option<Octets>,
    },
    RelyingPartyRejects {
        run: u32,
        #[serde(serialize_with = "as_debug")]
        reason: RejectReason,
    },
    /// A participant refused an input without changing state.
    Ignored {
        run: u32,
        node: Node,
        reason: String,
    },
}

impl Event {
    pub fn run(&self) -> u32 {
        match self {
            Event::RelyingPartyBegins { run, .. }
            | Event::AttesterAnnounces { run, .. }
            | Event::AttesterBegins { run, .. }
            | Event::VerifierAccepts { run, .. }
            | Event::VerifierAborts { run, .. }
            | Event::AttesterForwards { run, .. }
            | Event::RelyingPartyAccepts { run, .. }
            | Event::RelyingPartyRejects { run, .. }
            | Event::Ignored { run, .. } => *run,
        }
    }
}

/// Terminal state of each participant at the end of a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunOutcome {
    pub run: u32,
    pub rp: String,
    pub attester: String,
    pub verifier_accepts: usize,
    pub verifier_aborts: usize,
}

/// Policy and issuer the verifier appraised with; needed to recompute `R_A`.
#[derive(Clone, Debug)]
pub struct Appraisal {
    pub policy: Policy,
    pub issuer: ResultIssuer,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub variant: Variant,
    pub seed: u64,
    pub target: Target,
    pub steps: u64,
    pub events: Vec<Event>,
    pub outcomes: Vec<RunOutcome>,
    pub transcript: Transcript,
    #[serde(skip)]
    pub appraisal: Appraisal,
    /// Values that must never be visible to the adversary.
    #[serde(skip)]
    pub secrets: Vec<Vec<u8>>,
}

#[derive(Serialize)]
struct Summary<'a> {
    record: &'static str,
    variant: Variant,
    seed: u64,
    target: Target,
    steps: u64,
    transcript_hash: String,
    outcomes: &'a [RunOutcome],
}

#[derive(Serialize)]
struct Tagged<'a, T> {
    record: &'static str,
    #[serde(flatten)]
    body: &'a T,
}

impl RunReport {
    pub fn rp_accepts(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::RelyingPartyAccepts { .. }))
            .count()
    }

    pub fn rp_rejects(&self) -> Vec<RejectReason> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::RelyingPartyRejects { reason, .. } => Some(*reason),
                _ => None,
            })
            .collect()
    }

    pub fn verifier_aborts(&self) -> Vec<AbortReason> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::VerifierAborts { reason, .. } => Some(*reason),
                _ => None,
            })
            .collect()
    }

    pub fn transcript_hash(&self) -> Digest {
        self.transcript.hash()
    }

    /// One summary line, then one line per event and per transcript entry.
    pub fn write_json_lines<W: Write>(&self, mut w: W) -> io::Result<()> {
        let summary = Summary {
            record: "summary",
            variant: self.variant,
            seed: self.seed,
            target: self.target,
            steps: self.steps,
            transcript_hash: self.transcript_hash().to_string(),
            outcomes: &self.outcomes,
        };
        serde_json::to_writer(&mut w, &summary)?;
        writeln!(w)?;
        for e in &self.events {
            serde_json::to_writer(&mut w, &Tagged { record: "event", body: e })?;
            writeln!(w)?;
        }
        for e in self.transcript.entries() {
            serde_json::to_writer(&mut w, &Tagged { record: "message", body: e })?;
            writeln!(w)?;
        }
        Ok(())
    }
}
