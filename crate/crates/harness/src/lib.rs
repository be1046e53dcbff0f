// SPDX-License-Identifier: Apache-2.0
//! Deterministic simulated network with a programmable Dolev-Yao adversary.
//!
//! A scenario wires up a relying party, an attester, a verifier and an
//! adversary-controlled device ("mallory") from a seed, then steps them
//! cooperatively. Every honest emission passes through the adversary script
//! before delivery. The resulting [`RunReport`] carries the protocol events,
//! the per-run outcomes and the full transcript, and the checks in
//! [`checks`] turn the security goals into assertions over it.

pub mod adversary;
pub mod checks;
mod engine;
pub mod report;
pub mod script;
pub mod suite;
pub mod topology;
pub mod transcript;
pub mod transport;

use std::fmt;
use std::str::FromStr;

use apcr_net::NetError;
use serde::Serialize;
use thiserror::Error;

pub use adversary::Adversary;
pub use checks::{check_correspondence, check_key_agreement, check_secrecy};
pub use engine::{run_scenario, run_scenario_with};
pub use report::{Event, Octets, RunOutcome, RunReport};
pub use script::{Action, Occurrence, Rule, Script, ScriptError};
pub use suite::{attack_suite, SuiteSummary};
pub use topology::{Target, Topology, Variant};
pub use transcript::{Entry, Fate, Origin, Transcript};
pub use transport::{MemoryTransport, Transport, UdpTransport};

/// Protocol participants on the simulated network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Rp,
    Attester,
    Verifier,
    /// Compromised device run by the adversary.
    Mallory,
}

impl Node {
    pub const ALL: [Node; 4] = [Node::Rp, Node::Attester, Node::Verifier, Node::Mallory];

    pub fn name(self) -> &'static str {
        match self {
            Node::Rp => "rp",
            Node::Attester => "attester",
            Node::Verifier => "verifier",
            Node::Mallory => "mallory",
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Node {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Node::ALL
            .into_iter()
            .find(|n| n.name() == s)
            .ok_or_else(|| format!("unknown node {s:?}"))
    }
}

/// Name of the link between two nodes, independent of direction.
pub fn channel_name(a: Node, b: Node) -> String {
    let (x, y) = if a <= b { (a, b) } else { (b, a) };
    format!("{x}-{y}")
}

#[derive(Debug, Error)]
pub enum HarnessError {
    /// The script refers to something that does not exist in this run.
    #[error("script configuration error: {0}")]
    Config(String),
    #[error("transport failed: {0}")]
    Transport(#[from] NetError),
    #[error("scenario setup failed: {0}")]
    Setup(String),
}
