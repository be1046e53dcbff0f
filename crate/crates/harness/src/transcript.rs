// SPDX-License-Identifier: Apache-2.0
//! Append-only record of everything that crossed the simulated network.

use apcr_core::crypto::{self, Digest};
use apcr_core::wire::{MsgType, FRAME_HEADER_LEN};
use serde::Serialize;

use crate::report::Octets;
use crate::Node;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    /// Emitted by an honest participant; the adversary saw it in transit.
    Honest,
    /// Created, altered or redirected by the adversary.
    Adversary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Fate {
    /// Handed to the recipient unchanged this many times.
    Delivered(u32),
    /// Never reached the addressed recipient in this form.
    Dropped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Entry {
    pub index: usize,
    pub step: u64,
    pub run: u32,
    pub origin: Origin,
    pub from: Node,
    pub to: Node,
    pub channel: String,
    /// Full frame octets, header included.
    pub octets: Octets,
    pub fate: Fate,
}

impl Entry {
    pub fn msg_type(&self) -> Option<MsgType> {
        self.octets.first().and_then(|t| MsgType::from_tag(*t))
    }

    pub fn payload(&self) -> &[u8] {
        self.octets.get(FRAME_HEADER_LEN..).unwrap_or(&[])
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Transcript {
    entries: Vec<Entry>,
}

impl Transcript {
    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Entry> {
        self.entries.get(index)
    }

    pub(crate) fn push(&mut self, mut entry: Entry) -> usize {
        entry.index = self.entries.len();
        self.entries.push(entry);
        self.entries.len() - 1
    }

    /// SHA-256 over the JSON-lines rendering of every entry.
    pub fn hash(&self) -> Digest {
        let mut buf = Vec::new();
        for e in &self.entries {
            serde_json::to_writer(&mut buf, e).expect("entries always serialize");
            buf.push(b'\n');
        }
        crypto::hash(&buf)
    }
}
