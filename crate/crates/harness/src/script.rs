// SPDX-License-Identifier: Apache-2.0
//! Adversary scripts and their plain-text form.
//!
//! One rule per line:
//!
//! ```text
//! # comment
//! runs 2
//! on result-to-rp 1: drop
//! on result-to-rp 2: replay(result-to-rp#1)
//! on challenge *: modify(3, 0x01)
//! ```
//!
//! A rule matches the n-th honest emission of a message type, counted over
//! the whole scenario, or every emission with `*`. The first matching rule
//! applies. Its actions run left to right on a working copy of the message:
//! `modify`, `retag`, `reroute`, `replay`, `forge_result`,
//! `forge_challenge` and `resign` rewrite the copy; `deliver`, `duplicate` and `inject` emit; `drop` emits
//! nothing. A rule without any emitting action or `drop` delivers the copy
//! once at the end. Messages no rule matches are delivered unchanged.

use std::fmt;
use std::str::FromStr;

use apcr_core::wire::MsgType;
use thiserror::Error;

use crate::Node;

const TYPE_NAMES: [(MsgType, &str); 12] = [
    (MsgType::Challenge, "challenge"),
    (MsgType::Evidence, "evidence"),
    (MsgType::ResultToAttester, "result-to-attester"),
    (MsgType::ResultToRp, "result-to-rp"),
    (MsgType::KdcHashAnnounce, "kdc-hash"),
    (MsgType::KdcChallenge, "kdc-challenge"),
    (MsgType::KdcEvidence, "kdc-evidence"),
    (MsgType::KdcResultToAttester, "kdc-result-to-attester"),
    (MsgType::KdcResultToRp, "kdc-result-to-rp"),
    (MsgType::KdcApplication, "kdc-app"),
    (MsgType::KeyTransferRequest, "key-request"),
    (MsgType::KeyMaterial, "key-material"),
];

pub fn type_name(t: MsgType) -> &'static str {
    TYPE_NAMES
        .iter()
        .find(|(m, _)| *m == t)
        .map(|(_, n)| *n)
        .expect("every message type has a name")
}

/// Accepts the names above or a hex tag such as `0xa1`.
pub fn parse_type(s: &str) -> Result<MsgType, String> {
    if let Some(hex) = s.strip_prefix("0x") {
        let tag = u8::from_str_radix(hex, 16).map_err(|_| format!("bad tag {s:?}"))?;
        return MsgType::from_tag(tag).ok_or_else(|| format!("unknown tag {s:?}"));
    }
    TYPE_NAMES
        .iter()
        .find(|(_, n)| *n == s)
        .map(|(m, _)| *m)
        .ok_or_else(|| format!("unknown message type {s:?}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Occurrence {
    Any,
    /// 1-based.
    Nth(u32),
}

impl Occurrence {
    pub fn matches(self, n: u32) -> bool {
        match self {
            Occurrence::Any => true,
            Occurrence::Nth(k) => k == n,
        }
    }
}

/// Earlier message to replay.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryRef {
    /// Transcript index.
    Index(usize),
    /// The n-th honest emission of a type.
    Emission(MsgType, u32),
}

/// Symmetric key the adversary forges with.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KeyRef {
    /// A fresh key only the adversary knows.
    Own,
    /// A key the topology handed to the adversary, e.g. `k_a` or `k_b`.
    Known(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Deliver,
    Drop,
    Duplicate,
    /// XOR payload byte `index` (frame header excluded) with `mask`.
    Modify { index: usize, mask: u8 },
    Retag(MsgType),
    Reroute(Node),
    Replay(EntryRef),
    /// Deliver raw frame octets to the current recipient.
    Inject(Vec<u8>),
    /// Replace a result message by one the adversary built under `key`.
    ForgeResult(KeyRef),
    /// Re-sign evidence under the adversary's own signing key.
    Resign,
    /// Replace a challenge by one the adversary built under its own key.
    ForgeChallenge,
}

impl Action {
    pub(crate) fn emits(&self) -> bool {
        matches!(
            self,
            Action::Deliver | Action::Drop | Action::Duplicate | Action::Inject(_)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub msg_type: MsgType,
    pub occurrence: Occurrence,
    pub actions: Vec<Action>,
}

impl Rule {
    pub fn new(msg_type: MsgType, occurrence: Occurrence, actions: Vec<Action>) -> Self {
        Rule {
            msg_type,
            occurrence,
            actions,
        }
    }

    pub fn matches(&self, t: MsgType, n: u32) -> bool {
        self.msg_type == t && self.occurrence.matches(n)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Script {
    /// Protocol runs executed back to back; sessions are reset in between.
    pub runs: u32,
    pub rules: Vec<Rule>,
}

impl Default for Script {
    fn default() -> Self {
        Script::honest()
    }
}

impl Script {
    /// Pass-through adversary, one run.
    pub fn honest() -> Self {
        Script {
            runs: 1,
            rules: Vec::new(),
        }
    }

    pub fn runs(mut self, n: u32) -> Self {
        self.runs = n;
        self
    }

    pub fn rule(mut self, t: MsgType, occurrence: Occurrence, actions: Vec<Action>) -> Self {
        self.rules.push(Rule::new(t, occurrence, actions));
        self
    }

    pub fn find(&self, t: MsgType, n: u32) -> Option<&Rule> {
        self.rules.iter().find(|r| r.matches(t, n))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

fn parse_int(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let r = match s.strip_prefix("0x") {
        Some(h) => u64::from_str_radix(h, 16),
        None => s.parse(),
    };
    r.map_err(|_| format!("bad number {s:?}"))
}

fn parse_entry_ref(s: &str) -> Result<EntryRef, String> {
    let s = s.trim();
    if let Some(i) = s.strip_prefix('#') {
        return Ok(EntryRef::Index(parse_int(i)? as usize));
    }
    let (t, n) = s
        .split_once('#')
        .ok_or_else(|| format!("replay needs #index or type#occurrence, got {s:?}"))?;
    let n = parse_int(n)?;
    if n == 0 {
        return Err("occurrences count from 1".into());
    }
    Ok(EntryRef::Emission(parse_type(t.trim())?, n as u32))
}

fn parse_action(s: &str) -> Result<Action, String> {
    let s = s.trim();
    let (name, arg) = match s.split_once('(') {
        Some((n, rest)) => {
            let arg = rest
                .strip_suffix(')')
                .ok_or_else(|| format!("unclosed argument list in {s:?}"))?;
            (n.trim(), Some(arg.trim()))
        }
        None => (s, None),
    };
    let need = |what: &str| arg.ok_or_else(|| format!("{name} needs {what}"));
    let action = match name {
        "deliver" => Action::Deliver,
        "drop" => Action::Drop,
        "duplicate" => Action::Duplicate,
        "resign" => Action::Resign,
        "forge_challenge" => Action::ForgeChallenge,
        "modify" => {
            let (i, m) = need("(index, mask)")?
                .split_once(',')
                .ok_or("modify needs (index, mask)")?;
            let mask = parse_int(m)?;
            if mask == 0 || mask > 0xff {
                return Err(format!("mask must be a nonzero byte, got {mask:#x}"));
            }
            Action::Modify {
                index: parse_int(i)? as usize,
                mask: mask as u8,
            }
        }
        "retag" => Action::Retag(parse_type(need("a message type")?)?),
        "reroute" => Action::Reroute(need("a node")?.parse()?),
        "replay" => Action::Replay(parse_entry_ref(need("an entry")?)?),
        "inject" => Action::Inject(hex::decode(need("hex octets")?).map_err(|e| e.to_string())?),
        "forge_result" => match arg {
            None | Some("") | Some("own") => Action::ForgeResult(KeyRef::Own),
            Some(k) => Action::ForgeResult(KeyRef::Known(k.to_owned())),
        },
        _ => return Err(format!("unknown action {name:?}")),
    };
    if arg.is_some() && matches!(
            action,
            Action::Deliver
                | Action::Drop
                | Action::Duplicate
                | Action::Resign
                | Action::ForgeChallenge
        ) {
        return Err(format!("{name} takes no argument"));
    }
    Ok(action)
}

/// Splits on commas outside parentheses.
fn split_actions(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn parse_rule(line: &str) -> Result<Rule, String> {
    let rest = line.strip_prefix("on ").ok_or("rules start with `on`")?;
    let (head, actions) = rest.split_once(':').ok_or("missing `:` after the matcher")?;
    let mut parts = head.split_whitespace();
    let t = parse_type(parts.next().ok_or("missing message type")?)?;
    let occurrence = match parts.next().ok_or("missing occurrence")? {
        "*" => Occurrence::Any,
        n => {
            let n = parse_int(n)?;
            if n == 0 || n > u32::MAX as u64 {
                return Err("occurrences count from 1".into());
            }
            Occurrence::Nth(n as u32)
        }
    };
    if parts.next().is_some() {
        return Err("trailing text before `:`".into());
    }
    let actions = split_actions(actions)
        .into_iter()
        .map(parse_action)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Rule::new(t, occurrence, actions))
}

/// A comment starts at a `#` that opens the line or follows whitespace, so
/// replay references such as `replay(#4)` survive.
fn strip_comment(line: &str) -> &str {
    let b = line.as_bytes();
    let cut = (0..b.len()).find(|&i| b[i] == b'#' && (i == 0 || b[i - 1].is_ascii_whitespace()));
    &line[..cut.unwrap_or(b.len())]
}

impl FromStr for Script {
    type Err = ScriptError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut script = Script::honest();
        for (i, raw) in text.lines().enumerate() {
            let line = strip_comment(raw);
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ScriptError {
                line: i + 1,
                message,
            };
            if let Some(n) = line.strip_prefix("runs ") {
                let n = parse_int(n).map_err(err)?;
                if n == 0 || n > u32::MAX as u64 {
                    return Err(err("runs must be at least 1".into()));
                }
                script.runs = n as u32;
            } else {
                script.rules.push(parse_rule(line).map_err(err)?);
            }
        }
        Ok(script)
    }
}

impl fmt::Display for EntryRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntryRef::Index(i) => write!(f, "#{i}"),
            EntryRef::Emission(t, n) => write!(f, "{}#{n}", type_name(*t)),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Deliver => f.write_str("deliver"),
            Action::Drop => f.write_str("drop"),
            Action::Duplicate => f.write_str("duplicate"),
            Action::Resign => f.write_str("resign"),
            Action::ForgeChallenge => f.write_str("forge_challenge"),
            Action::Modify { index, mask } => write!(f, "modify({index}, {mask:#04x})"),
            Action::Retag(t) => write!(f, "retag({})", type_name(*t)),
            Action::Reroute(n) => write!(f, "reroute({n})"),
            Action::Replay(r) => write!(f, "replay({r})"),
            Action::Inject(b) => write!(f, "inject({})", hex::encode(b)),
            Action::ForgeResult(KeyRef::Own) => f.write_str("forge_result"),
            Action::ForgeResult(KeyRef::Known(k)) => write!(f, "forge_result({k})"),
        }
    }
}

impl fmt::Display for Script {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "runs {}", self.runs)?;
        for r in &self.rules {
            let occ = match r.occurrence {
                Occurrence::Any => "*".to_owned(),
                Occurrence::Nth(n) => n.to_string(),
            };
            let actions: Vec<String> = r.actions.iter().map(|a| a.to_string()).collect();
            writeln!(f, "on {} {occ}: {}", type_name(r.msg_type), actions.join(", "))?;
        }
        Ok(())
    }
}
