// SPDX-License-Identifier: Apache-2.0
//! Canonical attack scenarios for both protocol variants.
//!
//! The shipped oracle scripts are examples, not an exhaustive search over
//! what an attacker can do with an honest attester.

use apcr_core::roles::{AbortReason, RejectReason};
use apcr_core::wire::{MsgType, FRAME_HEADER_LEN};
use serde::Serialize;

use crate::checks::{check_correspondence, check_key_agreement, check_secrecy};
use crate::engine::run_scenario;
use crate::report::RunReport;
use crate::script::{type_name, Action, EntryRef, KeyRef, Occurrence, Script};
use crate::topology::{Target, Topology, Variant};
use crate::{HarnessError, Node};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    /// Runs in which the RP is expected to accept.
    Control,
    Attack,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    pub topology: Topology,
    pub script: Script,
    pub expect_accepts: usize,
    pub expect_abort: Option<AbortReason>,
    pub expect_reject: Option<RejectReason>,
}

impl Scenario {
    fn attack(name: impl Into<String>, topology: &Topology, script: Script) -> Self {
        Scenario {
            name: name.into(),
            kind: Kind::Attack,
            topology: topology.clone(),
            script,
            expect_accepts: 0,
            expect_abort: None,
            expect_reject: None,
        }
    }

    fn control(name: impl Into<String>, topology: &Topology, script: Script, accepts: usize) -> Self {
        Scenario {
            kind: Kind::Control,
            expect_accepts: accepts,
            ..Scenario::attack(name, topology, script)
        }
    }

    fn aborts(mut self, reason: AbortReason) -> Self {
        self.expect_abort = Some(reason);
        self
    }

    fn rejects(mut self, reason: RejectReason) -> Self {
        self.expect_reject = Some(reason);
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioResult {
    pub name: String,
    pub kind: Kind,
    pub accepts: usize,
    pub aborts: Vec<String>,
    pub rejects: Vec<String>,
    pub correspondence: bool,
    pub key_agreement: bool,
    pub secrecy: bool,
    pub expectation_met: bool,
    pub transcript_hash: String,
}

impl ScenarioResult {
    pub fn passed(&self) -> bool {
        self.correspondence && self.key_agreement && self.secrecy && self.expectation_met
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteSummary {
    pub variant: Variant,
    pub results: Vec<ScenarioResult>,
}

impl SuiteSummary {
    pub fn attack_accepts(&self) -> usize {
        self.results
            .iter()
            .filter(|r| r.kind == Kind::Attack)
            .map(|r| r.accepts)
            .sum()
    }

    pub fn control_accepts(&self) -> usize {
        self.results
            .iter()
            .filter(|r| r.kind == Kind::Control)
            .map(|r| r.accepts)
            .sum()
    }

    pub fn failures(&self) -> Vec<&ScenarioResult> {
        self.results.iter().filter(|r| !r.passed()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&ScenarioResult> {
        self.results.iter().find(|r| r.name == name)
    }
}

/// Runs one scenario and evaluates every property on its report.
pub fn evaluate(s: &Scenario) -> Result<(ScenarioResult, RunReport), HarnessError> {
    let report = run_scenario(&s.topology, &s.script)?;
    let aborts = report.verifier_aborts();
    let rejects = report.rp_rejects();
    let accepts = report.rp_accepts();
    let expectation_met = accepts == s.expect_accepts
        && s.expect_abort.map_or(true, |a| aborts.contains(&a))
        && s.expect_reject.map_or(true, |r| rejects.contains(&r));
    let result = ScenarioResult {
        name: s.name.clone(),
        kind: s.kind,
        accepts,
        aborts: aborts.iter().map(|a| format!("{a:?}")).collect(),
        rejects: rejects.iter().map(|r| format!("{r:?}")).collect(),
        correspondence: check_correspondence(&report).is_ok(),
        key_agreement: report.variant == Variant::Lpm || check_key_agreement(&report).is_ok(),
        secrecy: check_secrecy(&report, &report.secrets).is_ok(),
        expectation_met,
        transcript_hash: report.transcript_hash().to_string(),
    };
    Ok((result, report))
}

struct Types {
    announce: Option<MsgType>,
    challenge: MsgType,
    evidence: MsgType,
    to_attester: MsgType,
    to_rp: MsgType,
}

fn types(v: Variant) -> Types {
    match v {
        Variant::Lpm => Types {
            announce: None,
            challenge: MsgType::Challenge,
            evidence: MsgType::Evidence,
            to_attester: MsgType::ResultToAttester,
            to_rp: MsgType::ResultToRp,
        },
        Variant::Kdc => Types {
            announce: Some(MsgType::KdcHashAnnounce),
            challenge: MsgType::KdcChallenge,
            evidence: MsgType::KdcEvidence,
            to_attester: MsgType::KdcResultToAttester,
            to_rp: MsgType::KdcResultToRp,
        },
    }
}

fn nth(n: u32) -> Occurrence {
    Occurrence::Nth(n)
}

/// Two runs where the first run's final message is withheld, so the
/// adversary holds a complete set of old messages without the RP having
/// accepted, then `t` of the second run is replaced by its first-run copy.
fn replay_script(ty: &Types, t: MsgType) -> Script {
    let setup = Script::honest()
        .runs(2)
        .rule(ty.to_rp, nth(1), vec![Action::Drop]);
    setup.rule(t, nth(2), vec![Action::Replay(EntryRef::Emission(t, 1))])
}

/// Scripted scenarios other than the modification sweeps.
pub fn canonical_scenarios(variant: Variant, seed: u64) -> Vec<Scenario> {
    let topo = Topology::generate(seed, variant);
    let ty = types(variant);
    let mut out = vec![Scenario::control("honest", &topo, Script::honest(), 1)];

    if let Some(announce) = ty.announce {
        // The key hash is public and constant, so replaying it is harmless.
        out.push(Scenario::control(
            "replay-hash-announce",
            &topo,
            replay_script(&ty, announce),
            1,
        ));
    }
    out.push(
        Scenario::attack("replay-challenge", &topo, replay_script(&ty, ty.challenge))
            .aborts(AbortReason::DuplicateChallenge),
    );
    out.push(
        Scenario::attack("replay-evidence", &topo, replay_script(&ty, ty.evidence))
            .aborts(AbortReason::DuplicateChallenge),
    );
    out.push(
        Scenario::attack(
            "duplicate-evidence",
            &topo,
            Script::honest()
                .rule(ty.evidence, nth(1), vec![Action::Duplicate])
                .rule(ty.to_attester, nth(1), vec![Action::Drop]),
        )
        .aborts(AbortReason::DuplicateChallenge),
    );
    out.push(
        Scenario::attack("replay-result-to-attester", &topo, replay_script(&ty, ty.to_attester))
            .rejects(RejectReason::Replay),
    );
    out.push(
        Scenario::attack("replay-result-to-rp", &topo, replay_script(&ty, ty.to_rp))
            .rejects(RejectReason::Replay),
    );

    let relay = topo.clone().with_target(Target::Mallory);
    let relay_abort = match variant {
        Variant::Lpm => AbortReason::IdBindingMismatch,
        Variant::Kdc => AbortReason::HashBindingMismatch,
    };
    out.push(Scenario::attack("cuckoo-relay", &relay, Script::honest()).aborts(relay_abort));

    out.push(
        Scenario::attack(
            "wrong-verifier",
            &topo,
            Script::honest().rule(ty.to_rp, nth(1), vec![Action::ForgeResult(KeyRef::Own)]),
        )
        .rejects(RejectReason::TamperOrWrongVerifier),
    );
    // The pre-shared-key attester relays blindly and the RP rejects; the
    // session-key attester drops the forgery and the RP times out.
    let forged_relay = match variant {
        Variant::Lpm => RejectReason::TamperOrWrongVerifier,
        Variant::Kdc => RejectReason::Timeout,
    };
    out.push(
        Scenario::attack(
            "wrong-verifier-to-attester",
            &topo,
            Script::honest().rule(ty.to_attester, nth(1), vec![Action::ForgeResult(KeyRef::Own)]),
        )
        .rejects(forged_relay),
    );
    if variant == Variant::Lpm {
        out.push(
            Scenario::attack(
                "forged-under-k_a",
                &topo.clone().adversary_knows_k_a(true),
                Script::honest().rule(
                    ty.to_rp,
                    nth(1),
                    vec![Action::ForgeResult(KeyRef::Known("k_a".into()))],
                ),
            )
            .rejects(RejectReason::TamperOrWrongVerifier),
        );
    }
    out.push(
        Scenario::attack(
            "reflect-challenge-as-result",
            &topo,
            Script::honest().rule(
                ty.challenge,
                nth(1),
                vec![
                    Action::Deliver,
                    Action::Retag(ty.to_rp),
                    Action::Reroute(Node::Rp),
                    Action::Deliver,
                ],
            ),
        )
        .rejects(RejectReason::Malformed),
    );
    out.push(
        Scenario::attack(
            "oracle-challenge",
            &topo,
            Script::honest().rule(ty.challenge, nth(1), vec![Action::ForgeChallenge]),
        )
        .aborts(AbortReason::BadChallenge),
    );
    out.push(
        Scenario::attack(
            "untrusted-signer",
            &topo,
            Script::honest().rule(ty.evidence, nth(1), vec![Action::Resign]),
        )
        .aborts(AbortReason::UnknownAttester),
    );
    out.push(
        Scenario::attack(
            "drop-result",
            &topo,
            Script::honest().rule(ty.to_attester, nth(1), vec![Action::Drop]),
        )
        .rejects(RejectReason::Timeout),
    );
    if let Some(announce) = ty.announce {
        out.push(
            Scenario::attack(
                "hash-swap",
                &topo,
                Script::honest().rule(announce, nth(1), vec![Action::Modify { index: 0, mask: 1 }]),
            )
            .aborts(AbortReason::HashBindingMismatch),
        );
    }
    out
}

/// Payload length of the first honest `t` in this topology.
fn honest_len(topo: &Topology, t: MsgType) -> Result<usize, HarnessError> {
    let report = run_scenario(topo, &Script::honest())?;
    report
        .transcript
        .entries()
        .iter()
        .find(|e| e.msg_type() == Some(t))
        .map(|e| e.octets.len() - FRAME_HEADER_LEN)
        .ok_or_else(|| HarnessError::Setup(format!("honest run emits no {t}")))
}

/// One attack per payload byte of `t`, flipping each bit when `bits` is
/// set and complementing the whole byte otherwise.
pub fn modify_sweep(
    variant: Variant,
    seed: u64,
    t: MsgType,
    bits: bool,
) -> Result<Vec<Scenario>, HarnessError> {
    let topo = Topology::generate(seed, variant);
    let len = honest_len(&topo, t)?;
    let masks: Vec<u8> = if bits {
        (0..8).map(|b| 1u8 << b).collect()
    } else {
        vec![0xff]
    };
    let ty = types(variant);
    let mut out = Vec::with_capacity(len * masks.len());
    for index in 0..len {
        for &mask in &masks {
            let script = Script::honest().rule(t, nth(1), vec![Action::Modify { index, mask }]);
            let mut s = Scenario::attack(
                format!("modify-{}[{index}]^{mask:#04x}", type_name(t)),
                &topo,
                script,
            );
            if t == ty.challenge {
                s = s.aborts(AbortReason::BadChallenge);
            } else if t == ty.to_rp {
                s = s.rejects(RejectReason::TamperOrWrongVerifier);
            }
            out.push(s);
        }
    }
    Ok(out)
}

/// Every message of the variant is swept: challenge and final result bit
/// by bit, the others byte by byte.
pub fn sweep_scenarios(variant: Variant, seed: u64) -> Result<Vec<Scenario>, HarnessError> {
    let ty = types(variant);
    let mut plan = vec![
        (ty.challenge, true),
        (ty.evidence, false),
        (ty.to_attester, false),
        (ty.to_rp, true),
    ];
    if let Some(a) = ty.announce {
        plan.insert(0, (a, false));
    }
    let mut out = Vec::new();
    for (t, bits) in plan {
        out.extend(modify_sweep(variant, seed, t, bits)?);
    }
    Ok(out)
}

/// Canonical scripts plus the modification sweeps.
pub fn attack_suite(variant: Variant, seed: u64) -> Result<SuiteSummary, HarnessError> {
    let mut scenarios = canonical_scenarios(variant, seed);
    scenarios.extend(sweep_scenarios(variant, seed)?);
    let results = scenarios
        .iter()
        .map(|s| evaluate(s).map(|(r, _)| r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SuiteSummary { variant, results })
}
