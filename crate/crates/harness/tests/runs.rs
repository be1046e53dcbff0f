// SPDX-License-Identifier: Apache-2.0

use apcr_core::roles::{AbortReason, RejectReason};
use apcr_core::wire::MsgType;
use apcr_harness::script::EntryRef;
use apcr_harness::{
    check_correspondence, check_key_agreement, check_secrecy, run_scenario, run_scenario_with,
    Action, Adversary, Event, Fate, HarnessError, Occurrence, Origin, Script, Target, Topology,
    UdpTransport, Variant,
};

fn kinds(events: &[Event]) -> Vec<&'static str> {
    events
        .iter()
        .map(|e| match e {
            Event::RelyingPartyBegins { .. } => "rpBegins",
            Event::AttesterAnnounces { .. } => "announces",
            Event::AttesterBegins { .. } => "attesterBegins",
            Event::VerifierAccepts { .. } => "verifierAccepts",
            Event::VerifierAborts { .. } => "verifierAborts",
            Event::AttesterForwards { .. } => "forwards",
            Event::RelyingPartyAccepts { .. } => "rpAccepts",
            Event::RelyingPartyRejects { .. } => "rpRejects",
            Event::Ignored { .. } => "ignored",
        })
        .collect()
}

#[test]
fn honest_lpm_run_emits_every_event_in_order() {
    let topo = Topology::generate(7, Variant::Lpm);
    let r = run_scenario(&topo, &Script::honest()).unwrap();
    assert_eq!(
        kinds(&r.events),
        ["rpBegins", "attesterBegins", "verifierAccepts", "forwards", "rpAccepts"]
    );
    assert_eq!(r.rp_accepts(), 1);
    check_correspondence(&r).unwrap();
    check_secrecy(&r, &r.secrets).unwrap();
    let types: Vec<_> = r.transcript.entries().iter().map(|e| e.msg_type().unwrap()).collect();
    assert_eq!(
        types,
        [MsgType::Challenge, MsgType::Evidence, MsgType::ResultToAttester, MsgType::ResultToRp]
    );
    assert!(r
        .transcript
        .entries()
        .iter()
        .all(|e| e.origin == Origin::Honest && e.fate == Fate::Delivered(1)));
}

#[test]
fn honest_kdc_run_emits_every_event_in_order() {
    let topo = Topology::generate(7, Variant::Kdc);
    let r = run_scenario(&topo, &Script::honest()).unwrap();
    assert_eq!(
        kinds(&r.events),
        ["announces", "rpBegins", "attesterBegins", "verifierAccepts", "forwards", "rpAccepts"]
    );
    check_correspondence(&r).unwrap();
    check_key_agreement(&r).unwrap();
    check_secrecy(&r, &r.secrets).unwrap();
}

#[test]
fn attester_forwards_the_result_octets_unchanged() {
    let r = run_scenario(&Topology::generate(3, Variant::Lpm), &Script::honest()).unwrap();
    let fwd = r
        .events
        .iter()
        .find_map(|e| match e {
            Event::AttesterForwards { received, sent, .. } => Some((received.clone(), sent.clone())),
            _ => None,
        })
        .unwrap();
    assert_eq!(fwd.0, fwd.1);
    let e = r.transcript.entries();
    assert_eq!(e[2].payload(), e[3].payload());
}

#[test]
fn kdc_session_keys_differ_across_runs() {
    let topo = Topology::generate(11, Variant::Kdc);
    let r = run_scenario(&topo, &Script::honest().runs(2)).unwrap();
    assert_eq!(r.rp_accepts(), 2);
    check_key_agreement(&r).unwrap();
    let keys: Vec<_> = r
        .events
        .iter()
        .filter_map(|e| match e {
            Event::RelyingPartyAccepts { session_key_hash, .. } => session_key_hash.clone(),
            _ => None,
        })
        .collect();
    assert_eq!(keys.len(), 2);
    assert_ne!(keys[0], keys[1]);
}

#[test]
fn replayed_result_is_rejected_as_replay() {
    let topo = Topology::generate(5, Variant::Lpm);
    let script = Script::honest()
        .runs(2)
        .rule(MsgType::ResultToRp, Occurrence::Nth(1), vec![Action::Drop])
        .rule(
            MsgType::ResultToRp,
            Occurrence::Nth(2),
            vec![Action::Replay(EntryRef::Emission(MsgType::ResultToRp, 1))],
        );
    let r = run_scenario(&topo, &script).unwrap();
    assert_eq!(r.rp_accepts(), 0);
    assert_eq!(r.rp_rejects(), [RejectReason::Timeout, RejectReason::Replay]);
    check_correspondence(&r).unwrap();
}

#[test]
fn cuckoo_relay_aborts_at_the_binding_check() {
    for (variant, reason, step) in [
        (Variant::Lpm, AbortReason::IdBindingMismatch, 13),
        (Variant::Kdc, AbortReason::HashBindingMismatch, 9),
    ] {
        let topo = Topology::generate(9, variant).with_target(Target::Mallory);
        let r = run_scenario(&topo, &Script::honest()).unwrap();
        assert_eq!(r.rp_accepts(), 0, "{variant}");
        assert_eq!(r.verifier_aborts(), [reason], "{variant}");
        let got = r.events.iter().find_map(|e| match e {
            Event::VerifierAborts { step, .. } => *step,
            _ => None,
        });
        assert_eq!(got, Some(step), "{variant}");
        check_correspondence(&r).unwrap();
    }
}

#[test]
fn step_budget_bounds_the_run() {
    let topo = Topology::generate(2, Variant::Lpm).with_step_budget(3);
    let r = run_scenario(&topo, &Script::honest()).unwrap();
    assert_eq!(r.rp_accepts(), 0);
    assert_eq!(r.rp_rejects(), [RejectReason::Timeout]);
    assert_eq!(r.transcript.entries().last().unwrap().fate, Fate::Dropped);
}

#[test]
fn injected_entries_are_marked_as_adversarial() {
    let topo = Topology::generate(2, Variant::Lpm);
    let script = Script::honest().rule(
        MsgType::Evidence,
        Occurrence::Nth(1),
        vec![Action::Deliver, Action::Inject(vec![0xa1, 0, 0])],
    );
    let r = run_scenario(&topo, &script).unwrap();
    let origins: Vec<_> = r.transcript.entries().iter().map(|e| e.origin).collect();
    assert_eq!(origins.iter().filter(|o| **o == Origin::Adversary).count(), 1);
    assert_eq!(r.rp_accepts(), 1);
    check_correspondence(&r).unwrap();
}

#[test]
fn script_referencing_missing_entry_is_a_config_error() {
    let topo = Topology::generate(1, Variant::Lpm);
    let missing = Script::honest().rule(
        MsgType::Challenge,
        Occurrence::Nth(1),
        vec![Action::Replay(EntryRef::Emission(MsgType::ResultToRp, 1))],
    );
    assert!(matches!(run_scenario(&topo, &missing), Err(HarnessError::Config(_))));

    let out_of_range = Script::honest().rule(
        MsgType::Challenge,
        Occurrence::Nth(1),
        vec![Action::Modify { index: 10_000, mask: 1 }],
    );
    assert!(matches!(run_scenario(&topo, &out_of_range), Err(HarnessError::Config(_))));

    let unknown_key: Script = "on result-to-rp 1: forge_result(k_a)".parse().unwrap();
    assert!(matches!(run_scenario(&topo, &unknown_key), Err(HarnessError::Config(_))));
}

#[test]
fn forgery_under_known_k_a_without_the_nonce_is_rejected() {
    let topo = Topology::generate(4, Variant::Lpm).adversary_knows_k_a(true);
    let script: Script = "on result-to-rp 1: forge_result(k_a)".parse().unwrap();
    let r = run_scenario(&topo, &script).unwrap();
    assert_eq!(r.rp_accepts(), 0);
    assert_eq!(r.rp_rejects(), [RejectReason::TamperOrWrongVerifier]);
}

#[test]
fn correspondence_fails_without_a_verifier_accept() {
    let r = run_scenario(&Topology::generate(8, Variant::Lpm), &Script::honest()).unwrap();
    let mut broken = r.clone();
    broken.events.retain(|e| !matches!(e, Event::VerifierAccepts { .. }));
    assert!(check_correspondence(&broken).is_err());

    // The same begin cannot back two accepts.
    let mut doubled = r.clone();
    let accept = doubled.events.last().unwrap().clone();
    doubled.events.push(accept);
    assert!(check_correspondence(&doubled).is_err());
}

#[test]
fn leaky_verifier_violates_secrecy() {
    let topo = Topology::generate(8, Variant::Lpm).leaky_verifier(true);
    let r = run_scenario(&topo, &Script::honest()).unwrap();
    assert!(check_secrecy(&r, &r.secrets).is_err());
}

#[test]
fn adversary_never_holds_honest_secrets() {
    for variant in [Variant::Lpm, Variant::Kdc] {
        let topo = Topology::generate(21, variant);
        let r = run_scenario(&topo, &Script::honest()).unwrap();
        let mut adv = Adversary::new(99, topo.public_directory());
        for e in r.transcript.entries() {
            adv.observe(&e.octets);
        }
        let mut secrets = topo.honest_secrets();
        secrets.extend(r.secrets.iter().cloned());
        for held in adv.knowledge() {
            for s in &secrets {
                assert!(
                    !held.windows(s.len()).any(|w| w == s.as_slice()),
                    "{variant}: adversary holds an honest secret"
                );
            }
        }
    }
}

#[test]
fn runs_are_deterministic_per_seed() {
    for variant in [Variant::Lpm, Variant::Kdc] {
        let a = run_scenario(&Topology::generate(42, variant), &Script::honest()).unwrap();
        let b = run_scenario(&Topology::generate(42, variant), &Script::honest()).unwrap();
        let c = run_scenario(&Topology::generate(43, variant), &Script::honest()).unwrap();
        assert_eq!(a.transcript_hash(), b.transcript_hash());
        assert_eq!(a.events, b.events);
        assert_ne!(a.transcript_hash(), c.transcript_hash());
    }
}

#[test]
fn json_lines_export_parses() {
    let r = run_scenario(&Topology::generate(6, Variant::Kdc), &Script::honest()).unwrap();
    let mut buf = Vec::new();
    r.write_json_lines(&mut buf).unwrap();
    let lines: Vec<serde_json::Value> = String::from_utf8(buf)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 1 + r.events.len() + r.transcript.len());
    assert_eq!(lines[0]["record"], "summary");
    assert_eq!(lines[0]["transcript_hash"], r.transcript_hash().to_string());
    assert_eq!(lines[1]["record"], "event");
    assert_eq!(lines[1]["event"], "attesterAnnounces");
    assert_eq!(lines.last().unwrap()["record"], "message");
}

#[test]
fn script_files_run_end_to_end() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/scripts");
    let replay: Script = std::fs::read_to_string(format!("{dir}/replay_result.apcr"))
        .unwrap()
        .parse()
        .unwrap();
    let r = run_scenario(&Topology::generate(1, Variant::Lpm), &replay).unwrap();
    assert!(r.rp_rejects().contains(&RejectReason::Replay));

    let swap: Script = std::fs::read_to_string(format!("{dir}/kdc_hash_swap.apcr"))
        .unwrap()
        .parse()
        .unwrap();
    let r = run_scenario(&Topology::generate(1, Variant::Kdc), &swap).unwrap();
    assert_eq!(r.rp_accepts(), 0);
}

#[test]
fn udp_transport_matches_memory() {
    for variant in [Variant::Lpm, Variant::Kdc] {
        let topo = Topology::generate(12, variant);
        let scripts = [
            Script::honest(),
            Script::honest().rule(
                match variant {
                    Variant::Lpm => MsgType::ResultToRp,
                    Variant::Kdc => MsgType::KdcResultToRp,
                },
                Occurrence::Nth(1),
                vec![Action::Modify { index: 5, mask: 0x10 }],
            ),
        ];
        for script in &scripts {
            let mem = run_scenario(&topo, script).unwrap();
            let mut udp = UdpTransport::loopback().unwrap();
            let net = run_scenario_with(&topo, script, &mut udp).unwrap();
            assert_eq!(mem.events, net.events);
            assert_eq!(mem.outcomes, net.outcomes);
            assert_eq!(mem.transcript_hash(), net.transcript_hash());
        }
    }
}
