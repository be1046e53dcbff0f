// SPDX-License-Identifier: Apache-2.0

use std::time::Duration;

use apcr_cli::app::{DOOR_KEY, KEY_MATERIAL_LEN};
use apcr_cli::config::provision;
use apcr_cli::demo::{
    attester_session, rp_session, serve_verifier, AttesterSetup, RpSetup, VerifierSetup,
};
use apcr_cli::link::{Direction, Endpoint};
use apcr_cli::{bench_run, demo_run, CliError, DemoConfig, Mode, Role, RpStatus, Variant};
use apcr_core::roles::{Policy, RejectReason};
use rand::rngs::OsRng;

fn setup(variant: Variant) -> (tempfile::TempDir, DemoConfig) {
    let dir = tempfile::tempdir().unwrap();
    provision(dir.path(), &mut OsRng).unwrap();
    let mut cfg = DemoConfig::new(Role::Rp, variant, dir.path());
    cfg.timeout = Duration::from_millis(500);
    (dir, cfg)
}

#[test]
fn lpm_demo_transfers_the_key_with_the_pinned_byte_counts() {
    let (_dir, cfg) = setup(Variant::Lpm);
    let report = demo_run(&cfg, None).unwrap();
    assert!(report.success(), "{report:?}");
    let rp = report.rp.as_ref().unwrap();
    assert_eq!(rp.status, RpStatus::Trust);
    assert_eq!((rp.traffic.sent, rp.traffic.received), (174, 194));
    assert_eq!(report.attester.unwrap(), DOOR_KEY);
    assert_eq!(report.verifier.unwrap().accepted, 1);
}

#[test]
fn kdc_demo_transfers_the_key_under_the_session_key() {
    let (_dir, cfg) = setup(Variant::Kdc);
    let report = demo_run(&cfg, None).unwrap();
    assert!(report.success(), "{report:?}");
    let rp = report.rp.unwrap();
    // 71-byte challenge plus key material; request, key hash and Res_RP in.
    assert_eq!(rp.traffic.sent, 71 + KEY_MATERIAL_LEN);
    assert_eq!(rp.traffic.received, 20 + 32 + 208);
}

#[test]
fn mismatched_policy_yields_a_same_size_dummy() {
    for variant in [Variant::Lpm, Variant::Kdc] {
        let (_dir, cfg) = setup(variant);
        let strict = Policy::new().allow("boot-hash", vec![0u8; 32]);
        let report = demo_run(&cfg, Some(strict)).unwrap();
        assert!(!report.success());
        let rp = report.rp.unwrap();
        assert_eq!(rp.status, RpStatus::NoTrust);
        assert!(!rp.transferred);
        assert!(matches!(report.attester, Err(CliError::Denied)));
        // The RP sends a challenge and then key material either way; the
        // result it receives may differ in length with the verdict.
        let approved = demo_run(&cfg, None).unwrap().rp.unwrap();
        assert_eq!(rp.traffic.sent, approved.traffic.sent, "{variant}");
    }
}

#[test]
fn unknown_relying_party_key_ends_in_a_timeout_and_a_dummy() {
    let (dir, cfg) = setup(Variant::Lpm);
    // The RP gets a K_V the verifier does not know, so the verifier aborts
    // at step 10 and nothing comes back.
    let rp_only = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let p = entry.unwrap().path();
        std::fs::copy(&p, rp_only.path().join(p.file_name().unwrap())).unwrap();
    }
    std::fs::write(rp_only.path().join("k_v.key"), "22".repeat(16)).unwrap();
    let mut rp_cfg = cfg.clone();
    rp_cfg.keys = rp_only.path().to_path_buf();

    let rp_setup = RpSetup::load(&rp_cfg).unwrap();
    let ver_setup = VerifierSetup::load(&cfg).unwrap();
    let mut rp_ep = Endpoint::bind("127.0.0.1:0").unwrap();
    let mut ver_ep = Endpoint::bind("127.0.0.1:0").unwrap();
    let mut att_ep = Endpoint::bind("127.0.0.1:0").unwrap();
    let mut att_cfg = cfg.clone();
    att_cfg.peer = Some(rp_ep.local_addr().unwrap());
    att_cfg.verifier = Some(ver_ep.local_addr().unwrap());
    let mut att_setup = AttesterSetup::load(&att_cfg).unwrap();

    let rp = std::thread::spawn(move || rp_session(&mut rp_ep, &rp_setup, &mut OsRng));
    let ver = std::thread::spawn(move || {
        serve_verifier(&mut ver_ep, &ver_setup, Some(1), Some(Duration::from_secs(2)), &mut OsRng)
    });
    let att = attester_session(&mut att_ep, &mut att_setup, &mut OsRng);
    assert!(matches!(att, Err(CliError::Timeout(_))));
    let rp = rp.join().unwrap().unwrap();
    assert_eq!(rp.status, RpStatus::Rejected(RejectReason::Timeout));
    assert!(!rp.transferred);
    assert_eq!(ver.join().unwrap().unwrap().aborted, 1);
}

#[test]
fn benchmark_report_has_the_three_experiments() {
    for variant in [Variant::Lpm, Variant::Kdc] {
        let (_dir, mut cfg) = setup(variant);
        cfg.bench = Some(3);
        let report = bench_run(&cfg).unwrap();
        assert_eq!(report.repetitions, 3);
        assert!(report.patterns_match);
        let base = report.mode(Mode::Baseline);
        let full = report.mode(Mode::Full);
        let comm = report.mode(Mode::CommOnly);
        assert_eq!(base.messages.len(), 2);
        assert_eq!(full.messages, comm.messages);
        let sent: Vec<_> = full
            .messages
            .iter()
            .filter(|r| r.direction == Direction::Sent)
            .map(|r| r.len)
            .collect();
        assert_eq!(sent[0], 20);
        for m in [base, full, comm] {
            assert!(m.mean_ms >= 0.0);
        }
        assert_eq!(report.overhead_ms, full.mean_ms - comm.mean_ms);
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["modes"].as_array().unwrap().len(), 3);
    }
}
