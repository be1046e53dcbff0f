// SPDX-License-Identifier: Apache-2.0
//! Acceptance criteria, one pass/fail line each. Runs without the libtest
//! harness so the lines are always printed; exits non-zero on any failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use apcr_cli::app::{self, KeyRequest};
use apcr_cli::config::provision;
use apcr_cli::{bench_run, demo_run, DemoConfig, Mode, Role, Variant};
use apcr_core::crypto::{
    AttesterId, Digest, KemKeyPair, KeyAttestation, Nonce128, SigKeyPair, SymKey,
    KEY_ATTESTATION_LEN,
};
use apcr_core::roles::{AbortReason, Policy};
use apcr_core::vectors::{fixture_dir, golden_messages};
use apcr_core::wire::kdc::{self as kdc_wire, AttesterResultMsg, KdcChallengeMsg, RpResult, RpResultMsg};
use apcr_core::wire::{
    lpm, ChallengeMsg, EarResult, EarVerdict, EvidenceMsg, Frame, Metrics, MsgType, ResultMsg,
    MAX_FRAME_LEN,
};
use apcr_harness::suite::{canonical_scenarios, evaluate, sweep_scenarios, Kind};
use apcr_harness::{
    check_correspondence, check_key_agreement, check_secrecy, run_scenario, Event, Script, Target,
    Topology, Variant as HVariant,
};
use proptest::collection::{btree_map, vec};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRng, TestRunner};
use rand::rngs::OsRng;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.2?}, limit {limit:?}"))?;
    Ok(t)
}

fn demo_config(variant: Variant) -> (tempfile::TempDir, DemoConfig) {
    let dir = tempfile::tempdir().expect("temp dir");
    provision(dir.path(), &mut OsRng).expect("provision");
    let mut cfg = DemoConfig::new(Role::Rp, variant, dir.path());
    cfg.timeout = Duration::from_secs(2);
    (dir, cfg)
}

fn wire_budgets() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let mut c = [0u8; 16];
        let mut id = [0u8; 16];
        rng.fill_bytes(&mut c);
        rng.fill_bytes(&mut id);
        let k = SymKey::generate(&mut rng).map_err(|e| e.to_string())?;
        let cha = lpm::encode_challenge(&Nonce128(c), &AttesterId(id), &k, &mut rng)
            .map_err(|e| e.to_string())?;
        let n = cha.to_bytes().len();
        ensure(n == 55, || format!("challenge of {n} bytes"))?;
    }
    let res = golden_messages()
        .into_iter()
        .find(|(n, _)| *n == "result")
        .map(|(_, b)| b.len())
        .unwrap_or(0);
    ensure(res == 174, || format!("demo Res of {res} bytes"))?;
    let req = KeyRequest::new(&mut rng).encode().len();
    ensure(req == 20, || format!("key request of {req} bytes"))?;
    let key = SymKey::generate(&mut rng).map_err(|e| e.to_string())?;
    let km = app::seal_key_material(&key, &mut rng).map_err(|e| e.to_string())?.len();
    ensure(km == 119, || format!("key material of {km} bytes"))?;

    let (_dir, cfg) = demo_config(Variant::Lpm);
    let report = demo_run(&cfg, None).map_err(|e| e.to_string())?;
    ensure(report.success(), || format!("demo did not transfer the key: {report:?}"))?;
    let t = report.rp.as_ref().map_err(|e| e.to_string())?.traffic;
    ensure((t.sent, t.received) == (174, 194), || {
        format!("RP sent/received {}/{}", t.sent, t.received)
    })?;
    let took = within(start, Duration::from_secs(1))?;
    Ok(format!("Cha 55, Res 174, key material 119, request 20, RP 174/194 ({took:.2?})"))
}

fn honest_runs() -> Outcome {
    let start = Instant::now();
    let mut seeds = ChaCha20Rng::seed_from_u64(0x5eed);
    for variant in [HVariant::Lpm, HVariant::Kdc] {
        for _ in 0..1000 {
            let seed = seeds.next_u64();
            let r = run_scenario(&Topology::generate(seed, variant), &Script::honest())
                .map_err(|e| format!("{variant} seed {seed}: {e}"))?;
            let accepted = r.events.last().is_some_and(|e| matches!(e, Event::RelyingPartyAccepts { .. }));
            ensure(accepted && r.rp_accepts() == 1, || format!("{variant} seed {seed}: no accept"))?;
            check_correspondence(&r).map_err(|e| format!("{variant} seed {seed}: {e}"))?;
            if variant == HVariant::Kdc {
                check_key_agreement(&r).map_err(|e| format!("{variant} seed {seed}: {e}"))?;
            }
        }
    }
    let took = within(start, Duration::from_secs(10))?;
    Ok(format!("2 x 1000 runs accepted with correspondence and key agreement ({took:.2?})"))
}

struct Matrix {
    scenarios: usize,
    attack_accepts: usize,
    failures: Vec<String>,
    cuckoo: Vec<(HVariant, Vec<String>, Option<u8>)>,
    secrecy_failures: Vec<String>,
    elapsed: Duration,
}

fn scenario_matrix() -> Result<Matrix, String> {
    let start = Instant::now();
    let mut m = Matrix {
        scenarios: 0,
        attack_accepts: 0,
        failures: Vec::new(),
        cuckoo: Vec::new(),
        secrecy_failures: Vec::new(),
        elapsed: Duration::ZERO,
    };
    for variant in [HVariant::Lpm, HVariant::Kdc] {
        let mut all = canonical_scenarios(variant, 1);
        all.extend(sweep_scenarios(variant, 1).map_err(|e| e.to_string())?);
        for s in &all {
            let (result, report) = evaluate(s).map_err(|e| format!("{}: {e}", s.name))?;
            m.scenarios += 1;
            if s.kind == Kind::Attack {
                m.attack_accepts += result.accepts;
            }
            if !result.passed() {
                m.failures.push(format!("{variant}/{}", s.name));
            }
            let mut secrets = report.secrets.clone();
            secrets.extend(s.topology.honest_secrets());
            if check_secrecy(&report, &secrets).is_err() {
                m.secrecy_failures.push(format!("{variant}/{}", s.name));
            }
            if s.name == "cuckoo-relay" {
                let step = report.events.iter().find_map(|e| match e {
                    Event::VerifierAborts { step, .. } => *step,
                    _ => None,
                });
                m.cuckoo.push((variant, result.aborts.clone(), step));
            }
        }
    }
    m.elapsed = start.elapsed();
    Ok(m)
}

fn attack_suite(m: &Matrix) -> Outcome {
    ensure(m.attack_accepts == 0, || format!("{} attack accepts", m.attack_accepts))?;
    ensure(m.failures.is_empty(), || format!("failed: {:?}", m.failures))?;
    let lpm = m.cuckoo.iter().find(|(v, _, _)| *v == HVariant::Lpm);
    let ok = lpm.is_some_and(|(_, aborts, step)| {
        aborts == &[format!("{:?}", AbortReason::IdBindingMismatch)] && *step == Some(13)
    });
    ensure(ok, || format!("cuckoo relay: {lpm:?}"))?;
    ensure(m.elapsed < Duration::from_secs(30), || format!("took {:.2?}", m.elapsed))?;
    Ok(format!(
        "{} scenarios, 0 attack accepts, cuckoo aborts IdBindingMismatch at step 13 ({:.2?})",
        m.scenarios, m.elapsed
    ))
}

fn secrecy(m: &Matrix) -> Outcome {
    ensure(m.secrecy_failures.is_empty(), || format!("leaks in {:?}", m.secrecy_failures))?;
    for variant in [HVariant::Lpm, HVariant::Kdc] {
        let topo = Topology::generate(3, variant).leaky_verifier(true);
        let r = run_scenario(&topo, &Script::honest()).map_err(|e| e.to_string())?;
        ensure(check_secrecy(&r, &r.secrets).is_err(), || {
            format!("{variant}: planted leak not detected")
        })?;
    }
    Ok(format!("no secret in {} transcripts; planted leak detected", m.scenarios))
}

const CASES: u32 = 10_000;

fn runner() -> TestRunner {
    let config = Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    TestRunner::new_with_rng(config, rng)
}

fn prop<S: Strategy>(
    families: &mut usize,
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    *families += 1;
    runner().run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

fn metrics_strategy() -> impl Strategy<Value = Metrics> {
    btree_map("[a-z][a-z0-9-]{0,23}", vec(any::<u8>(), 0..48), 0..6).prop_map(|claims| Metrics { claims })
}

fn ear_strategy() -> impl Strategy<Value = EarResult> {
    (
        "\\PC{0,40}",
        any::<i64>(),
        "\\PC{0,60}",
        any::<[u8; 16]>(),
        prop_oneof![
            Just(EarVerdict::Affirming),
            Just(EarVerdict::Warning),
            Just(EarVerdict::Contraindicated)
        ],
    )
        .prop_map(|(ear_version, issued_at, verifier_id, id, verdict)| EarResult {
            ear_version,
            issued_at,
            verifier_id,
            attester_id: AttesterId(id),
            verdict,
        })
}

fn codec_properties() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(0xc0de);
    let k_v = SymKey::generate(&mut rng).map_err(|e| e.to_string())?;
    let signer = SigKeyPair::generate(&mut rng);
    let kem = KemKeyPair::generate(&mut rng);
    let fail = |e: &dyn std::fmt::Display| TestCaseError::fail(e.to_string());
    let mut families = 0;

    prop(&mut families, "metrics", &metrics_strategy(), |m| {
        prop_assert_eq!(Metrics::decode(&m.encode()).map_err(|e| fail(&e))?, m);
        Ok(())
    })?;
    prop(&mut families, "ear", &ear_strategy(), |r| {
        prop_assert_eq!(EarResult::decode(&r.encode()).map_err(|e| fail(&e))?, r);
        Ok(())
    })?;
    prop(&mut families, "frame", 
        &(0usize..MsgType::ALL.len(), vec(any::<u8>(), 0..=MAX_FRAME_LEN - 3)),
        |(t, payload)| {
            let f = Frame::new(MsgType::ALL[t], payload);
            prop_assert_eq!(Frame::decode(&f.encode().map_err(|e| fail(&e))?).map_err(|e| fail(&e))?, f);
            Ok(())
        },
    )?;
    prop(&mut families, "key-request", &(any::<u8>(), any::<[u8; 16]>()), |(app_id, nonce)| {
        let r = KeyRequest { app_id, nonce };
        prop_assert_eq!(KeyRequest::decode(&r.encode()).map_err(|e| fail(&e))?, r);
        Ok(())
    })?;
    prop(&mut families, "challenge", &(any::<[u8; 16]>(), any::<[u8; 16]>(), any::<u64>()), |(c, id, seed)| {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let cha = lpm::encode_challenge(&Nonce128(c), &AttesterId(id), &k_v, &mut rng).map_err(|e| fail(&e))?;
        let back = ChallengeMsg::from_bytes(&cha.to_bytes()).map_err(|e| fail(&e))?;
        prop_assert_eq!(lpm::decode_challenge(&back, &k_v).map_err(|e| fail(&e))?, (Nonce128(c), AttesterId(id)));
        Ok(())
    })?;
    prop(&mut families, "evidence", 
        &(any::<[u8; KEY_ATTESTATION_LEN]>(), metrics_strategy(), any::<[u8; 55]>(), any::<u64>()),
        |(ak, m, cha, seed)| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let ak = KeyAttestation::from_bytes(&ak).map_err(|e| fail(&e))?;
            let cha = ChallengeMsg::from_bytes(&cha).map_err(|e| fail(&e))?;
            let ev = lpm::encode_evidence(&ak, &m, &cha, kem.public(), &signer, &mut rng).map_err(|e| fail(&e))?;
            let back = EvidenceMsg::from_bytes(&ev.to_bytes()).map_err(|e| fail(&e))?;
            prop_assert_eq!(&back, &ev);
            let got = lpm::decode_evidence(&back, &kem, &signer.public()).map_err(|e| fail(&e))?;
            prop_assert_eq!(got, (ak, m, cha));
            Ok(())
        },
    )?;
    prop(&mut families, "result", &(ear_strategy(), any::<[u8; 16]>(), any::<[u8; 16]>(), any::<u64>()), |(r, c, id, seed)| {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let res = lpm::encode_result(&r, &Nonce128(c), &AttesterId(id), &k_v, &mut rng).map_err(|e| fail(&e))?;
        let back = ResultMsg::from_bytes(&res.to_bytes()).map_err(|e| fail(&e))?;
        prop_assert_eq!(lpm::decode_result(&back, &k_v).map_err(|e| fail(&e))?, (r, Nonce128(c), AttesterId(id)));
        Ok(())
    })?;
    prop(&mut families, "kdc-challenge", &(any::<[u8; 16]>(), any::<[u8; 32]>(), any::<u64>()), |(c, h, seed)| {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let cha = kdc_wire::encode_challenge(&Nonce128(c), &Digest(h), &k_v, &mut rng).map_err(|e| fail(&e))?;
        let back = KdcChallengeMsg::from_bytes(&cha.to_bytes()).map_err(|e| fail(&e))?;
        prop_assert_eq!(kdc_wire::decode_challenge(&back, &k_v).map_err(|e| fail(&e))?, (Nonce128(c), Digest(h)));
        Ok(())
    })?;
    prop(&mut families, "kdc-evidence", 
        &(metrics_strategy(), any::<[u8; 32]>(), any::<[u8; 71]>(), any::<u64>()),
        |(m, h, cha, seed)| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let cha = KdcChallengeMsg::from_bytes(&cha).map_err(|e| fail(&e))?;
            let ev = kdc_wire::encode_evidence(&m, &Digest(h), &cha, kem.public(), &signer, &mut rng).map_err(|e| fail(&e))?;
            let back = EvidenceMsg::from_bytes(&ev.to_bytes()).map_err(|e| fail(&e))?;
            let got = kdc_wire::decode_evidence(&back, &kem, &signer.public()).map_err(|e| fail(&e))?;
            prop_assert_eq!(got, (m, Digest(h), cha));
            Ok(())
        },
    )?;
    prop(&mut families, "kdc-results", 
        &(ear_strategy(), any::<[u8; 16]>(), any::<[u8; 32]>(), any::<[u8; 16]>(), any::<u64>()),
        |(r, c, h, ks, seed)| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let contents = RpResult { result: r, c: Nonce128(c), h: Digest(h), session_key: SymKey::from_bytes(ks) };
            let res_rp = kdc_wire::encode_rp_result(&contents, &k_v, &mut rng).map_err(|e| fail(&e))?;
            let res_a = kdc_wire::encode_attester_result(&res_rp, &contents.session_key, kem.public(), &signer, &mut rng)
                .map_err(|e| fail(&e))?;
            let back = AttesterResultMsg::from_bytes(&res_a.to_bytes()).map_err(|e| fail(&e))?;
            let (rp2, ks2) = kdc_wire::decode_attester_result(&back, &signer.public(), &kem).map_err(|e| fail(&e))?;
            prop_assert_eq!(&rp2, &res_rp);
            prop_assert_eq!(&ks2, &contents.session_key);
            let opened = kdc_wire::decode_rp_result(&RpResultMsg::from_bytes(&res_rp.to_bytes()).map_err(|e| fail(&e))?, &k_v)
                .map_err(|e| fail(&e))?;
            prop_assert_eq!(opened, contents);
            Ok(())
        },
    )?;

    let golden = golden_messages();
    ensure(golden == golden_messages(), || "golden vectors differ between calls".into())?;
    for (name, bytes) in &golden {
        let path = fixture_dir().join(format!("{name}.hex"));
        let want = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        ensure(hex::encode(bytes) == want.trim(), || format!("golden {name} differs"))?;
    }
    Ok(format!(
        "{families} families x {CASES} cases round-trip; {} golden vectors match",
        golden.len()
    ))
}

#[derive(Clone, Copy, Debug)]
enum Case {
    Match,
    Mismatch,
    Missing,
    /// Matches, and an unrelated claim is reported too.
    Extra,
}

fn policy_truth_table() -> Outcome {
    const NAMES: [&str; 3] = ["boot-hash", "firmware-version", "kernel-hash"];
    let mut policy = Policy::new();
    for (i, name) in NAMES.iter().enumerate() {
        policy.insert(*name, vec![i as u8; 8]);
        policy.insert(*name, vec![0x80 | i as u8; 8]);
    }
    let cases = [Case::Match, Case::Mismatch, Case::Missing, Case::Extra];
    let mut rows = 0;
    for a in cases {
        for b in cases {
            for c in cases {
                let row = [a, b, c];
                let mut m = Metrics::new();
                for (i, case) in row.iter().enumerate() {
                    match case {
                        Case::Match => m.insert(NAMES[i], vec![0x80 | i as u8; 8]),
                        Case::Mismatch => m.insert(NAMES[i], vec![0x55; 8]),
                        Case::Missing => {}
                        Case::Extra => {
                            m.insert(NAMES[i], vec![i as u8; 8]);
                            m.insert(format!("extra-{i}"), vec![1]);
                        }
                    }
                }
                let bad = row.iter().any(|c| matches!(c, Case::Mismatch | Case::Missing));
                let extra = row.iter().any(|c| matches!(c, Case::Extra));
                let want = match (bad, extra) {
                    (true, _) => EarVerdict::Contraindicated,
                    (false, true) => EarVerdict::Warning,
                    (false, false) => EarVerdict::Affirming,
                };
                let got = policy.appraise(&m);
                ensure(got == want, || format!("{row:?}: got {got:?}, want {want:?}"))?;
                rows += 1;
            }
        }
    }
    Ok(format!("{rows} rows match"))
}

fn benchmark_structure() -> Outcome {
    let mut parts = Vec::new();
    for variant in [Variant::Lpm, Variant::Kdc] {
        let (_dir, mut cfg) = demo_config(variant);
        cfg.bench = Some(apcr_cli::config::DEFAULT_BENCH_REPETITIONS);
        let r = bench_run(&cfg).map_err(|e| format!("{variant}: {e}"))?;
        let full = r.mode(Mode::Full);
        let comm = r.mode(Mode::CommOnly);
        ensure(r.patterns_match && full.messages == comm.messages, || {
            format!("{variant}: comm-only messages differ from the full run")
        })?;
        ensure(r.modes.iter().all(|m| m.mean_ms >= 0.0), || format!("{variant}: negative mean"))?;
        ensure(r.overhead_ms >= 0.0, || format!("{variant}: overhead {:.3} ms", r.overhead_ms))?;
        parts.push(format!(
            "{variant} {:.3}/{:.3}/{:.3} ms overhead {:.3} ms",
            r.mode(Mode::Baseline).mean_ms,
            full.mean_ms,
            comm.mean_ms,
            r.overhead_ms
        ));
    }
    Ok(parts.join("; "))
}

fn determinism() -> Outcome {
    let mut n = 0;
    for variant in [HVariant::Lpm, HVariant::Kdc] {
        let mut scenarios = canonical_scenarios(variant, 77);
        scenarios.push(apcr_harness::suite::Scenario {
            topology: Topology::generate(78, variant).with_target(Target::Mallory),
            ..scenarios[0].clone()
        });
        for s in &scenarios {
            let a = run_scenario(&s.topology, &s.script).map_err(|e| e.to_string())?;
            let b = run_scenario(&s.topology, &s.script).map_err(|e| e.to_string())?;
            ensure(a.transcript_hash() == b.transcript_hash(), || {
                format!("{variant}/{}: transcript hash differs", s.name)
            })?;
            n += 1;
        }
    }
    Ok(format!("{n} scenarios rerun with identical transcript hashes"))
}

fn main() -> ExitCode {
    let matrix = scenario_matrix();
    let from_matrix = |f: fn(&Matrix) -> Outcome| match &matrix {
        Ok(m) => f(m),
        Err(e) => Err(e.clone()),
    };
    let results: Vec<(&str, Outcome)> = vec![
        ("1 wire budgets", wire_budgets()),
        ("2 honest-run correctness", honest_runs()),
        ("3 attack suite", from_matrix(attack_suite)),
        ("4 secrecy", from_matrix(secrecy)),
        ("5 codec properties", codec_properties()),
        ("6 policy truth table", policy_truth_table()),
        ("7 benchmark structure", benchmark_structure()),
        ("8 determinism", determinism()),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(why) => {
                failed += 1;
                println!("criterion {name}: FAIL ({why})");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
