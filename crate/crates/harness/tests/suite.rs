// SPDX-License-Identifier: Apache-2.0

use apcr_core::wire::MsgType;
use apcr_harness::suite::{evaluate, modify_sweep};
use apcr_harness::{attack_suite, Variant};

#[test]
fn lpm_attack_suite_has_no_attack_accepts() {
    let s = attack_suite(Variant::Lpm, 1).unwrap();
    assert_eq!(s.attack_accepts(), 0);
    assert_eq!(s.control_accepts(), 1);
    assert!(s.failures().is_empty(), "{:?}", s.failures());
    assert!(s.get("cuckoo-relay").unwrap().aborts.contains(&"IdBindingMismatch".to_owned()));
}

#[test]
fn kdc_attack_suite_has_no_attack_accepts() {
    let s = attack_suite(Variant::Kdc, 1).unwrap();
    assert_eq!(s.attack_accepts(), 0);
    assert_eq!(s.control_accepts(), 2);
    assert!(s.failures().is_empty(), "{:?}", s.failures());
    assert!(s.get("cuckoo-relay").unwrap().aborts.contains(&"HashBindingMismatch".to_owned()));
}

#[test]
fn every_bit_of_the_final_result_is_covered() {
    let sweep = modify_sweep(Variant::Lpm, 2, MsgType::ResultToRp, true).unwrap();
    assert_eq!(sweep.len(), 174 * 8);
    for s in &sweep {
        let (r, _) = evaluate(s).unwrap();
        assert_eq!(r.rejects, ["TamperOrWrongVerifier"], "{}", r.name);
        assert!(r.passed(), "{}", r.name);
    }
}
