// SPDX-License-Identifier: Apache-2.0
//! The three demo roles and an in-process runner wiring them over loopback.

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use apcr_core::crypto::{Digest, KemPublicKey, SoftTee, SymKey, VerificationKey};
use apcr_core::kdc::{KdcAttesterSession, KdcRpSession, KdcVerifierContext};
use apcr_core::roles::{
    AttesterSession, Decision, Policy, RejectReason, ResultIssuer, RpError, RpSession,
    VerifierContext,
};
use apcr_core::wire::{Metrics, MsgType};
use rand::rngs::OsRng;
use rand::{CryptoRng, RngCore};
use serde::Serialize;
use tracing::{info, info_span, warn};

use crate::app::{self, KeyRequest};
use crate::config::{self, DemoConfig, MetricsFile, PolicyFile};
use crate::link::{Endpoint, Traffic};
use crate::{CliError, Role, Variant};

/// Keys and peers of the relying party.
pub struct RpSetup {
    pub variant: Variant,
    pub k_v: SymKey,
    /// Pre-shared-key variant only.
    pub k_a: Option<(SymKey, VerificationKey)>,
    pub timeout: Duration,
}

pub struct AttesterSetup {
    pub variant: Variant,
    pub rp: SocketAddr,
    pub verifier: SocketAddr,
    pub metrics: Metrics,
    pub timeout: Duration,
    lpm: Option<AttesterSession>,
    kdc: Option<KdcAttesterSession>,
}

pub enum VerifierSetup {
    Lpm(VerifierContext),
    Kdc(KdcVerifierContext),
}

fn need<T>(v: Option<T>, what: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("{what} is required for this role")))
}

impl RpSetup {
    pub fn load(cfg: &DemoConfig) -> Result<Self, CliError> {
        let dir = &cfg.keys;
        let k_a = match cfg.variant {
            Variant::Lpm => Some((
                config::read_sym_key(&dir.join("k_a.key"))?,
                config::read_verification_key(&dir.join("attester_sig.pub"))?,
            )),
            Variant::Kdc => None,
        };
        Ok(RpSetup {
            variant: cfg.variant,
            k_v: config::read_sym_key(&dir.join("k_v.key"))?,
            k_a,
            timeout: cfg.timeout,
        })
    }
}

impl AttesterSetup {
    pub fn load(cfg: &DemoConfig) -> Result<Self, CliError> {
        let dir = &cfg.keys;
        let sig = config::read_sig_key(&dir.join("attester_sig.key"))?;
        let verifier_kem = config::read_kem_public(&dir.join("verifier_kem.pub"))?;
        let (lpm, kdc) = match cfg.variant {
            Variant::Lpm => {
                let tee = SoftTee::new(config::read_sig_key(&dir.join("attester_tee.key"))?);
                let k_a = config::read_sym_key(&dir.join("k_a.key"))?;
                (Some(AttesterSession::new(k_a, sig, verifier_kem, Arc::new(tee))), None)
            }
            Variant::Kdc => {
                let kem = config::read_kem_key(&dir.join("attester_kem.key"))?;
                let verifier_sig = config::read_verification_key(&dir.join("verifier_sig.pub"))?;
                (None, Some(KdcAttesterSession::new(sig, kem, verifier_sig, verifier_kem)))
            }
        };
        Ok(AttesterSetup {
            variant: cfg.variant,
            rp: need(cfg.peer, "--peer")?,
            verifier: need(cfg.verifier, "--verifier")?,
            metrics: MetricsFile::load(&cfg.metrics_path())?.metrics()?,
            timeout: cfg.timeout,
            lpm,
            kdc,
        })
    }
}

impl VerifierSetup {
    pub fn load(cfg: &DemoConfig) -> Result<Self, CliError> {
        let policy_file = PolicyFile::load(&cfg.policy_path())?;
        Self::build(cfg, policy_file.policy()?, policy_file.issuer())
    }

    fn build(cfg: &DemoConfig, policy: Policy, issuer: ResultIssuer) -> Result<Self, CliError> {
        let dir = &cfg.keys;
        let kem = config::read_kem_key(&dir.join("verifier_kem.key"))?;
        let k_v = config::read_sym_key(&dir.join("k_v.key"))?;
        let attester = config::read_verification_key(&dir.join("attester_sig.pub"))?;
        Ok(match cfg.variant {
            Variant::Lpm => {
                let mut ctx = VerifierContext::new(kem, policy, issuer);
                ctx.add_rp_key("keytag", k_v)
                    .trust_attester(attester)
                    .trust_tee(config::read_verification_key(&dir.join("attester_tee.pub"))?);
                VerifierSetup::Lpm(ctx)
            }
            Variant::Kdc => {
                let sig = config::read_sig_key(&dir.join("verifier_sig.key"))?;
                let attester_kem: KemPublicKey =
                    config::read_kem_public(&dir.join("attester_kem.pub"))?;
                let mut ctx = KdcVerifierContext::new(sig, kem, policy, issuer);
                ctx.add_rp_key("keytag", k_v).trust_attester(attester, attester_kem);
                VerifierSetup::Kdc(ctx)
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RpStatus {
    Trust,
    NoTrust,
    Rejected(RejectReason),
}

#[derive(Clone, Debug)]
pub struct RpOutcome {
    pub status: RpStatus,
    /// Whether the real key material, rather than a dummy, was sent.
    pub transferred: bool,
    pub traffic: Traffic,
}

fn rejected(e: RpError) -> Result<RpStatus, CliError> {
    match e {
        RpError::Rejected(r) => Ok(RpStatus::Rejected(r)),
        other => Err(CliError::Protocol(other.to_string())),
    }
}

fn decision(d: Decision) -> RpStatus {
    match d {
        Decision::Trust => RpStatus::Trust,
        Decision::NoTrust => RpStatus::NoTrust,
    }
}

/// One key-transfer session: wait for a request, attest the requester,
/// answer with key material or a dummy of the same size.
pub fn rp_session<R: RngCore + CryptoRng>(
    ep: &mut Endpoint,
    setup: &RpSetup,
    rng: &mut R,
) -> Result<RpOutcome, CliError> {
    let _span = info_span!("rp").entered();
    let start = ep.traffic();
    let (req, attester) = ep.recv(MsgType::KeyTransferRequest, None, None)?;
    let req = KeyRequest::decode(&req)?;
    info!(app_id = req.app_id, %attester, "key transfer requested");

    let (status, key) = match (&setup.k_a, setup.variant) {
        (Some((k_a, attester_pk)), Variant::Lpm) => {
            let mut s = RpSession::for_attester(k_a.clone(), setup.k_v.clone(), attester_pk)
                .with_timeout(Some(setup.timeout));
            let cha = s.create_challenge(rng).map_err(|e| CliError::Protocol(e.to_string()))?;
            info!(step = 1, "nonce generated");
            let cha = cha.to_bytes();
            ep.send(attester, MsgType::Challenge, &cha)?;
            info!(step = 2, len = cha.len(), "challenge sent");
            let verdict = match ep.recv(MsgType::ResultToRp, Some(attester), Some(setup.timeout)) {
                Ok((res, _)) => s.process_result(&res),
                Err(CliError::Timeout(_)) => {
                    s.expire();
                    Err(RpError::Rejected(RejectReason::Timeout))
                }
                Err(e) => return Err(e),
            };
            match verdict {
                Ok(v) => {
                    info!(step = 17, "nonce and attester id match");
                    info!(step = 18, verdict = ?v.result.verdict, decision = ?v.decision, "result processed");
                    (decision(v.decision), Some(k_a.clone()))
                }
                Err(e) => (rejected(e)?, None),
            }
        }
        (_, Variant::Kdc) => {
            let (h, _) = ep.recv(MsgType::KdcHashAnnounce, Some(attester), Some(setup.timeout))?;
            let h = Digest::from_slice(&h).map_err(|e| CliError::Protocol(e.to_string()))?;
            let mut s = KdcRpSession::new(setup.k_v.clone()).with_timeout(Some(setup.timeout));
            let cha = s
                .create_challenge(&h, rng)
                .map_err(|e| CliError::Protocol(e.to_string()))?;
            info!(step = 1, "nonce generated");
            let cha = cha.to_bytes();
            ep.send(attester, MsgType::KdcChallenge, &cha)?;
            info!(step = 2, len = cha.len(), "challenge sent");
            let verdict = match ep.recv(MsgType::KdcResultToRp, Some(attester), Some(setup.timeout)) {
                Ok((res, _)) => s.process_result(&res),
                Err(CliError::Timeout(_)) => {
                    s.expire();
                    Err(RpError::Rejected(RejectReason::Timeout))
                }
                Err(e) => return Err(e),
            };
            match verdict {
                Ok(v) => {
                    info!(step = 18, "nonce and key hash match");
                    info!(step = 19, verdict = ?v.verdict.result.verdict, decision = ?v.verdict.decision, "result processed");
                    (decision(v.verdict.decision), Some(v.session_key))
                }
                Err(e) => (rejected(e)?, None),
            }
        }
        (None, Variant::Lpm) => return Err(CliError::Config("K_A missing".into())),
    };

    if let RpStatus::Rejected(reason) = status {
        warn!(%reason, "result rejected");
    }
    let (msg, transferred) = match (&status, key) {
        (RpStatus::Trust, Some(k)) => (app::seal_key_material(&k, rng)?, true),
        _ => (app::dummy_key_material(rng), false),
    };
    ep.send(attester, MsgType::KeyMaterial, &msg)?;
    info!(len = msg.len(), transferred, "key material sent");
    let end = ep.traffic();
    let traffic = Traffic {
        sent: end.sent - start.sent,
        received: end.received - start.received,
    };
    info!(sent = traffic.sent, received = traffic.received, "session bytes");
    Ok(RpOutcome {
        status,
        transferred,
        traffic,
    })
}

/// Requests the door key and carries the attestation run. Returns the
/// decrypted key.
pub fn attester_session<R: RngCore + CryptoRng>(
    ep: &mut Endpoint,
    setup: &mut AttesterSetup,
    rng: &mut R,
) -> Result<Vec<u8>, CliError> {
    let _span = info_span!("attester").entered();
    let (rp, verifier, timeout) = (setup.rp, setup.verifier, setup.timeout);
    let metrics = setup.metrics.clone();
    let collect = move || metrics.clone();
    let proto = |e: &dyn std::fmt::Display| CliError::Protocol(e.to_string());

    ep.send(rp, MsgType::KeyTransferRequest, &KeyRequest::new(rng).encode())?;
    info!(%rp, "key transfer requested");

    let key = match setup.variant {
        Variant::Lpm => {
            let s = setup.lpm.as_mut().expect("loaded for lpm");
            s.reset();
            let (cha, _) = ep.recv(MsgType::Challenge, Some(rp), Some(timeout))?;
            let ev = s.handle_challenge(&cha, &collect, rng).map_err(|e| proto(&e))?;
            info!(step = 7, "evidence signed");
            ep.send(verifier, MsgType::Evidence, &ev.to_bytes())?;
            let (res, _) = ep.recv(MsgType::ResultToAttester, Some(verifier), Some(timeout))?;
            let res = s.forward_result(&res).map_err(|e| proto(&e))?;
            ep.send(rp, MsgType::ResultToRp, &res)?;
            info!(len = res.len(), "result forwarded");
            s.application_key().clone()
        }
        Variant::Kdc => {
            let s = setup.kdc.as_mut().expect("loaded for kdc");
            s.reset();
            let h = s.announce().map_err(|e| proto(&e))?;
            ep.send(rp, MsgType::KdcHashAnnounce, h.as_bytes())?;
            let (cha, _) = ep.recv(MsgType::KdcChallenge, Some(rp), Some(timeout))?;
            let ev = s.handle_challenge(&cha, &collect, rng).map_err(|e| proto(&e))?;
            info!(step = 5, "evidence signed");
            ep.send(verifier, MsgType::KdcEvidence, &ev.to_bytes())?;
            let (res, _) = ep.recv(MsgType::KdcResultToAttester, Some(verifier), Some(timeout))?;
            let res_rp = s.unwrap_result(&res).map_err(|e| {
                warn!(step = 15, error = %e, "verifier result refused");
                proto(&e)
            })?;
            info!(step = 16, "session key received");
            ep.send(rp, MsgType::KdcResultToRp, &res_rp)?;
            info!(len = res_rp.len(), "result forwarded");
            s.session_key().expect("set by unwrap_result").clone()
        }
    };

    let (msg, _) = ep.recv(MsgType::KeyMaterial, Some(rp), Some(timeout))?;
    match app::open_key_material(&key, &msg) {
        Ok(door) => {
            info!(len = door.len(), "door key received");
            Ok(door)
        }
        Err(_) => {
            warn!(len = msg.len(), "key material does not open");
            Err(CliError::Denied)
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct VerifierStats {
    pub accepted: usize,
    pub aborted: usize,
}

/// Answers one evidence message. `Ok(false)` when the verifier aborted.
pub fn verifier_answer<R: RngCore + CryptoRng>(
    ep: &mut Endpoint,
    setup: &VerifierSetup,
    idle: Option<Duration>,
    rng: &mut R,
) -> Result<bool, CliError> {
    let _span = info_span!("verifier").entered();
    match setup {
        VerifierSetup::Lpm(ctx) => {
            let (ev, attester) = ep.recv(MsgType::Evidence, None, idle)?;
            match ctx.process_evidence(&ev, rng) {
                Ok(acc) => {
                    info!(step = 14, verdict = ?acc.result.verdict, rp = %acc.rp, "attestation result");
                    let res = acc.res.to_bytes();
                    ep.send(attester, MsgType::ResultToAttester, &res)?;
                    info!(step = 15, len = res.len(), "result sent");
                    Ok(true)
                }
                Err(reason) => {
                    warn!(step = reason.lpm_step(), %reason, ?reason, "abort");
                    Ok(false)
                }
            }
        }
        VerifierSetup::Kdc(ctx) => {
            let (ev, attester) = ep.recv(MsgType::KdcEvidence, None, idle)?;
            match ctx.process_evidence(&ev, rng) {
                Ok(acc) => {
                    info!(step = 10, verdict = ?acc.result.verdict, rp = %acc.rp, "attestation result");
                    let res = acc.res_a.to_bytes();
                    ep.send(attester, MsgType::KdcResultToAttester, &res)?;
                    info!(step = 14, len = res.len(), "result sent");
                    Ok(true)
                }
                Err(reason) => {
                    warn!(step = reason.kdc_step(), %reason, ?reason, "abort");
                    Ok(false)
                }
            }
        }
    }
}

/// Serves evidence until `sessions` have been handled, or until nothing
/// arrives for `idle`.
pub fn serve_verifier<R: RngCore + CryptoRng>(
    ep: &mut Endpoint,
    setup: &VerifierSetup,
    sessions: Option<usize>,
    idle: Option<Duration>,
    rng: &mut R,
) -> Result<VerifierStats, CliError> {
    let mut stats = VerifierStats::default();
    while sessions.map_or(true, |n| stats.accepted + stats.aborted < n) {
        match verifier_answer(ep, setup, idle, rng) {
            Ok(true) => stats.accepted += 1,
            Ok(false) => stats.aborted += 1,
            Err(CliError::Timeout(_)) if idle.is_some() => break,
            Err(e) => return Err(e),
        }
    }
    Ok(stats)
}

/// Everything one in-process demo produced.
#[derive(Debug)]
pub struct DemoReport {
    pub rp: Result<RpOutcome, CliError>,
    pub attester: Result<Vec<u8>, CliError>,
    pub verifier: Result<VerifierStats, CliError>,
}

impl DemoReport {
    /// True only when the RP trusted the attester and the attester opened
    /// the key material.
    pub fn success(&self) -> bool {
        matches!(&self.rp, Ok(o) if o.status == RpStatus::Trust && o.transferred)
            && self.attester.as_ref().is_ok_and(|k| k.as_slice() == app::DOOR_KEY)
    }
}

/// Runs all three roles on loopback. `policy` overrides the policy file.
pub fn demo_run(cfg: &DemoConfig, policy: Option<Policy>) -> Result<DemoReport, CliError> {
    let rp_cfg = DemoConfig { role: Role::Rp, ..cfg.clone() };
    let ver_cfg = DemoConfig { role: Role::Verifier, ..cfg.clone() };
    let rp_setup = RpSetup::load(&rp_cfg)?;
    let ver_setup = match policy {
        Some(p) => VerifierSetup::build(&ver_cfg, p, PolicyFile::load(&ver_cfg.policy_path())?.issuer())?,
        None => VerifierSetup::load(&ver_cfg)?,
    };

    let mut rp_ep = Endpoint::bind("127.0.0.1:0")?;
    let mut ver_ep = Endpoint::bind("127.0.0.1:0")?;
    let mut att_ep = Endpoint::bind("127.0.0.1:0")?;
    let att_cfg = DemoConfig {
        role: Role::Attester,
        peer: Some(rp_ep.local_addr()?),
        verifier: Some(ver_ep.local_addr()?),
        ..cfg.clone()
    };
    let mut att_setup = AttesterSetup::load(&att_cfg)?;
    let idle = Some(cfg.timeout * 2);

    let rp = thread::spawn(move || rp_session(&mut rp_ep, &rp_setup, &mut OsRng));
    let verifier = thread::spawn(move || {
        serve_verifier(&mut ver_ep, &ver_setup, Some(1), idle, &mut OsRng)
    });
    let attester = attester_session(&mut att_ep, &mut att_setup, &mut OsRng);
    Ok(DemoReport {
        rp: rp.join().expect("rp thread panicked"),
        attester,
        verifier: verifier.join().expect("verifier thread panicked"),
    })
}
