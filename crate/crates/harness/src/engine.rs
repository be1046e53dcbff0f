// SPDX-License-Identifier: Apache-2.0
//! Single-threaded scheduler: honest emissions pass through the adversary
//! script, deliveries go through the transport, participants react.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;
use std::time::Duration;

use apcr_core::crypto::{self, Digest, SoftTee};
use apcr_core::kdc::{
    KdcAttesterSession, KdcAttesterState, KdcRpSession, KdcRpState, KdcVerifierContext,
};
use apcr_core::roles::{
    AttesterSession, AttesterState, Decision, RejectReason, RpError, RpSession, RpState,
    VerifierContext,
};
use apcr_core::wire::{Frame, MsgType, FRAME_HEADER_LEN};
use apcr_core::ManualClock;
use apcr_net::NetError;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::adversary::Adversary;
use crate::report::{Appraisal, Event, RunOutcome, RunReport};
use crate::script::{Action, EntryRef, Script};
use crate::topology::{Target, Topology, Variant};
use crate::transcript::{Entry, Fate, Origin, Transcript};
use crate::transport::{MemoryTransport, Transport};
use crate::{channel_name, HarnessError, Node};

const RP_KEY_NAME: &str = "rp";

/// Runs `script` against `topology` over an in-memory transport.
pub fn run_scenario(topology: &Topology, script: &Script) -> Result<RunReport, HarnessError> {
    run_scenario_with(topology, script, &mut MemoryTransport::new())
}

pub fn run_scenario_with(
    topology: &Topology,
    script: &Script,
    transport: &mut dyn Transport,
) -> Result<RunReport, HarnessError> {
    let mut engine = Engine::new(topology, script, transport);
    for run in 1..=script.runs {
        engine.run = run;
        engine.begin_run()?;
        engine.drain()?;
        engine.finish_run();
    }
    Ok(engine.into_report())
}

#[derive(Clone, Debug)]
struct Pending {
    from: Node,
    to: Node,
    octets: Vec<u8>,
}

struct Rngs {
    rp: ChaCha20Rng,
    attester: ChaCha20Rng,
    verifier: ChaCha20Rng,
}

struct LpmWorld {
    rp: RpSession,
    attester: AttesterSession,
    verifier: VerifierContext,
}

struct KdcWorld {
    rp: KdcRpSession,
    attester: KdcAttesterSession,
    verifier: KdcVerifierContext,
    mallory_h: Digest,
}

enum World {
    Lpm(LpmWorld),
    Kdc(KdcWorld),
}

struct Engine<'a> {
    topo: &'a Topology,
    script: &'a Script,
    transport: &'a mut dyn Transport,
    world: World,
    rngs: Rngs,
    adversary: Adversary,
    clock: Arc<ManualClock>,
    transcript: Transcript,
    events: Vec<Event>,
    outcomes: Vec<RunOutcome>,
    secrets: Vec<Vec<u8>>,
    queue: VecDeque<(Pending, Origin)>,
    step: u64,
    run: u32,
    run_start_step: u64,
    occurrences: BTreeMap<MsgType, u32>,
    emissions: BTreeMap<(MsgType, u32), usize>,
    /// Where the attester sends results: whoever delivered its challenge.
    attester_peer: Node,
}

fn seeded(seed: u64, salt: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

impl<'a> Engine<'a> {
    fn new(topo: &'a Topology, script: &'a Script, transport: &'a mut dyn Transport) -> Self {
        let clock = Arc::new(ManualClock::new());
        let timeout = Some(Duration::from_millis(topo.step_budget));
        let world = match topo.variant {
            Variant::Lpm => {
                let (k_rp, pk_rp) = match topo.target {
                    Target::Attester => (&topo.attester.k_app, topo.attester.sig.public()),
                    Target::Mallory => (&topo.mallory.k_app, topo.mallory.sig.public()),
                };
                let rp = RpSession::for_attester(k_rp.clone(), topo.verifier.k_v.clone(), &pk_rp)
                    .with_timeout(timeout)
                    .with_clock(clock.clone());
                let attester = AttesterSession::new(
                    topo.attester.k_app.clone(),
                    topo.attester.sig.clone(),
                    topo.verifier.kem.public().clone(),
                    Arc::new(SoftTee::new(topo.attester.tee.clone())),
                );
                let mut verifier = VerifierContext::new(
                    topo.verifier.kem.clone(),
                    topo.policy.clone(),
                    topo.issuer.clone(),
                );
                verifier
                    .add_rp_key(RP_KEY_NAME, topo.verifier.k_v.clone())
                    .trust_attester(topo.attester.sig.public())
                    .trust_attester(topo.mallory.sig.public())
                    .trust_tee(topo.attester.tee.public())
                    .trust_tee(topo.mallory.tee.public());
                World::Lpm(LpmWorld {
                    rp,
                    attester,
                    verifier,
                })
            }
            Variant::Kdc => {
                let rp = KdcRpSession::new(topo.verifier.k_v.clone())
                    .with_timeout(timeout)
                    .with_clock(clock.clone());
                let attester = KdcAttesterSession::new(
                    topo.attester.sig.clone(),
                    topo.attester.kem.clone(),
                    topo.verifier.sig.public(),
                    topo.verifier.kem.public().clone(),
                );
                let mut verifier = KdcVerifierContext::new(
                    topo.verifier.sig.clone(),
                    topo.verifier.kem.clone(),
                    topo.policy.clone(),
                    topo.issuer.clone(),
                );
                verifier
                    .add_rp_key(RP_KEY_NAME, topo.verifier.k_v.clone())
                    .trust_attester(topo.attester.sig.public(), topo.attester.kem.public().clone())
                    .trust_attester(topo.mallory.sig.public(), topo.mallory.kem.public().clone());
                World::Kdc(KdcWorld {
                    rp,
                    attester,
                    verifier,
                    mallory_h: topo.mallory.sig.public().key_id(),
                })
            }
        };
        let mut adversary = Adversary::new(topo.adversary_seed, topo.public_directory());
        adversary.learn_key("k_b", topo.mallory.k_app.clone());
        if topo.adversary_knows_k_a {
            adversary.learn_key("k_a", topo.attester.k_app.clone());
        }
        Engine {
            topo,
            script,
            transport,
            world,
            rngs: Rngs {
                rp: seeded(topo.seed, 1),
                attester: seeded(topo.seed, 2),
                verifier: seeded(topo.seed, 3),
            },
            adversary,
            clock,
            transcript: Transcript::default(),
            events: Vec::new(),
            outcomes: Vec::new(),
            secrets: topo.honest_secrets(),
            queue: VecDeque::new(),
            step: 0,
            run: 0,
            run_start_step: 0,
            occurrences: BTreeMap::new(),
            emissions: BTreeMap::new(),
            attester_peer: Node::Rp,
        }
    }

    fn event(&mut self, e: Event) {
        self.events.push(e);
    }

    fn ignored(&mut self, node: Node, reason: impl ToString) {
        let run = self.run;
        self.event(Event::Ignored {
            run,
            node,
            reason: reason.to_string(),
        });
    }

    fn emit(&mut self, from: Node, to: Node, t: MsgType, payload: Vec<u8>, origin: Origin) {
        match Frame::new(t, payload).encode() {
            Ok(octets) => self.queue.push_back((Pending { from, to, octets }, origin)),
            Err(e) => self.ignored(from, format!("cannot frame {t}: {e}")),
        }
    }

    fn begin_run(&mut self) -> Result<(), HarnessError> {
        self.run_start_step = self.step;
        let run = self.run;
        let target = match self.topo.target {
            Target::Attester => Node::Attester,
            Target::Mallory => Node::Mallory,
        };
        match &mut self.world {
            World::Lpm(w) => {
                if w.rp.state().is_terminal() {
                    w.rp.reset().map_err(|e| HarnessError::Setup(e.to_string()))?;
                }
                w.attester.reset();
                let cha = w
                    .rp
                    .create_challenge(&mut self.rngs.rp)
                    .map_err(|e| HarnessError::Setup(e.to_string()))?
                    .to_bytes();
                let c = w.rp.pending_nonce().expect("challenge just created");
                let id = w.rp.attester_id();
                self.event(Event::RelyingPartyBegins {
                    run,
                    c: c.0.to_vec().into(),
                    id: id.0.to_vec().into(),
                    cha: cha.clone().into(),
                });
                self.emit(Node::Rp, target, MsgType::Challenge, cha, Origin::Honest);
            }
            World::Kdc(w) => {
                if w.rp.state().is_terminal() {
                    w.rp.reset().map_err(|e| HarnessError::Setup(e.to_string()))?;
                }
                w.attester.reset();
                let h = w
                    .attester
                    .announce()
                    .map_err(|e| HarnessError::Setup(e.to_string()))?;
                let mallory_h = w.mallory_h;
                self.event(Event::AttesterAnnounces {
                    run,
                    h: h.0.to_vec().into(),
                });
                // In the relay topology the attester's link to the RP runs through mallory,
                // who announces its own key hash instead.
                let rp_side = if target == Node::Mallory { Node::Mallory } else { Node::Rp };
                self.emit(Node::Attester, rp_side, MsgType::KdcHashAnnounce, h.0.to_vec(), Origin::Honest);
                if target == Node::Mallory {
                    self.emit(
                        Node::Mallory,
                        Node::Rp,
                        MsgType::KdcHashAnnounce,
                        mallory_h.0.to_vec(),
                        Origin::Adversary,
                    );
                }
            }
        }
        Ok(())
    }

    fn drain(&mut self) -> Result<(), HarnessError> {
        while let Some((p, origin)) = self.queue.pop_front() {
            if self.step - self.run_start_step >= self.topo.step_budget {
                self.record(&p, origin, Fate::Dropped);
                continue;
            }
            self.step += 1;
            self.clock.advance(Duration::from_millis(1));
            let deliveries = match origin {
                Origin::Honest => self.intercept(p)?,
                Origin::Adversary => {
                    self.adversary.observe(&p.octets);
                    self.record(&p, Origin::Adversary, Fate::Delivered(1));
                    vec![p]
                }
            };
            for d in deliveries {
                self.deliver(d)?;
            }
        }
        Ok(())
    }

    fn record(&mut self, p: &Pending, origin: Origin, fate: Fate) -> usize {
        self.transcript.push(Entry {
            index: 0,
            step: self.step,
            run: self.run,
            origin,
            from: p.from,
            to: p.to,
            channel: channel_name(p.from, p.to),
            octets: p.octets.clone().into(),
            fate,
        })
    }

    fn resolve(&self, r: EntryRef) -> Result<Vec<u8>, HarnessError> {
        let index = match r {
            EntryRef::Index(i) => i,
            EntryRef::Emission(t, n) => *self.emissions.get(&(t, n)).ok_or_else(|| {
                HarnessError::Config(format!("replay({r}): no such emission yet"))
            })?,
        };
        self.transcript
            .get(index)
            .map(|e| e.octets.0.clone())
            .ok_or_else(|| HarnessError::Config(format!("replay({r}): no transcript entry {index}")))
    }

    /// Applies the first matching rule to an honest emission and records the
    /// emission plus every altered delivery.
    fn intercept(&mut self, p: Pending) -> Result<Vec<Pending>, HarnessError> {
        self.adversary.observe(&p.octets);
        let t = MsgType::from_tag(p.octets[0]).expect("honest frames carry known tags");
        let n = {
            let c = self.occurrences.entry(t).or_insert(0);
            *c += 1;
            *c
        };
        self.emissions.insert((t, n), self.transcript.len());

        let mut out = Vec::new();
        if let Some(rule) = self.script.find(t, n) {
            let mut w = p.clone();
            for action in &rule.actions {
                match action {
                    Action::Deliver => out.push(w.clone()),
                    Action::Drop => {}
                    Action::Duplicate => {
                        out.push(w.clone());
                        out.push(w.clone());
                    }
                    Action::Modify { index, mask } => {
                        let pos = FRAME_HEADER_LEN + index;
                        let len = w.octets.len().saturating_sub(FRAME_HEADER_LEN);
                        let b = w.octets.get_mut(pos).ok_or_else(|| {
                            HarnessError::Config(format!(
                                "modify({index}) beyond the {len}-byte payload of {t}"
                            ))
                        })?;
                        *b ^= mask;
                    }
                    Action::Retag(nt) => w.octets[0] = nt.tag(),
                    Action::Reroute(to) => w.to = *to,
                    Action::Replay(r) => w.octets = self.resolve(*r)?,
                    Action::Inject(raw) => out.push(Pending {
                        octets: raw.clone(),
                        ..w.clone()
                    }),
                    Action::ForgeResult(key) => {
                        let wt = MsgType::from_tag(w.octets[0]).unwrap_or(t);
                        w.octets = self.adversary.forge_result(wt, key)?;
                    }
                    Action::ForgeChallenge => {
                        let wt = MsgType::from_tag(w.octets[0]).unwrap_or(t);
                        w.octets = self.adversary.forge_challenge(wt)?;
                    }
                    Action::Resign => w.octets = self.adversary.resign(&w.octets)?,
                }
            }
            if !rule.actions.iter().any(Action::emits) {
                out.push(w);
            }
        } else {
            out.push(p.clone());
        }

        let unchanged = |d: &Pending| d.to == p.to && d.octets == p.octets;
        let same = out.iter().filter(|d| unchanged(d)).count() as u32;
        let fate = if same > 0 { Fate::Delivered(same) } else { Fate::Dropped };
        self.record(&p, Origin::Honest, fate);
        for d in out.iter().filter(|d| !unchanged(d)) {
            self.record(d, Origin::Adversary, Fate::Delivered(1));
        }
        Ok(out)
    }

    fn deliver(&mut self, d: Pending) -> Result<(), HarnessError> {
        let frame = match self.transport.carry(d.to, &d.octets) {
            Ok(f) => f,
            Err(NetError::Format(e)) => {
                self.ignored(d.to, e);
                return Ok(());
            }
            Err(e) => return Err(e.into()),
        };
        match self.topo.variant {
            Variant::Lpm => self.dispatch_lpm(d.from, d.to, frame),
            Variant::Kdc => self.dispatch_kdc(d.from, d.to, frame),
        }
        Ok(())
    }

    /// Mallory passes traffic between the RP and the honest attester.
    fn relay(&mut self, from: Node, frame: Frame, swallow: MsgType) {
        if frame.msg_type == swallow {
            return;
        }
        let to = match from {
            Node::Rp => Node::Attester,
            Node::Attester => Node::Rp,
            _ => return,
        };
        self.emit(Node::Mallory, to, frame.msg_type, frame.payload, Origin::Adversary);
    }

    fn dispatch_lpm(&mut self, from: Node, to: Node, frame: Frame) {
        let run = self.run;
        let World::Lpm(w) = &mut self.world else {
            unreachable!("variant checked by caller")
        };
        match (to, frame.msg_type) {
            (Node::Rp, MsgType::ResultToRp) => {
                let pending = (w.rp.pending_nonce(), w.rp.attester_id());
                match w.rp.process_result(&frame.payload) {
                    Ok(v) => {
                        let (c, id) = (pending.0.expect("accepted from AwaitingResult"), pending.1);
                        self.event(Event::RelyingPartyAccepts {
                            run,
                            c: c.0.to_vec().into(),
                            id: id.0.to_vec().into(),
                            result: v.result.encode().into(),
                            trust: v.decision == Decision::Trust,
                            session_key_hash: None,
                        });
                    }
                    Err(RpError::Rejected(reason)) => {
                        self.event(Event::RelyingPartyRejects { run, reason })
                    }
                    Err(e) => self.ignored(to, e),
                }
            }
            (Node::Attester, MsgType::Challenge) => {
                let metrics = self.topo.metrics.clone();
                match w
                    .attester
                    .handle_challenge(&frame.payload, &metrics, &mut self.rngs.attester)
                {
                    Ok(ev) => {
                        self.attester_peer = from;
                        let m = metrics.encode();
                        self.secrets.push(m.clone());
                        self.event(Event::AttesterBegins {
                            run,
                            cha: frame.payload.into(),
                            metrics: m.into(),
                        });
                        self.emit(Node::Attester, Node::Verifier, MsgType::Evidence, ev.to_bytes(), Origin::Honest);
                    }
                    Err(e) => self.ignored(to, e),
                }
            }
            (Node::Attester, MsgType::ResultToAttester) => {
                match w.attester.forward_result(&frame.payload) {
                    Ok(res) => {
                        self.event(Event::AttesterForwards {
                            run,
                            received: crypto::hash(&frame.payload).0.to_vec().into(),
                            sent: crypto::hash(&res).0.to_vec().into(),
                            session_key_hash: None,
                        });
                        let peer = self.attester_peer;
                        self.emit(Node::Attester, peer, MsgType::ResultToRp, res, Origin::Honest);
                    }
                    Err(e) => self.ignored(to, e),
                }
            }
            (Node::Verifier, MsgType::Evidence) => {
                match w.verifier.process_evidence(&frame.payload, &mut self.rngs.verifier) {
                    Ok(acc) => {
                        let m = acc.metrics.encode();
                        let r = acc.result.encode();
                        self.secrets.push(m.clone());
                        self.secrets.push(r.clone());
                        let mut reply = acc.res.to_bytes();
                        if self.topo.leaky_verifier {
                            reply.extend_from_slice(&r);
                        }
                        self.event(Event::VerifierAccepts {
                            run,
                            c: acc.c.0.to_vec().into(),
                            id: acc.id.0.to_vec().into(),
                            metrics: m.into(),
                            result: r.into(),
                            session_key_hash: None,
                        });
                        self.emit(Node::Verifier, from, MsgType::ResultToAttester, reply, Origin::Honest);
                    }
                    Err(reason) => self.event(Event::VerifierAborts {
                        run,
                        reason,
                        step: reason.lpm_step(),
                    }),
                }
            }
            (Node::Mallory, _) => self.relay(from, frame, MsgType::KdcHashAnnounce),
            (_, t) => self.ignored(to, format!("unexpected {t}")),
        }
    }

    fn dispatch_kdc(&mut self, from: Node, to: Node, frame: Frame) {
        let run = self.run;
        let World::Kdc(w) = &mut self.world else {
            unreachable!("variant checked by caller")
        };
        match (to, frame.msg_type) {
            (Node::Rp, MsgType::KdcHashAnnounce) => {
                let Ok(h) = Digest::from_slice(&frame.payload) else {
                    return self.ignored(to, "key hash must be 32 bytes");
                };
                match w.rp.create_challenge(&h, &mut self.rngs.rp) {
                    Ok(cha) => {
                        let (c, _) = w.rp.pending().expect("challenge just created");
                        let cha = cha.to_bytes();
                        self.event(Event::RelyingPartyBegins {
                            run,
                            c: c.0.to_vec().into(),
                            id: h.0.to_vec().into(),
                            cha: cha.clone().into(),
                        });
                        self.emit(Node::Rp, from, MsgType::KdcChallenge, cha, Origin::Honest);
                    }
                    Err(e) => self.ignored(to, e),
                }
            }
            (Node::Rp, MsgType::KdcResultToRp) => {
                let pending = w.rp.pending();
                match w.rp.process_result(&frame.payload) {
                    Ok(v) => {
                        let (c, h) = pending.expect("accepted from AwaitingResult");
                        self.secrets.push(v.session_key.as_bytes().to_vec());
                        self.event(Event::RelyingPartyAccepts {
                            run,
                            c: c.0.to_vec().into(),
                            id: h.0.to_vec().into(),
                            result: v.verdict.result.encode().into(),
                            trust: v.verdict.decision == Decision::Trust,
                            session_key_hash: Some(crypto::hash(v.session_key.as_bytes()).0.to_vec().into()),
                        });
                    }
                    Err(RpError::Rejected(reason)) => {
                        self.event(Event::RelyingPartyRejects { run, reason })
                    }
                    Err(e) => self.ignored(to, e),
                }
            }
            (Node::Attester, MsgType::KdcChallenge) => {
                let metrics = self.topo.metrics.clone();
                match w
                    .attester
                    .handle_challenge(&frame.payload, &metrics, &mut self.rngs.attester)
                {
                    Ok(ev) => {
                        self.attester_peer = from;
                        let m = metrics.encode();
                        self.secrets.push(m.clone());
                        self.event(Event::AttesterBegins {
                            run,
                            cha: frame.payload.into(),
                            metrics: m.into(),
                        });
                        self.emit(Node::Attester, Node::Verifier, MsgType::KdcEvidence, ev.to_bytes(), Origin::Honest);
                    }
                    Err(e) => self.ignored(to, e),
                }
            }
            (Node::Attester, MsgType::KdcResultToAttester) => {
                match w.attester.unwrap_result(&frame.payload) {
                    Ok(res_rp) => {
                        let ks = w.attester.session_key().expect("unwrap stores K_S").clone();
                        self.event(Event::AttesterForwards {
                            run,
                            received: crypto::hash(&frame.payload).0.to_vec().into(),
                            sent: crypto::hash(&res_rp).0.to_vec().into(),
                            session_key_hash: Some(crypto::hash(ks.as_bytes()).0.to_vec().into()),
                        });
                        self.secrets.push(ks.as_bytes().to_vec());
                        let peer = self.attester_peer;
                        self.emit(Node::Attester, peer, MsgType::KdcResultToRp, res_rp, Origin::Honest);
                    }
                    Err(e) => self.ignored(to, e),
                }
            }
            (Node::Verifier, MsgType::KdcEvidence) => {
                match w.verifier.process_evidence(&frame.payload, &mut self.rngs.verifier) {
                    Ok(acc) => {
                        let m = acc.metrics.encode();
                        let r = acc.result.encode();
                        self.secrets.push(m.clone());
                        self.secrets.push(r.clone());
                        self.secrets.push(acc.session_key.as_bytes().to_vec());
                        let mut reply = acc.res_a.to_bytes();
                        if self.topo.leaky_verifier {
                            reply.extend_from_slice(&r);
                        }
                        self.event(Event::VerifierAccepts {
                            run,
                            c: acc.c.0.to_vec().into(),
                            id: acc.h.0.to_vec().into(),
                            metrics: m.into(),
                            result: r.into(),
                            session_key_hash: Some(
                                crypto::hash(acc.session_key.as_bytes()).0.to_vec().into(),
                            ),
                        });
                        self.emit(Node::Verifier, from, MsgType::KdcResultToAttester, reply, Origin::Honest);
                    }
                    Err(reason) => self.event(Event::VerifierAborts {
                        run,
                        reason,
                        step: reason.kdc_step(),
                    }),
                }
            }
            (Node::Mallory, _) => self.relay(from, frame, MsgType::KdcHashAnnounce),
            (_, t) => self.ignored(to, format!("unexpected {t}")),
        }
    }

    /// Turns an unanswered run into an RP timeout and records outcomes.
    fn finish_run(&mut self) {
        let run = self.run;
        self.clock
            .advance(Duration::from_millis(self.topo.step_budget + 1));
        let (timed_out, rp, attester) = match &mut self.world {
            World::Lpm(w) => {
                let timed_out = w.rp.check_timeout();
                let rp = match w.rp.state() {
                    RpState::Accepted(r) => format!("Accepted({})", r.verdict),
                    RpState::Rejected(reason) => format!("Rejected({reason:?})"),
                    RpState::Idle => "Idle".into(),
                    RpState::AwaitingResult { .. } => "AwaitingResult".into(),
                };
                let attester = match w.attester.state() {
                    AttesterState::Idle => "Idle",
                    AttesterState::AwaitingVerdict { .. } => "AwaitingVerdict",
                    AttesterState::Done => "Done",
                };
                (timed_out, rp, attester)
            }
            World::Kdc(w) => {
                let timed_out = w.rp.check_timeout();
                let rp = match w.rp.state() {
                    KdcRpState::Accepted { result, .. } => format!("Accepted({})", result.verdict),
                    KdcRpState::Rejected(reason) => format!("Rejected({reason:?})"),
                    KdcRpState::Idle => "Idle".into(),
                    KdcRpState::AwaitingResult { .. } => "AwaitingResult".into(),
                };
                let attester = match w.attester.state() {
                    KdcAttesterState::Idle => "Idle",
                    KdcAttesterState::SentHash => "SentHash",
                    KdcAttesterState::AwaitingVerdict => "AwaitingVerdict",
                    KdcAttesterState::Done(_) => "Done",
                };
                (timed_out, rp, attester)
            }
        };
        if timed_out {
            self.event(Event::RelyingPartyRejects {
                run,
                reason: RejectReason::Timeout,
            });
        }
        let this_run = self.events.iter().filter(|e| e.run() == run);
        let verifier_accepts = this_run
            .clone()
            .filter(|e| matches!(e, Event::VerifierAccepts { .. }))
            .count();
        let verifier_aborts = this_run
            .filter(|e| matches!(e, Event::VerifierAborts { .. }))
            .count();
        self.outcomes.push(RunOutcome {
            run,
            rp,
            attester: attester.to_owned(),
            verifier_accepts,
            verifier_aborts,
        });
    }

    fn into_report(self) -> RunReport {
        RunReport {
            variant: self.topo.variant,
            seed: self.topo.seed,
            target: self.topo.target,
            steps: self.step,
            events: self.events,
            outcomes: self.outcomes,
            transcript: self.transcript,
            appraisal: Appraisal {
                policy: self.topo.policy.clone(),
                issuer: self.topo.issuer.clone(),
            },
            secrets: self.secrets,
        }
    }
}
