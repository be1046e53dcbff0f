// SPDX-License-Identifier: Apache-2.0
//! Timing of three request/response experiments on one set of endpoints.
//!
//! 1. Baseline: key request answered directly with key material.
//! 2. Full: key request, complete attestation run, key material.
//! 3. Comm-only: the same messages as the preceding full run, same types
//!    and sizes, filled with random octets and never decoded.
//!
//! Every role follows the same fixed schedule, one warm-up round and then
//! `n` rounds of modes 1, 2 and 3 in turn, so no mode signalling is needed.
//! The attester measures from sending its request to holding the reply.

use std::fmt;
use std::thread;
use std::time::{Duration, Instant};

use apcr_core::wire::MsgType;
use rand::rngs::OsRng;
use rand::{CryptoRng, RngCore};
use serde::Serialize;

use crate::app::{self, KeyRequest};
use crate::demo::{attester_session, rp_session, verifier_answer, AttesterSetup, RpSetup, VerifierSetup};
use crate::link::{Direction, Endpoint, Record};
use crate::{CliError, DemoConfig, Role, Variant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Baseline,
    Full,
    CommOnly,
}

pub const SCHEDULE: [Mode; 3] = [Mode::Baseline, Mode::Full, Mode::CommOnly];

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Mode::Baseline => "baseline",
            Mode::Full => "full",
            Mode::CommOnly => "comm-only",
        })
    }
}

/// Sends and receives `pattern` again with random payloads. The first
/// receive waits for `first_wait`, the others for `timeout`.
fn replay_pattern<R: RngCore>(
    ep: &mut Endpoint,
    pattern: &[Record],
    first_wait: Option<Duration>,
    timeout: Duration,
    rng: &mut R,
) -> Result<(), CliError> {
    let mut wait = first_wait;
    for r in pattern {
        match r.direction {
            Direction::Sent => {
                let mut payload = vec![0u8; r.len];
                rng.fill_bytes(&mut payload);
                ep.send(r.peer, r.msg, &payload)?;
            }
            Direction::Received => {
                ep.recv(r.msg, Some(r.peer), wait)?;
                wait = Some(timeout);
            }
        }
    }
    Ok(())
}

fn rounds(n: usize) -> impl Iterator<Item = (usize, Mode)> {
    (0..=n).flat_map(|i| SCHEDULE.into_iter().map(move |m| (i, m)))
}

pub fn rp_bench<R: RngCore + CryptoRng>(
    ep: &mut Endpoint,
    setup: &RpSetup,
    n: usize,
    rng: &mut R,
) -> Result<(), CliError> {
    let mut pattern = Vec::new();
    for (_, mode) in rounds(n) {
        match mode {
            Mode::Baseline => {
                let (req, attester) = ep.recv(MsgType::KeyTransferRequest, None, None)?;
                KeyRequest::decode(&req)?;
                // The session-key variant has no key before attestation.
                let msg = match &setup.k_a {
                    Some((k_a, _)) => app::seal_key_material(k_a, rng)?,
                    None => app::dummy_key_material(rng),
                };
                ep.send(attester, MsgType::KeyMaterial, &msg)?;
            }
            Mode::Full => {
                ep.take_log();
                rp_session(ep, setup, rng)?;
                pattern = ep.take_log();
            }
            Mode::CommOnly => replay_pattern(ep, &pattern, None, setup.timeout, rng)?,
        }
    }
    Ok(())
}

pub fn verifier_bench<R: RngCore + CryptoRng>(
    ep: &mut Endpoint,
    setup: &VerifierSetup,
    n: usize,
    timeout: Duration,
    rng: &mut R,
) -> Result<(), CliError> {
    let mut pattern = Vec::new();
    for (_, mode) in rounds(n) {
        match mode {
            Mode::Baseline => {}
            Mode::Full => {
                ep.take_log();
                if !verifier_answer(ep, setup, None, rng)? {
                    return Err(CliError::Protocol("verifier aborted during the benchmark".into()));
                }
                pattern = ep.take_log();
            }
            Mode::CommOnly => replay_pattern(ep, &pattern, None, timeout, rng)?,
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeReport {
    pub mode: Mode,
    pub mean_ms: f64,
    /// Messages of the last measured round, as seen by the attester.
    pub messages: Vec<Record>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub variant: Variant,
    pub repetitions: usize,
    pub modes: Vec<ModeReport>,
    /// Mean of mode 2 minus mean of mode 3.
    pub overhead_ms: f64,
    /// Whether every comm-only round repeated its full round's message
    /// types, sizes and peers exactly.
    pub patterns_match: bool,
}

impl BenchReport {
    pub fn mode(&self, m: Mode) -> &ModeReport {
        self.modes.iter().find(|r| r.mode == m).expect("all modes are reported")
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "variant {}, {} repetitions", self.variant, self.repetitions)?;
        for (i, m) in self.modes.iter().enumerate() {
            let bytes: usize = m.messages.iter().map(|r| r.len).sum();
            writeln!(
                f,
                "mode {} {:<10} {:>10.3} ms  {} messages, {} bytes",
                i + 1,
                m.mode,
                m.mean_ms,
                m.messages.len(),
                bytes
            )?;
        }
        write!(f, "processing overhead {:.3} ms (mode 2 - mode 3)", self.overhead_ms)
    }
}

fn mean_ms(samples: &[Duration]) -> f64 {
    let total: Duration = samples.iter().sum();
    total.as_secs_f64() * 1e3 / samples.len().max(1) as f64
}

pub fn attester_bench<R: RngCore + CryptoRng>(
    ep: &mut Endpoint,
    setup: &mut AttesterSetup,
    n: usize,
    rng: &mut R,
) -> Result<BenchReport, CliError> {
    let (rp, timeout) = (setup.rp, setup.timeout);
    let mut samples: [Vec<Duration>; 3] = Default::default();
    let mut last: [Vec<Record>; 3] = Default::default();
    let mut pattern = Vec::new();
    let mut patterns_match = true;

    for (round, mode) in rounds(n) {
        ep.take_log();
        let t0 = Instant::now();
        match mode {
            Mode::Baseline => {
                ep.send(rp, MsgType::KeyTransferRequest, &KeyRequest::new(rng).encode())?;
                ep.recv(MsgType::KeyMaterial, Some(rp), Some(timeout))?;
            }
            Mode::Full => {
                attester_session(ep, setup, rng)?;
            }
            Mode::CommOnly => replay_pattern(ep, &pattern, Some(timeout), timeout, rng)?,
        }
        let elapsed = t0.elapsed();
        let log = ep.take_log();
        match mode {
            Mode::Full => pattern = log.clone(),
            Mode::CommOnly => patterns_match &= log == pattern,
            Mode::Baseline => {}
        }
        if round > 0 {
            let i = SCHEDULE.iter().position(|m| *m == mode).expect("scheduled mode");
            samples[i].push(elapsed);
            last[i] = log;
        }
    }

    let modes: Vec<ModeReport> = SCHEDULE
        .iter()
        .zip(samples.iter().zip(last))
        .map(|(&mode, (s, messages))| ModeReport {
            mode,
            mean_ms: mean_ms(s),
            messages,
        })
        .collect();
    let overhead_ms = modes[1].mean_ms - modes[2].mean_ms;
    Ok(BenchReport {
        variant: setup.variant,
        repetitions: n,
        modes,
        overhead_ms,
        patterns_match,
    })
}

/// Runs the whole benchmark in this process over loopback.
pub fn bench_run(cfg: &DemoConfig) -> Result<BenchReport, CliError> {
    let n = cfg.bench.unwrap_or(crate::config::DEFAULT_BENCH_REPETITIONS);
    let rp_setup = RpSetup::load(&DemoConfig { role: Role::Rp, ..cfg.clone() })?;
    let ver_setup = VerifierSetup::load(&DemoConfig { role: Role::Verifier, ..cfg.clone() })?;
    let mut rp_ep = Endpoint::bind("127.0.0.1:0")?;
    let mut ver_ep = Endpoint::bind("127.0.0.1:0")?;
    let mut att_ep = Endpoint::bind("127.0.0.1:0")?;
    let mut att_setup = AttesterSetup::load(&DemoConfig {
        role: Role::Attester,
        peer: Some(rp_ep.local_addr()?),
        verifier: Some(ver_ep.local_addr()?),
        ..cfg.clone()
    })?;
    let timeout = cfg.timeout;

    let rp = thread::spawn(move || rp_bench(&mut rp_ep, &rp_setup, n, &mut OsRng));
    let verifier =
        thread::spawn(move || verifier_bench(&mut ver_ep, &ver_setup, n, timeout, &mut OsRng));
    // On failure the serving threads may be blocked on a request that will
    // never come, so they are left behind rather than joined.
    let report = attester_bench(&mut att_ep, &mut att_setup, n, &mut OsRng)?;
    rp.join().expect("rp thread panicked")?;
    verifier.join().expect("verifier thread panicked")?;
    Ok(report)
}
