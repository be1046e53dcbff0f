// SPDX-License-Identifier: Apache-2.0
//! Participants and key material for one scenario, all derived from a seed.

use std::fmt;
use std::str::FromStr;

use apcr_core::crypto::{KemKeyPair, KemPublicKey, SigKeyPair, SymKey, VerificationKey};
use apcr_core::roles::{IssuedAt, Policy, ResultIssuer};
use apcr_core::wire::Metrics;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

pub const VERIFIER_ID: &str = "https://verifier.example.org/apcr-lpm/keytag01";
pub const ISSUED_AT: i64 = 1_700_000_000;
/// Default step budget; also the RP timeout in simulated milliseconds.
pub const DEFAULT_STEP_BUDGET: u64 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Pre-shared application key `K_A` between RP and attester.
    Lpm,
    /// Verifier-generated session key.
    Kdc,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Lpm => "lpm",
            Variant::Kdc => "kdc",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lpm" => Ok(Variant::Lpm),
            "kdc" => Ok(Variant::Kdc),
            _ => Err(format!("unknown variant {s:?} (expected lpm or kdc)")),
        }
    }
}

/// The device the RP believes it is attesting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Attester,
    /// The compromised device; its traffic is routed through the adversary.
    Mallory,
}

/// Long-term keys of one device.
#[derive(Clone)]
pub(crate) struct DeviceKeys {
    pub k_app: SymKey,
    pub sig: SigKeyPair,
    pub kem: KemKeyPair,
    pub tee: SigKeyPair,
}

impl DeviceKeys {
    fn generate(rng: &mut ChaCha20Rng) -> Self {
        DeviceKeys {
            k_app: SymKey::generate(rng).expect("seeded rng"),
            sig: SigKeyPair::generate(rng),
            kem: KemKeyPair::generate(rng),
            tee: SigKeyPair::generate(rng),
        }
    }

    fn secrets(&self) -> [Vec<u8>; 4] {
        [
            self.k_app.as_bytes().to_vec(),
            self.sig.secret_bytes().to_vec(),
            self.kem.secret_bytes().to_vec(),
            self.tee.secret_bytes().to_vec(),
        ]
    }
}

#[derive(Clone)]
pub(crate) struct VerifierKeys {
    pub k_v: SymKey,
    pub sig: SigKeyPair,
    pub kem: KemKeyPair,
}

/// Public keys anyone on the network may know.
#[derive(Clone, Debug)]
pub struct PublicDirectory {
    pub attester_sig: VerificationKey,
    pub attester_kem: KemPublicKey,
    pub mallory_sig: VerificationKey,
    pub verifier_sig: VerificationKey,
    pub verifier_kem: KemPublicKey,
}

/// Participants, keys, policy and run limits for one scenario.
#[derive(Clone)]
pub struct Topology {
    pub seed: u64,
    pub variant: Variant,
    pub target: Target,
    /// Steps before the scheduler gives up on a run.
    pub step_budget: u64,
    /// Debug build of the verifier that appends `CBOR(R_A)` in clear to its reply.
    pub leaky_verifier: bool,
    /// Hands the honest attester's `K_A` to the adversary.
    pub adversary_knows_k_a: bool,
    pub policy: Policy,
    pub issuer: ResultIssuer,
    /// What the honest attester reports.
    pub metrics: Metrics,
    pub(crate) attester: DeviceKeys,
    pub(crate) mallory: DeviceKeys,
    pub(crate) verifier: VerifierKeys,
    pub(crate) adversary_seed: u64,
}

fn random_claims(rng: &mut ChaCha20Rng) -> Metrics {
    let mut boot = [0u8; 32];
    let mut kernel = [0u8; 32];
    rng.fill_bytes(&mut boot);
    rng.fill_bytes(&mut kernel);
    let version = format!("{}.{}.{}", rng.gen_range(1..10), rng.gen_range(0..50), rng.gen_range(0..100));
    Metrics::new()
        .with("boot-hash", boot.to_vec())
        .with("firmware-version", version.into_bytes())
        .with("kernel-hash", kernel.to_vec())
}

impl Topology {
    /// Random keys and metrics, with a policy that the honest metrics satisfy.
    pub fn generate(seed: u64, variant: Variant) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let attester = DeviceKeys::generate(&mut rng);
        let mallory = DeviceKeys::generate(&mut rng);
        let verifier = VerifierKeys {
            k_v: SymKey::generate(&mut rng).expect("seeded rng"),
            sig: SigKeyPair::generate(&mut rng),
            kem: KemKeyPair::generate(&mut rng),
        };
        let metrics = random_claims(&mut rng);
        // Every claim also gets one unrelated allowed value, as after an update.
        let alternative = random_claims(&mut rng);
        let mut policy = Policy::new();
        for (name, value) in metrics.claims.iter().chain(alternative.claims.iter()) {
            policy.insert(name.clone(), value.clone());
        }
        Topology {
            seed,
            variant,
            target: Target::Attester,
            step_budget: DEFAULT_STEP_BUDGET,
            leaky_verifier: false,
            adversary_knows_k_a: false,
            policy,
            issuer: ResultIssuer::new(VERIFIER_ID).issued_at(IssuedAt::Fixed(ISSUED_AT)),
            metrics,
            attester,
            mallory,
            verifier,
            adversary_seed: rng.next_u64(),
        }
    }

    pub fn with_target(mut self, target: Target) -> Self {
        self.target = target;
        self
    }

    pub fn with_metrics(mut self, metrics: Metrics) -> Self {
        self.metrics = metrics;
        self
    }

    pub fn with_step_budget(mut self, steps: u64) -> Self {
        self.step_budget = steps;
        self
    }

    pub fn leaky_verifier(mut self, leaky: bool) -> Self {
        self.leaky_verifier = leaky;
        self
    }

    pub fn adversary_knows_k_a(mut self, knows: bool) -> Self {
        self.adversary_knows_k_a = knows;
        self
    }

    pub fn public_directory(&self) -> PublicDirectory {
        PublicDirectory {
            attester_sig: self.attester.sig.public(),
            attester_kem: self.attester.kem.public().clone(),
            mallory_sig: self.mallory.sig.public(),
            verifier_sig: self.verifier.sig.public(),
            verifier_kem: self.verifier.kem.public().clone(),
        }
    }

    /// Long-term secrets of the honest parties. Mallory's application key is
    /// excluded because the adversary holds it.
    pub fn honest_secrets(&self) -> Vec<Vec<u8>> {
        let mut out: Vec<Vec<u8>> = self.attester.secrets().into();
        out.push(self.verifier.k_v.as_bytes().to_vec());
        out.push(self.verifier.sig.secret_bytes().to_vec());
        out.push(self.verifier.kem.secret_bytes().to_vec());
        let [_, sig, kem, tee] = self.mallory.secrets();
        out.extend([sig, kem, tee]);
        if self.adversary_knows_k_a {
            out.remove(0);
        }
        out
    }
}

impl fmt::Debug for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Topology")
            .field("seed", &self.seed)
            .field("variant", &self.variant)
            .field("target", &self.target)
            .field("step_budget", &self.step_budget)
            .field("leaky_verifier", &self.leaky_verifier)
            .field("adversary_knows_k_a", &self.adversary_knows_k_a)
            .finish_non_exhaustive()
    }
}
