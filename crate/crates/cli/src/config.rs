// SPDX-License-Identifier: Apache-2.0
//! Key directory, policy file and metrics file.
//!
//! A key directory holds one hex file per key. Symmetric keys (`k_a.key`,
//! `k_v.key`) are 16 bytes. Signing, TEE and KEM keys are 32-byte secrets
//! (`*.key`) with their public halves next to them (`*.pub`). Each role
//! reads only its own secrets and the public keys of its peers.

use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use apcr_core::crypto::{KemKeyPair, KemPublicKey, SigKeyPair, SymKey, VerificationKey};
use apcr_core::roles::{Policy, ResultIssuer};
use apcr_core::wire::Metrics;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::{CliError, Role, Variant};

pub const DEFAULT_VERIFIER_ID: &str = "https://verifier.example.org/apcr-lpm/keytag01";
pub const DEFAULT_BENCH_REPETITIONS: usize = 10;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

/// Everything one executable needs to run.
#[derive(Clone, Debug)]
pub struct DemoConfig {
    pub role: Role,
    pub variant: Variant,
    /// Relying party for the attester.
    pub peer: Option<SocketAddr>,
    /// Verifier for the attester.
    pub verifier: Option<SocketAddr>,
    pub listen: Option<SocketAddr>,
    pub keys: PathBuf,
    pub policy: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub timeout: Duration,
    pub bench: Option<usize>,
    /// Verifier only: stop after this many evidence messages.
    pub sessions: Option<usize>,
}

impl DemoConfig {
    pub fn new(role: Role, variant: Variant, keys: impl Into<PathBuf>) -> Self {
        DemoConfig {
            role,
            variant,
            peer: None,
            verifier: None,
            listen: None,
            keys: keys.into(),
            policy: None,
            metrics: None,
            timeout: DEFAULT_TIMEOUT,
            bench: None,
            sessions: None,
        }
    }

    pub fn policy_path(&self) -> PathBuf {
        self.policy.clone().unwrap_or_else(|| self.keys.join("policy.toml"))
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.metrics.clone().unwrap_or_else(|| self.keys.join("metrics.toml"))
    }
}

fn read_hex(path: &Path) -> Result<Vec<u8>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    hex::decode(text.trim()).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn read_exact<const N: usize>(path: &Path) -> Result<[u8; N], CliError> {
    let bytes = read_hex(path)?;
    bytes.as_slice().try_into().map_err(|_| {
        CliError::Config(format!(
            "{}: expected {N} bytes, found {}",
            path.display(),
            bytes.len()
        ))
    })
}

fn write_hex(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, hex::encode(bytes) + "\n")
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn read_sym_key(path: &Path) -> Result<SymKey, CliError> {
    Ok(SymKey::from_bytes(read_exact::<16>(path)?))
}

pub fn read_sig_key(path: &Path) -> Result<SigKeyPair, CliError> {
    SigKeyPair::from_secret_bytes(&read_exact::<32>(path)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn read_kem_key(path: &Path) -> Result<KemKeyPair, CliError> {
    KemKeyPair::from_secret_bytes(&read_exact::<32>(path)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn read_verification_key(path: &Path) -> Result<VerificationKey, CliError> {
    VerificationKey::from_bytes(&read_exact::<32>(path)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn read_kem_public(path: &Path) -> Result<KemPublicKey, CliError> {
    KemPublicKey::from_bytes(&read_exact::<32>(path)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Claim values are UTF-8 text, or raw bytes when written as `hex:<digits>`.
fn claim_bytes(value: &str) -> Result<Vec<u8>, CliError> {
    match value.strip_prefix("hex:") {
        Some(digits) => {
            hex::decode(digits).map_err(|e| CliError::Config(format!("claim value {value:?}: {e}")))
        }
        None => Ok(value.as_bytes().to_vec()),
    }
}

fn claim_text(value: &[u8]) -> String {
    match std::str::from_utf8(value) {
        Ok(s) if !s.starts_with("hex:") && s.chars().all(|c| !c.is_control()) => s.to_owned(),
        _ => format!("hex:{}", hex::encode(value)),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PolicyFile {
    #[serde(default = "default_verifier_id")]
    pub verifier_id: String,
    pub claims: BTreeMap<String, Vec<String>>,
}

fn default_verifier_id() -> String {
    DEFAULT_VERIFIER_ID.to_owned()
}

impl PolicyFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("policy: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn policy(&self) -> Result<Policy, CliError> {
        let mut p = Policy::new();
        for (name, values) in &self.claims {
            if values.is_empty() {
                return Err(CliError::Config(format!("policy claim {name:?} allows no value")));
            }
            for v in values {
                p.insert(name.clone(), claim_bytes(v)?);
            }
        }
        Ok(p)
    }

    pub fn issuer(&self) -> ResultIssuer {
        ResultIssuer::new(self.verifier_id.clone())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MetricsFile {
    pub claims: BTreeMap<String, String>,
}

impl MetricsFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn metrics(&self) -> Result<Metrics, CliError> {
        let mut m = Metrics::new();
        for (name, v) in &self.claims {
            m.insert(name.clone(), claim_bytes(v)?);
        }
        Ok(m)
    }
}

/// Writes a complete demo key directory, a policy the generated metrics
/// satisfy, and those metrics.
pub fn provision<R: RngCore + CryptoRng>(dir: &Path, rng: &mut R) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    for name in ["k_a", "k_v"] {
        let k = SymKey::generate(rng).map_err(|e| CliError::Config(e.to_string()))?;
        write_hex(&dir.join(format!("{name}.key")), k.as_bytes())?;
    }
    for name in ["attester_sig", "attester_tee", "verifier_sig"] {
        let k = SigKeyPair::generate(rng);
        write_hex(&dir.join(format!("{name}.key")), &k.secret_bytes())?;
        write_hex(&dir.join(format!("{name}.pub")), &k.public().to_bytes())?;
    }
    for name in ["attester_kem", "verifier_kem"] {
        let k = KemKeyPair::generate(rng);
        write_hex(&dir.join(format!("{name}.key")), &k.secret_bytes())?;
        write_hex(&dir.join(format!("{name}.pub")), &k.public().to_bytes())?;
    }

    let mut boot = [0u8; 32];
    let mut kernel = [0u8; 32];
    rng.fill_bytes(&mut boot);
    rng.fill_bytes(&mut kernel);
    let claims: BTreeMap<String, Vec<u8>> = [
        ("boot-hash".to_owned(), boot.to_vec()),
        ("firmware-version".to_owned(), b"1.0.3".to_vec()),
        ("kernel-hash".to_owned(), kernel.to_vec()),
    ]
    .into();
    let metrics = MetricsFile {
        claims: claims.iter().map(|(k, v)| (k.clone(), claim_text(v))).collect(),
    };
    let policy = PolicyFile {
        verifier_id: DEFAULT_VERIFIER_ID.to_owned(),
        claims: claims.iter().map(|(k, v)| (k.clone(), vec![claim_text(v)])).collect(),
    };
    let write_toml = |name: &str, text: Result<String, toml::ser::Error>| {
        let text = text.map_err(|e| CliError::Config(e.to_string()))?;
        fs::write(dir.join(name), text).map_err(|e| CliError::Config(format!("{name}: {e}")))
    };
    write_toml("metrics.toml", toml::to_string(&metrics))?;
    write_toml("policy.toml", toml::to_string(&policy))?;
    Ok(())
}
