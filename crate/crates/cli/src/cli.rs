// SPDX-License-Identifier: Apache-2.0
//! Command-line front end shared by the three executables.

use std::io::IsTerminal;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use rand::rngs::OsRng;
use tracing::{error, info};

use crate::bench::{attester_bench, bench_run, rp_bench, verifier_bench};
use crate::config::{self, DemoConfig};
use crate::demo::{
    attester_session, demo_run, rp_session, serve_verifier, AttesterSetup, RpSetup, RpStatus,
    VerifierSetup,
};
use crate::link::Endpoint;
use crate::{CliError, Role, Variant};

#[derive(Debug, Parser)]
#[command(version, about = "Attested key transfer between a key tag, a phone and a verifier")]
pub struct Args {
    /// Role to play; defaults to the executable's own role.
    #[arg(long, value_enum)]
    pub role: Option<Role>,
    #[arg(long, value_enum, default_value_t = Variant::Lpm)]
    pub variant: Variant,
    /// Relying party address (attester role).
    #[arg(long)]
    pub peer: Option<SocketAddr>,
    /// Verifier address (attester role).
    #[arg(long)]
    pub verifier: Option<SocketAddr>,
    /// Local address to bind.
    #[arg(long)]
    pub listen: Option<SocketAddr>,
    /// Key directory.
    #[arg(long, default_value = "keys")]
    pub keys: PathBuf,
    /// Policy file; defaults to `<keys>/policy.toml`.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Attester metrics file; defaults to `<keys>/metrics.toml`.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Run the benchmark schedule with N measured repetitions.
    #[arg(long, value_name = "N", num_args = 0..=1, default_missing_value = "10")]
    pub bench: Option<usize>,
    /// Per-message timeout in milliseconds.
    #[arg(long, value_name = "MS", default_value_t = 5000)]
    pub timeout: u64,
    /// Verifier: stop after this many evidence messages.
    #[arg(long)]
    pub sessions: Option<usize>,
    /// Run all three roles in this process over loopback.
    #[arg(long)]
    pub local: bool,
    /// Write a fresh key directory, policy and metrics to `--keys` and exit.
    #[arg(long)]
    pub provision: bool,
    /// Print the benchmark report as JSON.
    #[arg(long)]
    pub json: bool,
}

impl Args {
    pub fn config(&self, default_role: Role) -> DemoConfig {
        DemoConfig {
            role: self.role.unwrap_or(default_role),
            variant: self.variant,
            peer: self.peer,
            verifier: self.verifier,
            listen: self.listen,
            keys: self.keys.clone(),
            policy: self.policy.clone(),
            metrics: self.metrics.clone(),
            timeout: Duration::from_millis(self.timeout),
            bench: self.bench,
            sessions: self.sessions,
        }
    }
}

fn bind(cfg: &DemoConfig) -> Result<Endpoint, CliError> {
    let addr = cfg.listen.unwrap_or_else(|| SocketAddr::from(([0, 0, 0, 0], 0)));
    let ep = Endpoint::bind(addr)?;
    info!(role = %cfg.role, variant = %cfg.variant, addr = %ep.local_addr()?, "listening");
    Ok(ep)
}

fn print_report(report: &crate::BenchReport, json: bool) {
    if json {
        println!("{}", serde_json::to_string_pretty(report).expect("report serializes"));
    } else {
        println!("{report}");
    }
}

/// Runs the configured role. Exit status 0 means the door key reached the
/// attester (or, for the verifier, that serving ended normally).
pub fn run(args: &Args, default_role: Role) -> Result<bool, CliError> {
    let cfg = args.config(default_role);
    if args.provision {
        config::provision(&cfg.keys, &mut OsRng)?;
        info!(dir = %cfg.keys.display(), "key directory written");
        return Ok(true);
    }
    if args.local {
        if cfg.bench.is_some() {
            print_report(&bench_run(&cfg)?, args.json);
            return Ok(true);
        }
        let report = demo_run(&cfg, None)?;
        if let Err(e) = &report.attester {
            error!(error = %e, "attester");
        }
        return Ok(report.success());
    }

    let mut ep = bind(&cfg)?;
    match (cfg.role, cfg.bench) {
        (Role::Rp, Some(n)) => rp_bench(&mut ep, &RpSetup::load(&cfg)?, n, &mut OsRng).map(|_| true),
        (Role::Rp, None) => {
            let out = rp_session(&mut ep, &RpSetup::load(&cfg)?, &mut OsRng)?;
            if let RpStatus::Rejected(reason) = out.status {
                info!(?reason, "rejected");
            }
            Ok(out.transferred)
        }
        (Role::Attester, Some(n)) => {
            let report = attester_bench(&mut ep, &mut AttesterSetup::load(&cfg)?, n, &mut OsRng)?;
            print_report(&report, args.json);
            Ok(true)
        }
        (Role::Attester, None) => {
            let door = attester_session(&mut ep, &mut AttesterSetup::load(&cfg)?, &mut OsRng)?;
            println!("door key: {}", hex::encode(door));
            Ok(true)
        }
        (Role::Verifier, Some(n)) => {
            verifier_bench(&mut ep, &VerifierSetup::load(&cfg)?, n, cfg.timeout, &mut OsRng)
                .map(|_| true)
        }
        (Role::Verifier, None) => {
            let stats = serve_verifier(&mut ep, &VerifierSetup::load(&cfg)?, cfg.sessions, None, &mut OsRng)?;
            info!(accepted = stats.accepted, aborted = stats.aborted, "verifier done");
            Ok(true)
        }
    }
}

/// Entry point for the executables.
pub fn main_for(default_role: Role) -> ExitCode {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .try_init();
    let args = Args::parse();
    match run(&args, default_role) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            error!(error = %e, "failed");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DEFAULT_BENCH_REPETITIONS;
    use clap::CommandFactory;

    #[test]
    fn flags_parse() {
        Args::command().debug_assert();
        let a = Args::try_parse_from([
            "keytag-rp", "--role", "attester", "--variant", "kdc", "--peer", "127.0.0.1:7000",
            "--keys", "/tmp/k", "--bench", "--timeout", "250",
        ])
        .unwrap();
        let cfg = a.config(Role::Rp);
        assert_eq!(cfg.role, Role::Attester);
        assert_eq!(cfg.variant, Variant::Kdc);
        assert_eq!(cfg.bench, Some(DEFAULT_BENCH_REPETITIONS));
        assert_eq!(cfg.timeout, Duration::from_millis(250));
        let b = Args::try_parse_from(["verifier-daemon", "--bench", "3"]).unwrap();
        assert_eq!(b.config(Role::Verifier).bench, Some(3));
        assert_eq!(b.config(Role::Verifier).role, Role::Verifier);
    }
}
