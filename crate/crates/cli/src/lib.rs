// SPDX-License-Identifier: Apache-2.0
//! Lock-and-key demo over UDP: a key tag (relying party) releases a door key
//! to a phone (attester) once a verifier vouches for the phone, plus a
//! loopback benchmark of the protocol's cost.

pub mod app;
pub mod bench;
pub mod cli;
pub mod config;
pub mod demo;
pub mod link;

use std::fmt;

use apcr_core::wire::MsgType;
use apcr_net::NetError;
use clap::ValueEnum;
use serde::Serialize;
use thiserror::Error;

pub use bench::{bench_run, BenchReport, Mode};
pub use config::DemoConfig;
pub use demo::{demo_run, DemoReport, RpOutcome, RpStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Rp,
    Attester,
    Verifier,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Rp => "rp",
            Role::Attester => "attester",
            Role::Verifier => "verifier",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Pre-shared application key.
    Lpm,
    /// Session key issued by the verifier.
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

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("application message: {0}")]
    App(String),
    #[error("timed out waiting for {0}")]
    Timeout(MsgType),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("key material was not released")]
    Denied,
    #[error(transparent)]
    Net(#[from] NetError),
}
