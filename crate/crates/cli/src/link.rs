// SPDX-License-Identifier: Apache-2.0
//! A UDP endpoint that logs every message it sends or receives.
//!
//! Byte counts are message bytes: the frame payload, without the 3-byte
//! frame header.

use std::net::{SocketAddr, ToSocketAddrs};
use std::time::{Duration, Instant};

use apcr_core::wire::{Frame, MsgType};
use apcr_net::{NetError, UdpChannel};
use serde::{Serialize, Serializer};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Sent,
    Received,
}

fn as_display<S: Serializer>(t: &MsgType, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(t)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Record {
    pub direction: Direction,
    #[serde(serialize_with = "as_display")]
    pub msg: MsgType,
    pub len: usize,
    #[serde(skip)]
    pub peer: SocketAddr,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Traffic {
    pub sent: usize,
    pub received: usize,
}

#[derive(Debug)]
pub struct Endpoint {
    ch: UdpChannel,
    log: Vec<Record>,
}

impl Endpoint {
    pub fn bind(addr: impl ToSocketAddrs) -> Result<Self, CliError> {
        Ok(Endpoint {
            ch: UdpChannel::bind(addr)?,
            log: Vec::new(),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, CliError> {
        Ok(self.ch.local_addr()?)
    }

    pub fn send(&mut self, to: SocketAddr, t: MsgType, payload: &[u8]) -> Result<(), CliError> {
        self.ch.send_to(&Frame::new(t, payload), to)?;
        self.log.push(Record {
            direction: Direction::Sent,
            msg: t,
            len: payload.len(),
            peer: to,
        });
        Ok(())
    }

    /// Waits for a frame of type `t`, optionally from `from` only. Frames
    /// that do not fit are logged and skipped; `None` waits indefinitely.
    pub fn recv(
        &mut self,
        t: MsgType,
        from: Option<SocketAddr>,
        timeout: Option<Duration>,
    ) -> Result<(Vec<u8>, SocketAddr), CliError> {
        let deadline = timeout.map(|d| Instant::now() + d);
        loop {
            let remaining = match deadline {
                Some(d) => match d.checked_duration_since(Instant::now()) {
                    Some(r) if !r.is_zero() => Some(r),
                    _ => return Err(CliError::Timeout(t)),
                },
                None => None,
            };
            match self.ch.recv_from(remaining) {
                Ok((frame, sender)) => {
                    if frame.msg_type != t || from.is_some_and(|f| f != sender) {
                        tracing::warn!(msg = %frame.msg_type, %sender, expected = %t, "ignoring frame");
                        continue;
                    }
                    self.log.push(Record {
                        direction: Direction::Received,
                        msg: t,
                        len: frame.payload.len(),
                        peer: sender,
                    });
                    return Ok((frame.payload, sender));
                }
                Err(NetError::Timeout) => return Err(CliError::Timeout(t)),
                Err(NetError::Format(e)) => tracing::warn!(error = %e, "dropping bad datagram"),
                Err(e) => return Err(e.into()),
            }
        }
    }

    pub fn log(&self) -> &[Record] {
        &self.log
    }

    pub fn take_log(&mut self) -> Vec<Record> {
        std::mem::take(&mut self.log)
    }

    pub fn traffic(&self) -> Traffic {
        self.log.iter().fold(Traffic::default(), |mut t, r| {
            match r.direction {
                Direction::Sent => t.sent += r.len,
                Direction::Received => t.received += r.len,
            }
            t
        })
    }
}
