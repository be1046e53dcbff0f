// SPDX-License-Identifier: Apache-2.0
//! Frame transports: UDP datagrams and an in-process channel pair.
//!
//! Every protocol message travels as one [`Frame`] in one datagram. Frames
//! are validated on receipt and size-checked before they are sent.

mod mem;
mod udp;

use std::io;
use std::time::Duration;

use apcr_core::wire::{Frame, MsgType, WireError};
use thiserror::Error;

pub use mem::MemChannel;
pub use udp::UdpChannel;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("timed out waiting for a frame")]
    Timeout,
    #[error("bad frame: {0}")]
    Format(#[from] WireError),
    #[error("expected {expected}, got {got}")]
    Unexpected { expected: MsgType, got: MsgType },
    #[error("peer closed the channel")]
    Closed,
    #[error("no peer address to send to")]
    NoPeer,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Bidirectional frame transport to one peer.
pub trait Channel {
    /// Fails without transmitting if the encoded frame exceeds the datagram limit.
    fn send(&mut self, frame: &Frame) -> Result<(), NetError>;

    /// `None` blocks until a frame arrives.
    fn recv(&mut self, timeout: Option<Duration>) -> Result<Frame, NetError>;
}

impl<C: Channel + ?Sized> Channel for &mut C {
    fn send(&mut self, frame: &Frame) -> Result<(), NetError> {
        (**self).send(frame)
    }

    fn recv(&mut self, timeout: Option<Duration>) -> Result<Frame, NetError> {
        (**self).recv(timeout)
    }
}

impl<C: Channel + ?Sized> Channel for Box<C> {
    fn send(&mut self, frame: &Frame) -> Result<(), NetError> {
        (**self).send(frame)
    }

    fn recv(&mut self, timeout: Option<Duration>) -> Result<Frame, NetError> {
        (**self).recv(timeout)
    }
}

/// Sends `payload` as a frame of type `t`.
pub fn send_msg<C: Channel + ?Sized>(
    ch: &mut C,
    t: MsgType,
    payload: impl Into<Vec<u8>>,
) -> Result<usize, NetError> {
    let frame = Frame::new(t, payload);
    ch.send(&frame)?;
    tracing::trace!(msg = %t, len = frame.payload.len(), "sent");
    Ok(frame.payload.len())
}

/// Receives one frame and returns its payload if it has type `t`.
pub fn expect<C: Channel + ?Sized>(
    ch: &mut C,
    t: MsgType,
    timeout: Option<Duration>,
) -> Result<Vec<u8>, NetError> {
    let frame = ch.recv(timeout)?;
    if frame.msg_type != t {
        return Err(NetError::Unexpected {
            expected: t,
            got: frame.msg_type,
        });
    }
    tracing::trace!(msg = %t, len = frame.payload.len(), "received");
    Ok(frame.payload)
}
