// SPDX-License-Identifier: Apache-2.0
use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::time::Duration;

use apcr_core::wire::{Frame, WireError, MAX_FRAME_LEN};

use crate::{Channel, NetError};

/// UDP endpoint. Sends go to the configured peer, or to whoever sent the
/// last frame when no peer is set (a verifier answering attesters).
#[derive(Debug)]
pub struct UdpChannel {
    socket: UdpSocket,
    peer: Option<SocketAddr>,
    last_sender: Option<SocketAddr>,
}

impl UdpChannel {
    pub fn bind(addr: impl ToSocketAddrs) -> Result<Self, NetError> {
        Ok(UdpChannel {
            socket: UdpSocket::bind(addr)?,
            peer: None,
            last_sender: None,
        })
    }

    /// Binds and fixes the peer in one go.
    pub fn connect(local: impl ToSocketAddrs, peer: impl ToSocketAddrs) -> Result<Self, NetError> {
        let mut ch = Self::bind(local)?;
        ch.set_peer(peer)?;
        Ok(ch)
    }

    pub fn set_peer(&mut self, peer: impl ToSocketAddrs) -> Result<(), NetError> {
        self.peer = peer.to_socket_addrs()?.next();
        if self.peer.is_none() {
            return Err(NetError::NoPeer);
        }
        Ok(())
    }

    pub fn local_addr(&self) -> Result<SocketAddr, NetError> {
        Ok(self.socket.local_addr()?)
    }

    pub fn last_sender(&self) -> Option<SocketAddr> {
        self.last_sender
    }

    fn target(&self) -> Result<SocketAddr, NetError> {
        self.peer.or(self.last_sender).ok_or(NetError::NoPeer)
    }

    pub fn send_to(&self, frame: &Frame, to: SocketAddr) -> Result<(), NetError> {
        let bytes = frame.encode()?;
        self.send_raw_to(&bytes, to)
    }

    /// Sends octets without framing checks beyond the datagram limit.
    pub fn send_raw_to(&self, bytes: &[u8], to: SocketAddr) -> Result<(), NetError> {
        if bytes.len() > MAX_FRAME_LEN {
            return Err(WireError::Format(format!(
                "datagram of {} bytes exceeds {MAX_FRAME_LEN}",
                bytes.len()
            ))
            .into());
        }
        let n = self.socket.send_to(bytes, to)?;
        if n != bytes.len() {
            return Err(io::Error::new(io::ErrorKind::WriteZero, "short datagram write").into());
        }
        Ok(())
    }

    pub fn send_raw(&self, bytes: &[u8]) -> Result<(), NetError> {
        self.send_raw_to(bytes, self.target()?)
    }

    pub fn recv_from(&mut self, timeout: Option<Duration>) -> Result<(Frame, SocketAddr), NetError> {
        // A zero read timeout is rejected by the OS; treat it as "poll briefly".
        let timeout = timeout.map(|t| t.max(Duration::from_millis(1)));
        self.socket.set_read_timeout(timeout)?;
        // One spare byte exposes datagrams over the limit instead of truncating silently.
        let mut buf = [0u8; MAX_FRAME_LEN + 1];
        let (n, from) = self.socket.recv_from(&mut buf).map_err(|e| match e.kind() {
            io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => NetError::Timeout,
            _ => NetError::Io(e),
        })?;
        self.last_sender = Some(from);
        Ok((Frame::decode(&buf[..n])?, from))
    }
}

impl Channel for UdpChannel {
    fn send(&mut self, frame: &Frame) -> Result<(), NetError> {
        self.send_to(frame, self.target()?)
    }

    fn recv(&mut self, timeout: Option<Duration>) -> Result<Frame, NetError> {
        self.recv_from(timeout).map(|(f, _)| f)
    }
}
