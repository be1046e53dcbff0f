// SPDX-License-Identifier: Apache-2.0
//! How the scheduler physically hands octets to a participant.
//!
//! Both transports push the exact octets through a real channel and let the
//! receiving side validate the framing, so a scenario exercises the same
//! decode path whether it runs in memory or over loopback sockets.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::time::Duration;

use apcr_core::wire::Frame;
use apcr_net::{Channel, MemChannel, NetError, UdpChannel};

use crate::Node;

const RECV_TIMEOUT: Duration = Duration::from_secs(2);

pub trait Transport {
    /// Delivers `octets` to `to` and returns the frame as that node decodes
    /// it. Framing problems surface as [`NetError::Format`].
    fn carry(&mut self, to: Node, octets: &[u8]) -> Result<Frame, NetError>;
}

/// One in-process link per participant.
#[derive(Debug)]
pub struct MemoryTransport {
    links: BTreeMap<Node, (MemChannel, MemChannel)>,
}

impl MemoryTransport {
    pub fn new() -> Self {
        MemoryTransport {
            links: Node::ALL.into_iter().map(|n| (n, MemChannel::pair())).collect(),
        }
    }
}

impl Default for MemoryTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for MemoryTransport {
    fn carry(&mut self, to: Node, octets: &[u8]) -> Result<Frame, NetError> {
        let (tx, rx) = self.links.get_mut(&to).expect("every node has a link");
        tx.send_raw(octets)?;
        rx.recv(Some(RECV_TIMEOUT))
    }
}

/// One loopback UDP socket per participant plus the adversary's socket,
/// from which every datagram is sent.
#[derive(Debug)]
pub struct UdpTransport {
    wire: UdpChannel,
    nodes: BTreeMap<Node, (UdpChannel, SocketAddr)>,
}

impl UdpTransport {
    pub fn loopback() -> Result<Self, NetError> {
        let wire = UdpChannel::bind("127.0.0.1:0")?;
        let mut nodes = BTreeMap::new();
        for n in Node::ALL {
            let ch = UdpChannel::bind("127.0.0.1:0")?;
            let addr = ch.local_addr()?;
            nodes.insert(n, (ch, addr));
        }
        Ok(UdpTransport { wire, nodes })
    }
}

impl Transport for UdpTransport {
    fn carry(&mut self, to: Node, octets: &[u8]) -> Result<Frame, NetError> {
        let (ch, addr) = self.nodes.get_mut(&to).expect("every node has a socket");
        self.wire.send_raw_to(octets, *addr)?;
        ch.recv(Some(RECV_TIMEOUT))
    }
}
