// SPDX-License-Identifier: Apache-2.0
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use apcr_core::wire::Frame;

use crate::{Channel, NetError};

/// One end of an in-process link. Carries encoded frames so that framing is
/// validated exactly as on a socket.
#[derive(Debug)]
pub struct MemChannel {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

impl MemChannel {
    pub fn pair() -> (MemChannel, MemChannel) {
        let (a_tx, b_rx) = channel();
        let (b_tx, a_rx) = channel();
        (
            MemChannel { tx: a_tx, rx: a_rx },
            MemChannel { tx: b_tx, rx: b_rx },
        )
    }

    /// Sends octets without framing checks.
    pub fn send_raw(&mut self, bytes: &[u8]) -> Result<(), NetError> {
        self.tx.send(bytes.to_vec()).map_err(|_| NetError::Closed)
    }
}

impl Channel for MemChannel {
    fn send(&mut self, frame: &Frame) -> Result<(), NetError> {
        let bytes = frame.encode()?;
        self.send_raw(&bytes)
    }

    fn recv(&mut self, timeout: Option<Duration>) -> Result<Frame, NetError> {
        let bytes = match timeout {
            None => self.rx.recv().map_err(|_| NetError::Closed)?,
            Some(t) => self.rx.recv_timeout(t).map_err(|e| match e {
                RecvTimeoutError::Timeout => NetError::Timeout,
                RecvTimeoutError::Disconnected => NetError::Closed,
            })?,
        };
        Ok(Frame::decode(&bytes)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use apcr_core::wire::MsgType;

    #[test]
    fn pair_is_bidirectional() {
        let (mut a, mut b) = MemChannel::pair();
        a.send(&Frame::new(MsgType::Challenge, vec![1, 2])).unwrap();
        b.send(&Frame::new(MsgType::ResultToRp, vec![3])).unwrap();
        assert_eq!(b.recv(None).unwrap().payload, vec![1, 2]);
        assert_eq!(a.recv(None).unwrap().msg_type, MsgType::ResultToRp);
    }

    #[test]
    fn empty_link_times_out_and_dropped_peer_closes() {
        let (mut a, b) = MemChannel::pair();
        assert!(matches!(
            a.recv(Some(Duration::from_millis(5))),
            Err(NetError::Timeout)
        ));
        drop(b);
        assert!(matches!(a.recv(None), Err(NetError::Closed)));
    }
}
