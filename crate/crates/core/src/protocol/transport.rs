//! Datagram endpoints: an impaired in-memory link and a UDP socket.

use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::sync::mpsc::{self, RecvTimeoutError, TryRecvError};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("peer endpoint is gone")]
    Disconnected,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A datagram endpoint connected to exactly one peer.
///
/// Datagrams arrive whole or not at all; order and uniqueness are not
/// guaranteed.
pub trait Transport: Send {
    fn send(&mut self, datagram: &[u8]) -> Result<(), TransportError>;

    /// Wait up to `timeout` for a datagram. `Ok(None)` means the wait timed out.
    fn recv(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, TransportError>;

    /// Return a datagram only if one is already waiting.
    fn try_recv(&mut self) -> Result<Option<Vec<u8>>, TransportError>;
}

impl<T: Transport + ?Sized> Transport for &mut T {
    fn send(&mut self, datagram: &[u8]) -> Result<(), TransportError> {
        (**self).send(datagram)
    }

    fn recv(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, TransportError> {
        (**self).recv(timeout)
    }

    fn try_recv(&mut self) -> Result<Option<Vec<u8>>, TransportError> {
        (**self).try_recv()
    }
}

/// Impairments applied independently to each direction of a [`memory_link`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConditions {
    pub drop_probability: f64,
    pub duplicate_probability: f64,
    /// Chance that a datagram is held back and delivered after the next one.
    pub reorder_probability: f64,
    pub seed: u64,
}

impl LinkConditions {
    pub fn lossless() -> Self {
        Self {
            drop_probability: 0.0,
            duplicate_probability: 0.0,
            reorder_probability: 0.0,
            seed: 0,
        }
    }

    pub fn lossy(drop_probability: f64, seed: u64) -> Self {
        Self {
            drop_probability,
            seed,
            ..Self::lossless()
        }
    }
}

impl Default for LinkConditions {
    fn default() -> Self {
        Self::lossless()
    }
}

pub struct MemoryEndpoint {
    outbound: mpsc::Sender<Vec<u8>>,
    inbound: mpsc::Receiver<Vec<u8>>,
    conditions: LinkConditions,
    rng: ChaCha8Rng,
    held: Option<Vec<u8>>,
}

/// Two connected in-memory endpoints.
pub fn memory_link(conditions: LinkConditions) -> (MemoryEndpoint, MemoryEndpoint) {
    let (a_tx, b_rx) = mpsc::channel();
    let (b_tx, a_rx) = mpsc::channel();
    let endpoint = |outbound, inbound, stream: u64| MemoryEndpoint {
        outbound,
        inbound,
        conditions,
        rng: {
            let mut rng = ChaCha8Rng::seed_from_u64(conditions.seed);
            rng.set_stream(stream);
            rng
        },
        held: None,
    };
    (endpoint(a_tx, a_rx, 1), endpoint(b_tx, b_rx, 2))
}

impl MemoryEndpoint {
    fn deliver(&self, datagram: Vec<u8>) {
        // A vanished peer loses the datagram, as a closed UDP port would.
        let _ = self.outbound.send(datagram);
    }

    fn release_held(&mut self) {
        if let Some(d) = self.held.take() {
            self.deliver(d);
        }
    }
}

impl Transport for MemoryEndpoint {
    fn send(&mut self, datagram: &[u8]) -> Result<(), TransportError> {
        let c = self.conditions;
        if self.rng.random::<f64>() < c.drop_probability {
            log::trace!("memory link dropped {datagram:02x?}");
            self.release_held();
            return Ok(());
        }
        let copies = if self.rng.random::<f64>() < c.duplicate_probability {
            2
        } else {
            1
        };
        if self.held.is_none() && self.rng.random::<f64>() < c.reorder_probability {
            self.held = Some(datagram.to_vec());
            return Ok(());
        }
        for _ in 0..copies {
            self.deliver(datagram.to_vec());
        }
        self.release_held();
        Ok(())
    }

    fn recv(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, TransportError> {
        self.release_held();
        match self.inbound.recv_timeout(timeout) {
            Ok(d) => Ok(Some(d)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(TransportError::Disconnected),
        }
    }

    fn try_recv(&mut self) -> Result<Option<Vec<u8>>, TransportError> {
        self.release_held();
        match self.inbound.try_recv() {
            Ok(d) => Ok(Some(d)),
            Err(TryRecvError::Empty) => Ok(None),
            Err(TryRecvError::Disconnected) => Err(TransportError::Disconnected),
        }
    }
}

/// A UDP socket that talks to a single peer address and ignores everyone else.
pub struct UdpTransport {
    socket: UdpSocket,
    peer: SocketAddr,
}

impl UdpTransport {
    pub fn bind(local: impl ToSocketAddrs, peer: impl ToSocketAddrs) -> io::Result<Self> {
        let socket = UdpSocket::bind(local)?;
        let peer = peer.to_socket_addrs()?.next().ok_or_else(|| {
            io::Error::new(
                io::ErrorKind::InvalidInput,
                "peer address resolves to nothing",
            )
        })?;
        Ok(Self { socket, peer })
    }

    pub fn from_socket(socket: UdpSocket, peer: SocketAddr) -> Self {
        Self { socket, peer }
    }

    /// Two sockets on 127.0.0.1 addressed at each other.
    pub fn loopback_pair() -> io::Result<(Self, Self)> {
        let a = UdpSocket::bind("127.0.0.1:0")?;
        let b = UdpSocket::bind("127.0.0.1:0")?;
        let (a_addr, b_addr) = (a.local_addr()?, b.local_addr()?);
        Ok((Self::from_socket(a, b_addr), Self::from_socket(b, a_addr)))
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.socket.local_addr()
    }

    pub fn peer(&self) -> SocketAddr {
        self.peer
    }
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(
        e.kind(),
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
    )
}

impl Transport for UdpTransport {
    fn send(&mut self, datagram: &[u8]) -> Result<(), TransportError> {
        match self.socket.send_to(datagram, self.peer) {
            Ok(_) => Ok(()),
            // Nobody listening yet; the datagram is simply lost.
            Err(e) if e.kind() == io::ErrorKind::ConnectionRefused => Ok(()),
            Err(e) => Err(e.into()),
        }
    }

    fn recv(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, TransportError> {
        let deadline = Instant::now() + timeout;
        let mut buf = [0u8; 64];
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                return Ok(None);
            }
            self.socket.set_read_timeout(Some(remaining))?;
            match self.socket.recv_from(&mut buf) {
                Ok((n, from)) if from == self.peer => return Ok(Some(buf[..n].to_vec())),
                Ok((_, from)) => log::debug!("ignoring datagram from stranger {from}"),
                Err(e) if is_timeout(&e) => return Ok(None),
                Err(e) if e.kind() == io::ErrorKind::ConnectionRefused => {}
                Err(e) => return Err(e.into()),
            }
        }
    }

    fn try_recv(&mut self) -> Result<Option<Vec<u8>>, TransportError> {
        self.socket.set_nonblocking(true)?;
        let mut buf = [0u8; 64];
        let result = loop {
            match self.socket.recv_from(&mut buf) {
                Ok((n, from)) if from == self.peer => break Ok(Some(buf[..n].to_vec())),
                Ok(_) => continue,
                Err(e) if is_timeout(&e) => break Ok(None),
                Err(e) if e.kind() == io::ErrorKind::ConnectionRefused => continue,
                Err(e) => break Err(e.into()),
            }
        };
        self.socket.set_nonblocking(false)?;
        result
    }
}
