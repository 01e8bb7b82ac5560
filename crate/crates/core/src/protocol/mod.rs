//! Beam-training control plane.
//!
//! The receiver drives the sweep. It announces itself with HELLO, measures
//! every receive codeword against the current transmit codeword, then sends
//! READY. The transmitter answers READY with ADVANCE_ACK naming its next
//! codeword, or with QUIT once its codebook is exhausted.
//!
//! ```text
//!  receiver                         transmitter
//!     | -- HELLO ------------------>  |  program F[0]
//!     |    sweep W against F[0]       |
//!     | -- READY ------------------>  |  program F[1]
//!     | <----------- ADVANCE_ACK(1) - |
//!     |    sweep W against F[1]       |
//!     |              ...              |
//!     | -- READY ------------------>  |
//!     | <-------------------- QUIT -- |
//! ```
//!
//! Reliability is stop-and-wait: the receiver retransmits its unanswered
//! messages (HELLO and READY in the first epoch, READY afterwards) every
//! retransmit timeout, and the transmitter re-sends its last reply whenever
//! it sees a duplicate. Both sides drop messages whose sequence number is not
//! newer than the last one they accepted, so every codeword pair is measured
//! exactly once however the link misbehaves.

mod message;
mod receiver;
mod transmitter;
mod transport;

use std::time::Duration;

use thiserror::Error;

pub use message::{ControlMessage, MessageKind, WireError, WIRE_LEN};
pub use receiver::{run_receiver, RxSession, RxState, SweepRecord};
pub use transmitter::{run_transmitter, TxState};
pub use transport::{
    memory_link, LinkConditions, MemoryEndpoint, Transport, TransportError, UdpTransport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtocolConfig {
    pub retransmit_timeout: Duration,
    /// Retransmissions allowed for one message before the peer is declared gone.
    pub max_retries: u32,
    /// Longest silence the transmitter tolerates while waiting on the receiver.
    pub idle_limit: Duration,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            retransmit_timeout: Duration::from_millis(200),
            max_retries: 10,
            idle_limit: Duration::from_secs(30),
        }
    }
}

impl ProtocolConfig {
    /// How long the transmitter keeps answering after sending QUIT.
    pub fn linger(&self) -> Duration {
        self.retransmit_timeout * (self.max_retries + 1)
    }
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("peer unreachable in state {state} after {attempts} attempts")]
    PeerUnreachable { state: String, attempts: u32 },
    #[error("transmitter quit before any receive sweep completed")]
    EmptyRecord,
    #[error("codebook has {0} entries; the wire format indexes at most 65536")]
    CodebookTooLarge(usize),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    Duplicate,
    Unexpected,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionEvent<S> {
    Transition {
        from: S,
        to: S,
    },
    Sent(ControlMessage),
    Retransmitted(ControlMessage),
    Accepted(ControlMessage),
    Dropped {
        message: ControlMessage,
        reason: DropReason,
    },
    Garbled(WireError),
    Timeout,
}

/// Every transition and message a node saw, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog<S> {
    events: Vec<SessionEvent<S>>,
}

impl<S: Copy + PartialEq + std::fmt::Debug> SessionLog<S> {
    fn new() -> Self {
        Self { events: Vec::new() }
    }

    fn push(&mut self, event: SessionEvent<S>) {
        log::trace!("{event:?}");
        self.events.push(event);
    }

    fn transition(&mut self, from: &mut S, to: S) {
        let prev = *from;
        *from = to;
        self.push(SessionEvent::Transition { from: prev, to });
    }

    pub fn events(&self) -> &[SessionEvent<S>] {
        &self.events
    }

    /// Messages the node accepted, in acceptance order.
    pub fn accepted(&self) -> Vec<ControlMessage> {
        self.events
            .iter()
            .filter_map(|e| match e {
                SessionEvent::Accepted(m) => Some(*m),
                _ => None,
            })
            .collect()
    }

    /// First transmissions of `kind`, excluding retransmissions.
    pub fn sent(&self, kind: MessageKind) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, SessionEvent::Sent(m) if m.kind == kind))
            .count()
    }

    pub fn retransmissions(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, SessionEvent::Retransmitted(_)))
            .count()
    }

    pub fn states(&self) -> Vec<S> {
        self.events
            .iter()
            .filter_map(|e| match e {
                SessionEvent::Transition { to, .. } => Some(*to),
                _ => None,
            })
            .collect()
    }
}

fn send_logged<S, T>(
    transport: &mut T,
    log: &mut SessionLog<S>,
    msg: ControlMessage,
    retransmit: bool,
) -> Result<(), ProtocolError>
where
    S: Copy + PartialEq + std::fmt::Debug,
    T: Transport + ?Sized,
{
    transport.send(&msg.encode())?;
    log.push(if retransmit {
        SessionEvent::Retransmitted(msg)
    } else {
        SessionEvent::Sent(msg)
    });
    Ok(())
}
