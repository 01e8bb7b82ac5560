use std::time::Instant;

use super::{
    send_logged, ControlMessage, DropReason, MessageKind, ProtocolConfig, ProtocolError,
    SessionEvent, SessionLog, Transport, TransportError,
};
use crate::array::PhaseWeights;
use crate::codebook::Codebook;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxState {
    AwaitHello,
    Transmitting(usize),
    AwaitReady(usize),
    Done,
}

struct Transmitter<'a, T: ?Sized, P> {
    codebook: &'a Codebook,
    transport: &'a mut T,
    program: P,
    state: TxState,
    log: SessionLog<TxState>,
    next_seq: u32,
    last_peer_seq: Option<u32>,
    last_reply: Option<ControlMessage>,
}

impl<T, P> Transmitter<'_, T, P>
where
    T: Transport + ?Sized,
    P: FnMut(usize, &PhaseWeights),
{
    fn program(&mut self, index: usize) {
        self.log
            .transition(&mut self.state, TxState::Transmitting(index));
        (self.program)(index, &self.codebook.entries()[index]);
        self.log
            .transition(&mut self.state, TxState::AwaitReady(index));
    }

    fn reply(&mut self, msg: ControlMessage) -> Result<(), ProtocolError> {
        send_logged(self.transport, &mut self.log, msg, false)?;
        self.last_reply = Some(msg);
        Ok(())
    }

    fn seq(&mut self) -> u32 {
        let s = self.next_seq;
        self.next_seq += 1;
        s
    }

    fn handle(&mut self, msg: ControlMessage) -> Result<(), ProtocolError> {
        if self.last_peer_seq.is_some_and(|last| msg.seq <= last) {
            self.log.push(SessionEvent::Dropped {
                message: msg,
                reason: DropReason::Duplicate,
            });
            // The receiver is still waiting, so our answer was lost.
            if msg.kind == MessageKind::Ready {
                if let Some(reply) = self.last_reply {
                    send_logged(self.transport, &mut self.log, reply, true)?;
                }
            }
            return Ok(());
        }
        match (self.state, msg.kind) {
            (TxState::AwaitHello, MessageKind::Hello) => {
                self.accept(msg);
                self.program(0);
            }
            (TxState::AwaitReady(k), MessageKind::Ready) => {
                self.accept(msg);
                let next = k + 1;
                if next < self.codebook.len() {
                    self.program(next);
                    let seq = self.seq();
                    self.reply(ControlMessage::advance_ack(seq, next as u16))?;
                } else {
                    let seq = self.seq();
                    self.reply(ControlMessage::quit(seq))?;
                    self.log.transition(&mut self.state, TxState::Done);
                }
            }
            _ => self.log.push(SessionEvent::Dropped {
                message: msg,
                reason: DropReason::Unexpected,
            }),
        }
        Ok(())
    }

    fn accept(&mut self, msg: ControlMessage) {
        self.last_peer_seq = Some(msg.seq);
        self.log.push(SessionEvent::Accepted(msg));
    }

    fn receive(
        &mut self,
        timeout: std::time::Duration,
    ) -> Result<Option<ControlMessage>, TransportError> {
        match self.transport.recv(timeout)? {
            None => {
                self.log.push(SessionEvent::Timeout);
                Ok(None)
            }
            Some(bytes) => match ControlMessage::decode(&bytes) {
                Ok(msg) => Ok(Some(msg)),
                Err(e) => {
                    self.log.push(SessionEvent::Garbled(e));
                    Ok(None)
                }
            },
        }
    }

    fn run(mut self, config: &ProtocolConfig) -> Result<SessionLog<TxState>, ProtocolError> {
        let mut last_heard = Instant::now();
        while self.state != TxState::Done {
            let received = self
                .receive(config.retransmit_timeout)
                .map_err(|e| match e {
                    TransportError::Disconnected => ProtocolError::PeerUnreachable {
                        state: format!("{:?}", self.state),
                        attempts: 0,
                    },
                    other => other.into(),
                })?;
            match received {
                Some(msg) => {
                    last_heard = Instant::now();
                    self.handle(msg)?;
                }
                None if last_heard.elapsed() >= config.idle_limit => {
                    return Err(ProtocolError::PeerUnreachable {
                        state: format!("{:?}", self.state),
                        attempts: 0,
                    });
                }
                None => {}
            }
        }

        // Stay around long enough to repeat QUIT if it was lost.
        let mut quiet = 0;
        while quiet <= config.max_retries {
            match self.receive(config.retransmit_timeout) {
                Ok(Some(msg)) => {
                    quiet = 0;
                    self.handle(msg)?;
                }
                Ok(None) => quiet += 1,
                Err(TransportError::Disconnected) => break,
                Err(e) => return Err(e.into()),
            }
        }
        Ok(self.log)
    }
}

/// Serve codebook `codebook` to a receiver until it has swept every entry.
///
/// `program` is called with each entry as it is loaded onto the array.
pub fn run_transmitter<T, P>(
    codebook: &Codebook,
    transport: &mut T,
    config: &ProtocolConfig,
    program: P,
) -> Result<SessionLog<TxState>, ProtocolError>
where
    T: Transport + ?Sized,
    P: FnMut(usize, &PhaseWeights),
{
    if codebook.len() > usize::from(u16::MAX) + 1 {
        return Err(ProtocolError::CodebookTooLarge(codebook.len()));
    }
    let tx = Transmitter {
        codebook,
        transport,
        program,
        state: TxState::AwaitHello,
        log: SessionLog::new(),
        next_seq: 1,
        last_peer_seq: None,
        last_reply: None,
    };
    tx.run(config)
}
