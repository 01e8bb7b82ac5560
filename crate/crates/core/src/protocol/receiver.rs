use super::{
    send_logged, ControlMessage, DropReason, MessageKind, ProtocolConfig, ProtocolError,
    SessionEvent, SessionLog, Transport, TransportError,
};
use crate::baseband::EvmReport;
use crate::codebook::Codebook;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RxState {
    Hello,
    Sweeping(usize, usize),
    AwaitAdvance(usize),
    Done,
}

/// EVM for every (transmit, receive) codeword pair, transmit-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    num_rx: usize,
    epochs: Vec<Vec<EvmReport>>,
}

impl SweepRecord {
    pub fn new(num_rx: usize) -> Self {
        Self {
            num_rx,
            epochs: Vec::new(),
        }
    }

    /// Append one transmit codeword's worth of measurements.
    pub fn push_epoch(&mut self, reports: Vec<EvmReport>) {
        assert_eq!(reports.len(), self.num_rx, "ragged sweep epoch");
        self.epochs.push(reports);
    }

    pub fn num_tx(&self) -> usize {
        self.epochs.len()
    }

    pub fn num_rx(&self) -> usize {
        self.num_rx
    }

    pub fn get(&self, tx: usize, rx: usize) -> Option<&EvmReport> {
        self.epochs.get(tx).and_then(|e| e.get(rx))
    }

    /// `(tx, rx, report)` in sweep order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &EvmReport)> {
        self.epochs
            .iter()
            .enumerate()
            .flat_map(|(t, e)| e.iter().enumerate().map(move |(r, rep)| (t, r, rep)))
    }

    pub fn len(&self) -> usize {
        self.epochs.len() * self.num_rx
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct RxSession {
    pub record: SweepRecord,
    pub log: SessionLog<RxState>,
}

enum Step {
    Continue,
    Advance,
    Quit,
}

struct Receiver<'a, T: ?Sized> {
    transport: &'a mut T,
    state: RxState,
    log: SessionLog<RxState>,
    record: SweepRecord,
    next_seq: u32,
    last_peer_seq: Option<u32>,
    outstanding: Vec<ControlMessage>,
}

impl<T: Transport + ?Sized> Receiver<'_, T> {
    fn seq(&mut self) -> u32 {
        let s = self.next_seq;
        self.next_seq += 1;
        s
    }

    fn send(&mut self, msg: ControlMessage) -> Result<(), ProtocolError> {
        send_logged(self.transport, &mut self.log, msg, false)?;
        self.outstanding.push(msg);
        Ok(())
    }

    fn drop_msg(&mut self, msg: ControlMessage, reason: DropReason) {
        self.log.push(SessionEvent::Dropped {
            message: msg,
            reason,
        });
    }

    fn handle(&mut self, msg: ControlMessage) -> Result<Step, ProtocolError> {
        if self.last_peer_seq.is_some_and(|last| msg.seq <= last) {
            self.drop_msg(msg, DropReason::Duplicate);
            return Ok(Step::Continue);
        }
        match (self.state, msg.kind) {
            (RxState::AwaitAdvance(k), MessageKind::AdvanceAck)
                if usize::from(msg.tx_index) == k + 1 =>
            {
                self.accept(msg);
                Ok(Step::Advance)
            }
            (RxState::AwaitAdvance(_), MessageKind::Quit) => {
                self.accept(msg);
                Ok(Step::Quit)
            }
            (RxState::Hello | RxState::Sweeping(..), MessageKind::Quit)
                if self.record.is_empty() =>
            {
                self.accept(msg);
                Err(ProtocolError::EmptyRecord)
            }
            _ => {
                self.drop_msg(msg, DropReason::Unexpected);
                Ok(Step::Continue)
            }
        }
    }

    fn accept(&mut self, msg: ControlMessage) {
        self.last_peer_seq = Some(msg.seq);
        self.log.push(SessionEvent::Accepted(msg));
    }

    fn decode(&mut self, bytes: Vec<u8>) -> Option<ControlMessage> {
        match ControlMessage::decode(&bytes) {
            Ok(m) => Some(m),
            Err(e) => {
                self.log.push(SessionEvent::Garbled(e));
                None
            }
        }
    }

    /// Handle whatever is already queued without blocking. Only called while
    /// sweeping, where no message can advance the session.
    fn drain(&mut self) -> Result<(), ProtocolError> {
        while let Some(bytes) = self
            .transport
            .try_recv()
            .map_err(|e| self.unreachable(e, 0))?
        {
            if let Some(msg) = self.decode(bytes) {
                self.handle(msg)?;
            }
        }
        Ok(())
    }

    fn unreachable(&self, e: TransportError, attempts: u32) -> ProtocolError {
        match e {
            TransportError::Disconnected => ProtocolError::PeerUnreachable {
                state: format!("{:?}", self.state),
                attempts,
            },
            other => other.into(),
        }
    }

    /// Block until the transmitter answers the outstanding messages.
    fn await_answer(&mut self, config: &ProtocolConfig) -> Result<Step, ProtocolError> {
        let mut attempts = 1;
        loop {
            let received = self
                .transport
                .recv(config.retransmit_timeout)
                .map_err(|e| self.unreachable(e, attempts))?;
            match received {
                Some(bytes) => {
                    if let Some(msg) = self.decode(bytes) {
                        match self.handle(msg)? {
                            Step::Continue => {}
                            step => return Ok(step),
                        }
                    }
                }
                None => {
                    self.log.push(SessionEvent::Timeout);
                    if attempts > config.max_retries {
                        return Err(ProtocolError::PeerUnreachable {
                            state: format!("{:?}", self.state),
                            attempts,
                        });
                    }
                    attempts += 1;
                    for msg in self.outstanding.clone() {
                        send_logged(self.transport, &mut self.log, msg, true)?;
                    }
                }
            }
        }
    }
}

/// Sweep `codebook` against each transmit codeword until the transmitter quits.
///
/// `measure(tx_index, rx_index)` is called exactly once per pair, in
/// transmit-major order.
pub fn run_receiver<T, M>(
    codebook: &Codebook,
    transport: &mut T,
    config: &ProtocolConfig,
    mut measure: M,
) -> Result<RxSession, ProtocolError>
where
    T: Transport + ?Sized,
    M: FnMut(usize, usize) -> EvmReport,
{
    let mut rx = Receiver {
        transport,
        state: RxState::Hello,
        log: SessionLog::new(),
        record: SweepRecord::new(codebook.len()),
        next_seq: 1,
        last_peer_seq: None,
        outstanding: Vec::new(),
    };
    let seq = rx.seq();
    rx.send(ControlMessage::hello(seq, 0))?;

    let mut epoch = 0;
    loop {
        let mut reports = Vec::with_capacity(codebook.len());
        for r in 0..codebook.len() {
            rx.log
                .transition(&mut rx.state, RxState::Sweeping(epoch, r));
            if r == 0 {
                rx.drain()?;
            }
            reports.push(measure(epoch, r));
        }
        rx.record.push_epoch(reports);
        let seq = rx.seq();
        rx.send(ControlMessage::ready(seq))?;
        rx.log
            .transition(&mut rx.state, RxState::AwaitAdvance(epoch));

        match rx.await_answer(config)? {
            Step::Advance => {
                rx.outstanding.clear();
                epoch += 1;
            }
            Step::Quit => {
                rx.log.transition(&mut rx.state, RxState::Done);
                return Ok(RxSession {
                    record: rx.record,
                    log: rx.log,
                });
            }
            Step::Continue => unreachable!(),
        }
    }
}
