//! Broadcast with acknowledgement back to the source.
//!
//! Payload and "stay" messages carry a round stamp. The source stamps its
//! opening transmission 1; every retransmission stamps the round it happens
//! in, computed from the stamp that informed the node. Since the stamp of a
//! received message always equals the current round, the stamps implement a
//! global clock without any node storing the round number explicitly.
//!
//! The designated `x3` node is informed last, in round `2l - 3`. One round
//! later it transmits an acknowledgement stamped with the round it was
//! informed. Whoever transmitted the payload in the round named by an
//! incoming acknowledgement answers with an acknowledgement stamped with its
//! own informed round. Stamps strictly decrease along this chain, each relay
//! is the sole transmitter of its round, and the source hears an
//! acknowledgement between rounds `2l - 2` and `3l - 4`.

use crate::labeling::Label;
use crate::sim::{
    self, Automaton, Message, MessageKind, NodeSummary, Protocol, Round,
};
use crate::{LabeledGraph, NodeId, Scheme};

use super::{ensure_source_matches, ProtocolError, ProtocolResult, RunOutcome};

pub(crate) struct AckNode {
    label: Label,
    is_source: bool,
    payload: Option<Vec<u8>>,
    /// Stamp of the message that informed this node; the global clock makes
    /// it equal to the round of receipt.
    informed_stamp: Option<Round>,
    informed_round: Option<Round>,
    started: bool,
    transmit_rounds: Vec<Round>,
    /// Stamps attached to own payload transmissions; acknowledgements are
    /// relayed when they name one of these.
    transmit_stamps: Vec<Round>,
    heard_stay: Option<(Round, Round)>,
    heard_ack: Option<(Round, Round)>,
    ack_received_round: Option<Round>,
}

impl AckNode {
    fn payload_message(&self, stamp: Round) -> Message {
        Message::data(self.payload.as_deref().unwrap_or_default()).stamped(stamp)
    }
}

impl Automaton for AckNode {
    fn decide(&mut self, round: Round) -> Option<Message> {
        if self.is_source && !self.started {
            self.started = true;
            self.transmit_rounds.push(round);
            return Some(self.payload_message(1));
        }
        if self.payload.is_none() {
            return None;
        }
        if let (Some(stamp), Some(received)) = (self.informed_stamp, self.informed_round) {
            if round == received + 2 && self.label.x1 {
                self.transmit_rounds.push(round);
                self.transmit_stamps.push(stamp + 2);
                return Some(self.payload_message(stamp + 2));
            }
            if round == received + 1 {
                if self.label.x3 {
                    return Some(Message::ack(stamp));
                }
                if self.label.x2 {
                    return Some(Message::stay().stamped(stamp + 1));
                }
                return None;
            }
        }
        if let Some((k, heard_in)) = self.heard_stay {
            if heard_in + 1 == round && self.transmit_rounds.last() == Some(&(round - 2)) {
                self.transmit_rounds.push(round);
                self.transmit_stamps.push(k + 1);
                return Some(self.payload_message(k + 1));
            }
        }
        if let Some((k, heard_in)) = self.heard_ack {
            if heard_in + 1 == round && self.transmit_stamps.contains(&k) {
                let stamp = self
                    .informed_stamp
                    .expect("a payload transmitter was informed");
                return Some(Message::ack(stamp));
            }
        }
        None
    }

    fn observe(&mut self, round: Round, heard: Option<&Message>) {
        let Some(message) = heard else { return };
        self.started = true;
        match message.kind {
            MessageKind::Stay => self.heard_stay = (message.stamp).map(|k| (k, round)),
            MessageKind::Ack => {
                self.heard_ack = (message.stamp).map(|k| (k, round));
                if self.is_source && self.ack_received_round.is_none() {
                    self.ack_received_round = Some(round);
                }
            }
            MessageKind::Data => {
                if self.payload.is_none() {
                    self.payload = message.payload.clone();
                    self.informed_stamp = message.stamp;
                    self.informed_round = Some(round);
                }
            }
            _ => {}
        }
    }

    fn summary(&self) -> NodeSummary {
        let mut flags = std::collections::BTreeMap::new();
        if let Some(r) = self.ack_received_round {
            flags.insert("ack_round".to_string(), u64::from(r));
        }
        NodeSummary {
            informed_round: if self.is_source {
                Some(0)
            } else {
                self.informed_round
            },
            transmit_rounds: self.transmit_rounds.clone(),
            flags,
        }
    }
}

pub(crate) struct AckProtocol;

impl Protocol for AckProtocol {
    type Node = AckNode;

    fn spawn(&self, _node: NodeId, label: Label, is_source: bool, payload: &[u8]) -> AckNode {
        AckNode {
            label,
            is_source,
            payload: is_source.then(|| payload.to_vec()),
            informed_stamp: None,
            informed_round: None,
            started: false,
            transmit_rounds: Vec::new(),
            transmit_stamps: Vec::new(),
            heard_stay: None,
            heard_ack: None,
            ack_received_round: None,
        }
    }

    fn is_complete(&self, nodes: &[AckNode]) -> bool {
        nodes
            .iter()
            .any(|n| n.is_source && n.ack_received_round.is_some())
    }
}

/// Runs the acknowledged protocol until the source hears an acknowledgement.
pub fn run_acknowledged(
    lg: &LabeledGraph,
    source: NodeId,
    payload: &[u8],
    max_rounds: Round,
) -> Result<RunOutcome, ProtocolError> {
    if lg.scheme != Scheme::Acknowledged {
        return Err(ProtocolError::SchemeMismatch {
            expected: "acknowledged",
            found: lg.scheme.as_str(),
        });
    }
    ensure_source_matches(lg, source)?;
    if !lg.labels.iter().any(|l| l.x3) {
        return Err(ProtocolError::NoDesignatedNode);
    }
    let trace = sim::run(&AckProtocol, lg, source, payload, max_rounds)?;
    let ack_round = trace.last_round();
    let informed_rounds = trace
        .final_states
        .iter()
        .map(|s| s.informed_round)
        .collect();
    Ok(RunOutcome {
        trace,
        result: ProtocolResult {
            completion_round: ack_round,
            ack_round: Some(ack_round),
            common_known_round: None,
            informed_rounds,
        },
    })
}
