//! Plain labeled broadcast.
//!
//! Odd rounds belong to dominators, even rounds to "stay" prompts. The
//! source transmits in round 1. A node that first received the payload two
//! rounds ago retransmits it if its `x1` bit is set; a node that received it
//! one round ago and carries `x2` answers "stay", telling the neighbor that
//! informed it to transmit once more. A node that transmitted two rounds ago
//! and heard "stay" last round repeats its transmission. With labels built
//! from the stage decomposition, stage `i`'s dominators transmit exactly in
//! round `2i - 1` and the whole broadcast completes in round `2l - 3`.

use crate::labeling::Label;
use crate::sim::{
    self, Automaton, Message, MessageKind, NodeSummary, Protocol, Round, SimulationTrace,
};
use crate::{LabeledGraph, NodeId, Scheme};

use super::{ensure_source_matches, ProtocolError, ProtocolResult, RunOutcome};

pub(crate) struct BroadcastNode {
    label: Label,
    is_source: bool,
    /// The adopted payload message, retransmitted verbatim.
    adopted: Option<Message>,
    /// Round of first payload receipt; `None` for the source and for
    /// still-uninformed nodes.
    received_round: Option<Round>,
    started: bool,
    heard_stay_in: Option<Round>,
    transmit_rounds: Vec<Round>,
}

impl Automaton for BroadcastNode {
    fn decide(&mut self, round: Round) -> Option<Message> {
        if self.is_source && !self.started {
            self.started = true;
            self.transmit_rounds.push(round);
            return self.adopted.clone();
        }
        let received = self.received_round?;
        let retransmit = (self.label.x1 && round == received + 2)
            || (self.heard_stay_in == Some(round.wrapping_sub(1))
                && self.transmit_rounds.last() == Some(&round.wrapping_sub(2)));
        if retransmit {
            self.transmit_rounds.push(round);
            return self.adopted.clone();
        }
        if self.label.x2 && round == received + 1 {
            return Some(Message::stay());
        }
        None
    }

    fn observe(&mut self, round: Round, heard: Option<&Message>) {
        let Some(message) = heard else { return };
        self.started = true;
        match message.kind {
            MessageKind::Stay => self.heard_stay_in = Some(round),
            _ => {
                if self.adopted.is_none() {
                    self.adopted = Some(message.clone());
                    self.received_round = Some(round);
                }
            }
        }
    }

    fn summary(&self) -> NodeSummary {
        NodeSummary {
            informed_round: if self.is_source {
                Some(0)
            } else {
                self.received_round
            },
            transmit_rounds: self.transmit_rounds.clone(),
            flags: Default::default(),
        }
    }
}

pub(crate) struct BroadcastProtocol;

impl Protocol for BroadcastProtocol {
    type Node = BroadcastNode;

    fn spawn(&self, _node: NodeId, label: Label, is_source: bool, payload: &[u8]) -> BroadcastNode {
        BroadcastNode {
            label,
            is_source,
            adopted: is_source.then(|| Message::data(payload)),
            received_round: None,
            started: false,
            heard_stay_in: None,
            transmit_rounds: Vec::new(),
        }
    }

    fn is_complete(&self, nodes: &[BroadcastNode]) -> bool {
        nodes.iter().all(|n| n.adopted.is_some())
    }
}

/// Runs the plain broadcast protocol to completion. Accepts broadcast or
/// acknowledged labels; the latter's extra bit is simply ignored.
pub fn run_broadcast(
    lg: &LabeledGraph,
    source: NodeId,
    payload: &[u8],
    max_rounds: Round,
) -> Result<RunOutcome, ProtocolError> {
    if lg.scheme == Scheme::ArbitrarySource {
        return Err(ProtocolError::SchemeMismatch {
            expected: "broadcast or acknowledged",
            found: lg.scheme.as_str(),
        });
    }
    ensure_source_matches(lg, source)?;
    let trace = sim::run(&BroadcastProtocol, lg, source, payload, max_rounds)?;
    Ok(finish(trace))
}

pub(crate) fn finish(trace: SimulationTrace) -> RunOutcome {
    let completion_round = trace.last_round();
    let informed_rounds = trace
        .final_states
        .iter()
        .map(|s| s.informed_round)
        .collect();
    RunOutcome {
        trace,
        result: ProtocolResult {
            completion_round,
            ack_round: None,
            common_known_round: None,
            informed_rounds,
        },
    }
}
