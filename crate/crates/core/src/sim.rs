//! Round-synchronous radio network simulator.
//!
//! In every round each node first decides whether to transmit, then hears the
//! result: a listening node receives a message exactly when one of its
//! neighbors transmitted. Two or more transmitting neighbors collide, and the
//! listener hears silence, indistinguishable from nobody transmitting. A
//! transmitting node hears nothing in its own round.
//!
//! The simulator is protocol-agnostic: behavior lives in [`Automaton`]
//! implementations, one per node, driven only by their label, the round
//! number and what they hear. [`step`] advances all nodes one round and
//! returns a full record of transmissions, deliveries and collisions;
//! [`run`] loops until the protocol reports completion or a round budget is
//! exhausted, in which case the partial trace is preserved in the error.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, NodeId};
use crate::labeling::{Label, LabeledGraph};

pub type Round = u32;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("source {node} out of range for a graph on {n} nodes")]
    SourceOutOfRange { node: NodeId, n: usize },
    #[error("node {node} emitted a malformed message in round {round}: {reason}")]
    MalformedMessage {
        node: NodeId,
        round: Round,
        reason: String,
    },
    #[error("no completion within {max_rounds} rounds")]
    Timeout {
        max_rounds: Round,
        partial: Box<SimulationTrace>,
    },
    #[error("malformed trace: {0}")]
    TraceFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    /// The broadcast payload itself.
    Data,
    /// Prompt for the previous round's transmitter to transmit again.
    Stay,
    /// Acknowledgement traveling back toward the source.
    Ack,
    /// First-phase probe distributed to timestamp every node.
    Init,
    /// Second-phase request telling the source when to answer.
    Ready,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Data => "data",
            MessageKind::Stay => "stay",
            MessageKind::Ack => "ack",
            MessageKind::Init => "init",
            MessageKind::Ready => "ready",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        Some(match text {
            "data" => MessageKind::Data,
            "stay" => MessageKind::Stay,
            "ack" => MessageKind::Ack,
            "init" => MessageKind::Init,
            "ready" => MessageKind::Ready,
            _ => return None,
        })
    }
}

/// A transmitted frame. `stamp` is the round-number tag used by the
/// acknowledged protocols; `horizon` is a completion deadline carried by the
/// arbitrary-source phases; `payload` is the broadcast content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub kind: MessageKind,
    pub stamp: Option<Round>,
    pub payload: Option<Vec<u8>>,
    pub horizon: Option<Round>,
}

impl Message {
    pub fn data(payload: &[u8]) -> Self {
        Message {
            kind: MessageKind::Data,
            stamp: None,
            payload: Some(payload.to_vec()),
            horizon: None,
        }
    }

    pub fn stay() -> Self {
        Message {
            kind: MessageKind::Stay,
            stamp: None,
            payload: None,
            horizon: None,
        }
    }

    pub fn ack(stamp: Round) -> Self {
        Message {
            kind: MessageKind::Ack,
            stamp: Some(stamp),
            payload: None,
            horizon: None,
        }
    }

    pub fn init(stamp: Round) -> Self {
        Message {
            kind: MessageKind::Init,
            stamp: Some(stamp),
            payload: None,
            horizon: None,
        }
    }

    pub fn ready(stamp: Round, horizon: Round) -> Self {
        Message {
            kind: MessageKind::Ready,
            stamp: Some(stamp),
            payload: None,
            horizon: Some(horizon),
        }
    }

    pub fn stamped(mut self, stamp: Round) -> Self {
        self.stamp = Some(stamp);
        self
    }

    pub fn carrying(mut self, payload: &[u8]) -> Self {
        self.payload = Some(payload.to_vec());
        self
    }

    pub fn with_horizon(mut self, horizon: Round) -> Self {
        self.horizon = Some(horizon);
        self
    }

    /// Structural validity per kind; a failure is a protocol programming
    /// error, surfaced by [`step`] as [`SimError::MalformedMessage`].
    pub fn validate(&self) -> Result<(), String> {
        let fail = |reason: &str| Err(format!("{} message {}", self.kind.as_str(), reason));
        match self.kind {
            MessageKind::Data => {
                if self.payload.is_none() {
                    return fail("lacks a payload");
                }
            }
            MessageKind::Stay => {
                if self.payload.is_some() || self.horizon.is_some() {
                    return fail("carries unexpected fields");
                }
            }
            MessageKind::Ack => {
                if self.stamp.is_none() {
                    return fail("lacks a stamp");
                }
            }
            MessageKind::Init => {
                if self.stamp.is_none() {
                    return fail("lacks a stamp");
                }
                if self.payload.is_some() || self.horizon.is_some() {
                    return fail("carries unexpected fields");
                }
            }
            MessageKind::Ready => {
                if self.stamp.is_none() || self.horizon.is_none() {
                    return fail("lacks a stamp or horizon");
                }
                if self.payload.is_some() {
                    return fail("carries unexpected fields");
                }
            }
        }
        Ok(())
    }

    /// Compact string for the trace `aux` column: hex payload, decimal
    /// horizon, or `payload|horizon` when both are present.
    pub fn aux_string(&self) -> Option<String> {
        let payload = self.payload.as_ref().map(|bytes| {
            let mut s = String::with_capacity(2 + 2 * bytes.len());
            s.push_str("0x");
            for b in bytes {
                s.push_str(&format!("{b:02x}"));
            }
            s
        });
        match (payload, self.horizon) {
            (Some(p), Some(h)) => Some(format!("{p}|{h}")),
            (Some(p), None) => Some(p),
            (None, Some(h)) => Some(h.to_string()),
            (None, None) => None,
        }
    }

    fn apply_aux(&mut self, aux: &str) -> Result<(), String> {
        for part in aux.split('|') {
            if let Some(hex) = part.strip_prefix("0x") {
                if hex.len() % 2 != 0 {
                    return Err(format!("odd-length payload hex {part:?}"));
                }
                let bytes = (0..hex.len())
                    .step_by(2)
                    .map(|i| u8::from_str_radix(&hex[i..i + 2], 16))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| format!("bad payload hex {part:?}"))?;
                self.payload = Some(bytes);
            } else {
                self.horizon =
                    Some(part.parse().map_err(|_| format!("bad horizon {part:?}"))?);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub receiver: NodeId,
    pub sender: NodeId,
    pub message: Message,
}

/// Everything that happened in one round. `collisions` lists listeners with
/// two or more transmitting neighbors; they heard silence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundRecord {
    pub round: Round,
    pub transmissions: Vec<(NodeId, Message)>,
    pub deliveries: Vec<Delivery>,
    pub collisions: Vec<NodeId>,
}

/// Per-node wrap-up reported after a run. `informed_round` is the round the
/// node first received the payload, 0 for a node that started with it;
/// `transmit_rounds` lists its payload transmissions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeSummary {
    pub informed_round: Option<Round>,
    pub transmit_rounds: Vec<Round>,
    pub flags: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SimulationTrace {
    pub rounds: Vec<RoundRecord>,
    pub final_states: Vec<NodeSummary>,
}

impl SimulationTrace {
    pub fn last_round(&self) -> Round {
        self.rounds.last().map_or(0, |r| r.round)
    }

    /// Transmitting nodes of the record for `round`, if simulated.
    pub fn transmitters(&self, round: Round) -> Option<Vec<NodeId>> {
        self.rounds
            .iter()
            .find(|r| r.round == round)
            .map(|r| r.transmissions.iter().map(|(v, _)| *v).collect())
    }
}

/// Node behavior. `decide` may return a message to transmit; `observe` is
/// called afterwards with what the node heard, `None` for silence, collision
/// or its own transmission.
pub trait Automaton {
    fn decide(&mut self, round: Round) -> Option<Message>;
    fn observe(&mut self, round: Round, heard: Option<&Message>);
    fn summary(&self) -> NodeSummary;
}

/// A protocol instantiates one automaton per node and decides when the run
/// is over.
pub trait Protocol {
    type Node: Automaton;
    fn spawn(&self, node: NodeId, label: Label, is_source: bool, payload: &[u8]) -> Self::Node;
    fn is_complete(&self, nodes: &[Self::Node]) -> bool;
}

/// Advances all nodes one round under the radio delivery rule.
pub fn step<A: Automaton>(
    nodes: &mut [A],
    g: &Graph,
    round: Round,
) -> Result<RoundRecord, SimError> {
    let mut transmissions = Vec::new();
    let mut sender_of = vec![None; nodes.len()];
    for (v, node) in nodes.iter_mut().enumerate() {
        if let Some(message) = node.decide(round) {
            message.validate().map_err(|reason| SimError::MalformedMessage {
                node: v,
                round,
                reason,
            })?;
            sender_of[v] = Some(transmissions.len());
            transmissions.push((v, message));
        }
    }

    let mut deliveries = Vec::new();
    let mut collisions = Vec::new();
    let mut heard: Vec<Option<usize>> = vec![None; nodes.len()];
    for v in 0..nodes.len() {
        if sender_of[v].is_some() {
            continue;
        }
        let mut from = None;
        let mut count = 0;
        for &u in g.neighbors(v) {
            if let Some(idx) = sender_of[u] {
                count += 1;
                from = Some(idx);
            }
        }
        match count {
            0 => {}
            1 => {
                let idx = from.unwrap();
                heard[v] = Some(idx);
                deliveries.push(Delivery {
                    receiver: v,
                    sender: transmissions[idx].0,
                    message: transmissions[idx].1.clone(),
                });
            }
            _ => collisions.push(v),
        }
    }

    for (v, node) in nodes.iter_mut().enumerate() {
        let message = heard[v].map(|idx| &transmissions[idx].1);
        node.observe(round, message);
    }

    Ok(RoundRecord {
        round,
        transmissions,
        deliveries,
        collisions,
    })
}

/// Runs `protocol` on the labeled graph until it reports completion.
/// `max_rounds` bounds the number of simulated rounds; on timeout the partial
/// trace is returned inside the error.
pub fn run<P: Protocol>(
    protocol: &P,
    lg: &LabeledGraph,
    source: NodeId,
    payload: &[u8],
    max_rounds: Round,
) -> Result<SimulationTrace, SimError> {
    let g = &lg.graph;
    if source >= g.node_count() {
        return Err(SimError::SourceOutOfRange {
            node: source,
            n: g.node_count(),
        });
    }
    let mut nodes: Vec<P::Node> = g
        .nodes()
        .map(|v| protocol.spawn(v, lg.label(v), v == source, payload))
        .collect();
    let mut rounds = Vec::new();
    let mut round = 0;
    loop {
        if protocol.is_complete(&nodes) {
            let final_states = nodes.iter().map(Automaton::summary).collect();
            return Ok(SimulationTrace {
                rounds,
                final_states,
            });
        }
        if round == max_rounds {
            let final_states = nodes.iter().map(Automaton::summary).collect();
            return Err(SimError::Timeout {
                max_rounds,
                partial: Box::new(SimulationTrace {
                    rounds,
                    final_states,
                }),
            });
        }
        round += 1;
        rounds.push(step(&mut nodes, g, round)?);
    }
}

// Wire representation of trace rounds, shared by the CLI files and the
// verifier. Field order is fixed so serialization is byte-deterministic.

#[derive(Serialize, Deserialize)]
pub(crate) struct TxWire {
    pub node: NodeId,
    pub kind: String,
    pub stamp: Option<Round>,
    pub aux: Option<String>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct RxWire {
    pub node: NodeId,
    pub from: NodeId,
    pub kind: String,
    pub stamp: Option<Round>,
    pub aux: Option<String>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct RoundWire {
    pub round: Round,
    pub tx: Vec<TxWire>,
    pub rx: Vec<RxWire>,
    pub collisions: Vec<NodeId>,
}

fn message_to_wire(m: &Message) -> (String, Option<Round>, Option<String>) {
    (m.kind.as_str().to_string(), m.stamp, m.aux_string())
}

fn message_from_wire(
    kind: &str,
    stamp: Option<Round>,
    aux: Option<&str>,
) -> Result<Message, SimError> {
    let kind = MessageKind::parse(kind)
        .ok_or_else(|| SimError::TraceFormat(format!("unknown message kind {kind:?}")))?;
    let mut message = Message {
        kind,
        stamp,
        payload: None,
        horizon: None,
    };
    if let Some(aux) = aux {
        message.apply_aux(aux).map_err(SimError::TraceFormat)?;
    }
    Ok(message)
}

pub(crate) fn rounds_to_wire(rounds: &[RoundRecord]) -> Vec<RoundWire> {
    rounds
        .iter()
        .map(|r| RoundWire {
            round: r.round,
            tx: r
                .transmissions
                .iter()
                .map(|(node, m)| {
                    let (kind, stamp, aux) = message_to_wire(m);
                    TxWire {
                        node: *node,
                        kind,
                        stamp,
                        aux,
                    }
                })
                .collect(),
            rx: r
                .deliveries
                .iter()
                .map(|d| {
                    let (kind, stamp, aux) = message_to_wire(&d.message);
                    RxWire {
                        node: d.receiver,
                        from: d.sender,
                        kind,
                        stamp,
                        aux,
                    }
                })
                .collect(),
            collisions: r.collisions.clone(),
        })
        .collect()
}

pub(crate) fn rounds_from_wire(rounds: Vec<RoundWire>) -> Result<Vec<RoundRecord>, SimError> {
    rounds
        .into_iter()
        .map(|w| {
            Ok(RoundRecord {
                round: w.round,
                transmissions: w
                    .tx
                    .into_iter()
                    .map(|t| Ok((t.node, message_from_wire(&t.kind, t.stamp, t.aux.as_deref())?)))
                    .collect::<Result<_, SimError>>()?,
                deliveries: w
                    .rx
                    .into_iter()
                    .map(|r| {
                        Ok(Delivery {
                            receiver: r.node,
                            sender: r.from,
                            message: message_from_wire(&r.kind, r.stamp, r.aux.as_deref())?,
                        })
                    })
                    .collect::<Result<_, SimError>>()?,
                collisions: w.collisions,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Family;

    /// Transmits `data` in every round listed; otherwise listens. Records
    /// every round in which it heard something.
    struct Beacon {
        transmit_in: Vec<Round>,
        heard_in: Vec<Round>,
    }

    impl Beacon {
        fn new(transmit_in: &[Round]) -> Self {
            Beacon {
                transmit_in: transmit_in.to_vec(),
                heard_in: Vec::new(),
            }
        }
    }

    impl Automaton for Beacon {
        fn decide(&mut self, round: Round) -> Option<Message> {
            self.transmit_in
                .contains(&round)
                .then(|| Message::data(b"x"))
        }

        fn observe(&mut self, round: Round, heard: Option<&Message>) {
            if heard.is_some() {
                self.heard_in.push(round);
            }
        }

        fn summary(&self) -> NodeSummary {
            NodeSummary::default()
        }
    }

    #[test]
    fn single_transmitter_reaches_neighbors() {
        let g = Graph::generate(&Family::Path { n: 4 }, 0).unwrap();
        let mut nodes = vec![
            Beacon::new(&[]),
            Beacon::new(&[1]),
            Beacon::new(&[]),
            Beacon::new(&[]),
        ];
        let record = step(&mut nodes, &g, 1).unwrap();
        assert_eq!(record.transmissions.len(), 1);
        let receivers: Vec<NodeId> = record.deliveries.iter().map(|d| d.receiver).collect();
        assert_eq!(receivers, vec![0, 2]);
        assert!(record.collisions.is_empty());
        assert!(nodes[3].heard_in.is_empty());
    }

    #[test]
    fn two_transmitting_neighbors_collide() {
        let g = Graph::generate(&Family::Star { n: 4 }, 0).unwrap();
        let mut nodes = vec![
            Beacon::new(&[]),
            Beacon::new(&[1]),
            Beacon::new(&[1]),
            Beacon::new(&[]),
        ];
        let record = step(&mut nodes, &g, 1).unwrap();
        assert!(record.deliveries.is_empty());
        assert_eq!(record.collisions, vec![0]);
        // The other leaf is out of range of both transmitters.
        assert!(nodes[3].heard_in.is_empty());
    }

    #[test]
    fn transmitters_hear_nothing() {
        let g = Graph::generate(&Family::Path { n: 2 }, 0).unwrap();
        let mut nodes = vec![Beacon::new(&[1]), Beacon::new(&[1])];
        let record = step(&mut nodes, &g, 1).unwrap();
        assert!(record.deliveries.is_empty());
        assert!(record.collisions.is_empty());
        assert!(nodes[0].heard_in.is_empty() && nodes[1].heard_in.is_empty());
    }

    #[test]
    fn malformed_message_is_a_named_fault() {
        struct Bad;
        impl Automaton for Bad {
            fn decide(&mut self, _round: Round) -> Option<Message> {
                Some(Message {
                    kind: MessageKind::Ready,
                    stamp: Some(1),
                    payload: None,
                    horizon: None,
                })
            }
            fn observe(&mut self, _round: Round, _heard: Option<&Message>) {}
            fn summary(&self) -> NodeSummary {
                NodeSummary::default()
            }
        }
        let g = Graph::generate(&Family::Path { n: 2 }, 0).unwrap();
        let err = step(&mut [Bad, Bad], &g, 3).unwrap_err();
        assert!(matches!(
            err,
            SimError::MalformedMessage { node: 0, round: 3, .. }
        ));
    }

    #[test]
    fn aux_round_trips() {
        let samples = [
            Message::data(b"hello").stamped(7),
            Message::data(b"").with_horizon(9),
            Message::stay(),
            Message::ack(5).with_horizon(11),
            Message::ready(1, 13),
        ];
        for m in samples {
            let (kind, stamp, aux) = message_to_wire(&m);
            let back = message_from_wire(&kind, stamp, aux.as_deref()).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn wire_rounds_round_trip() {
        let record = RoundRecord {
            round: 4,
            transmissions: vec![(1, Message::data(b"m").stamped(4)), (2, Message::stay())],
            deliveries: vec![Delivery {
                receiver: 0,
                sender: 1,
                message: Message::data(b"m").stamped(4),
            }],
            collisions: vec![3],
        };
        let wire = rounds_to_wire(std::slice::from_ref(&record));
        let text = serde_json::to_string(&wire).unwrap();
        let parsed: Vec<RoundWire> = serde_json::from_str(&text).unwrap();
        let back = rounds_from_wire(parsed).unwrap();
        assert_eq!(back, vec![record]);
    }

    #[test]
    fn message_validation_catches_shape_errors() {
        assert!(Message::data(b"x").validate().is_ok());
        let no_payload = Message {
            kind: MessageKind::Data,
            stamp: None,
            payload: None,
            horizon: None,
        };
        assert!(no_payload.validate().is_err());
        assert!(Message::stay().validate().is_ok());
        let odd_stay = Message::stay().carrying(b"x");
        assert!(odd_stay.validate().is_err());
        let bare_ack = Message {
            kind: MessageKind::Ack,
            stamp: None,
            payload: None,
            horizon: None,
        };
        assert!(bare_ack.validate().is_err());
    }
}
