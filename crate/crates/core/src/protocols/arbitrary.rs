//! Broadcast from an arbitrary source under one fixed labeling.
//!
//! The labels are computed for the coordinator (the unique `111` node), yet
//! any node may hold the payload. Three phases run back to back on one
//! continuous clock, each an instance of the labeled broadcast machinery:
//!
//! 1. init: the coordinator broadcasts a probe with acknowledgement. Every
//!    node records the stamp `t_v` of its first probe receipt; the
//!    designated starter's acknowledgement carries the horizon `T`, its own
//!    receipt stamp, by which the whole broadcast is always complete.
//! 2. fetch: skipped when the coordinator is the source. Otherwise the
//!    coordinator broadcasts a ready request carrying `T`. The source
//!    receives it `t_s` rounds into the phase, waits until all broadcast
//!    activity is over, and answers with an acknowledgement carrying the
//!    payload, which travels back to the coordinator over the usual chain.
//! 3. deliver: the coordinator broadcasts the payload with no stamps. Each
//!    node receives it exactly `t_v` rounds into the phase, so after another
//!    `T - t_v` rounds it knows the phase is globally complete. All nodes
//!    therefore finish in the same round, without knowing global round
//!    numbers.
//!
//! Phases two and three replay the same stage schedule as phase one, which
//! is what makes the stored `t_v` meaningful across phases.

use std::collections::BTreeMap;

use crate::labeling::{self, Label};
use crate::sim::{self, Automaton, Message, MessageKind, NodeSummary, Round, SimulationTrace};
use crate::{LabeledGraph, NodeId, Scheme};

use super::{ProtocolError, ProtocolResult, RunOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArbPhase {
    Init,
    Fetch,
    Deliver,
}

impl ArbPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            ArbPhase::Init => "init",
            ArbPhase::Fetch => "fetch",
            ArbPhase::Deliver => "deliver",
        }
    }
}

/// Result of an arbitrary-source run, with the phase boundaries and per-node
/// timing the checkers inspect.
#[derive(Debug, Clone, PartialEq)]
pub struct ArbOutcome {
    pub outcome: RunOutcome,
    pub coordinator: NodeId,
    pub actual_source: NodeId,
    /// Completion horizon `T` announced in phase one.
    pub horizon: Round,
    /// Round the coordinator's phase-one acknowledgement arrived.
    pub init_ack_round: Round,
    pub fetch_start: Option<Round>,
    pub fetch_ack_round: Option<Round>,
    pub deliver_start: Round,
    /// Phase-one probe receipt stamp per node, 0 for the coordinator.
    pub timestamps: Vec<Round>,
    /// Round each node received the payload in phase three; `None` for the
    /// coordinator, which holds it from the phase start.
    pub payload_received_rounds: Vec<Option<Round>>,
    /// Round after which each node knows the broadcast is complete
    /// everywhere; equal across all nodes.
    pub known_complete_rounds: Vec<Round>,
}

/// Per-phase broadcast relay state, reset at every phase boundary.
struct RelayCore {
    x1: bool,
    x2: bool,
    /// Stamped phases restamp retransmissions and stays; the deliver phase
    /// repeats the adopted message verbatim.
    stamped: bool,
    adopted: Option<Message>,
    informed_stamp: Option<Round>,
    informed_round: Option<Round>,
    transmit_rounds: Vec<Round>,
    transmit_stamps: Vec<Round>,
    heard_stay: Option<(Option<Round>, Round)>,
}

impl RelayCore {
    fn new(label: Label, stamped: bool) -> Self {
        RelayCore {
            x1: label.x1,
            x2: label.x2,
            stamped,
            adopted: None,
            informed_stamp: None,
            informed_round: None,
            transmit_rounds: Vec::new(),
            transmit_stamps: Vec::new(),
            heard_stay: None,
        }
    }

    fn adopt_if_new(&mut self, message: &Message, round: Round) -> bool {
        if self.adopted.is_some() {
            return false;
        }
        self.adopted = Some(message.clone());
        self.informed_stamp = message.stamp;
        self.informed_round = Some(round);
        true
    }

    fn observe_stay(&mut self, stamp: Option<Round>, round: Round) {
        self.heard_stay = Some((stamp, round));
    }

    /// Dominator and stay duties; acknowledgement handling stays with the
    /// caller.
    fn decide(&mut self, round: Round) -> Option<Message> {
        let received = self.informed_round?;
        if self.x1 && round == received + 2 {
            return Some(self.retransmission(self.informed_stamp.map(|k| k + 2), round));
        }
        if round == received + 1 {
            if self.x2 {
                let stay = Message::stay();
                return Some(if self.stamped {
                    stay.stamped(self.informed_stamp? + 1)
                } else {
                    stay
                });
            }
            return None;
        }
        if let Some((stamp, heard_in)) = self.heard_stay {
            if heard_in + 1 == round && self.transmit_rounds.last() == Some(&(round - 2)) {
                return Some(self.retransmission(stamp.map(|k| k + 1), round));
            }
        }
        None
    }

    fn retransmission(&mut self, stamp: Option<Round>, round: Round) -> Message {
        let mut message = self.adopted.clone().expect("retransmit requires adoption");
        if self.stamped {
            message.stamp = stamp;
            if let Some(k) = stamp {
                self.transmit_stamps.push(k);
            }
        }
        self.transmit_rounds.push(round);
        message
    }
}

struct ArbNode {
    label: Label,
    is_coordinator: bool,
    is_source: bool,
    phase: ArbPhase,
    core: RelayCore,
    payload: Option<Vec<u8>>,
    /// `t_v`: stamp of the first phase-one probe received.
    timestamp: Option<Round>,
    horizon: Option<Round>,
    last_ack: Option<(Message, Round)>,
    /// Source only: round scheduled for the payload answer in phase two.
    answer_at: Option<Round>,
    payload_received_round: Option<Round>,
    known_complete_at: Option<Round>,
    done: bool,
    all_transmit_rounds: Vec<Round>,
    // Coordinator schedule.
    start_fetch_at: Option<Round>,
    start_deliver_at: Option<Round>,
    init_ack_round: Option<Round>,
    fetch_ack_round: Option<Round>,
}

impl ArbNode {
    fn new(label: Label, is_coordinator: bool, is_source: bool, payload: &[u8]) -> Self {
        ArbNode {
            label,
            is_coordinator,
            is_source,
            phase: ArbPhase::Init,
            core: RelayCore::new(label, true),
            payload: is_source.then(|| payload.to_vec()),
            timestamp: is_coordinator.then_some(0),
            horizon: None,
            last_ack: None,
            answer_at: None,
            payload_received_round: None,
            known_complete_at: None,
            done: false,
            all_transmit_rounds: Vec::new(),
            start_fetch_at: None,
            start_deliver_at: None,
            init_ack_round: None,
            fetch_ack_round: None,
        }
    }

    fn transmit(&mut self, round: Round, message: Message) -> Option<Message> {
        self.all_transmit_rounds.push(round);
        Some(message)
    }

    fn decide_coordinator(&mut self, round: Round) -> Option<Message> {
        if round == 1 {
            return self.transmit(round, Message::init(1));
        }
        if Some(round) == self.start_fetch_at {
            self.phase = ArbPhase::Fetch;
            let horizon = self.horizon.expect("horizon learned with the init ack");
            return self.transmit(round, Message::ready(1, horizon));
        }
        if Some(round) == self.start_deliver_at {
            self.phase = ArbPhase::Deliver;
            let horizon = self.horizon.expect("horizon learned with the init ack");
            self.known_complete_at = Some(round - 1 + horizon);
            let payload = self.payload.clone().expect("deliver phase holds the payload");
            let mut message = Message::data(&payload);
            if self.start_fetch_at.is_none() {
                // Fetch was skipped, so nobody heard a ready request; the
                // payload itself carries the horizon instead.
                message = message.with_horizon(horizon);
            }
            return self.transmit(round, message);
        }
        None
    }

    fn decide_plain(&mut self, round: Round) -> Option<Message> {
        // Designated starter's acknowledgement, phase one only.
        if self.phase == ArbPhase::Init && self.label.x3 {
            if let (Some(received), Some(stamp)) =
                (self.core.informed_round, self.core.informed_stamp)
            {
                if round == received + 1 {
                    return self.transmit(round, Message::ack(stamp).with_horizon(stamp));
                }
            }
        }
        // The source answers the ready request once the fetch broadcast has
        // certainly finished.
        if Some(round) == self.answer_at {
            let stamp = self.core.informed_stamp.expect("answer follows receipt");
            let payload = self.payload.clone().expect("source holds the payload");
            return self.transmit(round, Message::ack(stamp).carrying(&payload));
        }
        // Acknowledgement relay: answers when the incoming stamp names one
        // of this node's own transmissions in the current phase.
        if let Some((message, heard_in)) = &self.last_ack {
            if heard_in + 1 == round {
                if let (Some(k), Some(own)) = (message.stamp, self.core.informed_stamp) {
                    if self.core.transmit_stamps.contains(&k) {
                        let relayed = message.clone().stamped(own);
                        return self.transmit(round, relayed);
                    }
                }
            }
        }
        if let Some(message) = self.core.decide(round) {
            return self.transmit(round, message);
        }
        None
    }

    fn enter(&mut self, phase: ArbPhase) {
        self.phase = phase;
        self.core = RelayCore::new(self.label, phase != ArbPhase::Deliver);
    }

    fn observe_message(&mut self, message: &Message, round: Round) {
        match message.kind {
            MessageKind::Init => {
                if !self.is_coordinator
                    && self.phase == ArbPhase::Init
                    && self.core.adopt_if_new(message, round)
                {
                    self.timestamp = message.stamp;
                }
            }
            MessageKind::Ready => {
                if !self.is_coordinator && self.phase != ArbPhase::Deliver {
                    if self.phase == ArbPhase::Init {
                        self.enter(ArbPhase::Fetch);
                    }
                    if self.core.adopt_if_new(message, round) {
                        self.horizon = message.horizon;
                        if self.is_source {
                            let horizon =
                                message.horizon.expect("ready always carries the horizon");
                            self.answer_at = Some(round + horizon + 1);
                        }
                    }
                }
            }
            MessageKind::Data => {
                if !self.is_coordinator {
                    if self.phase != ArbPhase::Deliver {
                        self.enter(ArbPhase::Deliver);
                    }
                    if self.core.adopt_if_new(message, round) {
                        self.payload = message.payload.clone();
                        self.payload_received_round = Some(round);
                        if message.horizon.is_some() {
                            self.horizon = message.horizon;
                        }
                        if let (Some(horizon), Some(t)) = (self.horizon, self.timestamp) {
                            self.known_complete_at = Some(round + horizon.saturating_sub(t));
                        }
                    }
                }
            }
            MessageKind::Stay => {
                if !self.is_coordinator {
                    self.core.observe_stay(message.stamp, round);
                }
            }
            MessageKind::Ack => {
                self.last_ack = Some((message.clone(), round));
                if self.is_coordinator {
                    match self.phase {
                        ArbPhase::Init if self.init_ack_round.is_none() => {
                            self.init_ack_round = Some(round);
                            self.horizon = message.horizon;
                            if self.payload.is_some() {
                                self.start_deliver_at = Some(round + 1);
                            } else {
                                self.start_fetch_at = Some(round + 1);
                            }
                        }
                        ArbPhase::Fetch if self.fetch_ack_round.is_none() => {
                            self.fetch_ack_round = Some(round);
                            self.payload = message.payload.clone();
                            self.start_deliver_at = Some(round + 1);
                        }
                        _ => {}
                    }
                }
            }
        }
    }
}

impl Automaton for ArbNode {
    fn decide(&mut self, round: Round) -> Option<Message> {
        if self.is_coordinator {
            self.decide_coordinator(round)
        } else {
            self.decide_plain(round)
        }
    }

    fn observe(&mut self, round: Round, heard: Option<&Message>) {
        if let Some(message) = heard {
            self.observe_message(message, round);
        }
        if let Some(k) = self.known_complete_at {
            if round >= k {
                self.done = true;
            }
        }
    }

    fn summary(&self) -> NodeSummary {
        let mut flags = BTreeMap::new();
        if let Some(t) = self.timestamp {
            flags.insert("timestamp".to_string(), u64::from(t));
        }
        if let Some(k) = self.known_complete_at {
            flags.insert("known_complete_round".to_string(), u64::from(k));
        }
        if self.is_coordinator {
            flags.insert("coordinator".to_string(), 1);
            if let Some(r) = self.init_ack_round {
                flags.insert("init_ack_round".to_string(), u64::from(r));
            }
            if let Some(r) = self.fetch_ack_round {
                flags.insert("fetch_ack_round".to_string(), u64::from(r));
            }
        }
        NodeSummary {
            informed_round: if self.is_coordinator || self.is_source {
                Some(0)
            } else {
                self.payload_received_round
            },
            transmit_rounds: self.all_transmit_rounds.clone(),
            flags,
        }
    }
}

/// Runs the three-phase protocol for a given actual source. `max_rounds`
/// budgets each phase separately; the fetch phase additionally gets the
/// announced horizon on top, since the source sits out that long by design.
pub fn run_arbitrary_source(
    lg: &LabeledGraph,
    actual_source: NodeId,
    payload: &[u8],
    max_rounds: Round,
) -> Result<ArbOutcome, ProtocolError> {
    if lg.scheme != Scheme::ArbitrarySource {
        return Err(ProtocolError::SchemeMismatch {
            expected: "arbitrary-source",
            found: lg.scheme.as_str(),
        });
    }
    let g = &lg.graph;
    if actual_source >= g.node_count() {
        return Err(ProtocolError::Sim(sim::SimError::SourceOutOfRange {
            node: actual_source,
            n: g.node_count(),
        }));
    }
    let coordinator = labeling::coordinator(lg).ok_or(ProtocolError::NoCoordinator)?;

    let mut nodes: Vec<ArbNode> = g
        .nodes()
        .map(|v| {
            ArbNode::new(
                lg.label(v),
                v == coordinator,
                v == actual_source,
                payload,
            )
        })
        .collect();

    let mut rounds = Vec::new();
    let mut round: Round = 0;
    let mut phase = ArbPhase::Init;
    let mut phase_start: Round = 1;
    loop {
        if nodes.iter().all(|n| n.done) {
            break;
        }
        let budget = match phase {
            ArbPhase::Fetch => {
                let horizon = nodes[coordinator].horizon.unwrap_or(0);
                max_rounds.saturating_add(horizon + 1)
            }
            _ => max_rounds,
        };
        if round + 1 - phase_start >= budget {
            let final_states = nodes.iter().map(Automaton::summary).collect();
            return Err(ProtocolError::Timeout {
                phase: Some(phase),
                max_rounds: budget,
                partial: Box::new(SimulationTrace {
                    rounds,
                    final_states,
                }),
            });
        }
        round += 1;
        rounds.push(sim::step(&mut nodes, g, round)?);

        let c = &nodes[coordinator];
        match phase {
            ArbPhase::Init if c.init_ack_round == Some(round) => {
                phase = if c.start_fetch_at.is_some() {
                    ArbPhase::Fetch
                } else {
                    ArbPhase::Deliver
                };
                phase_start = round + 1;
            }
            ArbPhase::Fetch if c.fetch_ack_round == Some(round) => {
                phase = ArbPhase::Deliver;
                phase_start = round + 1;
            }
            _ => {}
        }
    }

    let final_states: Vec<NodeSummary> = nodes.iter().map(Automaton::summary).collect();
    let trace = SimulationTrace {
        rounds,
        final_states,
    };
    let c = &nodes[coordinator];
    let completion_round = trace.last_round();
    let informed_rounds = trace
        .final_states
        .iter()
        .map(|s| s.informed_round)
        .collect();
    Ok(ArbOutcome {
        coordinator,
        actual_source,
        horizon: c.horizon.unwrap_or(0),
        init_ack_round: c.init_ack_round.unwrap_or(0),
        fetch_start: c.start_fetch_at,
        fetch_ack_round: c.fetch_ack_round,
        deliver_start: c.start_deliver_at.unwrap_or(0),
        timestamps: nodes.iter().map(|n| n.timestamp.unwrap_or(0)).collect(),
        payload_received_rounds: nodes.iter().map(|n| n.payload_received_round).collect(),
        known_complete_rounds: nodes
            .iter()
            .map(|n| n.known_complete_at.unwrap_or(0))
            .collect(),
        outcome: RunOutcome {
            trace,
            result: ProtocolResult {
                completion_round,
                ack_round: None,
                common_known_round: Some(completion_round),
                informed_rounds,
            },
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Family, Graph};
    use crate::labeling::arbitrary_source_labels;

    fn run_on(g: &Graph, actual_source: NodeId) -> ArbOutcome {
        let lg = arbitrary_source_labels(g).unwrap();
        let max = super::super::default_max_rounds(g.node_count());
        run_arbitrary_source(&lg, actual_source, b"msg", max).unwrap()
    }

    #[test]
    fn pair_with_remote_source() {
        let g = Graph::generate(&Family::Path { n: 2 }, 0).unwrap();
        let out = run_on(&g, 1);
        assert_eq!(out.horizon, 1);
        assert_eq!(out.init_ack_round, 2);
        assert_eq!(out.fetch_start, Some(3));
        // Source hears the ready in round 3 and answers after the horizon
        // plus one quiet round.
        assert_eq!(out.fetch_ack_round, Some(5));
        assert_eq!(out.deliver_start, 6);
        assert_eq!(out.known_complete_rounds, vec![6, 6]);
        assert_eq!(out.outcome.result.completion_round, 6);
    }

    #[test]
    fn pair_with_coordinator_as_source() {
        let g = Graph::generate(&Family::Path { n: 2 }, 0).unwrap();
        let out = run_on(&g, 0);
        assert_eq!(out.init_ack_round, 2);
        assert_eq!(out.fetch_start, None);
        assert_eq!(out.deliver_start, 3);
        // The payload message itself carries the horizon.
        assert_eq!(out.known_complete_rounds, vec![3, 3]);
        assert_eq!(out.timestamps, vec![0, 1]);
    }

    #[test]
    fn gadget_completes_coincidentally_from_every_source() {
        let g = Graph::from_edges(6, [(0, 1), (0, 2), (1, 3), (2, 4), (1, 5), (2, 5)]).unwrap();
        for source in 0..6 {
            let out = run_on(&g, source);
            assert_eq!(out.horizon, 5, "source {source}");
            let expected = out.known_complete_rounds[0];
            assert!(
                out.known_complete_rounds.iter().all(|&k| k == expected),
                "differing completion knowledge from source {source}"
            );
            assert_eq!(out.outcome.result.completion_round, expected);
            // Everyone ends up holding the payload.
            for (v, received) in out.payload_received_rounds.iter().enumerate() {
                assert!(
                    received.is_some() || v == out.coordinator,
                    "node {v} missed the payload from source {source}"
                );
            }
        }
    }

    #[test]
    fn gadget_far_source_timing() {
        let g = Graph::from_edges(6, [(0, 1), (0, 2), (1, 3), (2, 4), (1, 5), (2, 5)]).unwrap();
        let out = run_on(&g, 5);
        // t_5 = 5 and T = 5: the answer lands 11 rounds into the fetch
        // phase, then the acknowledgement chain walks back to node 0.
        assert_eq!(out.timestamps[5], 5);
        assert_eq!(out.fetch_start, Some(8));
        let fetch_local_ack = out.fetch_ack_round.unwrap() - (out.fetch_start.unwrap() - 1);
        assert!(fetch_local_ack > 11, "chain takes at least one relay");
        assert_eq!(out.timestamps, vec![0, 1, 1, 3, 3, 5]);
    }

    #[test]
    fn deliver_phase_replays_the_probe_schedule() {
        for seed in 0..10 {
            let g = Graph::generate(&Family::Random { n: 10, p: 0.3 }, seed).unwrap();
            for source in [0, 4, 9] {
                let out = run_on(&g, source);
                for v in g.nodes() {
                    if v == out.coordinator {
                        continue;
                    }
                    let local = out.payload_received_rounds[v].unwrap() - (out.deliver_start - 1);
                    assert_eq!(local, out.timestamps[v], "node {v}, source {source}");
                }
            }
        }
    }

    #[test]
    fn rejects_wrong_scheme_and_bad_source() {
        let g = Graph::generate(&Family::Path { n: 4 }, 0).unwrap();
        let ack = crate::labeling::acknowledged_labels(&g, 0).unwrap();
        assert!(matches!(
            run_arbitrary_source(&ack, 1, b"x", 64),
            Err(ProtocolError::SchemeMismatch { .. })
        ));
        let lg = arbitrary_source_labels(&g).unwrap();
        assert!(matches!(
            run_arbitrary_source(&lg, 9, b"x", 64),
            Err(ProtocolError::Sim(sim::SimError::SourceOutOfRange { .. }))
        ));
    }
}
