//! The broadcast protocols, built on labels and the simulator.
//!
//! * [`run_broadcast`]: plain labeled broadcast, complete once everyone
//!   holds the payload;
//! * [`run_acknowledged`]: broadcast with a stamped-message global clock and
//!   an acknowledgement chain back to the source;
//! * [`run_common_round`]: acknowledged broadcast whose source then
//!   broadcasts its acknowledgement round `m`; by round `2m` every node
//!   knows that broadcast finished, and knows that everyone else knows the
//!   deadline too;
//! * [`run_arbitrary_source`]: three phases coordinated by the designated
//!   `111` node, letting any node act as the source under one fixed
//!   labeling.

mod acknowledged;
mod arbitrary;
mod broadcast;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeId;
use crate::sim::{self, NodeSummary, Round, SimError, SimulationTrace};

pub use acknowledged::run_acknowledged;
pub use arbitrary::{run_arbitrary_source, ArbOutcome, ArbPhase};
pub use broadcast::run_broadcast;

pub(crate) use broadcast::BroadcastProtocol;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("labels use the {found} scheme, protocol needs {expected}")]
    SchemeMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("labels were computed for source {labeled}, run requested source {given}")]
    SourceMismatch { given: NodeId, labeled: NodeId },
    #[error("labels designate no acknowledgement starter")]
    NoDesignatedNode,
    #[error("labels designate no coordinator")]
    NoCoordinator,
    #[error(transparent)]
    Sim(SimError),
    #[error(
        "no completion within {max_rounds} rounds of the {} phase",
        .phase.map_or("whole", ArbPhase::as_str)
    )]
    Timeout {
        phase: Option<ArbPhase>,
        max_rounds: Round,
        partial: Box<SimulationTrace>,
    },
    #[error("node {node} learned the completion deadline in round {round}, not before {deadline}")]
    DeadlineOverrun {
        node: NodeId,
        round: Round,
        deadline: Round,
    },
    #[error("malformed trace file: {0}")]
    TraceFormat(String),
}

impl From<SimError> for ProtocolError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Timeout { max_rounds, partial } => ProtocolError::Timeout {
                phase: None,
                max_rounds,
                partial,
            },
            SimError::TraceFormat(detail) => ProtocolError::TraceFormat(detail),
            other => ProtocolError::Sim(other),
        }
    }
}

/// Protocol selector shared by the CLI and the trace file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolKind {
    Broadcast,
    Acknowledged,
    CommonRound,
    ArbitrarySource,
}

impl ProtocolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::Broadcast => "broadcast",
            ProtocolKind::Acknowledged => "acknowledged",
            ProtocolKind::CommonRound => "common-round",
            ProtocolKind::ArbitrarySource => "arbitrary-source",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        Some(match text {
            "broadcast" | "b" => ProtocolKind::Broadcast,
            "acknowledged" | "ack" => ProtocolKind::Acknowledged,
            "common-round" | "common" => ProtocolKind::CommonRound,
            "arbitrary-source" | "arb" => ProtocolKind::ArbitrarySource,
            _ => return None,
        })
    }
}

/// What a protocol run established. `completion_round` is the round at which
/// the protocol's own terminal condition held: everyone informed for plain
/// broadcast, source acknowledged for the acknowledged protocol, common
/// knowledge of completion for the wrapper and the arbitrary-source runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolResult {
    pub completion_round: Round,
    pub ack_round: Option<Round>,
    pub common_known_round: Option<Round>,
    pub informed_rounds: Vec<Option<Round>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub trace: SimulationTrace,
    pub result: ProtocolResult,
}

/// Default simulation budget for a graph on `n` nodes; every protocol and
/// every phase fits well inside it. The arbitrary-source second phase also
/// waits out the horizon announced in phase one, so its budget is this value
/// plus that horizon.
pub fn default_max_rounds(n: usize) -> Round {
    (4 * n + 16) as Round
}

/// Acknowledged broadcast followed by a broadcast of the acknowledgement
/// round `m`, rounds renumbered to continue from `m`. Every node receives
/// `m` strictly before round `2m`, making `2m` a commonly known round by
/// which the payload broadcast is everywhere complete.
pub fn run_common_round(
    lg: &crate::labeling::LabeledGraph,
    source: NodeId,
    payload: &[u8],
    max_rounds: Round,
) -> Result<RunOutcome, ProtocolError> {
    let first = run_acknowledged(lg, source, payload, max_rounds)?;
    run_common_round_from(first, lg, source, max_rounds)
}

/// Extends a finished acknowledged run into the wrapper without re-running
/// its simulation.
pub fn run_common_round_from(
    first: RunOutcome,
    lg: &crate::labeling::LabeledGraph,
    source: NodeId,
    max_rounds: Round,
) -> Result<RunOutcome, ProtocolError> {
    let m = first
        .result
        .ack_round
        .expect("acknowledged run always sets ack_round");

    let follow_up = sim::run(
        &BroadcastProtocol,
        lg,
        source,
        m.to_string().as_bytes(),
        max_rounds,
    )?;

    let deadline = 2 * m;
    let mut trace = first.trace;
    let mut final_states = std::mem::take(&mut trace.final_states);
    for mut record in follow_up.rounds {
        record.round += m;
        trace.rounds.push(record);
    }
    for (node, (state, wrapup)) in final_states
        .iter_mut()
        .zip(&follow_up.final_states)
        .enumerate()
    {
        let learned = if node == source {
            m
        } else {
            let local = wrapup
                .informed_round
                .expect("plain broadcast informs everyone");
            m + local
        };
        if learned >= deadline {
            return Err(ProtocolError::DeadlineOverrun {
                node,
                round: learned,
                deadline,
            });
        }
        state.flags.insert("deadline_received_round".into(), learned.into());
        state.flags.insert("known_complete_round".into(), deadline.into());
    }
    trace.final_states = final_states;

    let informed_rounds = trace
        .final_states
        .iter()
        .map(|s| s.informed_round)
        .collect();
    Ok(RunOutcome {
        trace,
        result: ProtocolResult {
            completion_round: deadline,
            ack_round: Some(m),
            common_known_round: Some(deadline),
            informed_rounds,
        },
    })
}

// Trace file format: {"rounds": [...], "final": {...}}. Field order is
// fixed; serialization is byte-deterministic for identical runs.

#[derive(Serialize, Deserialize)]
struct NodeWire {
    node: NodeId,
    informed_round: Option<Round>,
    transmit_rounds: Vec<Round>,
    flags: BTreeMap<String, u64>,
}

#[derive(Serialize, Deserialize)]
struct FinalWire {
    protocol: String,
    completion_round: Round,
    ack_round: Option<Round>,
    common_known_round: Option<Round>,
    nodes: Vec<NodeWire>,
}

#[derive(Serialize, Deserialize)]
struct TraceFile {
    rounds: Vec<sim::RoundWire>,
    #[serde(rename = "final")]
    summary: FinalWire,
}

/// A trace file read back for verification.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTrace {
    pub kind: ProtocolKind,
    pub trace: SimulationTrace,
    pub result: ProtocolResult,
}

pub fn to_trace_json(kind: ProtocolKind, outcome: &RunOutcome) -> String {
    let file = TraceFile {
        rounds: sim::rounds_to_wire(&outcome.trace.rounds),
        summary: FinalWire {
            protocol: kind.as_str().to_string(),
            completion_round: outcome.result.completion_round,
            ack_round: outcome.result.ack_round,
            common_known_round: outcome.result.common_known_round,
            nodes: outcome
                .trace
                .final_states
                .iter()
                .enumerate()
                .map(|(node, s)| NodeWire {
                    node,
                    informed_round: s.informed_round,
                    transmit_rounds: s.transmit_rounds.clone(),
                    flags: s.flags.clone(),
                })
                .collect(),
        },
    };
    let mut out = serde_json::to_string_pretty(&file).expect("trace serialize");
    out.push('\n');
    out
}

pub fn parse_trace_json(text: &str) -> Result<ParsedTrace, ProtocolError> {
    let file: TraceFile =
        serde_json::from_str(text).map_err(|e| ProtocolError::TraceFormat(e.to_string()))?;
    let kind = ProtocolKind::parse(&file.summary.protocol).ok_or_else(|| {
        ProtocolError::TraceFormat(format!("unknown protocol {:?}", file.summary.protocol))
    })?;
    let rounds = sim::rounds_from_wire(file.rounds)?;
    let mut final_states = vec![NodeSummary::default(); file.summary.nodes.len()];
    for (idx, wire) in file.summary.nodes.iter().enumerate() {
        if wire.node != idx {
            return Err(ProtocolError::TraceFormat(format!(
                "node summaries out of order at index {idx}"
            )));
        }
        final_states[idx] = NodeSummary {
            informed_round: wire.informed_round,
            transmit_rounds: wire.transmit_rounds.clone(),
            flags: wire.flags.clone(),
        };
    }
    let informed_rounds = final_states.iter().map(|s| s.informed_round).collect();
    Ok(ParsedTrace {
        kind,
        trace: SimulationTrace {
            rounds,
            final_states,
        },
        result: ProtocolResult {
            completion_round: file.summary.completion_round,
            ack_round: file.summary.ack_round,
            common_known_round: file.summary.common_known_round,
            informed_rounds,
        },
    })
}

pub(crate) fn ensure_source_matches(
    lg: &crate::labeling::LabeledGraph,
    source: NodeId,
) -> Result<(), ProtocolError> {
    match lg.source_used {
        Some(labeled) if labeled != source => {
            Err(ProtocolError::SourceMismatch {
                given: source,
                labeled,
            })
        }
        _ => Ok(()),
    }
}
