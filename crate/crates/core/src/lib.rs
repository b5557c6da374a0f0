//! Deterministic broadcast in synchronous radio networks with constant-length
//! node labels.
//!
//! A radio network is an undirected connected graph in which time proceeds in
//! synchronous rounds. In every round each node either transmits or listens.
//! A listening node receives a message only when exactly one of its neighbors
//! transmits; simultaneous transmissions by two or more neighbors collide and
//! are indistinguishable from silence, and there is no collision detection.
//!
//! Under these rules, unlabeled deterministic broadcast is impossible in some
//! networks. This crate implements a preprocessing scheme that assigns every
//! node a label of two or three bits, together with protocols that use those
//! labels to complete broadcast deterministically and quickly:
//!
//! * [`protocols::run_broadcast`]: source-to-all broadcast completing in round
//!   `2l - 3 <= 2n - 3`, where `l` is the number of layers in the stage
//!   decomposition of the graph from the source.
//! * [`protocols::run_acknowledged`]: broadcast followed by an acknowledgement
//!   that travels back to the source over a chain of former transmitters, so
//!   the source learns that everyone is informed.
//! * [`protocols::run_common_round`]: acknowledged broadcast of the round
//!   number at which the source was acknowledged, after which all nodes know a
//!   common round by which broadcast is globally complete.
//! * [`protocols::run_arbitrary_source`]: a three-phase protocol whose labels
//!   are independent of the source, so any node may initiate a broadcast.
//!
//! The building blocks are exposed directly: [`graph`] for parsing and
//! generating networks, [`decomposition`] for the stage decomposition,
//! [`labeling`] for the label assignments, [`sim`] for the round-synchronous
//! simulator, and [`verify`] for independent checkers that validate
//! decompositions, labelings and traces against their defining properties.
//!
//! Everything here is deterministic: the same inputs produce byte-identical
//! decompositions, labels, traces and reports.

pub mod decomposition;
pub mod graph;
pub mod labeling;
pub mod protocols;
pub mod sim;
pub mod verify;

pub use decomposition::{minimal_dominating_subset, DecompositionError, Stage, StageDecomposition};
pub use graph::{Family, Graph, GraphError, NodeId, NodeSet};
pub use labeling::{
    acknowledged_labels, arbitrary_source_labels, broadcast_labels, last_informed_node, Label,
    LabeledGraph, LabelingError, Scheme,
};
pub use protocols::{
    default_max_rounds, parse_trace_json, run_acknowledged, run_arbitrary_source, run_broadcast,
    run_common_round, run_common_round_from, to_trace_json, ArbOutcome, ArbPhase, ParsedTrace,
    ProtocolError, ProtocolKind, ProtocolResult, RunOutcome,
};
pub use sim::{
    Automaton, Delivery, Message, MessageKind, NodeSummary, Round, RoundRecord, SimError,
    SimulationTrace,
};
pub use verify::{
    check_acknowledged_trace, check_arbitrary, check_broadcast_trace, check_common_round_trace,
    check_decomposition, check_labels, check_trace, exhaustive_small_graphs,
    for_each_connected_graph, graph_signature, CheckEntry, CheckReport, ExhaustiveOptions,
    ExhaustiveSummary,
};
