//! Constant-length node labels derived from the stage decomposition.
//!
//! Three schemes, in increasing width:
//!
//! * broadcast, 2 bits per node: `x1` marks nodes that act as dominators in
//!   some stage, `x2` marks one designated neighbor per repeated dominator
//!   which tells it to transmit again ("stay") in the following round;
//! * acknowledged, 3 bits: the broadcast bits plus `x3` on a single node, the
//!   lowest-id member of the last newly informed set, which starts the
//!   acknowledgement back to the source;
//! * arbitrary-source, 3 bits: acknowledged labels computed from the fixed
//!   coordinator node 0, whose own label is overridden to `111`. No other
//!   node can ever carry `111` (that would need `x2` and `x3` together), so
//!   the coordinator is recognizable and the labels work for any source.
//!
//! An acknowledged label never has `x3` set together with `x1` or `x2`: the
//! designated node is newly informed in the last stage, hence never a
//! dominator and never asked to prompt one.

use serde::{Deserialize, Serialize};

use thiserror::Error;

use crate::decomposition::{DecompositionError, StageDecomposition};
use crate::graph::{Graph, NodeId};

#[derive(Debug, Error, PartialEq)]
pub enum LabelingError {
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error("scheme needs at least two nodes")]
    SingleNode,
    #[error("dominator {dominator} in stage {stage} has no newly informed neighbor")]
    NoEligibleStayMarker { dominator: NodeId, stage: usize },
    #[error("expected {expected} labels, found {found}")]
    LabelCount { expected: usize, found: usize },
    #[error("label {text:?} for node {node}: expected {width} bits")]
    LabelShape {
        node: NodeId,
        text: String,
        width: usize,
    },
    #[error("unknown scheme {0:?}")]
    UnknownScheme(String),
    #[error("scheme {scheme} requires a source node")]
    SourceRequired { scheme: &'static str },
    #[error("scheme {scheme} does not take a source node")]
    SourceForbidden { scheme: &'static str },
    #[error("source {node} out of range for a graph on {n} nodes")]
    SourceOutOfRange { node: NodeId, n: usize },
    #[error("malformed labels json: {0}")]
    Json(String),
}

/// Label scheme; decides bit width and which protocols the labels support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scheme {
    Broadcast,
    Acknowledged,
    ArbitrarySource,
}

impl Scheme {
    pub fn width(self) -> usize {
        match self {
            Scheme::Broadcast => 2,
            Scheme::Acknowledged | Scheme::ArbitrarySource => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Broadcast => "broadcast",
            Scheme::Acknowledged => "acknowledged",
            Scheme::ArbitrarySource => "arbitrary-source",
        }
    }

    pub fn parse(text: &str) -> Result<Self, LabelingError> {
        match text {
            "broadcast" | "b" => Ok(Scheme::Broadcast),
            "acknowledged" | "ack" => Ok(Scheme::Acknowledged),
            "arbitrary-source" | "arb" => Ok(Scheme::ArbitrarySource),
            other => Err(LabelingError::UnknownScheme(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Label {
    pub x1: bool,
    pub x2: bool,
    pub x3: bool,
}

impl Label {
    pub fn new(x1: bool, x2: bool, x3: bool) -> Self {
        Label { x1, x2, x3 }
    }

    /// Renders at the scheme's width, most significant bit `x1` first.
    pub fn bits(&self, scheme: Scheme) -> String {
        let mut s = String::with_capacity(3);
        s.push(if self.x1 { '1' } else { '0' });
        s.push(if self.x2 { '1' } else { '0' });
        if scheme.width() == 3 {
            s.push(if self.x3 { '1' } else { '0' });
        }
        s
    }

    pub fn parse(text: &str, scheme: Scheme, node: NodeId) -> Result<Self, LabelingError> {
        let width = scheme.width();
        let bits: Vec<bool> = text
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(()),
            })
            .collect::<Result<_, _>>()
            .map_err(|()| LabelingError::LabelShape {
                node,
                text: text.to_string(),
                width,
            })?;
        if bits.len() != width {
            return Err(LabelingError::LabelShape {
                node,
                text: text.to_string(),
                width,
            });
        }
        Ok(Label {
            x1: bits[0],
            x2: bits[1],
            x3: bits.get(2).copied().unwrap_or(false),
        })
    }
}

/// A graph together with one label per node under a fixed scheme.
/// `source_used` records the source the labels were computed for; it is
/// `None` for the arbitrary-source scheme, whose labels fit every source.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    pub graph: Graph,
    pub labels: Vec<Label>,
    pub scheme: Scheme,
    pub source_used: Option<NodeId>,
}

#[derive(Serialize, Deserialize)]
struct LabelsFile {
    scheme: String,
    source: Option<NodeId>,
    labels: Vec<String>,
}

impl LabeledGraph {
    pub fn label(&self, v: NodeId) -> Label {
        self.labels[v]
    }

    /// Nodes whose label has the given bit set; `bit` is 1, 2 or 3.
    pub fn nodes_with_bit(&self, bit: u8) -> impl Iterator<Item = NodeId> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, l)| match bit {
                1 => l.x1,
                2 => l.x2,
                3 => l.x3,
                _ => false,
            })
            .map(|(v, _)| v)
    }

    pub fn to_labels_json(&self) -> String {
        let file = LabelsFile {
            scheme: self.scheme.as_str().to_string(),
            source: self.source_used,
            labels: self
                .labels
                .iter()
                .map(|l| l.bits(self.scheme))
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&file).expect("labels serialize");
        out.push('\n');
        out
    }

    /// Parses a labels file against `graph`. Shape is validated here; whether
    /// the bits are semantically correct for the graph is the verifier's job.
    pub fn from_labels_json(graph: Graph, text: &str) -> Result<Self, LabelingError> {
        let file: LabelsFile =
            serde_json::from_str(text).map_err(|e| LabelingError::Json(e.to_string()))?;
        let scheme = Scheme::parse(&file.scheme)?;
        match (scheme, file.source) {
            (Scheme::ArbitrarySource, Some(_)) => {
                return Err(LabelingError::SourceForbidden {
                    scheme: scheme.as_str(),
                })
            }
            (Scheme::ArbitrarySource, None) => {}
            (_, None) => {
                return Err(LabelingError::SourceRequired {
                    scheme: scheme.as_str(),
                })
            }
            (_, Some(s)) if s >= graph.node_count() => {
                return Err(LabelingError::SourceOutOfRange {
                    node: s,
                    n: graph.node_count(),
                })
            }
            _ => {}
        }
        if file.labels.len() != graph.node_count() {
            return Err(LabelingError::LabelCount {
                expected: graph.node_count(),
                found: file.labels.len(),
            });
        }
        let labels = file
            .labels
            .iter()
            .enumerate()
            .map(|(v, text)| Label::parse(text, scheme, v))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LabeledGraph {
            graph,
            labels,
            scheme,
            source_used: file.source,
        })
    }
}

/// Broadcast bits shared by all schemes, computed from a decomposition.
fn stage_bits(g: &Graph, d: &StageDecomposition) -> Result<Vec<Label>, LabelingError> {
    let mut labels = vec![Label::default(); g.node_count()];
    for (_, stage) in d.stages() {
        for &v in &stage.dominators {
            labels[v].x1 = true;
        }
    }
    // A dominator kept for the next stage is prompted by one designated
    // neighbor among the nodes it just informed.
    for (i, stage) in d.stages() {
        if i + 1 > d.last_stage() {
            break;
        }
        let next = d.stage(i + 1);
        for v in stage.dominators.intersection(&next.dominators) {
            let marker = g
                .neighbors(*v)
                .iter()
                .copied()
                .find(|w| stage.newly_informed.contains(w));
            match marker {
                Some(w) => labels[w].x2 = true,
                None => {
                    return Err(LabelingError::NoEligibleStayMarker {
                        dominator: *v,
                        stage: i,
                    })
                }
            }
        }
    }
    Ok(labels)
}

pub fn broadcast_labels(g: &Graph, source: NodeId) -> Result<LabeledGraph, LabelingError> {
    let d = StageDecomposition::build(g, source)?;
    broadcast_labels_from(g, &d)
}

/// As [`broadcast_labels`], reusing an already built decomposition.
pub fn broadcast_labels_from(
    g: &Graph,
    d: &StageDecomposition,
) -> Result<LabeledGraph, LabelingError> {
    Ok(LabeledGraph {
        labels: stage_bits(g, d)?,
        graph: g.clone(),
        scheme: Scheme::Broadcast,
        source_used: Some(d.source()),
    })
}

/// The designated acknowledgement starter: lowest-id node informed in the
/// last productive stage. Needs at least two nodes.
pub fn last_informed_node(g: &Graph, source: NodeId) -> Result<NodeId, LabelingError> {
    let d = StageDecomposition::build(g, source)?;
    designated_node(&d)
}

/// As [`last_informed_node`], reusing an already built decomposition.
pub fn last_informed_node_from(d: &StageDecomposition) -> Result<NodeId, LabelingError> {
    designated_node(d)
}

fn designated_node(d: &StageDecomposition) -> Result<NodeId, LabelingError> {
    let l = d.last_stage();
    if l < 2 {
        return Err(LabelingError::SingleNode);
    }
    let last = &d.stage(l - 1).newly_informed;
    Ok(*last.iter().next().expect("productive stage is non-empty"))
}

pub fn acknowledged_labels(g: &Graph, source: NodeId) -> Result<LabeledGraph, LabelingError> {
    let d = StageDecomposition::build(g, source)?;
    acknowledged_labels_from(g, &d)
}

/// As [`acknowledged_labels`], reusing an already built decomposition.
pub fn acknowledged_labels_from(
    g: &Graph,
    d: &StageDecomposition,
) -> Result<LabeledGraph, LabelingError> {
    let mut labels = stage_bits(g, d)?;
    let z = designated_node(d)?;
    debug_assert!(!labels[z].x1 && !labels[z].x2);
    labels[z].x3 = true;
    Ok(LabeledGraph {
        labels,
        graph: g.clone(),
        scheme: Scheme::Acknowledged,
        source_used: Some(d.source()),
    })
}

/// Labels that support broadcast from any source: acknowledged labels for
/// coordinator 0, with the coordinator itself relabeled `111`.
pub fn arbitrary_source_labels(g: &Graph) -> Result<LabeledGraph, LabelingError> {
    let d = StageDecomposition::build(g, 0)?;
    arbitrary_source_labels_from(g, &d)
}

/// As [`arbitrary_source_labels`], reusing a decomposition built for node 0.
pub fn arbitrary_source_labels_from(
    g: &Graph,
    d: &StageDecomposition,
) -> Result<LabeledGraph, LabelingError> {
    let mut lg = acknowledged_labels_from(g, d)?;
    lg.labels[d.source()] = Label::new(true, true, true);
    lg.scheme = Scheme::ArbitrarySource;
    lg.source_used = None;
    Ok(lg)
}

/// The coordinator of an arbitrary-source labeling: the unique `111` node.
pub fn coordinator(lg: &LabeledGraph) -> Option<NodeId> {
    lg.labels
        .iter()
        .position(|l| l.x1 && l.x2 && l.x3)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Family;

    fn bits_of(lg: &LabeledGraph) -> Vec<String> {
        lg.labels.iter().map(|l| l.bits(lg.scheme)).collect()
    }

    fn gadget6() -> Graph {
        Graph::from_edges(6, [(0, 1), (0, 2), (1, 3), (2, 4), (1, 5), (2, 5)]).unwrap()
    }

    #[test]
    fn broadcast_labels_fixtures() {
        let path = Graph::generate(&Family::Path { n: 3 }, 0).unwrap();
        let lg = broadcast_labels(&path, 0).unwrap();
        assert_eq!(bits_of(&lg), ["10", "10", "00"]);

        let square = Graph::from_edges(4, [(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap();
        let lg = broadcast_labels(&square, 0).unwrap();
        assert_eq!(bits_of(&lg), ["10", "00", "10", "00"]);

        let lg = broadcast_labels(&gadget6(), 0).unwrap();
        assert_eq!(bits_of(&lg), ["10", "10", "10", "00", "01", "00"]);
    }

    #[test]
    fn both_bits_can_be_set_at_once() {
        // Node 4 dominates stage 3 and also prompts dominator 2, which
        // stays from stage 2 to 3.
        let g = Graph::from_edges(
            7,
            [(0, 1), (0, 2), (1, 3), (2, 4), (1, 5), (2, 5), (4, 6)],
        )
        .unwrap();
        let lg = broadcast_labels(&g, 0).unwrap();
        assert_eq!(bits_of(&lg), ["10", "10", "10", "00", "11", "00", "00"]);
    }

    #[test]
    fn designated_node_fixtures() {
        assert_eq!(last_informed_node(&gadget6(), 0).unwrap(), 5);
        let path = Graph::generate(&Family::Path { n: 3 }, 0).unwrap();
        assert_eq!(last_informed_node(&path, 0).unwrap(), 2);
        let single = Graph::from_edges(1, []).unwrap();
        assert_eq!(
            last_informed_node(&single, 0),
            Err(LabelingError::SingleNode)
        );
    }

    #[test]
    fn acknowledged_labels_fixtures() {
        let lg = acknowledged_labels(&gadget6(), 0).unwrap();
        assert_eq!(
            bits_of(&lg),
            ["100", "100", "100", "000", "010", "001"]
        );
        let pair = Graph::from_edges(2, [(0, 1)]).unwrap();
        let lg = acknowledged_labels(&pair, 0).unwrap();
        assert_eq!(bits_of(&lg), ["100", "001"]);
    }

    #[test]
    fn arbitrary_source_labels_fixtures() {
        let lg = arbitrary_source_labels(&gadget6()).unwrap();
        assert_eq!(
            bits_of(&lg),
            ["111", "100", "100", "000", "010", "001"]
        );
        assert_eq!(coordinator(&lg), Some(0));
        let pair = Graph::from_edges(2, [(0, 1)]).unwrap();
        let lg = arbitrary_source_labels(&pair).unwrap();
        assert_eq!(bits_of(&lg), ["111", "001"]);
    }

    #[test]
    fn acknowledged_labels_avoid_mixed_patterns() {
        for seed in 0..30 {
            let g = Graph::generate(&Family::Random { n: 12, p: 0.25 }, seed).unwrap();
            for source in g.nodes() {
                let lg = acknowledged_labels(&g, source).unwrap();
                for l in &lg.labels {
                    assert!(!(l.x3 && (l.x1 || l.x2)), "mixed pattern in {lg:?}");
                }
                assert_eq!(lg.labels.iter().filter(|l| l.x3).count(), 1);
            }
        }
    }

    #[test]
    fn distinct_label_budget() {
        for seed in 0..20 {
            let g = Graph::generate(&Family::Random { n: 14, p: 0.3 }, seed).unwrap();
            let count = |lg: &LabeledGraph| {
                bits_of(lg)
                    .into_iter()
                    .collect::<std::collections::BTreeSet<_>>()
                    .len()
            };
            assert!(count(&broadcast_labels(&g, 0).unwrap()) <= 4);
            assert!(count(&acknowledged_labels(&g, 0).unwrap()) <= 5);
            assert!(count(&arbitrary_source_labels(&g).unwrap()) <= 6);
        }
    }

    #[test]
    fn labels_json_round_trip() {
        let g = gadget6();
        for lg in [
            broadcast_labels(&g, 0).unwrap(),
            acknowledged_labels(&g, 0).unwrap(),
            arbitrary_source_labels(&g).unwrap(),
        ] {
            let text = lg.to_labels_json();
            let back = LabeledGraph::from_labels_json(g.clone(), &text).unwrap();
            assert_eq!(back, lg);
        }
    }

    #[test]
    fn labels_json_shape_errors() {
        let g = gadget6();
        let err = LabeledGraph::from_labels_json(
            g.clone(),
            r#"{"scheme":"broadcast","source":0,"labels":["10","10"]}"#,
        );
        assert_eq!(
            err,
            Err(LabelingError::LabelCount {
                expected: 6,
                found: 2
            })
        );
        let err = LabeledGraph::from_labels_json(
            g.clone(),
            r#"{"scheme":"broadcast","source":0,"labels":["10","10","10","00","012","00"]}"#,
        );
        assert!(matches!(err, Err(LabelingError::LabelShape { node: 4, .. })));
        let err = LabeledGraph::from_labels_json(
            g.clone(),
            r#"{"scheme":"acknowledged","source":null,"labels":[]}"#,
        );
        assert_eq!(
            err,
            Err(LabelingError::SourceRequired {
                scheme: "acknowledged"
            })
        );
        let err = LabeledGraph::from_labels_json(
            g,
            r#"{"scheme":"arbitrary-source","source":1,"labels":[]}"#,
        );
        assert_eq!(
            err,
            Err(LabelingError::SourceForbidden {
                scheme: "arbitrary-source"
            })
        );
    }

    #[test]
    fn single_node_broadcast_label() {
        let g = Graph::from_edges(1, []).unwrap();
        let lg = broadcast_labels(&g, 0).unwrap();
        assert_eq!(bits_of(&lg), ["00"]);
        assert_eq!(
            acknowledged_labels(&g, 0),
            Err(LabelingError::SingleNode)
        );
        assert_eq!(
            arbitrary_source_labels(&g),
            Err(LabelingError::SingleNode)
        );
    }
}
