//! Undirected connected graphs over node ids `0..n`.
//!
//! All higher layers assume simple connected graphs, so construction enforces
//! that: no self-loops, no duplicate edges, every node reachable from node 0.
//! Adjacency is kept in ordered sets so that iteration order, and therefore
//! every downstream artifact, is deterministic.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub type NodeId = usize;
pub type NodeSet = BTreeSet<NodeId>;

/// Attempts made by [`Graph::generate`] before giving up on a connected
/// random graph.
const RANDOM_RETRY_CAP: u64 = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("input has no node-count line")]
    MissingNodeCount,
    #[error("line {line}: expected node count, found {text:?}")]
    InvalidNodeCount { line: usize, text: String },
    #[error("line {line}: expected `u v`, found {text:?}")]
    MalformedLine { line: usize, text: String },
    #[error("node {node} out of range for a graph on {n} nodes")]
    NodeOutOfRange { node: NodeId, n: usize },
    #[error("self-loop at node {node}")]
    SelfLoop { node: NodeId },
    #[error("duplicate edge {u}-{v}")]
    DuplicateEdge { u: NodeId, v: NodeId },
    #[error("graph is not connected")]
    Disconnected,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no connected graph within {attempts} sampling attempts")]
    RetryCapExceeded { attempts: u64 },
}

/// Graph families understood by [`Graph::generate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// Path on `n` nodes, edges `i - (i+1)`.
    Path { n: usize },
    /// Cycle on `n >= 3` nodes.
    Cycle { n: usize },
    /// Star with center 0 and `n - 1` leaves.
    Star { n: usize },
    /// Complete graph on `n` nodes.
    Complete { n: usize },
    /// Grid with `rows * cols` nodes; node `r * cols + c` sits at `(r, c)`.
    Grid { rows: usize, cols: usize },
    /// Erdos-Renyi graph: each pair is an edge with probability `p`,
    /// resampled until connected.
    Random { n: usize, p: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<NodeSet>,
}

impl Graph {
    /// Builds a graph from an edge list, validating simplicity and
    /// connectivity.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::InvalidParameter(
                "graph needs at least one node".into(),
            ));
        }
        let mut adj = vec![NodeSet::new(); n];
        for (u, v) in edges {
            for node in [u, v] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { node, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop { node: u });
            }
            if !adj[u].insert(v) {
                let (u, v) = (u.min(v), u.max(v));
                return Err(GraphError::DuplicateEdge { u, v });
            }
            adj[v].insert(u);
        }
        let g = Graph { n, adj };
        if !g.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(g)
    }

    /// Parses the text edge-list format: first non-comment line holds `n`,
    /// every further line one edge `u v`. `#` starts a comment; blank lines
    /// are ignored.
    pub fn parse_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut n = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if n.is_none() {
                n = Some(content.parse::<usize>().map_err(|_| {
                    GraphError::InvalidNodeCount {
                        line,
                        text: content.to_string(),
                    }
                })?);
                continue;
            }
            let mut fields = content.split_whitespace();
            let endpoint = |field: Option<&str>| {
                field
                    .and_then(|f| f.parse::<NodeId>().ok())
                    .ok_or_else(|| GraphError::MalformedLine {
                        line,
                        text: content.to_string(),
                    })
            };
            let u = endpoint(fields.next())?;
            let v = endpoint(fields.next())?;
            if fields.next().is_some() {
                return Err(GraphError::MalformedLine {
                    line,
                    text: content.to_string(),
                });
            }
            edges.push((u, v));
        }
        let n = n.ok_or(GraphError::MissingNodeCount)?;
        Self::from_edges(n, edges)
    }

    /// Serializes to the text edge-list format; [`Graph::parse_edge_list`]
    /// of the output reproduces the graph exactly.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{}", self.n).unwrap();
        for (u, v) in self.edges() {
            writeln!(out, "{u} {v}").unwrap();
        }
        out
    }

    /// Generates a member of `family`, using `seed` for random families.
    pub fn generate(family: &Family, seed: u64) -> Result<Self, GraphError> {
        match *family {
            Family::Path { n } => Self::from_edges(n, (1..n).map(|i| (i - 1, i))),
            Family::Cycle { n } => {
                if n < 3 {
                    return Err(GraphError::InvalidParameter(format!(
                        "cycle needs at least 3 nodes, got {n}"
                    )));
                }
                Self::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
            }
            Family::Star { n } => Self::from_edges(n, (1..n).map(|i| (0, i))),
            Family::Complete { n } => {
                Self::from_edges(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
            }
            Family::Grid { rows, cols } => {
                if rows == 0 || cols == 0 {
                    return Err(GraphError::InvalidParameter(format!(
                        "grid needs positive dimensions, got {rows}x{cols}"
                    )));
                }
                let node = |r: usize, c: usize| r * cols + c;
                let mut edges = Vec::new();
                for r in 0..rows {
                    for c in 0..cols {
                        if c + 1 < cols {
                            edges.push((node(r, c), node(r, c + 1)));
                        }
                        if r + 1 < rows {
                            edges.push((node(r, c), node(r + 1, c)));
                        }
                    }
                }
                Self::from_edges(rows * cols, edges)
            }
            Family::Random { n, p } => {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(GraphError::InvalidParameter(format!(
                        "edge probability must lie in (0, 1], got {p}"
                    )));
                }
                if n == 0 {
                    return Err(GraphError::InvalidParameter(
                        "graph needs at least one node".into(),
                    ));
                }
                for attempt in 0..RANDOM_RETRY_CAP {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
                    let mut edges = Vec::new();
                    for u in 0..n {
                        for v in u + 1..n {
                            if rng.random_bool(p) {
                                edges.push((u, v));
                            }
                        }
                    }
                    match Self::from_edges(n, edges) {
                        Ok(g) => return Ok(g),
                        Err(GraphError::Disconnected) => continue,
                        Err(other) => return Err(other),
                    }
                }
                Err(GraphError::RetryCapExceeded {
                    attempts: RANDOM_RETRY_CAP,
                })
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        0..self.n
    }

    /// Neighbor set of a single node. Panics if `v` is out of range.
    pub fn neighbors(&self, v: NodeId) -> &NodeSet {
        &self.adj[v]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adj.get(u).is_some_and(|set| set.contains(&v))
    }

    /// Edges as ordered pairs `u < v`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, nbrs)| nbrs.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Open neighborhood of a set: all nodes adjacent to at least one member
    /// of `xs`. Members of `xs` appear in the result only if some other
    /// member is adjacent to them.
    pub fn neighborhood(&self, xs: &NodeSet) -> Result<NodeSet, GraphError> {
        let mut out = NodeSet::new();
        for &x in xs {
            if x >= self.n {
                return Err(GraphError::NodeOutOfRange { node: x, n: self.n });
            }
            out.extend(self.adj[x].iter().copied());
        }
        Ok(out)
    }

    /// Whether every node of `ys` has at least one neighbor in `xs`.
    pub fn is_dominating(&self, xs: &NodeSet, ys: &NodeSet) -> Result<bool, GraphError> {
        for set in [xs, ys] {
            if let Some(&node) = set.iter().find(|&&node| node >= self.n) {
                return Err(GraphError::NodeOutOfRange { node, n: self.n });
            }
        }
        Ok(ys
            .iter()
            .all(|y| self.adj[*y].iter().any(|x| xs.contains(x))))
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(nodes: &[NodeId]) -> NodeSet {
        nodes.iter().copied().collect()
    }

    /// Six-node gadget used across the crate: 0 tops a diamond over 1 and 2,
    /// with pendants 3, 4 and a shared neighbor 5.
    fn gadget6() -> Graph {
        Graph::from_edges(6, [(0, 1), (0, 2), (1, 3), (2, 4), (1, 5), (2, 5)]).unwrap()
    }

    #[test]
    fn parse_round_trip() {
        let text = "6\n0 1\n0 2\n1 3\n2 4\n1 5\n2 5\n";
        let g = Graph::parse_edge_list(text).unwrap();
        assert_eq!(g, gadget6());
        // Output is canonical: edges sorted, whatever the input order.
        assert_eq!(g.to_edge_list(), "6\n0 1\n0 2\n1 3\n1 5\n2 4\n2 5\n");
        assert_eq!(
            Graph::parse_edge_list(&g.to_edge_list()).unwrap().to_edge_list(),
            g.to_edge_list()
        );
    }

    #[test]
    fn parse_ignores_comments_and_blanks() {
        let text = "# tiny path\n3\n\n0 1   # first edge\n1 2\n";
        let g = Graph::parse_edge_list(text).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn parse_rejects_malformed_input() {
        assert_eq!(
            Graph::parse_edge_list(""),
            Err(GraphError::MissingNodeCount)
        );
        assert_eq!(
            Graph::parse_edge_list("x\n"),
            Err(GraphError::InvalidNodeCount {
                line: 1,
                text: "x".into()
            })
        );
        assert_eq!(
            Graph::parse_edge_list("2\n0\n"),
            Err(GraphError::MalformedLine {
                line: 2,
                text: "0".into()
            })
        );
        assert_eq!(
            Graph::parse_edge_list("2\n0 1 2\n"),
            Err(GraphError::MalformedLine {
                line: 2,
                text: "0 1 2".into()
            })
        );
    }

    #[test]
    fn from_edges_validates() {
        assert_eq!(
            Graph::from_edges(2, [(0, 2)]),
            Err(GraphError::NodeOutOfRange { node: 2, n: 2 })
        );
        assert_eq!(
            Graph::from_edges(2, [(1, 1)]),
            Err(GraphError::SelfLoop { node: 1 })
        );
        assert_eq!(
            Graph::from_edges(2, [(0, 1), (1, 0)]),
            Err(GraphError::DuplicateEdge { u: 0, v: 1 })
        );
        assert_eq!(
            Graph::from_edges(4, [(0, 1), (2, 3)]),
            Err(GraphError::Disconnected)
        );
        let single = Graph::from_edges(1, []).unwrap();
        assert_eq!(single.node_count(), 1);
        assert_eq!(single.edge_count(), 0);
    }

    #[test]
    fn generated_families_have_expected_shape() {
        let path = Graph::generate(&Family::Path { n: 5 }, 0).unwrap();
        assert_eq!(path.edge_count(), 4);
        assert_eq!(path.degree(0), 1);
        assert_eq!(path.degree(2), 2);

        let cycle = Graph::generate(&Family::Cycle { n: 5 }, 0).unwrap();
        assert_eq!(cycle.edge_count(), 5);
        assert!(cycle.nodes().all(|v| cycle.degree(v) == 2));

        let star = Graph::generate(&Family::Star { n: 5 }, 0).unwrap();
        assert_eq!(star.degree(0), 4);
        assert!((1..5).all(|v| star.degree(v) == 1));

        let complete = Graph::generate(&Family::Complete { n: 5 }, 0).unwrap();
        assert_eq!(complete.edge_count(), 10);

        let grid = Graph::generate(&Family::Grid { rows: 2, cols: 3 }, 0).unwrap();
        assert_eq!(grid.node_count(), 6);
        assert_eq!(grid.edge_count(), 7);
        assert!(grid.has_edge(0, 3) && grid.has_edge(1, 2) && !grid.has_edge(2, 3));
    }

    #[test]
    fn generate_rejects_bad_parameters() {
        assert!(matches!(
            Graph::generate(&Family::Cycle { n: 2 }, 0),
            Err(GraphError::InvalidParameter(_))
        ));
        assert!(matches!(
            Graph::generate(&Family::Grid { rows: 0, cols: 3 }, 0),
            Err(GraphError::InvalidParameter(_))
        ));
        assert!(matches!(
            Graph::generate(&Family::Random { n: 4, p: 0.0 }, 0),
            Err(GraphError::InvalidParameter(_))
        ));
        assert!(matches!(
            Graph::generate(&Family::Random { n: 4, p: 1.5 }, 0),
            Err(GraphError::InvalidParameter(_))
        ));
    }

    #[test]
    fn random_generation_is_deterministic_and_connected() {
        for seed in 0..20 {
            let family = Family::Random { n: 12, p: 0.2 };
            let a = Graph::generate(&family, seed).unwrap();
            let b = Graph::generate(&family, seed).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.to_edge_list(), b.to_edge_list());
        }
        let sparse = Graph::generate(&Family::Random { n: 30, p: 0.08 }, 7).unwrap();
        assert_eq!(sparse.node_count(), 30);
    }

    #[test]
    fn neighborhood_and_domination() {
        let g = gadget6();
        assert_eq!(g.neighborhood(&set(&[0])).unwrap(), set(&[1, 2]));
        assert_eq!(g.neighborhood(&set(&[1, 2])).unwrap(), set(&[0, 3, 4, 5]));
        assert!(g.is_dominating(&set(&[1, 2]), &set(&[3, 4, 5])).unwrap());
        assert!(!g.is_dominating(&set(&[1]), &set(&[3, 4, 5])).unwrap());
        assert_eq!(
            g.neighborhood(&set(&[9])),
            Err(GraphError::NodeOutOfRange { node: 9, n: 6 })
        );
        assert_eq!(
            g.is_dominating(&set(&[0]), &set(&[9])),
            Err(GraphError::NodeOutOfRange { node: 9, n: 6 })
        );
    }

    #[test]
    fn edge_iteration_is_sorted() {
        let g = Graph::from_edges(4, [(2, 3), (0, 3), (0, 1), (1, 2)]).unwrap();
        assert_eq!(
            g.edges().collect::<Vec<_>>(),
            vec![(0, 1), (0, 3), (1, 2), (2, 3)]
        );
    }
}
