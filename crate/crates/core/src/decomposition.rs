//! Stage decomposition of a graph from a source node.
//!
//! Stage `i` splits the nodes into the informed set `I_i`, the uninformed
//! complement `U_i`, the frontier `F_i` (uninformed nodes adjacent to informed
//! ones), a dominator set `D_i` chosen inside `D_{i-1} ∪ N_{i-1}`, and the
//! newly informed set `N_i`: frontier nodes with exactly one neighbor in
//! `D_i`. Those are exactly the nodes that receive a message when all of
//! `D_i` transmits at once, since a single transmitting neighbor is the only
//! way past a collision.
//!
//! The decomposition drives everything else: labels mark nodes by their roles
//! in it, and the broadcast protocols replay it one stage per two rounds.
//!
//! Invariants established here and relied on downstream:
//!
//! * `N_i ⊆ F_i ⊆ U_i`, and the `N_i` are pairwise disjoint;
//! * while anyone is uninformed, `N_i` is non-empty, so the last stage index
//!   `l` satisfies `l <= n`;
//! * `N_1, ..., N_{l-1}` partition `V ∖ {source}`.

use thiserror::Error;

use crate::graph::{Graph, NodeId, NodeSet};

#[derive(Debug, Error, PartialEq)]
pub enum DecompositionError {
    #[error("source {node} out of range for a graph on {n} nodes")]
    SourceOutOfRange { node: NodeId, n: usize },
    #[error("candidates do not dominate target {witness}")]
    NotDominating { witness: NodeId },
}

/// One stage of the decomposition. Sets are stored explicitly; the terminal
/// stage has everything informed and empty frontier, dominator and newly
/// informed sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    pub informed: NodeSet,
    pub uninformed: NodeSet,
    pub frontier: NodeSet,
    pub dominators: NodeSet,
    pub newly_informed: NodeSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageDecomposition {
    source: NodeId,
    stages: Vec<Stage>,
    /// `stage_index[v] = Some(i)` iff `v` lies in `N_i`; `None` for the source.
    stage_index: Vec<Option<usize>>,
}

/// Inclusion-minimal subset of `candidates` still dominating `targets`,
/// obtained by one ascending-id scan that drops every node whose removal
/// keeps `targets` dominated. The scan order makes the result deterministic.
pub fn minimal_dominating_subset(
    g: &Graph,
    candidates: &NodeSet,
    targets: &NodeSet,
) -> Result<NodeSet, DecompositionError> {
    // cover[y] = number of neighbors of y currently kept.
    let mut cover = vec![0usize; g.node_count()];
    for &y in targets {
        cover[y] = g.neighbors(y).iter().filter(|v| candidates.contains(v)).count();
        if cover[y] == 0 {
            return Err(DecompositionError::NotDominating { witness: y });
        }
    }
    let mut kept = candidates.clone();
    for &v in candidates {
        let removable = g
            .neighbors(v)
            .iter()
            .all(|&y| !targets.contains(&y) || cover[y] >= 2);
        if removable {
            kept.remove(&v);
            for &y in g.neighbors(v) {
                if targets.contains(&y) {
                    cover[y] -= 1;
                }
            }
        }
    }
    Ok(kept)
}

impl StageDecomposition {
    pub fn build(g: &Graph, source: NodeId) -> Result<Self, DecompositionError> {
        let n = g.node_count();
        if source >= n {
            return Err(DecompositionError::SourceOutOfRange { node: source, n });
        }
        let mut stage_index = vec![None; n];
        let mut stages = Vec::new();

        let mut informed = NodeSet::from([source]);
        let mut uninformed: NodeSet = g.nodes().filter(|&v| v != source).collect();
        let mut prev_cohort = NodeSet::from([source]);

        loop {
            if uninformed.is_empty() {
                stages.push(Stage {
                    informed,
                    uninformed,
                    frontier: NodeSet::new(),
                    dominators: NodeSet::new(),
                    newly_informed: NodeSet::new(),
                });
                break;
            }
            let frontier: NodeSet = uninformed
                .iter()
                .copied()
                .filter(|&v| g.neighbors(v).iter().any(|u| informed.contains(u)))
                .collect();
            let dominators = minimal_dominating_subset(g, &prev_cohort, &frontier)
                .expect("frontier is adjacent to the previous cohort");
            let newly_informed: NodeSet = frontier
                .iter()
                .copied()
                .filter(|&v| g.neighbors(v).iter().filter(|u| dominators.contains(u)).count() == 1)
                .collect();
            for &v in &newly_informed {
                stage_index[v] = Some(stages.len() + 1);
            }

            let mut next_informed = informed.clone();
            next_informed.extend(newly_informed.iter().copied());
            let next_uninformed: NodeSet =
                uninformed.difference(&newly_informed).copied().collect();
            // Next stage draws dominators from D_i ∪ N_i.
            let mut cohort = dominators.clone();
            cohort.extend(newly_informed.iter().copied());

            stages.push(Stage {
                informed,
                uninformed,
                frontier,
                dominators,
                newly_informed,
            });
            informed = next_informed;
            uninformed = next_uninformed;
            prev_cohort = cohort;
        }

        Ok(StageDecomposition {
            source,
            stages,
            stage_index,
        })
    }

    /// Assembles a decomposition from explicit stages without validating them.
    /// Intended for feeding hypotheses, including deliberately broken ones, to
    /// the checkers in [`crate::verify`]. `stage_index` is derived from the
    /// newly informed sets as given.
    pub fn from_parts(source: NodeId, stages: Vec<Stage>, n: usize) -> Self {
        let mut stage_index = vec![None; n];
        for (i, stage) in stages.iter().enumerate() {
            for &v in &stage.newly_informed {
                if v < n {
                    stage_index[v] = Some(i + 1);
                }
            }
        }
        StageDecomposition {
            source,
            stages,
            stage_index,
        }
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    /// Index `l` of the terminal stage, at which everything is informed.
    pub fn last_stage(&self) -> usize {
        self.stages.len()
    }

    /// Stage `i`, 1-based. Panics if `i` is out of `1..=last_stage()`.
    pub fn stage(&self, i: usize) -> &Stage {
        &self.stages[i - 1]
    }

    pub fn stages(&self) -> impl Iterator<Item = (usize, &Stage)> {
        self.stages.iter().enumerate().map(|(i, s)| (i + 1, s))
    }

    /// Stage whose newly informed set contains `v`; `None` for the source.
    pub fn stage_of(&self, v: NodeId) -> Option<usize> {
        self.stage_index.get(v).copied().flatten()
    }

    /// Rounds the plain broadcast protocol needs: `2l - 3`, or 0 when the
    /// source is alone.
    pub fn broadcast_rounds(&self) -> u32 {
        let l = self.last_stage() as u32;
        if l >= 2 {
            2 * l - 3
        } else {
            0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Family;

    fn set(nodes: &[NodeId]) -> NodeSet {
        nodes.iter().copied().collect()
    }

    fn gadget6() -> Graph {
        Graph::from_edges(6, [(0, 1), (0, 2), (1, 3), (2, 4), (1, 5), (2, 5)]).unwrap()
    }

    fn square4() -> Graph {
        Graph::from_edges(4, [(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap()
    }

    /// All inclusion-minimal dominating subsets, by exhaustive enumeration.
    fn minimal_family(g: &Graph, candidates: &NodeSet, targets: &NodeSet) -> Vec<NodeSet> {
        let cands: Vec<NodeId> = candidates.iter().copied().collect();
        let mut dominating = Vec::new();
        for mask in 0u32..1 << cands.len() {
            let subset: NodeSet = cands
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &v)| v)
                .collect();
            if g.is_dominating(&subset, targets).unwrap() {
                dominating.push(subset);
            }
        }
        dominating
            .iter()
            .filter(|s| {
                !dominating
                    .iter()
                    .any(|t| t.len() < s.len() && t.is_subset(s))
            })
            .cloned()
            .collect()
    }

    #[test]
    fn minimal_subset_matches_fixtures() {
        let g = square4();
        assert_eq!(
            minimal_dominating_subset(&g, &set(&[0, 1, 2]), &set(&[3])).unwrap(),
            set(&[2])
        );
        let g = gadget6();
        assert_eq!(
            minimal_dominating_subset(&g, &set(&[0, 1, 2]), &set(&[3, 4, 5])).unwrap(),
            set(&[1, 2])
        );
        assert_eq!(
            minimal_dominating_subset(&square4(), &set(&[0]), &set(&[3])),
            Err(DecompositionError::NotDominating { witness: 3 })
        );
    }

    #[test]
    fn minimal_subset_agrees_with_enumeration() {
        for seed in 0..40 {
            let g = Graph::generate(&Family::Random { n: 9, p: 0.3 }, seed).unwrap();
            let candidates: NodeSet = g.nodes().filter(|v| v % 2 == 0).collect();
            let targets = match g.neighborhood(&candidates) {
                Ok(nbrs) => &nbrs - &candidates,
                Err(_) => unreachable!(),
            };
            if targets.is_empty() {
                continue;
            }
            let got = minimal_dominating_subset(&g, &candidates, &targets).unwrap();
            let family = minimal_family(&g, &candidates, &targets);
            assert!(
                family.contains(&got),
                "greedy result {got:?} not minimal for seed {seed}; family {family:?}"
            );
        }
    }

    #[test]
    fn single_node_decomposition() {
        let g = Graph::from_edges(1, []).unwrap();
        let d = StageDecomposition::build(&g, 0).unwrap();
        assert_eq!(d.last_stage(), 1);
        assert_eq!(d.broadcast_rounds(), 0);
        let s = d.stage(1);
        assert_eq!(s.informed, set(&[0]));
        assert!(s.uninformed.is_empty() && s.dominators.is_empty());
    }

    #[test]
    fn path3_decomposition() {
        let g = Graph::generate(&Family::Path { n: 3 }, 0).unwrap();
        let d = StageDecomposition::build(&g, 0).unwrap();
        assert_eq!(d.last_stage(), 3);
        assert_eq!(d.stage(1).dominators, set(&[0]));
        assert_eq!(d.stage(1).newly_informed, set(&[1]));
        assert_eq!(d.stage(2).dominators, set(&[1]));
        assert_eq!(d.stage(2).newly_informed, set(&[2]));
        assert_eq!(d.broadcast_rounds(), 3);
        assert_eq!(d.stage_of(2), Some(2));
        assert_eq!(d.stage_of(0), None);
    }

    #[test]
    fn square4_decomposition() {
        let d = StageDecomposition::build(&square4(), 0).unwrap();
        assert_eq!(d.last_stage(), 3);
        assert_eq!(d.stage(1).newly_informed, set(&[1, 2]));
        // Both 1 and 2 dominate {3}; the ascending scan keeps only 2.
        assert_eq!(d.stage(2).dominators, set(&[2]));
        assert_eq!(d.stage(2).newly_informed, set(&[3]));
    }

    #[test]
    fn gadget6_decomposition() {
        let d = StageDecomposition::build(&gadget6(), 0).unwrap();
        assert_eq!(d.last_stage(), 4);
        assert_eq!(d.stage(1).dominators, set(&[0]));
        assert_eq!(d.stage(1).newly_informed, set(&[1, 2]));
        assert_eq!(d.stage(2).frontier, set(&[3, 4, 5]));
        assert_eq!(d.stage(2).dominators, set(&[1, 2]));
        // 5 hears both dominators collide, so only 3 and 4 advance.
        assert_eq!(d.stage(2).newly_informed, set(&[3, 4]));
        assert_eq!(d.stage(3).frontier, set(&[5]));
        assert_eq!(d.stage(3).dominators, set(&[2]));
        assert_eq!(d.stage(3).newly_informed, set(&[5]));
        assert_eq!(d.broadcast_rounds(), 5);
    }

    #[test]
    fn source_out_of_range() {
        assert_eq!(
            StageDecomposition::build(&square4(), 4),
            Err(DecompositionError::SourceOutOfRange { node: 4, n: 4 })
        );
    }

    #[test]
    fn stages_partition_and_nest() {
        for seed in 0..30 {
            let g = Graph::generate(&Family::Random { n: 10, p: 0.25 }, seed).unwrap();
            for source in g.nodes() {
                let d = StageDecomposition::build(&g, source).unwrap();
                assert!(d.last_stage() <= g.node_count());
                let mut seen = NodeSet::from([source]);
                for (i, stage) in d.stages() {
                    assert!(stage.newly_informed.is_subset(&stage.frontier));
                    assert!(stage.frontier.is_subset(&stage.uninformed));
                    assert!(stage.dominators.is_subset(&stage.informed));
                    if i < d.last_stage() {
                        assert!(!stage.newly_informed.is_empty());
                    }
                    for &v in &stage.newly_informed {
                        assert!(seen.insert(v), "node {v} informed twice");
                    }
                }
                assert_eq!(seen, g.nodes().collect());
            }
        }
    }
}
