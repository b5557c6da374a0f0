//! Independent checkers for decompositions, labelings and traces.
//!
//! Everything here re-derives expectations straight from the definitions and
//! compares them against what a builder or simulator produced, so a bug in
//! the production path cannot hide itself: the checkers share no code with
//! the schedule logic they examine. Traces are validated round by round
//! (delivery rule, transmitter sets, stamps), then end to end (completion
//! times, acknowledgement chains, common-knowledge rounds).
//!
//! [`exhaustive_small_graphs`] runs every pipeline over every connected
//! graph up to a given size, which is feasible because the number of
//! connected labeled graphs stays small: 1, 1, 4, 38, 728, 26704, 1866256
//! for 1 through 7 nodes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde_json::json;

use crate::decomposition::StageDecomposition;
use crate::graph::{Graph, NodeId, NodeSet};
use crate::labeling::{self, Label, LabeledGraph, Scheme};
use crate::protocols::{
    self, ArbOutcome, ParsedTrace, ProtocolKind, ProtocolResult, RunOutcome,
};
use crate::sim::{Message, MessageKind, Round, RoundRecord, SimulationTrace};

/// One named check. `witness` explains a failure; on a pass it may carry an
/// informational note instead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckEntry {
    pub name: &'static str,
    pub passed: bool,
    pub witness: Option<String>,
}

/// All checks run against one artifact. `context` identifies the artifact
/// well enough to replay the check by hand: graph signature, scheme or
/// protocol, and source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckReport {
    pub context: String,
    pub entries: Vec<CheckEntry>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "checked {}", self.context);
        for e in &self.entries {
            let status = if e.passed { "pass" } else { "FAIL" };
            match &e.witness {
                Some(w) => {
                    let _ = writeln!(out, "  {status} {}: {w}", e.name);
                }
                None => {
                    let _ = writeln!(out, "  {status} {}", e.name);
                }
            }
        }
        out
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let checks: Vec<serde_json::Value> = self
            .entries
            .iter()
            .map(|e| json!({"name": e.name, "passed": e.passed, "witness": e.witness}))
            .collect();
        json!({
            "context": self.context,
            "passed": self.passed(),
            "checks": checks,
        })
    }

    pub fn to_json(&self) -> String {
        let mut out =
            serde_json::to_string_pretty(&self.to_json_value()).expect("report serialize");
        out.push('\n');
        out
    }
}

struct Checker {
    report: CheckReport,
}

impl Checker {
    fn new(context: String) -> Self {
        Checker {
            report: CheckReport {
                context,
                entries: Vec::new(),
            },
        }
    }

    fn check(&mut self, name: &'static str, ok: bool, witness: impl FnOnce() -> String) {
        self.report.entries.push(CheckEntry {
            name,
            passed: ok,
            witness: (!ok).then(witness),
        });
    }

    /// One entry that fails iff any violation was collected.
    fn check_all(&mut self, name: &'static str, violations: Vec<String>) {
        let passed = violations.is_empty();
        self.report.entries.push(CheckEntry {
            name,
            passed,
            witness: (!passed).then(|| join_capped(violations)),
        });
    }

    fn fail(&mut self, name: &'static str, witness: String) {
        self.report.entries.push(CheckEntry {
            name,
            passed: false,
            witness: Some(witness),
        });
    }

    fn note(&mut self, name: &'static str, note: String) {
        self.report.entries.push(CheckEntry {
            name,
            passed: true,
            witness: Some(note),
        });
    }

    fn done(self) -> CheckReport {
        self.report
    }
}

fn join_capped(violations: Vec<String>) -> String {
    const CAP: usize = 6;
    if violations.len() <= CAP {
        violations.join("; ")
    } else {
        let rest = violations.len() - CAP;
        format!("{}; and {rest} more", violations[..CAP].join("; "))
    }
}

/// Compact replayable identification of a graph.
pub fn graph_signature(g: &Graph) -> String {
    let mut out = String::with_capacity(16 + g.edge_count() * 6);
    let _ = write!(out, "n={};edges=", g.node_count());
    for (i, (u, v)) in g.edges().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{u}-{v}");
    }
    out
}

fn failure_report(context: String, name: &'static str, witness: String) -> CheckReport {
    let mut c = Checker::new(context);
    c.fail(name, witness);
    c.done()
}

// ---------------------------------------------------------------------------
// Decomposition checks.

/// Re-derives every stage set from its definition and compares.
pub fn check_decomposition(g: &Graph, d: &StageDecomposition) -> CheckReport {
    let n = g.node_count();
    let source = d.source();
    let l = d.last_stage();
    let mut c = Checker::new(format!("{};source={source}", graph_signature(g)));

    c.check("source_in_range", source < n, || {
        format!("source {source} on {n} nodes")
    });
    c.check("has_stages", l >= 1, || "no stages at all".into());
    if source >= n || l == 0 {
        return c.done();
    }

    // Membership flags instead of set algebra; the recorded sets are echoed
    // into scratch vectors per stage so every comparison stays exact without
    // allocating fresh sets.
    let mut informed = vec![false; n];
    informed[source] = true;
    let mut informed_count = 1usize;
    let mut rec_informed = vec![false; n];
    let mut front_expected = vec![false; n];
    let mut is_dom = vec![false; n];
    let mut deg_one = vec![false; n];

    let mut informed_bad = Vec::new();
    let mut uninformed_bad = Vec::new();
    let mut frontier_bad = Vec::new();
    let mut terminal_bad = Vec::new();
    let mut pool_bad = Vec::new();
    let mut cover_bad = Vec::new();
    let mut minimal_bad = Vec::new();
    let mut newly_bad = Vec::new();
    let mut progress_bad = Vec::new();

    for (i, stage) in d.stages() {
        rec_informed.fill(false);
        front_expected.fill(false);

        let mut informed_ok = stage.informed.len() == informed_count;
        let mut rec_in_range = 0usize;
        for &v in &stage.informed {
            if v < n {
                rec_informed[v] = true;
                rec_in_range += 1;
                informed_ok &= informed[v];
            } else {
                informed_ok = false;
            }
        }
        if !informed_ok {
            let expected: Vec<NodeId> = (0..n).filter(|&v| informed[v]).collect();
            informed_bad.push(format!(
                "stage {i}: informed {:?}, expected {expected:?}",
                stage.informed
            ));
        }

        let mut unin_ok = stage.uninformed.len() == n - rec_in_range;
        let mut front_count = 0usize;
        for &v in &stage.uninformed {
            if v >= n || rec_informed[v] {
                unin_ok = false;
                continue;
            }
            if g.neighbors(v).iter().any(|&u| rec_informed[u]) {
                front_expected[v] = true;
                front_count += 1;
            }
        }
        if !unin_ok {
            uninformed_bad.push(format!(
                "stage {i}: uninformed {:?} is not the complement",
                stage.uninformed
            ));
        }
        let mut front_ok = stage.frontier.len() == front_count;
        for &v in &stage.frontier {
            front_ok &= v < n && front_expected[v];
        }
        if !front_ok {
            let expected: Vec<NodeId> = (0..n).filter(|&v| front_expected[v]).collect();
            frontier_bad.push(format!(
                "stage {i}: frontier {:?}, expected {expected:?}",
                stage.frontier
            ));
        }

        if i == l {
            if !stage.uninformed.is_empty() {
                terminal_bad.push(format!(
                    "terminal stage leaves {:?} uninformed",
                    stage.uninformed
                ));
            }
            if !stage.dominators.is_empty() || !stage.newly_informed.is_empty() {
                terminal_bad.push("terminal stage still names active sets".into());
            }
            continue;
        }

        if stage.uninformed.is_empty() {
            terminal_bad.push(format!("stage {i} is complete but not last"));
        }
        if i == 1 {
            for &v in &stage.dominators {
                if v != source {
                    pool_bad.push(format!("stage 1: dominator {v} is not the source"));
                }
            }
        } else {
            let prev = d.stage(i - 1);
            for &v in &stage.dominators {
                if !prev.dominators.contains(&v) && !prev.newly_informed.contains(&v) {
                    pool_bad.push(format!(
                        "stage {i}: dominator {v} escapes the previous cohort"
                    ));
                }
            }
        }

        is_dom.fill(false);
        deg_one.fill(false);
        for &v in &stage.dominators {
            if v < n {
                is_dom[v] = true;
            }
        }
        let mut new_count = 0usize;
        for &f in &stage.frontier {
            if f >= n {
                continue;
            }
            let deg = g.neighbors(f).iter().filter(|&&u| is_dom[u]).count();
            match deg {
                0 => cover_bad.push(format!("stage {i}: frontier node {f} uncovered")),
                1 => {
                    deg_one[f] = true;
                    new_count += 1;
                }
                _ => {}
            }
        }
        // Inclusion-minimal means every dominator privately covers some
        // frontier node; that node then has exactly one dominator neighbor.
        for &v in &stage.dominators {
            let needed = v < n && g.neighbors(v).iter().any(|&f| deg_one[f]);
            if !needed {
                minimal_bad.push(format!("stage {i}: dominator {v} is removable"));
            }
        }
        let mut new_ok = stage.newly_informed.len() == new_count;
        for &v in &stage.newly_informed {
            new_ok &= v < n && deg_one[v];
        }
        if !new_ok {
            let expected: Vec<NodeId> = (0..n).filter(|&v| deg_one[v]).collect();
            newly_bad.push(format!(
                "stage {i}: newly informed {:?}, expected {expected:?}",
                stage.newly_informed
            ));
        }
        if stage.newly_informed.is_empty() {
            progress_bad.push(format!("stage {i} informs nobody"));
        }
        for &v in &stage.newly_informed {
            if v < n && !informed[v] {
                informed[v] = true;
                informed_count += 1;
            }
        }
    }

    c.check_all("informed_recurrence", informed_bad);
    c.check_all("uninformed_complement", uninformed_bad);
    c.check_all("frontier_definition", frontier_bad);
    c.check_all("terminal_stage", terminal_bad);
    c.check_all("dominators_from_previous_cohort", pool_bad);
    c.check_all("dominators_cover_frontier", cover_bad);
    c.check_all("dominators_minimal", minimal_bad);
    c.check_all("newly_informed_definition", newly_bad);
    c.check_all("stage_progress", progress_bad);
    c.check("stage_count_bound", l <= n, || {
        format!("{l} stages on {n} nodes")
    });

    // N_1 .. N_{l-1} partition everything except the source.
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut partition_bad = Vec::new();
    for (i, stage) in d.stages() {
        for &v in &stage.newly_informed {
            if v >= n {
                partition_bad.push(format!("stage {i} names node {v} out of range"));
            } else if let Some(prev) = owner[v] {
                partition_bad.push(format!(
                    "node {v} informed in stages {prev} and {i}"
                ));
            } else {
                owner[v] = Some(i);
            }
        }
    }
    for v in 0..n {
        if v == source {
            if owner[v].is_some() {
                partition_bad.push(format!("source {v} appears in a stage"));
            }
        } else if owner[v].is_none() {
            partition_bad.push(format!("node {v} never informed"));
        }
    }
    c.check_all("stages_partition_rest", partition_bad);

    let index_bad: Vec<String> = (0..n)
        .filter(|&v| d.stage_of(v) != owner[v])
        .map(|v| {
            format!(
                "node {v}: stage_of {:?}, stage sets say {:?}",
                d.stage_of(v),
                owner[v]
            )
        })
        .collect();
    c.check_all("stage_index_consistent", index_bad);

    c.done()
}

// ---------------------------------------------------------------------------
// Label checks.

/// Checks labels against a freshly built decomposition for their source (or
/// the labeled coordinator, for the arbitrary-source scheme).
pub fn check_labels(lg: &LabeledGraph) -> CheckReport {
    match decomposition_for(lg) {
        Ok(d) => check_labels_with(lg, &d),
        Err(witness) => failure_report(
            format!(
                "{};scheme={}",
                graph_signature(&lg.graph),
                lg.scheme.as_str()
            ),
            "labels_support_checking",
            witness,
        ),
    }
}

/// As [`check_labels`], reusing a caller-supplied decomposition.
pub fn check_labels_with(lg: &LabeledGraph, d: &StageDecomposition) -> CheckReport {
    let g = &lg.graph;
    let n = g.node_count();
    let mut c = Checker::new(format!(
        "{};scheme={};source={}",
        graph_signature(g),
        lg.scheme.as_str(),
        d.source()
    ));

    c.check("label_count", lg.labels.len() == n, || {
        format!("{} labels for {n} nodes", lg.labels.len())
    });
    if lg.labels.len() != n {
        return c.done();
    }

    match lg.scheme {
        Scheme::Broadcast => {
            bit_checks(&mut c, g, d, &lg.labels);
            let stray: Vec<String> = (0..n)
                .filter(|&v| lg.labels[v].x3)
                .map(|v| format!("node {v} sets x3 under the two-bit scheme"))
                .collect();
            c.check_all("x3_unused", stray);
            budget_check(&mut c, lg, 4);
        }
        Scheme::Acknowledged => {
            bit_checks(&mut c, g, d, &lg.labels);
            designated_checks(&mut c, d, &lg.labels);
            budget_check(&mut c, lg, 5);
        }
        Scheme::ArbitrarySource => {
            let coords: Vec<NodeId> = (0..n)
                .filter(|&v| lg.labels[v] == Label::new(true, true, true))
                .collect();
            c.check("coordinator_unique", coords.len() == 1, || {
                format!("nodes labeled 111: {coords:?}")
            });
            if coords.len() != 1 {
                return c.done();
            }
            let co = coords[0];
            c.check("coordinator_position", co == d.source(), || {
                format!("coordinator {co}, decomposition source {}", d.source())
            });
            // Behind its override the coordinator is an ordinary first
            // dominator; the remaining bits must form valid acknowledged
            // labels for a broadcast from it.
            let mut view = lg.labels.clone();
            view[co] = Label::new(true, false, false);
            bit_checks(&mut c, g, d, &view);
            designated_checks(&mut c, d, &view);
            budget_check(&mut c, lg, 6);
        }
    }
    c.done()
}

/// `x1` and `x2` checks shared by every scheme.
fn bit_checks(c: &mut Checker, g: &Graph, d: &StageDecomposition, labels: &[Label]) {
    let n = g.node_count();
    let l = d.last_stage();

    let mut ever_dominator = vec![false; n];
    for (_, stage) in d.stages() {
        for &v in &stage.dominators {
            if v < n {
                ever_dominator[v] = true;
            }
        }
    }
    let x1_bad: Vec<String> = (0..n)
        .filter(|&v| labels[v].x1 != ever_dominator[v])
        .map(|v| {
            format!(
                "node {v}: x1={}, ever a dominator: {}",
                labels[v].x1, ever_dominator[v]
            )
        })
        .collect();
    c.check_all("x1_marks_dominators", x1_bad);

    // Every dominator kept for the next stage has exactly one marked
    // prompter among the nodes it just informed, and every marked node
    // prompts such a dominator.
    let mut sponsor_bad = Vec::new();
    let mut accounted = vec![false; n];
    for (i, stage) in d.stages() {
        if i + 1 > l {
            continue;
        }
        let next = d.stage(i + 1);
        for &v in stage.dominators.intersection(&next.dominators) {
            let marked: Vec<NodeId> = g
                .neighbors(v)
                .iter()
                .copied()
                .filter(|&w| stage.newly_informed.contains(&w) && labels[w].x2)
                .collect();
            if marked.len() != 1 {
                sponsor_bad.push(format!(
                    "stage {i}: retained dominator {v} has marked prompters {marked:?}"
                ));
            }
            for &w in &marked {
                accounted[w] = true;
            }
        }
    }
    c.check_all("x2_sponsors_have_one_prompter", sponsor_bad);
    let stray: Vec<String> = (0..n)
        .filter(|&w| labels[w].x2 && !accounted[w])
        .map(|w| format!("node {w} marked x2 without a retained dominator to prompt"))
        .collect();
    c.check_all("x2_marked_have_sponsors", stray);
}

/// `x3` checks for the acknowledged bit pattern.
fn designated_checks(c: &mut Checker, d: &StageDecomposition, labels: &[Label]) {
    let l = d.last_stage();
    let x3: Vec<NodeId> = (0..labels.len()).filter(|&v| labels[v].x3).collect();
    if l < 2 {
        c.fail(
            "designated_node",
            format!("single-stage decomposition cannot designate anyone; x3 on {x3:?}"),
        );
    } else {
        match d.stage(l - 1).newly_informed.iter().next() {
            Some(&z) => {
                c.check("designated_node", x3 == vec![z], || {
                    format!("x3 on {x3:?}, expected [{z}]")
                });
            }
            None => c.fail(
                "designated_node",
                "stage before last informs nobody".into(),
            ),
        }
    }
    let mixed: Vec<String> = (0..labels.len())
        .filter(|&v| labels[v].x3 && (labels[v].x1 || labels[v].x2))
        .map(|v| format!("node {v} combines x3 with broadcast duties"))
        .collect();
    c.check_all("no_mixed_terminal_label", mixed);
}

fn budget_check(c: &mut Checker, lg: &LabeledGraph, cap: usize) {
    let mut mask = 0u8;
    for l in &lg.labels {
        mask |= 1 << (((l.x1 as u8) << 2) | ((l.x2 as u8) << 1) | l.x3 as u8);
    }
    // Ascending bit-pattern order is lexicographic at fixed width; under the
    // two-bit rendering the x3 variants collapse onto adjacent entries.
    let mut realized: Vec<String> = (0..8u8)
        .filter(|i| mask >> i & 1 == 1)
        .map(|i| Label::new(i & 4 != 0, i & 2 != 0, i & 1 != 0).bits(lg.scheme))
        .collect();
    realized.dedup();
    let count = realized.len();
    let listing = realized.join(",");
    c.check("label_budget", count <= cap, || {
        format!("{count} distinct labels ({listing}), budget {cap}")
    });
    c.note("labels_realized", listing);
}

// ---------------------------------------------------------------------------
// Trace plumbing shared by all protocols.

/// Round numbering, node ranges and the radio delivery rule. Returns false
/// when the trace is too malformed for further checks.
fn trace_prelims(c: &mut Checker, g: &Graph, trace: &SimulationTrace) -> bool {
    let n = g.node_count();

    let seq_bad: Vec<String> = trace
        .rounds
        .iter()
        .enumerate()
        .filter(|(idx, rec)| rec.round != (idx + 1) as Round)
        .map(|(idx, rec)| format!("index {idx} holds round {}", rec.round))
        .collect();
    let seq_ok = seq_bad.is_empty();
    c.check_all("rounds_consecutive", seq_bad);

    c.check(
        "final_state_count",
        trace.final_states.len() == n,
        || format!("{} node summaries for {n} nodes", trace.final_states.len()),
    );

    let mut range_bad = Vec::new();
    let mut dup_bad = Vec::new();
    for rec in &trace.rounds {
        let mut seen = vec![false; n];
        for (v, _) in &rec.transmissions {
            if *v >= n {
                range_bad.push(format!("round {}: transmitter {v}", rec.round));
            } else if std::mem::replace(&mut seen[*v], true) {
                dup_bad.push(format!("round {}: node {v} transmits twice", rec.round));
            }
        }
        for del in &rec.deliveries {
            if del.receiver >= n || del.sender >= n {
                range_bad.push(format!(
                    "round {}: delivery {} -> {}",
                    rec.round, del.sender, del.receiver
                ));
            }
        }
        for v in &rec.collisions {
            if *v >= n {
                range_bad.push(format!("round {}: collision node {v}", rec.round));
            }
        }
    }
    let range_ok = range_bad.is_empty();
    c.check_all("node_ids_in_range", range_bad);
    c.check_all("transmitters_distinct", dup_bad);
    if !seq_ok || !range_ok || trace.final_states.len() != n {
        return false;
    }

    let mut rule_bad = Vec::new();
    let mut tx: Vec<Option<&Message>> = vec![None; n];
    for rec in &trace.rounds {
        round_follows_delivery_rule(g, rec, &mut tx, &mut rule_bad);
    }
    c.check_all("delivery_rule", rule_bad);
    true
}

/// Re-derives what the radio model delivers for the recorded transmissions
/// (a listener hears the message iff exactly one neighbor transmits) and
/// compares in place, without cloning messages. `tx` is scratch space.
fn round_follows_delivery_rule<'a>(
    g: &Graph,
    rec: &'a RoundRecord,
    tx: &mut [Option<&'a Message>],
    bad: &mut Vec<String>,
) {
    for (v, m) in &rec.transmissions {
        tx[*v] = Some(m);
    }
    let mut di = 0;
    let mut ci = 0;
    let mut del_ok = true;
    let mut col_ok = true;
    for v in g.nodes() {
        if tx[v].is_some() {
            continue;
        }
        let mut heard = None;
        let mut count = 0;
        for &u in g.neighbors(v) {
            if tx[u].is_some() {
                count += 1;
                heard = Some(u);
            }
        }
        match count {
            0 => {}
            1 => {
                let u = heard.expect("counted a transmitter");
                del_ok &= rec.deliveries.get(di).is_some_and(|d| {
                    d.receiver == v && d.sender == u && Some(&d.message) == tx[u]
                });
                di += 1;
            }
            _ => {
                col_ok &= rec.collisions.get(ci) == Some(&v);
                ci += 1;
            }
        }
    }
    del_ok &= di == rec.deliveries.len();
    col_ok &= ci == rec.collisions.len();
    if !del_ok {
        bad.push(format!(
            "round {}: deliveries diverge from the single-transmitter rule",
            rec.round
        ));
    }
    if !col_ok {
        bad.push(format!("round {}: collision set diverges", rec.round));
    }
    for (v, _) in &rec.transmissions {
        tx[*v] = None;
    }
}

fn record_at(rounds: &[RoundRecord], round: Round) -> Option<&RoundRecord> {
    if round == 0 {
        return None;
    }
    rounds.get((round - 1) as usize)
}

/// Expectations for one broadcast segment of a trace: payload kind, round
/// offset, stamping discipline and an optional horizon rider.
struct ScheduleSpec {
    segment: &'static str,
    offset: Round,
    kind: MessageKind,
    stamped: bool,
    horizon: Option<Round>,
}

/// Per-node payload observations over one segment.
struct SegmentScan {
    tx_stamps: Vec<Vec<Round>>,
    first_receipt_round: Vec<Option<Round>>,
    first_receipt_stamp: Vec<Option<Round>>,
}

fn scan_segment(
    g: &Graph,
    rounds: &[RoundRecord],
    offset: Round,
    len: Round,
    kind: MessageKind,
) -> SegmentScan {
    let n = g.node_count();
    let mut scan = SegmentScan {
        tx_stamps: vec![Vec::new(); n],
        first_receipt_round: vec![None; n],
        first_receipt_stamp: vec![None; n],
    };
    for logical in 1..=len {
        let Some(rec) = record_at(rounds, offset + logical) else {
            continue;
        };
        for (v, m) in &rec.transmissions {
            if m.kind == kind {
                if let Some(k) = m.stamp {
                    scan.tx_stamps[*v].push(k);
                }
            }
        }
        for del in &rec.deliveries {
            if del.message.kind == kind && scan.first_receipt_round[del.receiver].is_none() {
                scan.first_receipt_round[del.receiver] = Some(rec.round);
                scan.first_receipt_stamp[del.receiver] = del.message.stamp;
            }
        }
    }
    scan
}

/// Checks one broadcast segment against the stage schedule: dominators of
/// stage `i` transmit the payload kind in logical round `2i - 1`, marked
/// members of `N_i` answer "stay" in round `2i`, and every node first
/// receives the payload exactly in its stage's round. Returns the segment
/// scan so callers can chase acknowledgements without rereading the trace.
fn check_schedule(
    c: &mut Checker,
    g: &Graph,
    d: &StageDecomposition,
    marked: &[bool],
    rounds: &[RoundRecord],
    spec: &ScheduleSpec,
) -> SegmentScan {
    let l = d.last_stage();
    let mut missing = Vec::new();
    let mut dom_bad = Vec::new();
    let mut stay_bad = Vec::new();
    let mut kind_bad = Vec::new();
    let mut stamp_bad = Vec::new();
    let mut horizon_bad = Vec::new();

    for i in 1..l {
        let logical = (2 * i - 1) as Round;
        match record_at(rounds, spec.offset + logical) {
            None => missing.push(format!("{} round {} absent", spec.segment, logical)),
            Some(rec) => {
                let tx: NodeSet = rec.transmissions.iter().map(|(v, _)| *v).collect();
                if tx != d.stage(i).dominators {
                    dom_bad.push(format!(
                        "{} round {}: transmitters {:?}, expected stage-{i} dominators {:?}",
                        spec.segment, logical, tx, d.stage(i).dominators
                    ));
                }
                for (v, m) in &rec.transmissions {
                    if m.kind != spec.kind {
                        kind_bad.push(format!(
                            "{} round {}: node {v} sent {}, expected {}",
                            spec.segment,
                            logical,
                            m.kind.as_str(),
                            spec.kind.as_str()
                        ));
                        continue;
                    }
                    let want = spec.stamped.then_some(logical);
                    if m.stamp != want {
                        stamp_bad.push(format!(
                            "{} round {}: node {v} stamp {:?}, expected {:?}",
                            spec.segment, logical, m.stamp, want
                        ));
                    }
                    if let Some(h) = spec.horizon {
                        if m.horizon != Some(h) {
                            horizon_bad.push(format!(
                                "{} round {}: node {v} horizon {:?}, expected {h}",
                                spec.segment, logical, m.horizon
                            ));
                        }
                    }
                }
            }
        }

        if i + 2 <= l {
            let logical = (2 * i) as Round;
            match record_at(rounds, spec.offset + logical) {
                None => missing.push(format!("{} round {} absent", spec.segment, logical)),
                Some(rec) => {
                    let tx: NodeSet = rec.transmissions.iter().map(|(v, _)| *v).collect();
                    let want: NodeSet = d
                        .stage(i)
                        .newly_informed
                        .iter()
                        .copied()
                        .filter(|&w| marked.get(w).copied().unwrap_or(false))
                        .collect();
                    if tx != want {
                        stay_bad.push(format!(
                            "{} round {}: stay transmitters {:?}, expected {:?}",
                            spec.segment, logical, tx, want
                        ));
                    }
                    for (v, m) in &rec.transmissions {
                        if m.kind != MessageKind::Stay {
                            kind_bad.push(format!(
                                "{} round {}: node {v} sent {}, expected stay",
                                spec.segment,
                                logical,
                                m.kind.as_str()
                            ));
                            continue;
                        }
                        let want = spec.stamped.then_some(logical);
                        if m.stamp != want {
                            stamp_bad.push(format!(
                                "{} round {}: stay stamp {:?}, expected {:?}",
                                spec.segment, logical, m.stamp, want
                            ));
                        }
                    }
                }
            }
        }
    }

    c.check_all("schedule_rounds_present", missing);
    c.check_all("schedule_payload_transmitters", dom_bad);
    c.check_all("schedule_stay_transmitters", stay_bad);
    c.check_all("schedule_message_kinds", kind_bad);
    c.check_all("schedule_stamps", stamp_bad);
    if spec.horizon.is_some() {
        c.check_all("schedule_horizons", horizon_bad);
    }

    let scan = scan_segment(g, rounds, spec.offset, d.broadcast_rounds(), spec.kind);
    let mut receipt_bad = Vec::new();
    for v in g.nodes() {
        if v == d.source() {
            continue;
        }
        match d.stage_of(v) {
            Some(i) => {
                let want = spec.offset + (2 * i - 1) as Round;
                if scan.first_receipt_round[v] != Some(want) {
                    receipt_bad.push(format!(
                        "{} node {v}: first receipt {:?}, expected round {want}",
                        spec.segment, scan.first_receipt_round[v]
                    ));
                }
            }
            None => receipt_bad.push(format!("node {v} belongs to no stage")),
        }
    }
    c.check_all("stage_receipt_rounds", receipt_bad);
    scan
}

/// Expectations for an acknowledgement relay chain.
struct ChainSpec {
    segment: &'static str,
    start: Round,
    end: Round,
    starter: NodeId,
    starter_stamp: Round,
    target: NodeId,
    /// All chain acks must carry exactly this horizon.
    require_horizon: Option<Round>,
    /// All chain acks must carry one identical payload.
    require_payload: bool,
}

/// Validates a chain of single-transmitter acknowledgement rounds: each round
/// holds one ack, each relay answers because the previous stamp names one of
/// its own transmissions, stamps strictly decrease, and the final ack reaches
/// the target. Returns the chain for further inspection.
fn check_ack_chain(
    c: &mut Checker,
    rounds: &[RoundRecord],
    scan: &SegmentScan,
    spec: &ChainSpec,
) -> Vec<(Round, NodeId, Message)> {
    c.check("ack_present", spec.end >= spec.start, || {
        format!(
            "{}: chain claimed to end at {} before starting at {}",
            spec.segment, spec.end, spec.start
        )
    });
    if spec.end < spec.start {
        return Vec::new();
    }

    let mut chain = Vec::new();
    let mut shape_bad = Vec::new();
    for r in spec.start..=spec.end {
        match record_at(rounds, r) {
            None => shape_bad.push(format!("{} round {r} absent", spec.segment)),
            Some(rec) => match rec.transmissions.as_slice() {
                [(v, m)] if m.kind == MessageKind::Ack => chain.push((r, *v, m.clone())),
                [] => shape_bad.push(format!(
                    "{} round {r}: silent, expected one acknowledgement",
                    spec.segment
                )),
                other => shape_bad.push(format!(
                    "{} round {r}: {} transmissions, expected a lone acknowledgement",
                    spec.segment,
                    other.len()
                )),
            },
        }
    }
    c.check_all("ack_chain_rounds", shape_bad);
    if chain.len() != (spec.end - spec.start + 1) as usize {
        return chain;
    }

    let (_, v0, m0) = &chain[0];
    let starter_ok = *v0 == spec.starter
        && m0.stamp == Some(spec.starter_stamp)
        && scan.first_receipt_stamp[spec.starter] == Some(spec.starter_stamp);
    c.check("ack_chain_start", starter_ok, || {
        format!(
            "{}: first ack by {v0} stamped {:?}, expected {} stamped {}",
            spec.segment, m0.stamp, spec.starter, spec.starter_stamp
        )
    });

    let mut link_bad = Vec::new();
    let mut descend_bad = Vec::new();
    for w in chain.windows(2) {
        let (r, v, m) = &w[0];
        let (r2, v2, m2) = &w[1];
        let k = m.stamp.unwrap_or(0);
        let k2 = m2.stamp.unwrap_or(0);
        if k2 >= k {
            descend_bad.push(format!(
                "{} round {r2}: stamp {k2} does not descend below {k}",
                spec.segment
            ));
        }
        if !scan.tx_stamps[*v2].contains(&k) {
            link_bad.push(format!(
                "{} round {r2}: relay {v2} never transmitted stamp {k}",
                spec.segment
            ));
        }
        if scan.first_receipt_stamp[*v2] != Some(k2) {
            link_bad.push(format!(
                "{} round {r2}: relay {v2} acks {k2}, its own receipt stamp was {:?}",
                spec.segment, scan.first_receipt_stamp[*v2]
            ));
        }
        let heard = record_at(rounds, *r).is_some_and(|rec| {
            rec.deliveries
                .iter()
                .any(|d| d.sender == *v && d.receiver == *v2 && d.message.kind == MessageKind::Ack)
        });
        if !heard {
            link_bad.push(format!(
                "{} round {r2}: relay {v2} did not hear the round-{r} ack",
                spec.segment
            ));
        }
    }
    c.check_all("ack_chain_links", link_bad);
    c.check_all("ack_chain_descends", descend_bad);

    let delivered = record_at(rounds, spec.end).is_some_and(|rec| {
        rec.deliveries
            .iter()
            .any(|d| d.receiver == spec.target && d.message.kind == MessageKind::Ack)
    });
    c.check("ack_delivered", delivered, || {
        format!(
            "{}: node {} heard no acknowledgement in round {}",
            spec.segment, spec.target, spec.end
        )
    });

    let mut rider_bad = Vec::new();
    let reference = chain[0].2.payload.clone();
    for (r, _, m) in &chain {
        if let Some(h) = spec.require_horizon {
            if m.horizon != Some(h) {
                rider_bad.push(format!(
                    "{} round {r}: ack horizon {:?}, expected {h}",
                    spec.segment, m.horizon
                ));
            }
        }
        if spec.require_payload && (m.payload.is_none() || m.payload != reference) {
            rider_bad.push(format!(
                "{} round {r}: ack payload missing or inconsistent",
                spec.segment
            ));
        }
    }
    c.check_all("ack_carried_fields", rider_bad);
    chain
}

/// Node summaries and the result block must agree with the stage schedule.
fn informed_consistency(
    c: &mut Checker,
    d: &StageDecomposition,
    trace: &SimulationTrace,
    result: &ProtocolResult,
) {
    let mut bad = Vec::new();
    if result.informed_rounds.len() != trace.final_states.len() {
        bad.push(format!(
            "result lists {} informed rounds for {} nodes",
            result.informed_rounds.len(),
            trace.final_states.len()
        ));
    }
    for (v, s) in trace.final_states.iter().enumerate() {
        let expect = if v == d.source() {
            Some(0)
        } else {
            d.stage_of(v).map(|i| (2 * i - 1) as Round)
        };
        if s.informed_round != expect {
            bad.push(format!(
                "node {v}: informed_round {:?}, expected {:?}",
                s.informed_round, expect
            ));
        }
        if result.informed_rounds.get(v) != Some(&s.informed_round) {
            bad.push(format!("node {v}: result and summary disagree"));
        }
    }
    c.check_all("informed_rounds_consistent", bad);
}

// ---------------------------------------------------------------------------
// Per-protocol trace checks.

pub fn check_broadcast_trace(
    lg: &LabeledGraph,
    trace: &SimulationTrace,
    result: &ProtocolResult,
) -> CheckReport {
    with_decomposition(lg, "broadcast", |d| {
        check_broadcast_trace_with(lg, d, trace, result)
    })
}

pub fn check_broadcast_trace_with(
    lg: &LabeledGraph,
    d: &StageDecomposition,
    trace: &SimulationTrace,
    result: &ProtocolResult,
) -> CheckReport {
    let g = &lg.graph;
    let mut c = Checker::new(format!(
        "{};protocol=broadcast;source={}",
        graph_signature(g),
        d.source()
    ));
    if !trace_prelims(&mut c, g, trace) {
        return c.done();
    }
    let marked: Vec<bool> = lg.labels.iter().map(|l| l.x2).collect();
    check_schedule(
        &mut c,
        g,
        d,
        &marked,
        &trace.rounds,
        &ScheduleSpec {
            segment: "broadcast",
            offset: 0,
            kind: MessageKind::Data,
            stamped: false,
            horizon: None,
        },
    );
    let total = d.broadcast_rounds();
    c.check(
        "completion_time_exact",
        trace.last_round() == total && trace.rounds.len() as Round == total,
        || format!("trace spans {} rounds, expected exactly {total}", trace.last_round()),
    );
    let bound = (2 * g.node_count() as Round).saturating_sub(3);
    c.check("completion_bound", total <= bound, || {
        format!("{total} rounds exceed the bound {bound}")
    });
    c.check(
        "result_consistent",
        result.completion_round == total
            && result.ack_round.is_none()
            && result.common_known_round.is_none(),
        || format!("result claims completion {}", result.completion_round),
    );
    informed_consistency(&mut c, d, trace, result);
    c.done()
}

/// Broadcast-plus-acknowledgement checks over `rounds`, whose last record
/// must be the acknowledgement's arrival at the source. Returns that round.
fn ack_core(
    c: &mut Checker,
    g: &Graph,
    d: &StageDecomposition,
    marked: &[bool],
    rounds: &[RoundRecord],
) -> Option<Round> {
    let l = d.last_stage();
    if l < 2 {
        c.fail(
            "designated_node",
            "an acknowledged run needs at least two nodes".into(),
        );
        return None;
    }
    let total = d.broadcast_rounds();
    let scan = check_schedule(
        c,
        g,
        d,
        marked,
        rounds,
        &ScheduleSpec {
            segment: "broadcast",
            offset: 0,
            kind: MessageKind::Data,
            stamped: true,
            horizon: None,
        },
    );

    // Stamps of payload and stay messages double as a global clock.
    let mut clock_bad = Vec::new();
    for rec in rounds {
        for (v, m) in &rec.transmissions {
            if matches!(m.kind, MessageKind::Data | MessageKind::Stay)
                && m.stamp != Some(rec.round)
            {
                clock_bad.push(format!(
                    "round {}: node {v} stamped {:?}",
                    rec.round, m.stamp
                ));
            }
        }
    }
    c.check_all("global_clock", clock_bad);

    let Some(&z) = d.stage(l - 1).newly_informed.iter().next() else {
        c.fail("designated_node", "stage before last informs nobody".into());
        return None;
    };
    let last = rounds.last().map(|r| r.round).unwrap_or(0);
    check_ack_chain(
        c,
        rounds,
        &scan,
        &ChainSpec {
            segment: "ack",
            start: total + 1,
            end: last,
            starter: z,
            starter_stamp: total,
            target: d.source(),
            require_horizon: None,
            require_payload: false,
        },
    );
    let window_hi = (3 * l as Round).saturating_sub(4);
    c.check(
        "ack_window",
        last >= total + 1 && last <= window_hi,
        || format!("ack arrived in round {last}, window [{}, {window_hi}]", total + 1),
    );
    Some(last)
}

pub fn check_acknowledged_trace(
    lg: &LabeledGraph,
    trace: &SimulationTrace,
    result: &ProtocolResult,
) -> CheckReport {
    with_decomposition(lg, "acknowledged", |d| {
        check_acknowledged_trace_with(lg, d, trace, result)
    })
}

pub fn check_acknowledged_trace_with(
    lg: &LabeledGraph,
    d: &StageDecomposition,
    trace: &SimulationTrace,
    result: &ProtocolResult,
) -> CheckReport {
    let g = &lg.graph;
    let mut c = Checker::new(format!(
        "{};protocol=acknowledged;source={}",
        graph_signature(g),
        d.source()
    ));
    if !trace_prelims(&mut c, g, trace) {
        return c.done();
    }
    let marked: Vec<bool> = lg.labels.iter().map(|l| l.x2).collect();
    if let Some(last) = ack_core(&mut c, g, d, &marked, &trace.rounds) {
        c.check(
            "result_consistent",
            result.ack_round == Some(last)
                && result.completion_round == last
                && result.common_known_round.is_none(),
            || {
                format!(
                    "result claims completion {} and ack {:?}",
                    result.completion_round, result.ack_round
                )
            },
        );
    }
    informed_consistency(&mut c, d, trace, result);
    c.done()
}

pub fn check_common_round_trace(
    lg: &LabeledGraph,
    trace: &SimulationTrace,
    result: &ProtocolResult,
) -> CheckReport {
    with_decomposition(lg, "common-round", |d| {
        check_common_round_trace_with(lg, d, trace, result)
    })
}

pub fn check_common_round_trace_with(
    lg: &LabeledGraph,
    d: &StageDecomposition,
    trace: &SimulationTrace,
    result: &ProtocolResult,
) -> CheckReport {
    let g = &lg.graph;
    let mut c = Checker::new(format!(
        "{};protocol=common-round;source={}",
        graph_signature(g),
        d.source()
    ));
    if !trace_prelims(&mut c, g, trace) {
        return c.done();
    }
    let Some(m) = result.ack_round else {
        c.fail("ack_round_recorded", "result names no ack round".into());
        return c.done();
    };
    if trace.rounds.len() < m as usize {
        c.fail(
            "ack_round_recorded",
            format!("trace has {} rounds, ack claimed at {m}", trace.rounds.len()),
        );
        return c.done();
    }
    let marked: Vec<bool> = lg.labels.iter().map(|l| l.x2).collect();
    let first = &trace.rounds[..m as usize];
    if let Some(acked) = ack_core(&mut c, g, d, &marked, first) {
        c.check("ack_round_recorded", acked == m, || {
            format!("ack chain ends at {acked}, result says {m}")
        });
    }
    wrapup_checks(&mut c, g, d, &marked, m, trace, result);
    c.done()
}

/// The wrap-up rebroadcast and common-knowledge bookkeeping appended after
/// the acknowledgement round `m`.
fn wrapup_checks(
    c: &mut Checker,
    g: &Graph,
    d: &StageDecomposition,
    marked: &[bool],
    m: Round,
    trace: &SimulationTrace,
    result: &ProtocolResult,
) {
    let total = d.broadcast_rounds();
    check_schedule(
        c,
        g,
        d,
        marked,
        &trace.rounds,
        &ScheduleSpec {
            segment: "wrapup",
            offset: m,
            kind: MessageKind::Data,
            stamped: false,
            horizon: None,
        },
    );
    c.check(
        "wrapup_length",
        trace.last_round() == m + total,
        || format!("trace ends at {}, expected {}", trace.last_round(), m + total),
    );
    let deadline = 2 * m;
    c.check("deadline_met", m + total < deadline, || {
        format!("wrap-up ends at {} but the common round is {deadline}", m + total)
    });

    // The wrap-up payload announces m itself.
    let announced = m.to_string().into_bytes();
    let mut payload_bad = Vec::new();
    for rec in &trace.rounds[m as usize..] {
        for (v, msg) in &rec.transmissions {
            if msg.kind == MessageKind::Data && msg.payload.as_ref() != Some(&announced) {
                payload_bad.push(format!(
                    "round {}: node {v} announces {:?}",
                    rec.round, msg.payload
                ));
            }
        }
    }
    c.check_all("wrapup_payload_names_round", payload_bad);

    let mut flag_bad = Vec::new();
    for (v, s) in trace.final_states.iter().enumerate() {
        let learned = if v == d.source() {
            Some(u64::from(m))
        } else {
            d.stage_of(v)
                .map(|i| u64::from(m) + (2 * i as u64 - 1))
        };
        if s.flags.get("deadline_received_round").copied() != learned {
            flag_bad.push(format!(
                "node {v}: deadline_received_round {:?}, expected {learned:?}",
                s.flags.get("deadline_received_round")
            ));
        }
        if learned.is_some_and(|r| r >= u64::from(deadline)) {
            flag_bad.push(format!("node {v} learns m only in round {learned:?}"));
        }
        if s.flags.get("known_complete_round").copied() != Some(u64::from(deadline)) {
            flag_bad.push(format!(
                "node {v}: known_complete_round {:?}, expected {deadline}",
                s.flags.get("known_complete_round")
            ));
        }
    }
    c.check_all("known_round_flags", flag_bad);

    c.check(
        "result_consistent",
        result.completion_round == deadline && result.common_known_round == Some(deadline),
        || {
            format!(
                "result claims completion {} and common round {:?}",
                result.completion_round, result.common_known_round
            )
        },
    );
    informed_consistency(c, d, trace, result);
}

/// Wrap-up checks for a run produced by extending an already checked
/// acknowledged outcome in place: the first `m` rounds are that outcome's own
/// records, so only the appended rounds need the radio-model treatment here.
fn check_wrapup_extension(
    lg: &LabeledGraph,
    d: &StageDecomposition,
    m: Round,
    trace: &SimulationTrace,
    result: &ProtocolResult,
) -> CheckReport {
    let g = &lg.graph;
    let n = g.node_count();
    let mut c = Checker::new(format!(
        "{};protocol=common-round;source={}",
        graph_signature(g),
        d.source()
    ));

    let seq_bad: Vec<String> = trace
        .rounds
        .iter()
        .enumerate()
        .filter(|(idx, rec)| rec.round != (idx + 1) as Round)
        .map(|(idx, rec)| format!("index {idx} holds round {}", rec.round))
        .collect();
    let seq_ok = seq_bad.is_empty();
    c.check_all("rounds_consecutive", seq_bad);
    c.check(
        "final_state_count",
        trace.final_states.len() == n,
        || format!("{} node summaries for {n} nodes", trace.final_states.len()),
    );
    c.check("ack_round_recorded", result.ack_round == Some(m), || {
        format!("result names ack round {:?}, prefix ended at {m}", result.ack_round)
    });
    if !seq_ok || trace.final_states.len() != n || trace.rounds.len() < m as usize {
        return c.done();
    }

    let mut range_bad = Vec::new();
    let mut dup_bad = Vec::new();
    let mut rule_bad = Vec::new();
    let mut seen = vec![false; n];
    let mut tx: Vec<Option<&Message>> = vec![None; n];
    for rec in &trace.rounds[m as usize..] {
        seen.fill(false);
        let mut in_range = true;
        for (v, _) in &rec.transmissions {
            if *v >= n {
                range_bad.push(format!("round {}: transmitter {v}", rec.round));
                in_range = false;
            } else if std::mem::replace(&mut seen[*v], true) {
                dup_bad.push(format!("round {}: node {v} transmits twice", rec.round));
            }
        }
        for del in &rec.deliveries {
            if del.receiver >= n || del.sender >= n {
                range_bad.push(format!(
                    "round {}: delivery {} -> {}",
                    rec.round, del.sender, del.receiver
                ));
            }
        }
        if in_range {
            round_follows_delivery_rule(g, rec, &mut tx, &mut rule_bad);
        }
    }
    c.check_all("node_ids_in_range", range_bad);
    c.check_all("transmitters_distinct", dup_bad);
    c.check_all("delivery_rule", rule_bad);

    let marked: Vec<bool> = lg.labels.iter().map(|l| l.x2).collect();
    wrapup_checks(&mut c, g, d, &marked, m, trace, result);
    c.done()
}

pub fn check_arbitrary(lg: &LabeledGraph, arb: &ArbOutcome) -> CheckReport {
    match StageDecomposition::build(&lg.graph, arb.coordinator) {
        Ok(d) => check_arbitrary_with(lg, &d, arb),
        Err(e) => failure_report(
            format!(
                "{};protocol=arbitrary-source;actual_source={}",
                graph_signature(&lg.graph),
                arb.actual_source
            ),
            "labels_support_checking",
            e.to_string(),
        ),
    }
}

pub fn check_arbitrary_with(
    lg: &LabeledGraph,
    d: &StageDecomposition,
    arb: &ArbOutcome,
) -> CheckReport {
    let g = &lg.graph;
    let n = g.node_count();
    let trace = &arb.outcome.trace;
    let result = &arb.outcome.result;
    let mut c = Checker::new(format!(
        "{};protocol=arbitrary-source;actual_source={}",
        graph_signature(g),
        arb.actual_source
    ));
    if !trace_prelims(&mut c, g, trace) {
        return c.done();
    }
    let l = d.last_stage();
    if l < 2 {
        c.fail(
            "multi_node_required",
            "an arbitrary-source run needs at least two nodes".into(),
        );
        return c.done();
    }
    let total = d.broadcast_rounds();
    c.check("coordinator_position", arb.coordinator == d.source(), || {
        format!(
            "outcome names coordinator {}, labels say {}",
            arb.coordinator,
            d.source()
        )
    });
    c.check("horizon_value", arb.horizon == total, || {
        format!("announced horizon {}, schedule needs {total}", arb.horizon)
    });
    if arb.timestamps.len() != n
        || arb.payload_received_rounds.len() != n
        || arb.known_complete_rounds.len() != n
    {
        c.fail("outcome_shape", "per-node vectors sized wrongly".into());
        return c.done();
    }

    // The coordinator's 111 label would stay forever; its duties are fixed,
    // so the stage schedule sees it as an unmarked first dominator.
    let marked: Vec<bool> = lg
        .labels
        .iter()
        .enumerate()
        .map(|(v, lab)| lab.x2 && v != arb.coordinator)
        .collect();

    // Phase one: probe broadcast plus acknowledgement with the horizon rider.
    let init_scan = check_schedule(
        &mut c,
        g,
        d,
        &marked,
        &trace.rounds,
        &ScheduleSpec {
            segment: "probe",
            offset: 0,
            kind: MessageKind::Init,
            stamped: true,
            horizon: None,
        },
    );
    let mut ts_bad = Vec::new();
    for v in 0..n {
        let expect = if v == arb.coordinator {
            0
        } else {
            match init_scan.first_receipt_round[v] {
                Some(r) => r,
                None => {
                    ts_bad.push(format!("node {v} never received the probe"));
                    continue;
                }
            }
        };
        if arb.timestamps[v] != expect {
            ts_bad.push(format!(
                "node {v}: timestamp {}, probe arrived in round {expect}",
                arb.timestamps[v]
            ));
        }
    }
    c.check_all("timestamps_match", ts_bad);

    let Some(&z) = d.stage(l - 1).newly_informed.iter().next() else {
        c.fail("designated_node", "stage before last informs nobody".into());
        return c.done();
    };
    check_ack_chain(
        &mut c,
        &trace.rounds,
        &init_scan,
        &ChainSpec {
            segment: "probe",
            start: total + 1,
            end: arb.init_ack_round,
            starter: z,
            starter_stamp: total,
            target: arb.coordinator,
            require_horizon: Some(total),
            require_payload: false,
        },
    );
    let window_hi = (3 * l as Round).saturating_sub(4);
    c.check(
        "probe_ack_window",
        arb.init_ack_round >= total + 1 && arb.init_ack_round <= window_hi,
        || {
            format!(
                "probe ack in round {}, window [{}, {window_hi}]",
                arb.init_ack_round,
                total + 1
            )
        },
    );

    // Phase two: the coordinator requests the payload; the actual source
    // answers once the request broadcast has certainly finished.
    let deliver_expected = match (arb.fetch_start, arb.fetch_ack_round) {
        (Some(fs), Some(fa)) => {
            c.check("fetch_follows_probe", fs == arb.init_ack_round + 1, || {
                format!("fetch starts {fs}, probe acked {}", arb.init_ack_round)
            });
            let fetch_scan = check_schedule(
                &mut c,
                g,
                d,
                &marked,
                &trace.rounds,
                &ScheduleSpec {
                    segment: "fetch",
                    offset: fs - 1,
                    kind: MessageKind::Ready,
                    stamped: true,
                    horizon: Some(total),
                },
            );
            let t_s = arb.timestamps[arb.actual_source];
            let answer = fs - 1 + t_s + total + 1;
            let mut gap_bad = Vec::new();
            for r in (fs + total)..answer {
                if record_at(&trace.rounds, r)
                    .is_some_and(|rec| !rec.transmissions.is_empty())
                {
                    gap_bad.push(format!("round {r}: transmission while waiting out the horizon"));
                }
            }
            c.check_all("fetch_quiet_gap", gap_bad);
            check_ack_chain(
                &mut c,
                &trace.rounds,
                &fetch_scan,
                &ChainSpec {
                    segment: "fetch",
                    start: answer,
                    end: fa,
                    starter: arb.actual_source,
                    starter_stamp: t_s,
                    target: arb.coordinator,
                    require_horizon: None,
                    require_payload: true,
                },
            );
            fa + 1
        }
        (None, None) => {
            c.check(
                "degenerate_fetch_skipped",
                arb.actual_source == arb.coordinator,
                || {
                    format!(
                        "no fetch phase although the source {} is not the coordinator {}",
                        arb.actual_source, arb.coordinator
                    )
                },
            );
            arb.init_ack_round + 1
        }
        _ => {
            c.fail(
                "fetch_fields_consistent",
                format!(
                    "fetch_start {:?} with fetch_ack_round {:?}",
                    arb.fetch_start, arb.fetch_ack_round
                ),
            );
            arb.deliver_start
        }
    };
    c.check("deliver_start_follows", arb.deliver_start == deliver_expected, || {
        format!(
            "deliver phase starts {}, expected {deliver_expected}",
            arb.deliver_start
        )
    });

    // Phase three: plain stampless broadcast of the payload, replaying the
    // probe timing exactly.
    let ds = arb.deliver_start;
    let deliver_scan = check_schedule(
        &mut c,
        g,
        d,
        &marked,
        &trace.rounds,
        &ScheduleSpec {
            segment: "deliver",
            offset: ds - 1,
            kind: MessageKind::Data,
            stamped: false,
            horizon: None,
        },
    );
    let mut replay_bad = Vec::new();
    for v in 0..n {
        if v == arb.coordinator {
            if arb.payload_received_rounds[v].is_some() {
                replay_bad.push(format!("coordinator {v} claims a payload receipt"));
            }
            continue;
        }
        let want = Some(ds - 1 + arb.timestamps[v]);
        if deliver_scan.first_receipt_round[v] != want {
            replay_bad.push(format!(
                "node {v}: payload arrived {:?}, probe timing says {want:?}",
                deliver_scan.first_receipt_round[v]
            ));
        }
        if arb.payload_received_rounds[v] != want {
            replay_bad.push(format!(
                "node {v}: outcome records receipt {:?}, expected {want:?}",
                arb.payload_received_rounds[v]
            ));
        }
    }
    c.check_all("deliver_replays_probe", replay_bad);

    let mut payload_bad = Vec::new();
    let mut payloads: BTreeSet<&[u8]> = BTreeSet::new();
    for logical in 1..=total {
        let Some(rec) = record_at(&trace.rounds, ds - 1 + logical) else {
            continue;
        };
        for (v, m) in &rec.transmissions {
            if m.kind == MessageKind::Data {
                match m.payload.as_deref() {
                    Some(p) => {
                        payloads.insert(p);
                    }
                    None => payload_bad.push(format!(
                        "round {}: node {v} sent payloadless data",
                        rec.round
                    )),
                }
            }
        }
    }
    if payloads.len() > 1 {
        payload_bad.push(format!("{} different payloads in the deliver phase", payloads.len()));
    }
    c.check_all("deliver_payload_consistent", payload_bad);
    if arb.fetch_start.is_none() {
        let attached = record_at(&trace.rounds, ds).is_some_and(|rec| {
            rec.transmissions
                .iter()
                .any(|(v, m)| *v == arb.coordinator && m.horizon == Some(total))
        });
        c.check("deliver_horizon_attached", attached, || {
            "degenerate run must attach the horizon to the payload".into()
        });
    }

    let expect_done = ds - 1 + total;
    let mut done_bad = Vec::new();
    for v in 0..n {
        if arb.known_complete_rounds[v] != expect_done {
            done_bad.push(format!(
                "node {v} knows completion at {}, expected {expect_done}",
                arb.known_complete_rounds[v]
            ));
        }
        let flag = trace.final_states[v].flags.get("known_complete_round").copied();
        if flag != Some(u64::from(expect_done)) {
            done_bad.push(format!("node {v}: known_complete_round flag {flag:?}"));
        }
    }
    c.check_all("coincident_completion", done_bad);
    c.check(
        "trace_ends_at_known_round",
        trace.last_round() == expect_done,
        || format!("trace ends at {}, completion known at {expect_done}", trace.last_round()),
    );
    c.check(
        "result_consistent",
        result.completion_round == expect_done
            && result.common_known_round == Some(expect_done)
            && result.ack_round.is_none(),
        || {
            format!(
                "result claims completion {} and common round {:?}",
                result.completion_round, result.common_known_round
            )
        },
    );

    let mut inf_bad = Vec::new();
    for (v, s) in trace.final_states.iter().enumerate() {
        let expect = if v == arb.coordinator || v == arb.actual_source {
            Some(0)
        } else {
            arb.payload_received_rounds[v]
        };
        if s.informed_round != expect {
            inf_bad.push(format!(
                "node {v}: informed_round {:?}, expected {:?}",
                s.informed_round, expect
            ));
        }
        if result.informed_rounds.get(v) != Some(&s.informed_round) {
            inf_bad.push(format!("node {v}: result and summary disagree"));
        }
    }
    c.check_all("informed_rounds_consistent", inf_bad);
    c.done()
}

// ---------------------------------------------------------------------------
// Dispatch for traces read back from files.

fn decomposition_for(lg: &LabeledGraph) -> Result<StageDecomposition, String> {
    let anchor = match lg.scheme {
        Scheme::ArbitrarySource => labeling::coordinator(lg)
            .ok_or_else(|| "labels contain no coordinator (111)".to_string())?,
        _ => lg
            .source_used
            .ok_or_else(|| "labels carry no source".to_string())?,
    };
    StageDecomposition::build(&lg.graph, anchor).map_err(|e| e.to_string())
}

fn with_decomposition(
    lg: &LabeledGraph,
    protocol: &str,
    run: impl FnOnce(&StageDecomposition) -> CheckReport,
) -> CheckReport {
    match decomposition_for(lg) {
        Ok(d) => run(&d),
        Err(witness) => failure_report(
            format!("{};protocol={protocol}", graph_signature(&lg.graph)),
            "labels_support_checking",
            witness,
        ),
    }
}

/// Full check of a parsed trace file against its labels.
pub fn check_trace(lg: &LabeledGraph, parsed: &ParsedTrace) -> CheckReport {
    let compatible = matches!(
        (parsed.kind, lg.scheme),
        (ProtocolKind::Broadcast, Scheme::Broadcast | Scheme::Acknowledged)
            | (
                ProtocolKind::Acknowledged | ProtocolKind::CommonRound,
                Scheme::Acknowledged
            )
            | (ProtocolKind::ArbitrarySource, Scheme::ArbitrarySource)
    );
    if !compatible {
        return failure_report(
            format!(
                "{};scheme={};protocol={}",
                graph_signature(&lg.graph),
                lg.scheme.as_str(),
                parsed.kind.as_str()
            ),
            "scheme_supports_protocol",
            format!(
                "{} labels cannot substantiate a {} trace",
                lg.scheme.as_str(),
                parsed.kind.as_str()
            ),
        );
    }
    match parsed.kind {
        ProtocolKind::Broadcast => check_broadcast_trace(lg, &parsed.trace, &parsed.result),
        ProtocolKind::Acknowledged => {
            check_acknowledged_trace(lg, &parsed.trace, &parsed.result)
        }
        ProtocolKind::CommonRound => {
            check_common_round_trace(lg, &parsed.trace, &parsed.result)
        }
        ProtocolKind::ArbitrarySource => match arb_outcome_from_trace(lg, parsed) {
            Ok(arb) => check_arbitrary(lg, &arb),
            Err(witness) => failure_report(
                format!(
                    "{};protocol=arbitrary-source",
                    graph_signature(&lg.graph)
                ),
                "trace_reconstruction",
                witness,
            ),
        },
    }
}

/// Rebuilds the phase boundaries of an arbitrary-source run from its trace
/// file, so the full checks can run without the original in-memory outcome.
fn arb_outcome_from_trace(lg: &LabeledGraph, parsed: &ParsedTrace) -> Result<ArbOutcome, String> {
    let co = labeling::coordinator(lg).ok_or("labels contain no coordinator (111)")?;
    let trace = &parsed.trace;
    let n = lg.graph.node_count();
    if trace.final_states.len() != n {
        return Err(format!(
            "{} node summaries for {n} nodes",
            trace.final_states.len()
        ));
    }

    let mut init_ack = None;
    let mut fetch_start = None;
    let mut fetch_ack = None;
    let mut deliver_start = None;
    let mut horizon = None;
    for rec in &trace.rounds {
        for (_, m) in &rec.transmissions {
            match m.kind {
                MessageKind::Ready if fetch_start.is_none() => fetch_start = Some(rec.round),
                MessageKind::Data if deliver_start.is_none() => deliver_start = Some(rec.round),
                MessageKind::Ack if horizon.is_none() => horizon = m.horizon,
                _ => {}
            }
        }
        for del in &rec.deliveries {
            if del.receiver == co && del.message.kind == MessageKind::Ack {
                if init_ack.is_none() {
                    init_ack = Some(rec.round);
                } else if fetch_ack.is_none()
                    && fetch_start.is_some_and(|fs| rec.round > fs)
                {
                    fetch_ack = Some(rec.round);
                }
            }
        }
    }
    let init_ack_round = init_ack.ok_or("no acknowledgement reached the coordinator")?;
    let horizon = horizon.ok_or("no acknowledgement carried a horizon")?;
    let deliver_start = deliver_start.ok_or("no payload was ever transmitted")?;

    let actual_source = match fetch_start {
        None => co,
        Some(fs) => trace
            .rounds
            .iter()
            .filter(|rec| rec.round > fs)
            .flat_map(|rec| rec.transmissions.iter())
            .find(|(_, m)| m.kind == MessageKind::Ack)
            .map(|(v, _)| *v)
            .ok_or("fetch phase contains no answer")?,
    };

    let flag = |v: usize, key: &str| -> Result<Round, String> {
        let raw = trace.final_states[v]
            .flags
            .get(key)
            .ok_or_else(|| format!("node {v} summary lacks {key}"))?;
        Round::try_from(*raw).map_err(|_| format!("node {v}: {key} {raw} out of range"))
    };
    let mut timestamps = Vec::with_capacity(n);
    let mut known_complete_rounds = Vec::with_capacity(n);
    for v in 0..n {
        timestamps.push(flag(v, "timestamp")?);
        known_complete_rounds.push(flag(v, "known_complete_round")?);
    }

    let mut payload_received_rounds = vec![None; n];
    for rec in &trace.rounds {
        if rec.round < deliver_start {
            continue;
        }
        for del in &rec.deliveries {
            if del.message.kind == MessageKind::Data
                && del.receiver != co
                && payload_received_rounds[del.receiver].is_none()
            {
                payload_received_rounds[del.receiver] = Some(rec.round);
            }
        }
    }

    Ok(ArbOutcome {
        outcome: RunOutcome {
            trace: trace.clone(),
            result: parsed.result.clone(),
        },
        coordinator: co,
        actual_source,
        horizon,
        init_ack_round,
        fetch_start,
        fetch_ack_round: fetch_ack,
        deliver_start,
        timestamps,
        payload_received_rounds,
        known_complete_rounds,
    })
}

// ---------------------------------------------------------------------------
// Exhaustive harness.

#[derive(Debug, Clone)]
pub struct ExhaustiveOptions {
    pub max_n: usize,
    pub include_common_round: bool,
    pub include_arbitrary: bool,
    pub failure_cap: usize,
}

impl Default for ExhaustiveOptions {
    fn default() -> Self {
        ExhaustiveOptions {
            max_n: 6,
            include_common_round: true,
            include_arbitrary: true,
            failure_cap: 25,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExhaustiveSummary {
    /// `(n, connected graphs on n labeled nodes)` actually enumerated.
    pub graphs_by_size: Vec<(usize, u64)>,
    /// Graph-and-source combinations pushed through build, label, run, check.
    pub pipelines: u64,
    pub checks_run: u64,
    pub failures: Vec<String>,
    pub truncated: bool,
    /// Distinct labels that occurred, per scheme.
    pub realized_labels: BTreeMap<&'static str, BTreeSet<String>>,
}

impl ExhaustiveSummary {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (n, count) in &self.graphs_by_size {
            let _ = writeln!(out, "n={n}: {count} connected graphs");
        }
        let _ = writeln!(
            out,
            "{} pipelines, {} checks run",
            self.pipelines, self.checks_run
        );
        for (scheme, labels) in &self.realized_labels {
            let listing = labels.iter().cloned().collect::<Vec<_>>().join(",");
            let _ = writeln!(out, "labels used ({scheme}): {listing}");
        }
        if self.failures.is_empty() {
            let _ = writeln!(out, "all checks passed");
        } else {
            for f in &self.failures {
                let _ = writeln!(out, "FAIL {f}");
            }
            if self.truncated {
                let _ = writeln!(out, "further failures suppressed");
            }
        }
        out
    }
}

/// Enumerates every connected labeled graph on `n` nodes by edge mask.
pub fn for_each_connected_graph(n: usize, f: &mut dyn FnMut(&Graph)) {
    if n == 1 {
        let g = Graph::from_edges(1, []).expect("single node");
        f(&g);
        return;
    }
    let pairs: Vec<(NodeId, NodeId)> = (0..n)
        .flat_map(|u| ((u + 1)..n).map(move |v| (u, v)))
        .collect();
    let bits = pairs.len();
    assert!(bits <= 28, "edge mask enumeration works for small n only");
    for mask in 0u32..(1u32 << bits) {
        let mut nbr = [0u32; 8];
        for (idx, &(u, v)) in pairs.iter().enumerate() {
            if mask >> idx & 1 == 1 {
                nbr[u] |= 1 << v;
                nbr[v] |= 1 << u;
            }
        }
        // Bitmask reachability from node 0.
        let full = (1u32 << n) - 1;
        let mut reach = 1u32;
        loop {
            let mut next = reach;
            let mut m = reach;
            while m != 0 {
                next |= nbr[m.trailing_zeros() as usize];
                m &= m - 1;
            }
            if next == reach {
                break;
            }
            reach = next;
        }
        if reach != full {
            continue;
        }
        let g = Graph::from_edges(
            n,
            pairs
                .iter()
                .enumerate()
                .filter(|&(idx, _)| mask >> idx & 1 == 1)
                .map(|(_, &e)| e),
        )
        .expect("enumerated graph is valid");
        f(&g);
    }
}

/// Runs every pipeline over every connected graph up to `opts.max_n` nodes
/// and every source, collecting check failures.
pub fn exhaustive_small_graphs(opts: &ExhaustiveOptions) -> ExhaustiveSummary {
    let mut summary = ExhaustiveSummary::default();
    let mut masks: BTreeMap<&'static str, u8> = BTreeMap::new();
    for n in 1..=opts.max_n {
        let mut count = 0u64;
        for_each_connected_graph(n, &mut |g| {
            count += 1;
            pipelines_for_graph(g, opts, &mut summary, &mut masks);
        });
        summary.graphs_by_size.push((n, count));
    }
    for (scheme_str, mask) in masks {
        let scheme = Scheme::parse(scheme_str).expect("internal scheme name");
        let set: BTreeSet<String> = (0..8u8)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| Label::new(i & 4 != 0, i & 2 != 0, i & 1 != 0).bits(scheme))
            .collect();
        summary.realized_labels.insert(scheme_str, set);
    }
    summary
}

fn tally(masks: &mut BTreeMap<&'static str, u8>, scheme: Scheme, labels: &[Label]) {
    let mask = masks.entry(scheme.as_str()).or_insert(0);
    for l in labels {
        *mask |= 1 << (((l.x1 as u8) << 2) | ((l.x2 as u8) << 1) | l.x3 as u8);
    }
}

fn record_failure(summary: &mut ExhaustiveSummary, opts: &ExhaustiveOptions, line: String) {
    if summary.failures.len() < opts.failure_cap {
        summary.failures.push(line);
    } else {
        summary.truncated = true;
    }
}

fn merge_report(
    summary: &mut ExhaustiveSummary,
    opts: &ExhaustiveOptions,
    report: CheckReport,
) {
    summary.checks_run += report.entries.len() as u64;
    for e in report.entries {
        if !e.passed {
            record_failure(
                summary,
                opts,
                format!(
                    "{}: {}: {}",
                    report.context,
                    e.name,
                    e.witness.unwrap_or_default()
                ),
            );
        }
    }
}

fn pipelines_for_graph(
    g: &Graph,
    opts: &ExhaustiveOptions,
    summary: &mut ExhaustiveSummary,
    masks: &mut BTreeMap<&'static str, u8>,
) {
    let n = g.node_count();
    let payload: &[u8] = b"probe";
    let max_rounds = protocols::default_max_rounds(n);

    for source in 0..n {
        summary.pipelines += 1;
        let d = match StageDecomposition::build(g, source) {
            Ok(d) => d,
            Err(e) => {
                record_failure(
                    summary,
                    opts,
                    format!("{};source={source}: build failed: {e}", graph_signature(g)),
                );
                continue;
            }
        };
        merge_report(summary, opts, check_decomposition(g, &d));

        match labeling::broadcast_labels_from(g, &d) {
            Ok(lgb) => {
                tally(masks, Scheme::Broadcast, &lgb.labels);
                merge_report(summary, opts, check_labels_with(&lgb, &d));
                match protocols::run_broadcast(&lgb, source, payload, max_rounds) {
                    Ok(out) => merge_report(
                        summary,
                        opts,
                        check_broadcast_trace_with(&lgb, &d, &out.trace, &out.result),
                    ),
                    Err(e) => record_failure(
                        summary,
                        opts,
                        format!(
                            "{};source={source}: broadcast run failed: {e}",
                            graph_signature(g)
                        ),
                    ),
                }
            }
            Err(e) => record_failure(
                summary,
                opts,
                format!("{};source={source}: labeling failed: {e}", graph_signature(g)),
            ),
        }

        if n < 2 {
            continue;
        }
        match labeling::acknowledged_labels_from(g, &d) {
            Ok(lga) => {
                tally(masks, Scheme::Acknowledged, &lga.labels);
                merge_report(summary, opts, check_labels_with(&lga, &d));
                match protocols::run_acknowledged(&lga, source, payload, max_rounds) {
                    Ok(out) => {
                        merge_report(
                            summary,
                            opts,
                            check_acknowledged_trace_with(&lga, &d, &out.trace, &out.result),
                        );
                        if opts.include_common_round {
                            let m = out.result.ack_round.unwrap_or(0);
                            // The wrapper extends the outcome just checked, so
                            // only its appended rounds need checking.
                            match protocols::run_common_round_from(out, &lga, source, max_rounds)
                            {
                                Ok(w) => merge_report(
                                    summary,
                                    opts,
                                    check_wrapup_extension(&lga, &d, m, &w.trace, &w.result),
                                ),
                                Err(e) => record_failure(
                                    summary,
                                    opts,
                                    format!(
                                        "{};source={source}: common-round run failed: {e}",
                                        graph_signature(g)
                                    ),
                                ),
                            }
                        }
                    }
                    Err(e) => record_failure(
                        summary,
                        opts,
                        format!(
                            "{};source={source}: acknowledged run failed: {e}",
                            graph_signature(g)
                        ),
                    ),
                }
            }
            Err(e) => record_failure(
                summary,
                opts,
                format!("{};source={source}: labeling failed: {e}", graph_signature(g)),
            ),
        }
    }

    if opts.include_arbitrary && n >= 2 {
        let d0 = match StageDecomposition::build(g, 0) {
            Ok(d) => d,
            Err(e) => {
                record_failure(
                    summary,
                    opts,
                    format!("{}: coordinator build failed: {e}", graph_signature(g)),
                );
                return;
            }
        };
        match labeling::arbitrary_source_labels_from(g, &d0) {
            Ok(lga) => {
                tally(masks, Scheme::ArbitrarySource, &lga.labels);
                merge_report(summary, opts, check_labels_with(&lga, &d0));
                for actual in 0..n {
                    summary.pipelines += 1;
                    match protocols::run_arbitrary_source(&lga, actual, payload, max_rounds) {
                        Ok(arb) => merge_report(
                            summary,
                            opts,
                            check_arbitrary_with(&lga, &d0, &arb),
                        ),
                        Err(e) => record_failure(
                            summary,
                            opts,
                            format!(
                                "{};actual_source={actual}: arbitrary-source run failed: {e}",
                                graph_signature(g)
                            ),
                        ),
                    }
                }
            }
            Err(e) => record_failure(
                summary,
                opts,
                format!("{}: arbitrary labeling failed: {e}", graph_signature(g)),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Family;
    use crate::labeling::{acknowledged_labels, arbitrary_source_labels, broadcast_labels};
    use crate::protocols::{
        parse_trace_json, run_acknowledged, run_arbitrary_source, run_broadcast,
        run_common_round, to_trace_json,
    };

    fn gadget6() -> Graph {
        Graph::from_edges(6, [(0, 1), (0, 2), (1, 3), (2, 4), (1, 5), (2, 5)]).unwrap()
    }

    fn assert_clean(report: &CheckReport) {
        assert!(report.passed(), "unexpected failures:\n{}", report.render());
    }

    fn failed_names(report: &CheckReport) -> Vec<&'static str> {
        report.failures().map(|e| e.name).collect()
    }

    #[test]
    fn fixture_runs_pass_all_checks() {
        let g = gadget6();
        let d = StageDecomposition::build(&g, 0).unwrap();
        assert_clean(&check_decomposition(&g, &d));

        let lgb = broadcast_labels(&g, 0).unwrap();
        assert_clean(&check_labels_with(&lgb, &d));
        let b = run_broadcast(&lgb, 0, b"msg", 64).unwrap();
        assert_clean(&check_broadcast_trace_with(&lgb, &d, &b.trace, &b.result));

        let lga = acknowledged_labels(&g, 0).unwrap();
        assert_clean(&check_labels_with(&lga, &d));
        let a = run_acknowledged(&lga, 0, b"msg", 64).unwrap();
        assert_clean(&check_acknowledged_trace_with(&lga, &d, &a.trace, &a.result));
        let w = run_common_round(&lga, 0, b"msg", 64).unwrap();
        assert_clean(&check_common_round_trace_with(&lga, &d, &w.trace, &w.result));

        let arb_labels = arbitrary_source_labels(&g).unwrap();
        assert_clean(&check_labels(&arb_labels));
        for s in 0..6 {
            let arb = run_arbitrary_source(&arb_labels, s, b"msg", 64).unwrap();
            assert_clean(&check_arbitrary(&arb_labels, &arb));
        }
    }

    #[test]
    fn single_node_passes() {
        let g = Graph::from_edges(1, []).unwrap();
        let d = StageDecomposition::build(&g, 0).unwrap();
        assert_clean(&check_decomposition(&g, &d));
        let lg = broadcast_labels(&g, 0).unwrap();
        assert_clean(&check_labels_with(&lg, &d));
        let out = run_broadcast(&lg, 0, b"m", 8).unwrap();
        assert_clean(&check_broadcast_trace_with(&lg, &d, &out.trace, &out.result));
    }

    #[test]
    fn non_minimal_dominator_is_detected() {
        let g = Graph::generate(&Family::Path { n: 3 }, 0).unwrap();
        let d = StageDecomposition::build(&g, 0).unwrap();
        let mut stages: Vec<_> = d.stages().map(|(_, s)| s.clone()).collect();
        // Node 0 covers no one in stage 2's frontier, so adding it keeps the
        // set dominating but breaks minimality.
        stages[1].dominators.insert(0);
        let corrupt = StageDecomposition::from_parts(0, stages, 3);
        let report = check_decomposition(&g, &corrupt);
        assert_eq!(failed_names(&report), vec!["dominators_minimal"]);
    }

    #[test]
    fn forbidden_label_pattern_is_detected() {
        let g = gadget6();
        let mut lg = acknowledged_labels(&g, 0).unwrap();
        lg.labels[4].x3 = true; // 010 becomes 011
        let report = check_labels(&lg);
        let failed = failed_names(&report);
        assert!(failed.contains(&"no_mixed_terminal_label"), "{failed:?}");
        assert!(failed.contains(&"designated_node"), "{failed:?}");
    }

    #[test]
    fn suppressed_transmitter_is_detected() {
        let g = gadget6();
        let lg = broadcast_labels(&g, 0).unwrap();
        let mut out = run_broadcast(&lg, 0, b"msg", 64).unwrap();
        out.trace.rounds[2].transmissions.retain(|(v, _)| *v != 2);
        let report = check_broadcast_trace(&lg, &out.trace, &out.result);
        let failed = failed_names(&report);
        assert!(failed.contains(&"delivery_rule"), "{failed:?}");
        assert!(failed.contains(&"schedule_payload_transmitters"), "{failed:?}");
    }

    #[test]
    fn equal_ack_stamps_are_detected() {
        let g = gadget6();
        let lg = acknowledged_labels(&g, 0).unwrap();
        let mut out = run_acknowledged(&lg, 0, b"msg", 64).unwrap();
        // Rounds 6 and 7 carry the ack chain with stamps 5 then 1; forging
        // the second stamp to 5 breaks the strict descent. Deliveries are
        // forged to match so only the chain checks fire.
        let last = out.trace.rounds.last_mut().unwrap();
        for (_, m) in &mut last.transmissions {
            m.stamp = Some(5);
        }
        for del in &mut last.deliveries {
            del.message.stamp = Some(5);
        }
        let report = check_acknowledged_trace(&lg, &out.trace, &out.result);
        let failed = failed_names(&report);
        assert!(failed.contains(&"ack_chain_descends"), "{failed:?}");
        assert!(!failed.contains(&"delivery_rule"), "{failed:?}");
    }

    #[test]
    fn trace_files_round_trip_through_the_dispatcher() {
        let g = gadget6();

        let lgb = broadcast_labels(&g, 0).unwrap();
        let b = run_broadcast(&lgb, 0, b"msg", 64).unwrap();
        let parsed = parse_trace_json(&to_trace_json(ProtocolKind::Broadcast, &b)).unwrap();
        assert_clean(&check_trace(&lgb, &parsed));

        let lga = acknowledged_labels(&g, 0).unwrap();
        let a = run_acknowledged(&lga, 0, b"msg", 64).unwrap();
        let parsed = parse_trace_json(&to_trace_json(ProtocolKind::Acknowledged, &a)).unwrap();
        assert_clean(&check_trace(&lga, &parsed));

        let w = run_common_round(&lga, 0, b"msg", 64).unwrap();
        let parsed = parse_trace_json(&to_trace_json(ProtocolKind::CommonRound, &w)).unwrap();
        assert_clean(&check_trace(&lga, &parsed));

        let arb_labels = arbitrary_source_labels(&g).unwrap();
        for s in [0, 4] {
            let arb = run_arbitrary_source(&arb_labels, s, b"msg", 64).unwrap();
            let parsed =
                parse_trace_json(&to_trace_json(ProtocolKind::ArbitrarySource, &arb.outcome))
                    .unwrap();
            assert_clean(&check_trace(&arb_labels, &parsed));
        }
    }

    #[test]
    fn trace_for_the_wrong_scheme_is_rejected() {
        let g = gadget6();
        let lgb = broadcast_labels(&g, 0).unwrap();
        let b = run_broadcast(&lgb, 0, b"msg", 64).unwrap();
        let parsed = parse_trace_json(&to_trace_json(ProtocolKind::Acknowledged, &b)).unwrap();
        let report = check_trace(&lgb, &parsed);
        assert_eq!(failed_names(&report), vec!["scheme_supports_protocol"]);
    }

    #[test]
    fn exhaustive_covers_known_graph_counts() {
        let opts = ExhaustiveOptions {
            max_n: 4,
            ..ExhaustiveOptions::default()
        };
        let summary = exhaustive_small_graphs(&opts);
        assert!(summary.passed(), "{}", summary.render());
        assert_eq!(
            summary.graphs_by_size,
            vec![(1, 1), (2, 1), (3, 4), (4, 38)]
        );
        // One pipeline per source plus one per arbitrary-source starter.
        assert_eq!(summary.pipelines, 167 + 166);
        let broadcast = &summary.realized_labels["broadcast"];
        assert!(broadcast.contains("00") && broadcast.contains("10"));
        let ack = &summary.realized_labels["acknowledged"];
        assert!(ack.contains("001"));
    }
}
