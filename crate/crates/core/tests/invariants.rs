//! Randomized end-to-end properties over generated connected graphs. Each
//! case builds the full pipeline and holds it against the independent
//! checkers, then pins the headline quantities directly.

use proptest::prelude::*;

use radiocast::{
    acknowledged_labels, arbitrary_source_labels, broadcast_labels, check_labels,
    parse_trace_json, run_acknowledged, run_arbitrary_source, run_broadcast, run_common_round,
    to_trace_json, verify, Family, Graph, LabeledGraph, ProtocolKind, Round, RunOutcome, Scheme,
    StageDecomposition,
};

fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    Graph::generate(&Family::Random { n, p }, seed).expect("connected sample")
}

fn max_rounds(n: usize) -> Round {
    radiocast::default_max_rounds(n)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn decomposition_invariants_hold(
        n in 2usize..=20,
        p in 0.15f64..0.9,
        seed in any::<u64>(),
        pick in any::<usize>(),
    ) {
        let g = random_graph(n, p, seed);
        let source = pick % n;
        let d = StageDecomposition::build(&g, source).unwrap();
        let report = verify::check_decomposition(&g, &d);
        prop_assert!(report.passed(), "{}", report.render());
        prop_assert!(d.last_stage() <= n);
    }

    #[test]
    fn broadcast_completes_exactly_on_schedule(
        n in 2usize..=20,
        p in 0.15f64..0.9,
        seed in any::<u64>(),
        pick in any::<usize>(),
    ) {
        let g = random_graph(n, p, seed);
        let source = pick % n;
        let d = StageDecomposition::build(&g, source).unwrap();
        let lg = broadcast_labels(&g, source).unwrap();
        let out = run_broadcast(&lg, source, b"x", max_rounds(n)).unwrap();
        let report = verify::check_broadcast_trace_with(&lg, &d, &out.trace, &out.result);
        prop_assert!(report.passed(), "{}", report.render());
        prop_assert_eq!(out.result.completion_round, d.broadcast_rounds());
        prop_assert!(out.result.completion_round <= (2 * n as Round).saturating_sub(3));
    }

    #[test]
    fn acknowledgement_lands_in_window(
        n in 2usize..=20,
        p in 0.15f64..0.9,
        seed in any::<u64>(),
        pick in any::<usize>(),
    ) {
        let g = random_graph(n, p, seed);
        let source = pick % n;
        let d = StageDecomposition::build(&g, source).unwrap();
        let lg = acknowledged_labels(&g, source).unwrap();
        let out = run_acknowledged(&lg, source, b"x", max_rounds(n)).unwrap();
        let report = verify::check_acknowledged_trace_with(&lg, &d, &out.trace, &out.result);
        prop_assert!(report.passed(), "{}", report.render());
        let l = d.last_stage() as Round;
        let ack = out.result.ack_round.unwrap();
        prop_assert!(2 * l - 2 <= ack && ack <= 3 * l - 4);
    }

    #[test]
    fn wrapper_reaches_common_knowledge(
        n in 2usize..=20,
        p in 0.15f64..0.9,
        seed in any::<u64>(),
        pick in any::<usize>(),
    ) {
        let g = random_graph(n, p, seed);
        let source = pick % n;
        let d = StageDecomposition::build(&g, source).unwrap();
        let lg = acknowledged_labels(&g, source).unwrap();
        let out = run_common_round(&lg, source, b"x", max_rounds(n)).unwrap();
        let report = verify::check_common_round_trace_with(&lg, &d, &out.trace, &out.result);
        prop_assert!(report.passed(), "{}", report.render());
        let m = out.result.ack_round.unwrap();
        prop_assert_eq!(out.result.common_known_round, Some(2 * m));
    }

    #[test]
    fn arbitrary_source_completion_coincides(
        n in 2usize..=20,
        p in 0.15f64..0.9,
        seed in any::<u64>(),
        pick in any::<usize>(),
    ) {
        let g = random_graph(n, p, seed);
        let actual = pick % n;
        let lg = arbitrary_source_labels(&g).unwrap();
        prop_assert!(check_labels(&lg).passed());
        let arb = run_arbitrary_source(&lg, actual, b"x", max_rounds(n)).unwrap();
        let report = verify::check_arbitrary(&lg, &arb);
        prop_assert!(report.passed(), "{}", report.render());
        let first = arb.known_complete_rounds[0];
        prop_assert!(arb.known_complete_rounds.iter().all(|&r| r == first));
    }

    #[test]
    fn label_budgets_hold_at_scale(
        n in 2usize..=64,
        p in 0.1f64..0.9,
        seed in any::<u64>(),
    ) {
        let g = random_graph(n, p, seed);
        for (lg, width, budget) in [
            (broadcast_labels(&g, 0).unwrap(), 2, 4),
            (acknowledged_labels(&g, 0).unwrap(), 3, 5),
            (arbitrary_source_labels(&g).unwrap(), 3, 6),
        ] {
            prop_assert!(check_labels(&lg).passed());
            let distinct: std::collections::BTreeSet<String> =
                lg.labels.iter().map(|l| l.bits(lg.scheme)).collect();
            prop_assert!(distinct.len() <= budget);
            prop_assert!(distinct.iter().all(|b| b.len() == width));
        }
    }

    #[test]
    fn artifacts_round_trip_bytewise(
        n in 2usize..=12,
        p in 0.2f64..0.9,
        seed in any::<u64>(),
    ) {
        let g = random_graph(n, p, seed);
        let text = g.to_edge_list();
        prop_assert_eq!(&Graph::parse_edge_list(&text).unwrap(), &g);

        let lg = acknowledged_labels(&g, 0).unwrap();
        let json = lg.to_labels_json();
        let back = LabeledGraph::from_labels_json(g.clone(), &json).unwrap();
        prop_assert_eq!(&back.labels, &lg.labels);
        prop_assert_eq!(back.scheme, Scheme::Acknowledged);
        prop_assert_eq!(&back.to_labels_json(), &json);

        let out = run_acknowledged(&lg, 0, b"x", max_rounds(n)).unwrap();
        let json = to_trace_json(ProtocolKind::Acknowledged, &out);
        let parsed = parse_trace_json(&json).unwrap();
        prop_assert_eq!(parsed.kind, ProtocolKind::Acknowledged);
        let rebuilt = RunOutcome { trace: parsed.trace, result: parsed.result };
        prop_assert_eq!(&to_trace_json(ProtocolKind::Acknowledged, &rebuilt), &json);
    }
}
