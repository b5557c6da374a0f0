//! Command line front end: generate graphs, compute labelings, run the
//! broadcast protocols and verify the resulting artifacts.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 bad usage or
//! malformed input, 3 a simulation hit its round cap.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use radiocast::{
    acknowledged_labels, arbitrary_source_labels, broadcast_labels, check_arbitrary,
    check_labels, check_trace, default_max_rounds, run_acknowledged, run_arbitrary_source,
    run_broadcast, run_common_round, to_trace_json, verify, ArbOutcome, Family, Graph,
    LabeledGraph, NodeId, ProtocolError, ProtocolKind, Round, RunOutcome, Scheme,
    StageDecomposition,
};

#[derive(Parser)]
#[command(
    name = "radiocast",
    version,
    about = "Deterministic broadcast in radio networks: generate, label, simulate, verify"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph from a named family as an edge list.
    Gen(GenArgs),
    /// Compute a labeling for a graph.
    Label(LabelArgs),
    /// Run a protocol and record its trace.
    Simulate(SimulateArgs),
    /// Check a graph, labeling or trace against the definitions.
    Verify(VerifyArgs),
    /// Sweep graph families, run protocols and emit a CSV summary.
    Batch(BatchArgs),
}

#[derive(Args)]
struct GenArgs {
    /// path, cycle, star, complete, grid or random
    #[arg(long)]
    family: String,
    /// Node count (every family except grid).
    #[arg(long)]
    n: Option<usize>,
    /// Grid rows.
    #[arg(long)]
    rows: Option<usize>,
    /// Grid columns.
    #[arg(long)]
    cols: Option<usize>,
    /// Edge probability for the random family.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct LabelArgs {
    /// Graph edge-list file.
    graph: PathBuf,
    /// broadcast (b), acknowledged (ack) or arbitrary-source (arb)
    #[arg(long)]
    scheme: String,
    /// Source node; required except for arbitrary-source, which forbids it.
    #[arg(long)]
    source: Option<NodeId>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Graph edge-list file.
    graph: PathBuf,
    /// Labels JSON file.
    labels: PathBuf,
    /// broadcast (b), acknowledged (ack), common-round (common) or
    /// arbitrary-source (arb)
    #[arg(long)]
    protocol: String,
    /// Source node. Defaults to the labeling's source; for arbitrary-source
    /// this names the node actually holding the payload and is required.
    #[arg(long)]
    source: Option<NodeId>,
    /// Payload text.
    #[arg(long, default_value = "hello")]
    message: String,
    /// Round cap per phase. Defaults to 4n+16, overridable by the
    /// RADIOCAST_MAX_ROUNDS environment variable.
    #[arg(long)]
    max_rounds: Option<Round>,
    /// Trace output file; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Graph edge-list file.
    graph: PathBuf,
    /// Labels JSON file.
    labels: Option<PathBuf>,
    /// Trace JSON file; requires the labels.
    trace: Option<PathBuf>,
    /// Emit reports as JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BatchArgs {
    /// Comma-separated families.
    #[arg(long, default_value = "path,cycle,star,complete,grid,random")]
    families: String,
    /// Comma-separated node counts.
    #[arg(long, default_value = "2,3,4,6,9,12,16,24,32")]
    sizes: String,
    /// Comma-separated protocols to run on each graph.
    #[arg(long, default_value = "broadcast,acknowledged,common-round,arbitrary-source")]
    protocols: String,
    /// Seeds tried per random-family configuration.
    #[arg(long, default_value_t = 3)]
    trials: u64,
    /// Edge probability for the random family.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output file; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Directory to write one trace file per run into.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
}

/// Failures carrying their process exit code.
enum Failure {
    /// Bad arguments or malformed input files.
    Input(String),
    /// Verification ran and found violations.
    ChecksFailed,
    /// A simulation exceeded its round cap.
    Timeout(String),
}

impl Failure {
    fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Input(_) => ExitCode::from(2),
            Failure::ChecksFailed => ExitCode::from(1),
            Failure::Timeout(_) => ExitCode::from(3),
        }
    }
}

fn input_error(e: impl std::fmt::Display) -> Failure {
    Failure::Input(e.to_string())
}

fn protocol_failure(e: ProtocolError) -> Failure {
    match e {
        ProtocolError::Timeout { .. } | ProtocolError::Sim(radiocast::SimError::Timeout { .. }) => {
            Failure::Timeout(e.to_string())
        }
        other => Failure::Input(other.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Input(msg) => eprintln!("error: {msg}"),
                Failure::ChecksFailed => eprintln!("error: verification failed"),
                Failure::Timeout(msg) => eprintln!("error: {msg}"),
            }
            f.exit_code()
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Gen(args) => cmd_gen(args),
        Command::Label(args) => cmd_label(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Batch(args) => cmd_batch(args),
    }
}

fn read_to_string(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write_output(output: Option<&PathBuf>, content: &str) -> Result<(), Failure> {
    match output {
        Some(path) => fs::write(path, content)
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn load_graph(path: &Path) -> Result<Graph, Failure> {
    Graph::parse_edge_list(&read_to_string(path)?).map_err(input_error)
}

fn load_labeled(graph: &Path, labels: &Path) -> Result<LabeledGraph, Failure> {
    let g = load_graph(graph)?;
    LabeledGraph::from_labels_json(g, &read_to_string(labels)?).map_err(input_error)
}

// ---------------------------------------------------------------------------

fn cmd_gen(args: GenArgs) -> Result<(), Failure> {
    let need_n = |n: Option<usize>| {
        n.ok_or_else(|| Failure::Input(format!("--family {} needs --n", args.family)))
    };
    let family = match args.family.as_str() {
        "path" => Family::Path { n: need_n(args.n)? },
        "cycle" => Family::Cycle { n: need_n(args.n)? },
        "star" => Family::Star { n: need_n(args.n)? },
        "complete" => Family::Complete { n: need_n(args.n)? },
        "grid" => Family::Grid {
            rows: args
                .rows
                .ok_or_else(|| Failure::Input("--family grid needs --rows and --cols".into()))?,
            cols: args
                .cols
                .ok_or_else(|| Failure::Input("--family grid needs --rows and --cols".into()))?,
        },
        "random" => Family::Random {
            n: need_n(args.n)?,
            p: args.p.unwrap_or(0.5),
        },
        other => return Err(Failure::Input(format!("unknown family {other:?}"))),
    };
    let g = Graph::generate(&family, args.seed).map_err(input_error)?;
    write_output(args.output.as_ref(), &g.to_edge_list())
}

fn cmd_label(args: LabelArgs) -> Result<(), Failure> {
    let g = load_graph(&args.graph)?;
    let scheme = Scheme::parse(&args.scheme).map_err(input_error)?;
    let lg = match scheme {
        Scheme::Broadcast | Scheme::Acknowledged => {
            let source = args.source.ok_or_else(|| {
                Failure::Input(format!("--scheme {} needs --source", scheme.as_str()))
            })?;
            match scheme {
                Scheme::Broadcast => broadcast_labels(&g, source),
                _ => acknowledged_labels(&g, source),
            }
        }
        Scheme::ArbitrarySource => {
            if args.source.is_some() {
                return Err(Failure::Input(
                    "--scheme arbitrary-source takes no --source; labels fix node 0 as coordinator"
                        .into(),
                ));
            }
            arbitrary_source_labels(&g)
        }
    }
    .map_err(input_error)?;
    write_output(args.output.as_ref(), &lg.to_labels_json())
}

fn resolve_max_rounds(flag: Option<Round>, n: usize) -> Result<Round, Failure> {
    if let Some(r) = flag {
        return Ok(r);
    }
    match std::env::var("RADIOCAST_MAX_ROUNDS") {
        Ok(raw) => raw
            .parse()
            .map_err(|_| Failure::Input(format!("RADIOCAST_MAX_ROUNDS: bad value {raw:?}"))),
        Err(_) => Ok(default_max_rounds(n)),
    }
}

enum SimRun {
    Plain(RunOutcome),
    Arbitrary(ArbOutcome),
}

fn run_protocol(
    lg: &LabeledGraph,
    kind: ProtocolKind,
    source: Option<NodeId>,
    payload: &[u8],
    max_rounds: Round,
) -> Result<SimRun, Failure> {
    let labeled_source = || {
        source.or(lg.source_used).ok_or_else(|| {
            Failure::Input("labels carry no source; pass --source".into())
        })
    };
    match kind {
        ProtocolKind::Broadcast => run_broadcast(lg, labeled_source()?, payload, max_rounds)
            .map(SimRun::Plain)
            .map_err(protocol_failure),
        ProtocolKind::Acknowledged => run_acknowledged(lg, labeled_source()?, payload, max_rounds)
            .map(SimRun::Plain)
            .map_err(protocol_failure),
        ProtocolKind::CommonRound => run_common_round(lg, labeled_source()?, payload, max_rounds)
            .map(SimRun::Plain)
            .map_err(protocol_failure),
        ProtocolKind::ArbitrarySource => {
            let actual = source.ok_or_else(|| {
                Failure::Input(
                    "--protocol arbitrary-source needs --source naming the payload holder".into(),
                )
            })?;
            run_arbitrary_source(lg, actual, payload, max_rounds)
                .map(SimRun::Arbitrary)
                .map_err(protocol_failure)
        }
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let lg = load_labeled(&args.graph, &args.labels)?;
    let kind = ProtocolKind::parse(&args.protocol)
        .ok_or_else(|| Failure::Input(format!("unknown protocol {:?}", args.protocol)))?;
    let max_rounds = resolve_max_rounds(args.max_rounds, lg.graph.node_count())?;
    let run = run_protocol(&lg, kind, args.source, args.message.as_bytes(), max_rounds)?;

    let (json, summary) = match &run {
        SimRun::Plain(out) => {
            let mut line = format!(
                "{}: n={} completion_round={}",
                kind.as_str(),
                lg.graph.node_count(),
                out.result.completion_round
            );
            if let Some(a) = out.result.ack_round {
                let _ = write!(line, " ack_round={a}");
            }
            if let Some(c) = out.result.common_known_round {
                let _ = write!(line, " common_known_round={c}");
            }
            (to_trace_json(kind, out), line)
        }
        SimRun::Arbitrary(arb) => {
            let line = format!(
                "{}: n={} horizon={} completion_round={} known_complete_everywhere={}",
                kind.as_str(),
                lg.graph.node_count(),
                arb.horizon,
                arb.outcome.result.completion_round,
                arb.known_complete_rounds.first().copied().unwrap_or(0)
            );
            (to_trace_json(kind, &arb.outcome), line)
        }
    };
    write_output(args.output.as_ref(), &json)?;
    eprintln!("{summary}");
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let mut reports = Vec::new();
    match (&args.labels, &args.trace) {
        (None, _) => {
            // Graph alone: check the stage decomposition from every source.
            let g = load_graph(&args.graph)?;
            for source in g.nodes() {
                match StageDecomposition::build(&g, source) {
                    Ok(d) => reports.push(verify::check_decomposition(&g, &d)),
                    Err(e) => {
                        return Err(Failure::Input(format!("source {source}: {e}")));
                    }
                }
            }
        }
        (Some(labels), None) => {
            let lg = load_labeled(&args.graph, labels)?;
            reports.push(check_labels(&lg));
        }
        (Some(labels), Some(trace)) => {
            let lg = load_labeled(&args.graph, labels)?;
            let parsed =
                radiocast::parse_trace_json(&read_to_string(trace)?).map_err(input_error)?;
            reports.push(check_labels(&lg));
            reports.push(check_trace(&lg, &parsed));
        }
    }

    let all_passed = reports.iter().all(|r| r.passed());
    if args.json {
        let value = serde_json::json!({
            "passed": all_passed,
            "reports": reports.iter().map(|r| r.to_json_value()).collect::<Vec<_>>(),
        });
        println!(
            "{}",
            serde_json::to_string_pretty(&value).expect("report serialize")
        );
    } else {
        for r in &reports {
            print!("{}", r.render());
        }
        let verdict = if all_passed { "ok" } else { "FAILED" };
        println!("{}: {} report(s): {verdict}", args.graph.display(), reports.len());
    }
    if all_passed {
        Ok(())
    } else {
        Err(Failure::ChecksFailed)
    }
}

// ---------------------------------------------------------------------------
// Batch sweeps.

fn grid_shape(n: usize) -> (usize, usize) {
    let mut rows = 1;
    for r in 1..=n {
        if r * r > n {
            break;
        }
        if n % r == 0 {
            rows = r;
        }
    }
    (rows, n / rows)
}

fn batch_family(name: &str, n: usize, p: f64) -> Result<Option<Family>, Failure> {
    let family = match name {
        "path" => Family::Path { n },
        "cycle" if n < 3 => return Ok(None),
        "cycle" => Family::Cycle { n },
        "star" => Family::Star { n },
        "complete" => Family::Complete { n },
        "grid" => {
            let (rows, cols) = grid_shape(n);
            Family::Grid { rows, cols }
        }
        "random" => Family::Random { n, p },
        other => return Err(Failure::Input(format!("unknown family {other:?}"))),
    };
    Ok(Some(family))
}

struct BatchRow<'a> {
    family: &'a str,
    n: usize,
    seed: u64,
    source: NodeId,
    scheme: Scheme,
    kind: ProtocolKind,
    completion_round: Round,
    ack_round: Option<Round>,
    ell: usize,
    pass: bool,
}

impl BatchRow<'_> {
    fn csv_line(&self) -> String {
        let bound = (2 * self.n).saturating_sub(3);
        let ack = self.ack_round.map(|a| a.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{bound},{ack},{},{}\n",
            self.family,
            self.n,
            self.seed,
            self.source,
            self.scheme.as_str(),
            self.kind.as_str(),
            self.completion_round,
            self.ell,
            self.pass
        )
    }
}

fn cmd_batch(args: BatchArgs) -> Result<(), Failure> {
    let families: Vec<&str> = args.families.split(',').map(str::trim).collect();
    let sizes: Vec<usize> = args
        .sizes
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Failure::Input(format!("bad size {s:?}")))
        })
        .collect::<Result<_, _>>()?;
    let kinds: Vec<ProtocolKind> = args
        .protocols
        .split(',')
        .map(|s| {
            ProtocolKind::parse(s.trim())
                .ok_or_else(|| Failure::Input(format!("unknown protocol {s:?}")))
        })
        .collect::<Result<_, _>>()?;
    if let Some(dir) = &args.trace_dir {
        fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
    }

    let mut csv = String::from(
        "family,n,seed,source,scheme,protocol,completion_round,bound_2n_minus_3,ack_round,ell,pass\n",
    );
    let mut all_passed = true;
    for family_name in &families {
        for &n in &sizes {
            let trials = if *family_name == "random" { args.trials } else { 1 };
            for trial in 0..trials {
                let seed = args.seed.wrapping_add(trial);
                let Some(family) = batch_family(family_name, n, args.p)? else {
                    continue;
                };
                let g = Graph::generate(&family, seed).map_err(input_error)?;
                for &kind in &kinds {
                    if let Some(row) =
                        batch_run(&g, family_name, n, seed, kind, args.trace_dir.as_deref())?
                    {
                        all_passed &= row.pass;
                        csv.push_str(&row.csv_line());
                    }
                }
            }
        }
    }
    write_output(args.output.as_ref(), &csv)?;
    if all_passed {
        Ok(())
    } else {
        Err(Failure::ChecksFailed)
    }
}

fn batch_run<'a>(
    g: &Graph,
    family: &'a str,
    n: usize,
    seed: u64,
    kind: ProtocolKind,
    trace_dir: Option<&Path>,
) -> Result<Option<BatchRow<'a>>, Failure> {
    // Acknowledgement and arbitrary-source schemes need a designated node,
    // which a single-node graph cannot supply.
    if n < 2 && kind != ProtocolKind::Broadcast {
        return Ok(None);
    }
    let payload = b"batch";
    let max_rounds = default_max_rounds(n);
    let source = 0;
    let d = StageDecomposition::build(g, source).map_err(input_error)?;
    let ell = d.last_stage();

    let (scheme, run, report) = match kind {
        ProtocolKind::Broadcast => {
            let lg = broadcast_labels(g, source).map_err(input_error)?;
            let out = run_broadcast(&lg, source, payload, max_rounds).map_err(protocol_failure)?;
            let report = verify::check_broadcast_trace_with(&lg, &d, &out.trace, &out.result);
            (Scheme::Broadcast, SimRun::Plain(out), report)
        }
        ProtocolKind::Acknowledged => {
            let lg = acknowledged_labels(g, source).map_err(input_error)?;
            let out =
                run_acknowledged(&lg, source, payload, max_rounds).map_err(protocol_failure)?;
            let report = verify::check_acknowledged_trace_with(&lg, &d, &out.trace, &out.result);
            (Scheme::Acknowledged, SimRun::Plain(out), report)
        }
        ProtocolKind::CommonRound => {
            let lg = acknowledged_labels(g, source).map_err(input_error)?;
            let out =
                run_common_round(&lg, source, payload, max_rounds).map_err(protocol_failure)?;
            let report = verify::check_common_round_trace_with(&lg, &d, &out.trace, &out.result);
            (Scheme::Acknowledged, SimRun::Plain(out), report)
        }
        ProtocolKind::ArbitrarySource => {
            let lg = arbitrary_source_labels(g).map_err(input_error)?;
            let actual = n - 1;
            let arb =
                run_arbitrary_source(&lg, actual, payload, max_rounds).map_err(protocol_failure)?;
            let report = check_arbitrary(&lg, &arb);
            (Scheme::ArbitrarySource, SimRun::Arbitrary(arb), report)
        }
    };

    let (result, actual_source) = match &run {
        SimRun::Plain(out) => (&out.result, source),
        SimRun::Arbitrary(arb) => (&arb.outcome.result, arb.actual_source),
    };
    if let Some(dir) = trace_dir {
        let json = match &run {
            SimRun::Plain(out) => to_trace_json(kind, out),
            SimRun::Arbitrary(arb) => to_trace_json(kind, &arb.outcome),
        };
        let path = dir.join(format!("{family}_n{n}_seed{seed}_{}.json", kind.as_str()));
        fs::write(&path, json).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(Some(BatchRow {
        family,
        n,
        seed,
        source: actual_source,
        scheme,
        kind,
        completion_round: result.completion_round,
        ack_round: result.ack_round,
        ell,
        pass: report.passed(),
    }))
}
