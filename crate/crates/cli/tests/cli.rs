//! End-to-end checks of the command line surface: the generate, label,
//! simulate, verify pipe, the documented exit codes, and byte-stable output.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_radiocast"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn radiocast")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn radiocast")
}

fn assert_code(out: &Output, want: i32) {
    assert_eq!(
        out.status.code(),
        Some(want),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Fresh scratch directory per test; tests run in one process so the pid
/// alone does not discriminate.
fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("radiocast-cli-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).expect("create scratch dir");
    dir
}

#[test]
fn pipeline_round_trip_verifies() {
    let dir = scratch("pipe");
    let ok = |o: &Output| assert_code(o, 0);

    ok(&run_in(&dir, &["gen", "--family", "grid", "--rows", "2", "--cols", "3", "-o", "g.edges"]));
    ok(&run_in(
        &dir,
        &["label", "g.edges", "--scheme", "acknowledged", "--source", "0", "-o", "labels.json"],
    ));
    ok(&run_in(
        &dir,
        &["simulate", "g.edges", "labels.json", "--protocol", "acknowledged", "-o", "trace.json"],
    ));
    let verify = run_in(&dir, &["verify", "g.edges", "labels.json", "trace.json"]);
    ok(&verify);
    let stdout = String::from_utf8_lossy(&verify.stdout);
    assert!(stdout.contains("2 report(s): ok"), "stdout: {stdout}");

    // Graph alone checks the decomposition from every source.
    ok(&run_in(&dir, &["verify", "g.edges"]));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn generated_output_is_byte_stable() {
    let args = ["gen", "--family", "random", "--n", "12", "--p", "0.4", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    assert_code(&a, 0);
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());

    let other = run(&["gen", "--family", "random", "--n", "12", "--p", "0.4", "--seed", "8"]);
    assert_code(&other, 0);
    assert_ne!(a.stdout, other.stdout, "seed must matter");
}

#[test]
fn labels_json_is_frozen() {
    let dir = scratch("golden");
    assert_code(
        &run_in(&dir, &["gen", "--family", "path", "--n", "3", "-o", "p3.edges"]),
        0,
    );
    let out = run_in(&dir, &["label", "p3.edges", "--scheme", "acknowledged", "--source", "0"]);
    assert_code(&out, 0);
    let want = "{\n  \"scheme\": \"acknowledged\",\n  \"source\": 0,\n  \"labels\": [\n    \"100\",\n    \"100\",\n    \"001\"\n  ]\n}\n";
    assert_eq!(String::from_utf8_lossy(&out.stdout), want);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn bad_usage_exits_2() {
    assert_code(&run(&["gen", "--family", "torus", "--n", "4"]), 2);
    assert_code(&run(&["gen", "--family", "path"]), 2);

    let dir = scratch("usage");
    assert_code(
        &run_in(&dir, &["gen", "--family", "path", "--n", "4", "-o", "p4.edges"]),
        0,
    );
    // The arbitrary-source scheme fixes its coordinator itself.
    assert_code(
        &run_in(
            &dir,
            &["label", "p4.edges", "--scheme", "arbitrary-source", "--source", "1"],
        ),
        2,
    );
    // And simulating it needs to know who holds the payload.
    assert_code(
        &run_in(
            &dir,
            &["label", "p4.edges", "--scheme", "arbitrary-source", "-o", "arb.json"],
        ),
        0,
    );
    assert_code(
        &run_in(&dir, &["simulate", "p4.edges", "arb.json", "--protocol", "arbitrary-source"]),
        2,
    );
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn failed_verification_exits_1() {
    let dir = scratch("corrupt");
    assert_code(
        &run_in(&dir, &["gen", "--family", "path", "--n", "3", "-o", "p3.edges"]),
        0,
    );
    assert_code(
        &run_in(
            &dir,
            &["label", "p3.edges", "--scheme", "acknowledged", "--source", "0", "-o", "l.json"],
        ),
        0,
    );
    // Forge the terminal label into a forbidden value.
    let labels = std::fs::read_to_string(dir.join("l.json")).expect("labels file");
    assert!(labels.contains("\"001\""));
    std::fs::write(dir.join("l.json"), labels.replace("\"001\"", "\"011\"")).expect("rewrite");

    let out = run_in(&dir, &["verify", "p3.edges", "l.json"]);
    assert_code(&out, 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAILED"));

    let json = run_in(&dir, &["verify", "p3.edges", "l.json", "--json"]);
    assert_code(&json, 1);
    let value: serde_json::Value =
        serde_json::from_slice(&json.stdout).expect("verify --json output parses");
    assert_eq!(value["passed"], serde_json::Value::Bool(false));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn round_cap_exits_3() {
    let dir = scratch("cap");
    assert_code(
        &run_in(&dir, &["gen", "--family", "path", "--n", "8", "-o", "p8.edges"]),
        0,
    );
    assert_code(
        &run_in(
            &dir,
            &["label", "p8.edges", "--scheme", "broadcast", "--source", "0", "-o", "b.json"],
        ),
        0,
    );
    // An eight-node path needs 13 rounds; cap it at 2.
    assert_code(
        &run_in(
            &dir,
            &["simulate", "p8.edges", "b.json", "--protocol", "broadcast", "--max-rounds", "2"],
        ),
        3,
    );
    let _ = std::fs::remove_dir_all(&dir);
}
