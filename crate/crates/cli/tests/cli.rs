use std::io::Write;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_linregions"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_with_stdin(args: &[&str], input: &[u8]) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn constructed_network_pipes_into_enumerate() {
    let net = run(&["construct", "--kind", "shi", "--n", "3"]);
    assert!(net.status.success());
    let out = run_with_stdin(&["enumerate", "--expect", "16"], &net.stdout);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["count"], 16);
    assert_eq!(report["regions"].as_array().unwrap().len(), 16);
}

#[test]
fn wrong_expectation_exits_one() {
    let net = run(&["construct", "--kind", "abs"]);
    let out = run_with_stdin(&["enumerate", "--expect", "5", "--count-only"], &net.stdout);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("expected 5"));
}

#[test]
fn usage_and_parse_errors_exit_two() {
    assert_eq!(run(&["enumerate", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["construct", "--kind", "folding"]).status.code(), Some(2));
    let out = run_with_stdin(&["enumerate"], b"{\"input_dim\": 2, \"layers\": [");
    assert_eq!(out.status.code(), Some(2));
    let out = run_with_stdin(&["enumerate"], br#"{"input_dim": 1, "layers": [{"activation": "relu", "width": 1, "weights": [[1.0, 2.0]], "bias": [0.0]}]}"#);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn region_cap_exits_three() {
    let net = run(&["construct", "--kind", "catalan", "--n", "3"]);
    let out = run_with_stdin(&["enumerate", "--cap", "5"], &net.stdout);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn file_round_trip_preserves_counts() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.json");
    let spec = dir.path().join("spec.json");
    let built = run(&[
        "construct", "--kind", "folding", "--n0", "2", "--widths", "4,4",
        "--out", net.to_str().unwrap(), "--spec", spec.to_str().unwrap(),
    ]);
    assert!(built.status.success());
    let spec: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&spec).unwrap()).unwrap();
    assert_eq!(spec["kind"], "folding_rectifier_net");
    let out = run(&["enumerate", net.to_str().unwrap(), "--count-only"]);
    assert_eq!(stdout(&out).trim(), "58");
}

#[test]
fn bounds_prints_both_formats() {
    let text = run(&["bounds", "--n0", "2", "--widths", "4,4"]);
    assert!(stdout(&text).contains("shallow_max"));
    let json = run(&["bounds", "--n0", "1", "--widths", "2,2", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(v["regions_per_param_deep"], "3/5");
    assert_eq!(v["regions_per_param_shallow"], "5/8");
}

#[test]
fn planar_export_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("abs.json");
    run(&["construct", "--kind", "abs", "--out", net.to_str().unwrap()]);
    let csv = dir.path().join("r.csv");
    let svg = dir.path().join("r.svg");
    let out = run(&[
        "regions2d", net.to_str().unwrap(), "--csv", csv.to_str().unwrap(),
        "--svg", svg.to_str().unwrap(), "--view", "2",
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(csv).unwrap();
    assert!(csv.starts_with("region_id,vertex_index,x,y\n"));
    let ids: std::collections::BTreeSet<&str> =
        csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ids.len(), 4);
    assert!(std::fs::read_to_string(svg).unwrap().contains("<svg"));
}

#[test]
fn oracle_matches_enumeration_on_abs() {
    let net = run(&["construct", "--kind", "abs"]);
    let out = run_with_stdin(&["oracle", "--resolution", "101"], &net.stdout);
    assert_eq!(stdout(&out).trim(), "4");
}

#[test]
fn linmap_and_identify_report_json() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("abs.json");
    run(&["construct", "--kind", "abs", "--out", net.to_str().unwrap()]);
    let points = dir.path().join("p.csv");
    std::fs::write(&points, "x,y\n0.5,0.3\n-0.5,0.2\n0.7,-0.1\n").unwrap();
    let out = run(&[
        "linmap", net.to_str().unwrap(), "--layer", "2", "--unit", "1",
        "--points", points.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let pieces: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(pieces.as_array().unwrap().len(), 2);

    let out = run(&[
        "identify", net.to_str().unwrap(), "--layer", "2", "--unit", "1",
        "--x1", "0.5,0.3", "--x2", "-0.2,0.1",
    ]);
    assert!(out.status.success());
    let pair: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((pair["adjusted"][0].as_f64().unwrap() + 0.5).abs() < 1e-9);
}

#[test]
fn worker_count_does_not_change_output() {
    let net = run(&["construct", "--kind", "cones", "--n0", "2", "--depth", "2", "--k", "3"]);
    let one = run_with_stdin(&["--workers", "1", "enumerate"], &net.stdout);
    let many = run_with_stdin(&["--workers", "8", "enumerate"], &net.stdout);
    assert!(one.status.success());
    assert_eq!(one.stdout, many.stdout);
}
