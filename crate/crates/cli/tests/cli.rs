//! End-to-end checks of the `schemanet` binary beyond the acceptance gates.

use std::path::PathBuf;
use std::process::Command;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> (Option<i32>, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_schemanet"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn validate_reports_ok() {
    let (code, stdout, _) = run(&["validate", &fixture("fire_smoke.skb")]);
    assert_eq!(code, Some(0));
    assert_eq!(stdout, "ok\n");
}

#[test]
fn missing_file_is_a_usage_error() {
    let (code, _, stderr) = run(&["validate", "/no/such/file.skb"]);
    assert_eq!(code, Some(2));
    assert!(stderr.contains("cannot read"));
}

#[test]
fn query_plain_and_json_formats() {
    let (code, stdout, _) = run(&[
        "query",
        &fixture("fire_smoke.skb"),
        "--observe",
        "smoke=true",
        "--query",
        "fire",
    ]);
    assert_eq!(code, Some(0));
    assert_eq!(stdout, "P(fire | smoke=true) = 0.909091\n");

    let (code, stdout, _) = run(&[
        "query",
        &fixture("fire_smoke.skb"),
        "--query",
        "fire",
        "--format",
        "json",
    ]);
    assert_eq!(code, Some(0));
    assert_eq!(
        stdout,
        "{\"query\":\"fire\",\"p_true\":0.100000,\"evidence_probability\":1.000000}\n"
    );
}

#[test]
fn unknown_atom_suggests_near_misses() {
    let (code, _, stderr) =
        run(&["query", &fixture("fire_smoke.skb"), "--query", "fyre"]);
    assert_eq!(code, Some(1));
    assert!(stderr.contains("did you mean"), "stderr: {stderr}");
    assert!(stderr.contains("fire"), "stderr: {stderr}");
}

#[test]
fn member_flag_grows_the_network() {
    let (code, stdout, _) = run(&[
        "ground",
        &fixture("fire_alarm.skb"),
        "--member",
        "person=john,mary",
    ]);
    assert_eq!(code, Some(0));
    assert_eq!(stdout, "9 nodes, 9 arcs\n");

    let (code, stdout, _) = run(&[
        "ground",
        &fixture("fire_alarm.skb"),
        "--member",
        "person=john,mary,sue",
    ]);
    assert_eq!(code, Some(0));
    assert_eq!(stdout, "12 nodes, 13 arcs\n");
}

#[test]
fn session_script_interleaves_members_and_queries() {
    let script = std::env::temp_dir().join("schemanet_session.txt");
    std::fs::write(
        &script,
        "member person += john\n\
         query fire\n\
         observe leaves_building(john) = true\n\
         query fire\n\
         member person += mary\n\
         observe leaves_building(mary) = true\n\
         query fire\n",
    )
    .unwrap();
    let (code, stdout, stderr) =
        run(&["session", &fixture("fire_alarm.skb"), script.to_str().unwrap()]);
    assert_eq!(code, Some(0), "stderr: {stderr}");
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "P(fire) = 0.010000");
    assert!(lines[1].starts_with("P(fire | leaves_building(john)=true) = "));
    assert!(lines[2]
        .starts_with("P(fire | leaves_building(john)=true, leaves_building(mary)=true) = "));
    // a second corroborating report raises the posterior further
    let p = |line: &str| line.rsplit(' ').next().unwrap().parse::<f64>().unwrap();
    assert!(p(lines[1]) > p(lines[0]));
    assert!(p(lines[2]) > p(lines[1]));
}

#[test]
fn dot_export_marks_combination_nodes() {
    let dot_path = std::env::temp_dir().join("schemanet_cli_test.dot");
    let (code, _, _) = run(&[
        "ground",
        &fixture("fire_alarm.skb"),
        "--member",
        "person=john",
        "--dot",
        dot_path.to_str().unwrap(),
    ]);
    assert_eq!(code, Some(0));
    let dot = std::fs::read_to_string(&dot_path).unwrap();
    assert!(dot.starts_with("digraph"));
    assert!(dot.contains("diamond"), "quantifier nodes rendered distinctly");
    assert!(dot.contains("alarm_sounds"));
}
