use std::path::{Path, PathBuf};
use std::process::Command;

use inclusion_cli::{run_with_env, Outcome, EXIT_ERROR, EXIT_FINDINGS, EXIT_OK};
use proptest::prelude::*;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data")
        .join(name)
        .display()
        .to_string()
}

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/golden")
        .join(name);
    std::fs::read_to_string(path).unwrap()
}

fn run(args: &[&str]) -> Outcome {
    run_env(args, None)
}

fn run_env(args: &[&str], env: Option<&str>) -> Outcome {
    let mut full = vec!["inclusion"];
    full.extend_from_slice(args);
    run_with_env(full, env.map(str::to_string))
}

fn json(out: &Outcome) -> serde_json::Value {
    serde_json::from_str(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", out.stdout))
}

#[test]
fn project_flow_report() {
    let out = run(&["include", &data("cash_flow.csv"), "--manifest", &data("cash_flow.json")]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    assert_eq!(out.stdout, golden("project_irr.txt"));
    assert!(out.stderr.is_empty());
}

#[test]
fn raw_statement_fails_zero_check() {
    let out = run(&["check", &data("cash_flow_raw.csv")]);
    assert_eq!(out.code, EXIT_FINDINGS);
    let zero = out.stdout.lines().find(|l| l.starts_with("* Zero check")).unwrap();
    assert_eq!(
        zero.split_whitespace().skip(3).collect::<Vec<_>>(),
        ["0", "60", "60", "60", "(180)"]
    );

    let out = run(&["check", &data("cash_flow_raw.csv"), "--format", "json"]);
    assert_eq!(out.code, EXIT_FINDINGS);
    let doc = json(&out);
    assert_eq!(
        doc["zero_check"]["residuals"],
        serde_json::json!([0.0, 60.0, 60.0, 60.0, -180.0])
    );
    assert_eq!(doc["zero_check"]["pass"], false);
}

#[test]
fn normalized_statement_passes_zero_check() {
    let out = run(&[
        "check",
        &data("cash_flow_raw.csv"),
        "--manifest",
        &data("project_irr.json"),
    ]);
    assert_eq!(out.code, EXIT_OK);
    assert!(out.stdout.contains("zero check passes"));
}

#[test]
fn debt_equity_report() {
    let out = run(&["include3", &data("debt_equity.csv"), "--top", "79", "--bottom", "10"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let sections: Vec<&str> = out.stdout.lines().collect();
    let top = sections.iter().position(|l| *l == "* INCLUDED IN TOP").unwrap();
    assert_eq!(
        sections[top + 2].split_whitespace().collect::<Vec<_>>(),
        ["senior", "loan", "(79)"]
    );
    let bottom = sections.iter().position(|l| *l == "* INCLUDED IN BOTTOM").unwrap();
    assert_eq!(
        sections[bottom + 2].split_whitespace().collect::<Vec<_>>(),
        ["share", "capital", "(10)"]
    );
    assert!(!out.stdout.contains("Zero check"));

    let out = run(&[
        "include3",
        &data("debt_equity.csv"),
        "--manifest",
        &data("debt_equity.json"),
    ]);
    assert_eq!(out.code, EXIT_OK);
    assert!(out.stdout.starts_with(&golden("debt_equity.txt")));
}

#[test]
fn reported_ratio_mismatch_is_a_finding() {
    let out = run(&[
        "include3",
        &data("debt_equity.csv"),
        "--top",
        "79",
        "--bottom",
        "10",
        "--reported",
        "79%",
    ]);
    assert_eq!(out.code, EXIT_FINDINGS);
    assert!(out.stdout.contains("reported below"));
}

#[test]
fn irr_from_flows() {
    let out = run(&["irr", "--flows", "-60,60,60,60,0", "--reported", "83.93%"]);
    assert_eq!(out.code, EXIT_OK);
    assert!(out.stdout.contains("83.93%"));
    let out = run(&[
        "irr",
        "--flows",
        "(60),60,60,60,-",
        "--reported",
        "80%",
        "--format",
        "json",
    ]);
    assert_eq!(out.code, EXIT_FINDINGS);
    let doc = json(&out);
    assert!((doc["recalculated"].as_f64().unwrap() - 0.8393).abs() < 0.00005);
    assert_eq!(doc["check"]["pass"], false);
}

#[test]
fn irr_from_manifest() {
    let out = run(&[
        "irr",
        &data("cash_flow_raw.csv"),
        "--manifest",
        &data("shareholder_irr.json"),
    ]);
    assert_eq!(out.code, EXIT_OK);
    assert!(out.stdout.contains("23.38%"));
}

#[test]
fn tolerance_precedence() {
    let base = ["include", &data("cash_flow.csv"), "--target", "(60),60,60,60.5,-"];
    let with = |extra: &[&str], env: Option<&str>| {
        let mut args = base.to_vec();
        args.extend_from_slice(extra);
        run_env(&args, env).code
    };
    assert_eq!(with(&[], None), EXIT_FINDINGS);
    assert_eq!(with(&[], Some("1")), EXIT_OK);
    assert_eq!(with(&["--tolerance", "0.1"], Some("1")), EXIT_FINDINGS);
    assert_eq!(with(&["--tolerance", "0.6"], None), EXIT_OK);
}

#[test]
fn no_partition_json_is_parseable() {
    let out = run(&[
        "include",
        &data("cash_flow.csv"),
        "--target",
        "1,2,3,4,5",
        "--format",
        "json",
    ]);
    assert_eq!(out.code, EXIT_FINDINGS);
    let doc = json(&out);
    assert_eq!(doc["schema"], 1);
    assert_eq!(doc["partitions"], serde_json::json!([]));
}

#[test]
fn markdown_report() {
    let out = run(&[
        "include",
        &data("cash_flow.csv"),
        "--manifest",
        &data("cash_flow.json"),
        "--format",
        "markdown",
    ]);
    assert_eq!(out.code, EXIT_OK);
    assert!(out.stdout.starts_with('|'));
    assert!(out.stdout.contains("**ITEMS INCLUDED**"));
}

#[test]
fn input_errors_name_the_file() {
    let out = run(&["check", "/nonexistent/statement.csv"]);
    assert_eq!(out.code, EXIT_ERROR);
    assert!(out.stdout.is_empty());
    assert!(out.stderr.contains("/nonexistent/statement.csv"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "Year,2010,2011\nsales,10,abc\n").unwrap();
    let out = run(&["check", bad.to_str().unwrap()]);
    assert_eq!(out.code, EXIT_ERROR);
    assert!(out.stderr.contains("bad.csv"), "{}", out.stderr);
    assert!(out.stderr.contains("row 2"), "{}", out.stderr);

    let out = run(&[
        "include",
        &data("cash_flow.csv"),
        "--manifest",
        &data("balance_sheet.json"),
    ]);
    assert_eq!(out.code, EXIT_ERROR);
    assert!(out.stderr.contains("balance_sheet.json"), "{}", out.stderr);

    let out = run(&[
        "include",
        &data("cash_flow.csv"),
        "--manifest",
        &data("debt_equity.json"),
    ]);
    assert_eq!(out.code, EXIT_ERROR);
    assert!(out.stderr.contains("include3"), "{}", out.stderr);
}

#[test]
fn usage_errors() {
    assert_eq!(run(&[]).code, EXIT_ERROR);
    assert_eq!(run(&["include"]).code, EXIT_ERROR);
    assert_eq!(run(&["check", "x.csv", "--format", "yaml"]).code, EXIT_ERROR);
    assert_eq!(
        run(&["include3", &data("debt_equity.csv"), "--top", "79"]).code,
        EXIT_ERROR
    );
    assert_eq!(run(&["include", &data("cash_flow.csv")]).code, EXIT_ERROR);
    assert_eq!(
        run(&[
            "include3",
            &data("debt_equity.csv"),
            "--top",
            "79",
            "--bottom",
            "10",
            "--threads",
            "0"
        ])
        .code,
        EXIT_ERROR
    );
    let help = run(&["--help"]);
    assert_eq!(help.code, EXIT_OK);
    assert!(help.stdout.contains("include3"));
}

#[test]
fn grid_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    std::fs::write(&path, ",a,b,Total\nx,1,2,3\ny,4,5,9\nTotal,5,7,12\n").unwrap();
    let out = run(&["check", "--grid", path.to_str().unwrap()]);
    assert_eq!(out.code, EXIT_OK, "{}{}", out.stdout, out.stderr);
    assert!(out.stdout.contains("SUM(A) = G * 4"));
    std::fs::write(&path, ",a,b,Total\nx,1,2,3\ny,4,5,9\nTotal,5,7,13\n").unwrap();
    let out = run(&["check", "--grid", path.to_str().unwrap()]);
    assert_eq!(out.code, EXIT_FINDINGS);
    assert!(out.stdout.contains("FAIL"));
}

fn generate(dir: &Path, args: &[&str]) {
    let mut full = vec!["gen", "--out", dir.to_str().unwrap()];
    full.extend_from_slice(args);
    let out = run(&full);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
}

#[test]
fn generated_fixtures_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), &["--seed", "5"]);
    for file in ["statement.csv", "manifest.json", "truth.json"] {
        assert!(dir.path().join(file).exists());
    }
    let statement = dir.path().join("statement.csv");
    let manifest = dir.path().join("manifest.json");
    let out = run(&[
        "include",
        statement.to_str().unwrap(),
        "--manifest",
        manifest.to_str().unwrap(),
    ]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);

    let again = tempfile::tempdir().unwrap();
    generate(again.path(), &["--seed", "5"]);
    for file in ["statement.csv", "manifest.json", "truth.json"] {
        assert_eq!(
            std::fs::read(dir.path().join(file)).unwrap(),
            std::fs::read(again.path().join(file)).unwrap()
        );
    }
}

#[test]
fn diagnose_finds_a_timing_shift() {
    let dir = tempfile::tempdir().unwrap();
    generate(
        dir.path(),
        &["--seed", "3", "--fault", "timing-shift", "--offset", "-1"],
    );
    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("truth.json")).unwrap()).unwrap();
    assert_eq!(truth["truth"]["expected"]["kind"], "shift");
    let statement = dir.path().join("statement.csv");
    let manifest = dir.path().join("manifest.json");
    let args = [
        "diagnose",
        statement.to_str().unwrap(),
        "--manifest",
        manifest.to_str().unwrap(),
    ];
    let out = run(&args);
    assert_eq!(out.code, EXIT_FINDINGS);
    assert!(out.stdout.contains("TIMING SHIFTS"));
    assert!(out.stdout.contains("moved 1 period later"));

    let mut args = args.to_vec();
    args.extend(["--format", "json"]);
    let doc = json(&run(&args));
    let finding = &doc["diagnosis"]["shift_findings"][0];
    assert_eq!(finding["row"], truth["truth"]["expected"]["row"]);
    assert_eq!(finding["offset"], truth["truth"]["expected"]["offset"]);
}

#[test]
fn diagnose_exact_partition_exits_zero() {
    let out = run(&[
        "diagnose",
        &data("cash_flow.csv"),
        "--manifest",
        &data("cash_flow.json"),
    ]);
    assert_eq!(out.code, EXIT_OK);
    assert!(out.stdout.starts_with("EXACT"));
}

#[test]
fn binary_separates_streams() {
    let bin = env!("CARGO_BIN_EXE_inclusion");
    let out = Command::new(bin)
        .args(["check", &data("cash_flow_raw.csv")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_FINDINGS));
    assert!(!out.stdout.is_empty());
    assert!(out.stderr.is_empty());

    let out = Command::new(bin)
        .args(["include", &data("cash_flow.csv"), "--target", "(60),60,60,60.5,-"])
        .env("INCLUSION_TOLERANCE", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_OK));

    let out = Command::new(bin).args(["check", "/nonexistent.csv"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_ERROR));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));

    let out = Command::new(bin).arg("--version").output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8_lossy(&out.stdout).contains("report schema 1"));
}

#[derive(Debug, Clone, Copy)]
enum Planted {
    None,
    Omission,
    SignError,
    DoubleCount,
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exit_codes_follow_the_planted_fault(
        seed in 0u64..10_000,
        planted in prop_oneof![
            Just(Planted::None),
            Just(Planted::Omission),
            Just(Planted::SignError),
            Just(Planted::DoubleCount),
        ],
        format in prop_oneof![Just("text"), Just("json")],
    ) {
        let dir = tempfile::tempdir().unwrap();
        let seed = seed.to_string();
        let (gen_args, command, extra, expected): (Vec<&str>, &str, Vec<&str>, i32) = match planted {
            Planted::None => (vec![], "include", vec![], EXIT_OK),
            Planted::Omission => (vec!["--fault", "omission"], "include", vec![], EXIT_OK),
            Planted::SignError => (vec!["--fault", "sign-error"], "include", vec![], EXIT_FINDINGS),
            Planted::DoubleCount => (
                vec!["--shape", "three-way", "--fault", "double-count"],
                "include3",
                vec!["--allow-overlap"],
                EXIT_FINDINGS,
            ),
        };
        let mut args = vec!["--seed", seed.as_str()];
        args.extend(gen_args);
        generate(dir.path(), &args);
        let statement = dir.path().join("statement.csv");
        let manifest = dir.path().join("manifest.json");
        let mut args = vec![command, statement.to_str().unwrap(), "--manifest", manifest.to_str().unwrap(), "--format", format];
        args.extend(extra);
        let out = run(&args);
        prop_assert_eq!(out.code, expected, "{}{}", out.stdout, out.stderr);
        if format == "json" {
            prop_assert!(serde_json::from_str::<serde_json::Value>(&out.stdout).is_ok());
        }
    }
}
