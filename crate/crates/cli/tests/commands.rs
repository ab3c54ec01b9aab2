use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use chaincore_cli::report::ReportDocument;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(format!("{name}.json"))
        .to_string_lossy()
        .into_owned()
}

/// A cache shared by the tests in this file, so each fixture is built once.
fn shared_cache() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| tempfile::tempdir().unwrap()).path()
}

fn run_in(cache: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chaincore"))
        .arg("--cache-dir")
        .arg(cache)
        .args(args)
        .output()
        .unwrap()
}

fn run(args: &[&str]) -> Output {
    run_in(shared_cache(), args)
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn doc(o: &Output) -> ReportDocument {
    assert_eq!(code(o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    ReportDocument::from_json(&String::from_utf8(o.stdout.clone()).unwrap()).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

const TABLE1: [f64; 12] = [
    13.0 + 1.0 / 3.0,
    15.0,
    23.0 + 1.0 / 3.0,
    33.0 + 1.0 / 3.0,
    33.0 + 1.0 / 3.0,
    36.5,
    43.0 + 1.0 / 3.0,
    54.0,
    53.0 + 1.0 / 3.0,
    61.0 + 2.0 / 3.0,
    73.0 + 1.0 / 3.0,
    113.0 + 1.0 / 3.0,
];

#[test]
fn value_emits_the_full_table() {
    let d = doc(&run(&["value", &fixture("example2")]));
    let values = d.values.unwrap();
    assert_eq!(values.len(), 16);
    let nonempty: Vec<f64> = values.iter().filter(|r| !r.retailers.is_empty()).map(|r| r.value).collect();
    for (got, want) in nonempty.iter().zip(TABLE1) {
        assert!(close(*got, want, 1e-6), "{got} vs {want}");
    }
    assert_eq!(values[0].orders, None);
}

#[test]
fn value_of_one_coalition() {
    let d = doc(&run(&["value", &fixture("example2"), "--coalition", "R=2;S=1,2"]));
    let values = d.values.unwrap();
    assert_eq!(values.len(), 1);
    assert_eq!(values[0].retailers, vec!["2"]);
    assert_eq!(values[0].suppliers, vec!["1", "2"]);
    assert!(close(values[0].value, 54.0, 1e-6));
}

#[test]
fn bad_coalitions_are_input_errors() {
    let o = run(&["value", &fixture("example2"), "--coalition", "R=7"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no retailer with id \"7\""));
}

#[test]
fn missing_file_is_an_input_error() {
    let o = run(&["value", "missing.json"]);
    assert_eq!(code(&o), 1);
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));
}

#[test]
fn invalid_situation_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = std::fs::read_to_string(fixture("example2")).unwrap().replace("[[0, 8], [40, 0]]", "[[0, 8], [10, 9], [40, 0]]");
    std::fs::write(&path, text).unwrap();
    let o = run(&["value", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("retailer 2 price"));
}

#[test]
fn allocate_sc() {
    let d = doc(&run(&["allocate", &fixture("example2"), "sc", "--axioms"]));
    let a = &d.allocations[0];
    assert_eq!(a.rule, "sc");
    for (got, want) in a.payoffs.iter().zip([26.0 + 2.0 / 3.0, 46.0 + 2.0 / 3.0, 20.0, 20.0]) {
        assert!(close(*got, want, 1e-6), "{:?}", a.payoffs);
    }
    assert!(close(a.beta.unwrap(), 20.0, 1e-6));
    assert!(a.core.member);
    let axioms = a.axioms.as_ref().unwrap();
    assert_eq!(axioms.len(), 5);
    assert!(axioms.iter().all(|x| x.pass));
}

#[test]
fn allocate_sc_star() {
    let d = doc(&run(&["allocate", &fixture("example4"), "sc-star"]));
    let a = &d.allocations[0];
    for (got, want) in a.payoffs.iter().zip([275.0, 1625.0, 1004.0 + 6.0 / 11.0, 0.0]) {
        assert!(close(*got, want, 1e-3), "{:?}", a.payoffs);
    }
    assert_eq!(d.optimal_suppliers, Some(vec!["1".to_string()]));
    assert!(a.core.member);
}

#[test]
fn sc_star_needs_unbounded_production() {
    let o = run(&["allocate", &fixture("example2"), "sc-star"]);
    assert_eq!(code(&o), 4);
    let o = run(&["core-check", &fixture("example2"), "sc-star"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn core_check_of_a_rule() {
    let o = run(&["core-check", &fixture("example2"), "sc"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn core_check_of_external_payoffs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("payoffs.txt");
    std::fs::write(&path, "340/3, 0, 0, 0\n").unwrap();
    let o = run(&["core-check", &fixture("example2"), path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("R={2}, S={1,2}"), "{stderr}");
    let d = ReportDocument::from_json(&String::from_utf8(o.stdout).unwrap()).unwrap();
    let core = &d.allocations[0].core;
    assert!(!core.member);
    let alone = core
        .violations
        .iter()
        .find(|v| v.retailers == ["2"] && v.suppliers.is_empty())
        .unwrap();
    assert!(close(alone.deficit, 33.0 + 1.0 / 3.0, 1e-6));

    std::fs::write(&path, "[1, 2, 3]").unwrap();
    let o = run(&["core-check", &fixture("example2"), path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("3 payoffs"));
}

#[test]
fn supplier_max_in_a_single_point_core() {
    let d = doc(&run(&["core-check", &fixture("example5"), "sc-star", "--supplier-max", "1"]));
    assert_eq!(d.supplier_max.len(), 1);
    assert!(close(d.supplier_max[0].value, 0.0, 1e-6));
    let o = run(&["core-check", &fixture("example5"), "sc", "--supplier-max", "9"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn size_guard() {
    let o = run(&["value", &fixture("example2"), "--max-dims", "3", "--no-cache"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn usage_errors_are_input_errors() {
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["allocate", &fixture("example2"), "shapley"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn markdown_report_has_the_table_layout() {
    let o = run(&["value", &fixture("example2"), "--format", "markdown"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("| {")).collect();
    assert_eq!(rows.len(), 12);
    assert_eq!(rows[0], "| {1} | ∅ | (0, 10) | - | 13.3333333333 |");
    assert_eq!(rows[11], "| {1,2} | {1,2} | (10, 10) | (10, 10) | 113.333333333 |");
}

#[test]
fn csv_has_one_row_per_pair() {
    let o = run(&["value", &fixture("example2"), "--format", "csv"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 16);
    assert_eq!(&records[15][0], "1 2");
    assert_eq!(&records[15][2], "113.333333333");
}

#[test]
fn writes_to_a_file_or_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = run(&["value", &fixture("example2"), "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    assert!(std::fs::read_to_string(&out).unwrap().contains("\"fingerprint\""));
    let o = run(&["value", &fixture("example2"), "-o", "/nonexistent/dir/report.json"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn json_reports_round_trip() {
    let o = run(&["report", &fixture("example2")]);
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    let d = doc(&o);
    assert_eq!(d.to_json().unwrap(), text);
    assert_eq!(d.structure.as_ref().unwrap().len(), 3);
    assert_eq!(d.allocations.len(), 2);
}

#[test]
fn cache_hits_match_cold_builds() {
    let dir = tempfile::tempdir().unwrap();
    let cold = run_in(dir.path(), &["report", &fixture("example5")]);
    let entries: Vec<PathBuf> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(entries.len(), 1);
    let warm = run_in(dir.path(), &["report", &fixture("example5")]);
    let uncached = run_in(dir.path(), &["report", &fixture("example5"), "--no-cache"]);
    assert_eq!(code(&cold), 0);
    assert_eq!(cold.stdout, warm.stdout);
    assert_eq!(cold.stdout, uncached.stdout);
    // different solver settings never reuse the stored table
    let coarse = run_in(dir.path(), &["report", &fixture("example5"), "--resolution", "9"]);
    assert_eq!(code(&coarse), 0);
    assert_ne!(doc(&coarse).solver, doc(&cold).solver);
}

#[test]
fn corrupt_cache_entries_are_rebuilt() {
    let dir = tempfile::tempdir().unwrap();
    let first = run_in(dir.path(), &["value", &fixture("example5")]);
    let entry = std::fs::read_dir(dir.path()).unwrap().next().unwrap().unwrap().path();
    std::fs::write(&entry, "{ not json").unwrap();
    let second = run_in(dir.path(), &["value", &fixture("example5")]);
    assert_eq!(code(&second), 0);
    assert_eq!(first.stdout, second.stdout);
    assert!(String::from_utf8_lossy(&second.stderr).contains("ignoring unreadable cache entry"));
}

#[test]
fn timings_only_on_request() {
    let d = doc(&run(&["value", &fixture("example5")]));
    assert!(d.timings.is_none());
    let d = doc(&run(&["value", &fixture("example5"), "--timings"]));
    assert!(d.timings.unwrap().contains_key("build_seconds"));
}

#[test]
fn golden_report() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/example2_report.json");
    let o = run(&["report", &fixture("example2")]);
    assert_eq!(code(&o), 0);
    let expected = std::fs::read_to_string(&golden).unwrap();
    let actual = String::from_utf8(o.stdout).unwrap();
    for (k, (a, e)) in actual.lines().zip(expected.lines()).enumerate() {
        assert_eq!(a, e, "first difference at line {}", k + 1);
    }
    assert_eq!(actual.lines().count(), expected.lines().count());
}
