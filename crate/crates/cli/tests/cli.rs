use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/corpus").join(format!("{name}.litmus"))
}

fn weakmem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weakmem")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_exit_codes_follow_the_verdict() {
    assert_eq!(weakmem(&["check", path(&corpus("iriw-fence"))]).status.code(), Some(0));
    assert_eq!(weakmem(&["check", path(&corpus("iriw-nofence"))]).status.code(), Some(1));
    assert_eq!(weakmem(&["check", path(&corpus("mp"))]).status.code(), Some(0));
    assert_eq!(weakmem(&["check", "--max-states", "10", path(&corpus("iriw-fence"))]).status.code(), Some(3));
}

#[test]
fn check_json_is_a_single_document() {
    let o = weakmem(&["check", "--json", path(&corpus("iriw-nofence"))]);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["verdict"], "violated");
    assert!(doc["counterexample"].as_array().is_some_and(|t| !t.is_empty()));
}

#[test]
fn trace_out_writes_the_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.json");
    let o = weakmem(&["check", "--trace-out", out.to_str().unwrap(), path(&corpus("iriw-nofence"))]);
    assert_eq!(o.status.code(), Some(1));
    let trace: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(trace[0]["event"], "IssueStore");
}

#[test]
fn parse_errors_report_a_location_and_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.litmus");
    fs::write(&f, "litmus \"bad\"\nmaster M1 { I11: LD R1; }\n").unwrap();
    let o = weakmem(&["check", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("bad.litmus:2:"), "{err}");
    assert_eq!(weakmem(&["check"]).status.code(), Some(2));
}

#[test]
fn cover_lists_the_missing_pair() {
    let o = weakmem(&["cover", "--watch", "M2,M3", "--json", path(&corpus("iriw-fence"))]);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["covered"].as_array().unwrap().len(), 15);
    assert_eq!(doc["uncovered"].as_array().unwrap().len(), 1);
    assert_eq!(weakmem(&["cover", "--watch", "M9", path(&corpus("iriw-fence"))]).status.code(), Some(2));
}

#[test]
fn gen_writes_a_replayable_test_or_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let o = weakmem(&["gen", path(&corpus("iriw-fence")), "--target", "M2:C0,M3:C3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(weakmem(&["suite", dir.path().to_str().unwrap()]).status.code(), Some(0));
    let o = weakmem(&["gen", path(&corpus("iriw-fence")), "--target", "M2:C2,M3:C2"]);
    assert_eq!(o.status.code(), Some(4));
    let o = weakmem(&["gen", path(&corpus("iriw-fence")), "--target", "M2:C9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn suite_fails_on_a_tampered_test() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    weakmem(&["gen", path(&corpus("mp-fence")), "--target", "M2:R1 = 1", "--out", out.to_str().unwrap()]);
    let mut doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    doc["expected"]["exact"]["M2"]["R1"] = 0.into();
    fs::write(&out, doc.to_string()).unwrap();
    assert_eq!(weakmem(&["suite", dir.path().to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn fuzz_is_reproducible_per_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = weakmem(&["fuzz", path(&corpus("mp-fence")), "--count", "4", "--seed", "11", "--out", d.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "manifest.json"));
    for n in &names {
        assert_eq!(fs::read(a.path().join(n)).unwrap(), fs::read(b.path().join(n)).unwrap(), "{n:?}");
    }
    assert_eq!(weakmem(&["suite", a.path().to_str().unwrap()]).status.code(), Some(0));
    let o = weakmem(&["fuzz", path(&corpus("mp-fence")), "--count", "1", "--out", a.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fmt_check_and_write() {
    assert_eq!(weakmem(&["fmt", "--check", path(&corpus("sb"))]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("sb.litmus");
    let canonical = fs::read_to_string(corpus("sb")).unwrap();
    fs::write(&f, canonical.replace("; ", ";   ")).unwrap();
    assert_eq!(weakmem(&["fmt", "--check", f.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(weakmem(&["fmt", "--write", f.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(fs::read_to_string(&f).unwrap(), canonical);
}
