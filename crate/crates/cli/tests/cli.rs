use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn rvhpm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rvhpm")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &PathBuf) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_quicksort_json() {
    let q = fixture("quicksort64.bin");
    let o = rvhpm(&["run", "-p", path(&q)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["delta"], 0);
    assert_eq!(v["pass"], true);
    assert_eq!(v["exit_code"], 0);
    assert_eq!(v["cycles"], v["predicted_cycles"]);
    assert_eq!(v["events"]["CYCLE"], v["cycles"]);
    assert_eq!(v["config_digest"].as_str().unwrap().len(), 64);
    assert!(v["events"]["HAZARD"].as_u64().unwrap() > 0);
}

#[test]
fn csv_resums_to_cycles() {
    let q = fixture("quicksort64.bin");
    let json: Value = serde_json::from_str(&stdout(&rvhpm(&["run", "-p", path(&q)]))).unwrap();
    let o = rvhpm(&["run", "-p", path(&q), "-r", "csv"]);
    assert_eq!(code(&o), 0);
    let b = rvhpm::timing::ModelBreakdown::from_csv(&stdout(&o)).unwrap();
    assert_eq!(b.resum(), json["cycles"].as_u64().unwrap() as i128);
    assert_eq!(b.total, json["cycles"].as_u64().unwrap());
}

#[test]
fn table_report_and_file_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.txt");
    let trace = dir.path().join("trace.txt");
    let o = rvhpm(&[
        "run",
        "-p",
        path(&fixture("alu_chain.bin")),
        "-r",
        "table",
        "-o",
        out.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("Initial pipeline filling"));
    assert!(text.contains("PASS"));
    let lines = std::fs::read_to_string(&trace).unwrap().lines().count();
    assert_eq!(lines, 41);
}

#[test]
fn inhibited_counters_stay_zero() {
    let q = fixture("quicksort64.bin");
    let base: Value = serde_json::from_str(&stdout(&rvhpm(&["run", "-p", path(&q)]))).unwrap();
    let o = rvhpm(&["run", "-p", path(&q), "--mcountinhibit", "0xFFFFFFFF"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["counters"].as_array().unwrap().iter().all(|c| c == 0));
    assert_eq!(v["digest"], base["digest"]);
    assert_eq!(v["cycles"], base["cycles"]);
    assert_ne!(v["config_digest"], base["config_digest"]);
}

#[test]
fn scheduled_interrupt() {
    let o = rvhpm(&["run", "-p", path(&fixture("irq_external.bin")), "--interrupt", "300"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["events"]["EXT_INT"], 1);
}

#[test]
fn model_mismatch_exits_two() {
    let o = rvhpm(&["run", "-p", path(&fixture("alu_chain.bin")), "--inject-stall-at", "10"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("delta +1"));
}

#[test]
fn compare_fixture_and_corrupted_build() {
    let f = fixture("access_faults.bin");
    let o = rvhpm(&["compare", "-p", path(&f)]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "no differences");

    let o = rvhpm(&["compare", "-p", path(&f), "--disable-cancellation", "--json"]);
    assert_eq!(code(&o), 2);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let instret = v["entries"].as_array().unwrap().iter().find(|e| e["event"] == "INSTRET").unwrap();
    assert_eq!(instret["simulator"].as_u64().unwrap() - instret["oracle"].as_u64().unwrap(), 3);
}

#[test]
fn compare_writes_interpreter_trace() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("oracle.txt");
    let o = rvhpm(&["compare", "-p", path(&fixture("load_use.bin")), "--oracle-trace", t.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(!std::fs::read_to_string(&t).unwrap().is_empty());
}

#[test]
fn compare_refuses_interrupt_programs() {
    let o = rvhpm(&["compare", "-p", path(&fixture("irq_timer.bin"))]);
    assert_eq!(code(&o), 1);
}

#[test]
fn corpus_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = rvhpm(&["corpus", "--seed", "42", "--count", "40", "--max-items", "200", "-o", p.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stdout(&o));
        assert!(stdout(&o).contains("programs=40"));
    }
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert_eq!(a, b);
    let o = rvhpm(&["corpus", "--seed", "43", "--count", "40", "--max-items", "200"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["entries"].as_array().unwrap().len(), 40);
}

#[test]
fn replay_reference_totals() {
    let totals = data("quicksort_reference_totals.json");
    let o = rvhpm(&["replay-model", path(&totals), "-r", "csv"]);
    assert_eq!(code(&o), 0);
    let b = rvhpm::timing::ModelBreakdown::from_csv(&stdout(&o)).unwrap();
    assert_eq!(b.total, 119540);
    assert_eq!(b.distinct_cumulatives(), vec![32950, 35742, 38502, 48021, 75355, 81030, 119536, 119540]);

    let o = rvhpm(&["replay-model", path(&totals)]);
    assert!(stdout(&o).contains("predicted cycles 119540"));
}

#[test]
fn replay_accepts_run_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let q = fixture("quicksort64.bin");
    rvhpm(&["run", "-p", path(&q), "-o", report.to_str().unwrap()]);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let o = rvhpm(&["replay-model", report.to_str().unwrap(), "-r", "json"]);
    let b: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(b["total"], v["cycles"]);
}

#[test]
fn config_file_with_relative_program() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixture("quicksort64.elf"), dir.path().join("qs.elf")).unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[program]\npath = \"qs.elf\"\nformat = \"elf32\"\n[report]\nformat = \"csv\"\n").unwrap();
    let o = rvhpm(&["run", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("Event,Event count"));
}

#[test]
fn bad_inputs_exit_one() {
    let q = fixture("quicksort64.bin");
    assert_eq!(code(&rvhpm(&["run", "-p", path(&q), "-r", "xml"])), 1);
    assert_eq!(code(&rvhpm(&["run"])), 1);
    assert_eq!(code(&rvhpm(&["run", "-p", "/nonexistent/image.bin"])), 1);
    assert_eq!(code(&rvhpm(&["run", "-p", path(&q), "--mhpmevent", "12"])), 1);
    assert_eq!(code(&rvhpm(&["run", "-p", path(&q), "--interrupt", "9", "--interrupt", "5"])), 1);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[report]\nformat = \"xml\"\n").unwrap();
    assert_eq!(code(&rvhpm(&["run", "-c", cfg.to_str().unwrap(), "-p", path(&q)])), 1);
}

#[test]
fn elf64_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("x.elf");
    let mut h = vec![0u8; 64];
    h[..4].copy_from_slice(b"\x7fELF");
    h[4] = 2;
    h[5] = 1;
    h[16] = 2;
    h[18] = 0xF3;
    std::fs::write(&f, h).unwrap();
    let o = rvhpm(&["run", "-p", f.to_str().unwrap(), "--image-format", "elf32"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not a 32-bit ELF"));
}
