use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use thickening_lab::record::{export_csv, import_csv, read_jsonl, CsvRow};

fn lab(args: &[&std::ffi::OsStr]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lab"))
        .args(args)
        .env_remove("LAB_THREADS")
        .output()
        .expect("lab binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run_config(dir: &Path, text: &str) -> (Output, PathBuf) {
    let cfg = write(dir, "exp.cfg", text);
    let out = dir.join("records.jsonl");
    let o = lab(&["run".as_ref(), cfg.as_os_str(), "--out".as_ref(), out.as_os_str()]);
    (o, out)
}

const SMALL: &str = "experiment = deviation-curve\nfamily = gaussian\nn = 4\nt_grid = 0, 0.5\ntrials = 20000\nroot_seed = 3\n";

#[test]
fn run_writes_records_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run_config(dir.path(), SMALL);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 2);
    let records = read_jsonl(text.as_bytes()).unwrap();
    assert!(records.iter().all(|r| r.wall_time_ms.is_none()));
}

#[test]
fn stdout_stream_matches_file_and_seed_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.cfg", SMALL);
    let to_stdout = lab(&["run".as_ref(), cfg.as_os_str()]);
    let (_, out) = run_config(dir.path(), SMALL);
    assert_eq!(to_stdout.stdout, std::fs::read(&out).unwrap());

    let reseeded = lab(&["run".as_ref(), cfg.as_os_str(), "--seed".as_ref(), "4".as_ref()]);
    let records = read_jsonl(&reseeded.stdout[..]).unwrap();
    assert!(records.iter().all(|r| r.seed == 4 && r.params.root_seed == 4));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.cfg", SMALL);
    let one = lab(&["run".as_ref(), cfg.as_os_str(), "--threads".as_ref(), "1".as_ref()]);
    let four = Command::new(env!("CARGO_BIN_EXE_lab"))
        .args(["run".as_ref(), cfg.as_os_str()])
        .env("LAB_THREADS", "4")
        .output()
        .unwrap();
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn timing_flag_stamps_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.cfg", SMALL);
    let o = lab(&["run".as_ref(), cfg.as_os_str(), "--timing".as_ref()]);
    let records = read_jsonl(&o.stdout[..]).unwrap();
    assert!(records.iter().all(|r| r.wall_time_ms.is_some()));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        "experiment = no-such-thing\n",
        "experiment = gruenbaum\nfamily = pyramid\n",
        "experiment = gruenbaum\ntrials = 1\n",
        "experiment = gruenbaum\ncolour = red\n",
        "n = 3\n",
    ] {
        let (o, _) = run_config(dir.path(), bad);
        assert_eq!(o.status.code(), Some(2), "config {bad:?}");
        assert!(!o.stderr.is_empty());
    }
    let missing = dir.path().join("absent.cfg");
    assert_eq!(lab(&["run".as_ref(), missing.as_os_str()]).status.code(), Some(2));
}

#[test]
fn failed_check_exits_one() {
    // Z_2 of an isotropic law is the Euclidean ball, so at p = 2 no direction
    // beats the axis by a factor 1.5.
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run_config(
        dir.path(),
        "experiment = cube-counterexample\nfamily = cube\nn = 4\np_list = 2\ntrials = 5000\nrestarts = 1\nsteps = 5\n",
    );
    assert_eq!(o.status.code(), Some(1));
    let records = read_jsonl(std::fs::read(&out).unwrap().as_slice()).unwrap();
    assert!(records.iter().any(|r| r.pass == Some(false)));
    assert!(String::from_utf8(o.stdout).unwrap().contains("FAIL"));
}

#[test]
fn replay_round_trip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let (_, out) = run_config(dir.path(), SMALL);
    let o = lab(&["replay".as_ref(), out.as_os_str()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8(o.stdout).unwrap().matches(" ok").count(), 2);

    let o = lab(&["replay".as_ref(), out.as_os_str(), "--seed".as_ref(), "99".as_ref()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));

    let mut text = std::fs::read_to_string(&out).unwrap();
    text = text.replacen("\"estimate\":", "\"estimat\":", 1);
    let bad = write(dir.path(), "bad.jsonl", &text);
    assert_eq!(lab(&["replay".as_ref(), bad.as_os_str()]).status.code(), Some(2));

    let truncated = write(dir.path(), "cut.jsonl", "{\"experiment\":\"small-ball\"");
    assert_eq!(lab(&["replay".as_ref(), truncated.as_os_str()]).status.code(), Some(2));
}

#[test]
fn tampered_estimate_is_a_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let (_, out) = run_config(dir.path(), SMALL);
    let mut records = read_jsonl(std::fs::read(&out).unwrap().as_slice()).unwrap();
    records[1].estimate += 1e-6;
    let tampered = write(dir.path(), "t.jsonl", &thickening_lab::record::to_jsonl(&records));
    let o = lab(&["replay".as_ref(), tampered.as_os_str()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stdout).unwrap().contains("MISMATCH"));
}

#[test]
fn export_names_the_abscissa_and_round_trips_bits() {
    let dir = tempfile::tempdir().unwrap();
    let (_, out) = run_config(dir.path(), SMALL);
    let csv = dir.path().join("records.csv");
    let o = lab(&["export".as_ref(), out.as_os_str(), csv.as_os_str()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(header[5], "t");

    let records = read_jsonl(std::fs::read(&out).unwrap().as_slice()).unwrap();
    let rows = import_csv(text.as_bytes()).unwrap();
    let expect: Vec<CsvRow> = records.iter().map(CsvRow::from).collect();
    assert_eq!(rows, expect);
    for (row, r) in rows.iter().zip(&records) {
        assert_eq!(row.estimate.to_bits(), r.estimate.to_bits());
    }
}

#[test]
fn export_of_empty_stream_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.jsonl", "");
    let csv = dir.path().join("empty.csv");
    assert_eq!(lab(&["export".as_ref(), empty.as_os_str(), csv.as_os_str()]).status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("experiment,index,family,label,metric,x,estimate"));

    let mut buf = Vec::new();
    export_csv(&[], &mut buf).unwrap();
    assert_eq!(buf, text.as_bytes());
}

#[test]
fn list_prints_every_experiment() {
    let o = lab(&["list".as_ref()]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), thickening_lab::experiments::REGISTRY.len());
    assert!(text.contains("polygon-suite"));
}
