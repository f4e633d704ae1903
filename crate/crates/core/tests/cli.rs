use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_ic-maxmin");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("spawn ic-maxmin")
}

fn write_config(dir: &Path, out: &Path) -> std::path::PathBuf {
    let cfg = serde_json::json!({
        "k": 3, "m": 2, "n": 2, "l": 1,
        "snr_db": [5.0, 15.0],
        "eps": [0.05],
        "drops": 3,
        "schemes": ["proposed", "max_sinr", "min_leakage", "ia3"],
        "seed": 11,
        "out": out,
        "baseline_sweeps": 20,
        "ao_max_iters": 10,
    });
    let path = dir.join("cfg.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn repeated_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a/run.csv");
    let cfg = write_config(dir.path(), &out);
    let cfg = cfg.to_str().unwrap();

    let first = run(&["run", "--config", cfg]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let csv_a = std::fs::read(&out).unwrap();
    let traces_a = std::fs::read(dir.path().join("a/run.traces.jsonl")).unwrap();

    let other = dir.path().join("b/run.csv");
    let second = run(&["run", "--config", cfg, "--out", other.to_str().unwrap()]);
    assert!(second.status.success());
    assert_eq!(csv_a, std::fs::read(&other).unwrap());
    assert_eq!(traces_a, std::fs::read(dir.path().join("b/run.traces.jsonl")).unwrap());
    assert!(dir.path().join("b/run.summary.csv").exists());

    // 3 drops x 2 SNRs x 4 schemes x 3 streams, then 8 aggregate rows.
    let text = String::from_utf8(csv_a).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 2 * 4 * 3 + 8);
    assert!(text.starts_with("scheme,snr_db,eps,drop,k,l,r,C,goodput,"));
}

#[test]
fn seed_override_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let cfg = write_config(dir.path(), &out);
    let cfg = cfg.to_str().unwrap();
    assert!(run(&["run", "--config", cfg, "--drops", "1"]).status.success());
    let a = std::fs::read(&out).unwrap();
    assert!(run(&["run", "--config", cfg, "--drops", "1", "--seed", "12"]).status.success());
    assert_ne!(a, std::fs::read(&out).unwrap());
}

#[test]
fn sweep_snr_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("snr.csv");
    let o = run(&[
        "sweep-snr", "--k", "3", "--m", "2", "--n", "2", "--l", "1", "--snr-db", "0,10,20", "--eps", "0.1",
        "--schemes", "max_sinr,min_leakage", "--drops", "2", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let file = std::fs::read_to_string(&out).unwrap();
    assert_eq!(file, String::from_utf8(o.stdout).unwrap());
    let rows: Vec<&str> = file.lines().skip(1).collect();
    assert_eq!(rows.len(), 2 * 3);
    assert!(rows.iter().all(|r| r.split(',').nth(3) == Some("2")));
}

#[test]
fn config_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"k\": 3,\n  \"mm\": 2\n}").unwrap();
    let o = run(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error:") && err.contains("mm") && err.contains("line 3"), "{err}");

    let o = run(&["run", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["sweep-eps", "--eps=-0.1", "--drops", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("eps"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["run"]).status.code(), Some(2));
    assert_eq!(run(&["run", "--config", "x.json", "--schedule", "sometimes"]).status.code(), Some(2));
    assert_eq!(run(&["validate", "--criterion", "12"]).status.code(), Some(1));
}

#[test]
fn dump_sdp_writes_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &dir.path().join("unused.csv"));
    let out = dir.path().join("sdp.json");
    let o = run(&["dump-sdp", "--config", cfg.to_str().unwrap(), "--drop", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v.is_object() && !v.as_object().unwrap().is_empty());
}

#[test]
fn validate_single_criterion() {
    let o = run(&["validate", "--quick", "--criterion", "6"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("criterion 6 [PASS]"), "{text}");
}
