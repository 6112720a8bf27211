use std::path::Path;
use std::process::{Command, Output};

use ionarch::device::device_params_to_json;
use ionarch::{ArchConfig, CsConfig, DeviceParams};
use serde_json::Value;

fn ionarch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ionarch")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_json(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn small_aqft_with_defaults_has_no_teleport_time() {
    let r = json(&ionarch(&["run", "--circuit", "aqft", "--bits", "8"]));
    assert_eq!(r["arch"]["n_seg"], 1);
    assert_eq!(r["breakdown"]["t_tel"].as_f64().unwrap(), 0.0);
    assert_eq!(r["breakdown"]["t_swp"].as_f64().unwrap(), 0.0);
    let t = r["t_total_us"].as_f64().unwrap();
    assert!(t > 0.0);
    let b = &r["breakdown"];
    let sum: f64 = ["t_anc", "t_shut", "t_tel", "t_swp", "t_gate"].iter().map(|k| b[*k].as_f64().unwrap()).sum();
    assert!((sum - t).abs() <= 1e-9 * t);
}

#[test]
fn ripple_adder_with_files_has_linear_depth() {
    let dir = tempfile::tempdir().unwrap();
    let dp = write_json(dir.path(), "baseline.json", &device_params_to_json(&DeviceParams::<f64>::baseline()));
    let t = |bits: usize| {
        // one computational segment per two logical qubits
        let n_seg = (2 * bits + 2).div_ceil(2);
        let cfg = ArchConfig::uniform(n_seg, n_seg, CsConfig::new(5, 16, 6), ionarch::arch::LARGE_SEGMENT_CAP, u64::MAX);
        let arch = write_json(dir.path(), &format!("a{bits}.json"), &serde_json::to_string(&cfg).unwrap());
        let r = json(&ionarch(&["run", "--circuit", "qrca", "--bits", &bits.to_string(), "--arch", &arch, "--dp", &dp]));
        assert_eq!(r["arch"]["n_seg"], n_seg);
        r["t_total_us"].as_f64().unwrap()
    };
    let (t8, t16) = (t(8), t(16));
    assert!((t16 / t8 - 2.0).abs() < 0.1, "t8 {t8} t16 {t16}");
}

#[test]
fn zero_bits_is_a_generation_error() {
    let out = ionarch(&["run", "--circuit", "qrca", "--bits", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error: generation stage"), "{}", stderr(&out));
}

#[test]
fn configuration_too_small_exits_with_two() {
    let out = ionarch(&["run", "--circuit", "qrca", "--bits", "4", "--n-cs", "1", "--cs", "2,2,1"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let dir = tempfile::tempdir().unwrap();
    let cfg = ArchConfig::uniform(1, 1, CsConfig::new(16, 2, 1), ionarch::arch::LARGE_SEGMENT_CAP, 100);
    let arch = write_json(dir.path(), "a.json", &serde_json::to_string(&cfg).unwrap());
    let out = ionarch(&["run", "--circuit", "qrca", "--bits", "4", "--arch", &arch]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("architecture stage"));
}

#[test]
fn missing_device_file_is_an_error() {
    let out = ionarch(&["run", "--circuit", "qrca", "--bits", "2", "--dp", "/nonexistent/dp.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn shor_estimate_reports_days() {
    let r = json(&ionarch(&["shor-estimate", "--bits", "2048", "--adder", "680ms"]));
    assert_eq!(r["adder_calls"], 16_000_000);
    assert!((r["total_days"].as_f64().unwrap() - 125.926).abs() < 1e-3);
    assert_eq!(r["feasible_5_months"], true);
    let out = ionarch(&["shor-estimate", "--bits", "300", "--adder", "1s"]);
    assert_eq!(out.status.code(), Some(1));
    let out = ionarch(&["shor-estimate", "--bits", "512", "--adder", "fast"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn tiles_prints_the_database() {
    let r = json(&ionarch(&["tiles"]));
    assert_eq!(r["evaluated"]["TeleportData"]["latency"].as_f64().unwrap(), 11_911.0);
    let epr = r["evaluated"]["EPRGeneration"]["p_fail"].as_f64().unwrap();
    assert!((epr / 1.08e-11 - 1.0).abs() < 1e-9);

    // a better channel lowers the evaluated EPR failure about a hundredfold
    let dir = tempfile::tempdir().unwrap();
    let tuned = DeviceParams::<f64> { p_epr: 1e-5, ..DeviceParams::baseline() };
    let dp = write_json(dir.path(), "tuned.json", &device_params_to_json(&tuned));
    let r = json(&ionarch(&["tiles", "--dp", &dp]));
    let ratio = epr / r["evaluated"]["EPRGeneration"]["p_fail"].as_f64().unwrap();
    assert!((99.0..=101.0).contains(&ratio), "{ratio}");
}

#[test]
fn sweep_writes_csv_and_optimize_picks_a_row() {
    let dir = tempfile::tempdir().unwrap();
    let grid = r#"{"n_seg":null,"n_cs":[1,2],"n_data":[4,8],"n_anc":[2],"n_comm":[1]}"#;
    let grid = write_json(dir.path(), "grid.json", grid);
    let csv = dir.path().join("s.csv");
    let out = ionarch(&["sweep", "--circuit", "qrca", "--bits", "4", "--grid", &grid, "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("n_seg,n_cs,n_data"));
    assert_eq!(text.lines().count(), 5);

    let best = json(&ionarch(&["optimize", "--circuit", "qrca", "--bits", "4", "--grid", &grid, "--budget", "100000"]));
    assert_eq!(best["evaluated"], 4);
    assert!(best["metrics"]["t_total_us"].as_f64().unwrap() > 0.0);
    let out = ionarch(&["optimize", "--circuit", "qrca", "--bits", "4", "--grid", &grid, "--budget", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn viz_writes_svg_from_a_saved_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let sched = dir.path().join("s.json");
    let out = ionarch(&["run", "--circuit", "qcla", "--bits", "4", "--n-cs", "2", "--cs", "3,4,2", "--schedule-out", sched.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let svg = dir.path().join("t.svg");
    let out = ionarch(&["viz", "--schedule", sched.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let a = std::fs::read_to_string(&svg).unwrap();
    assert!(a.starts_with("<svg") && a.contains("legend"));
    let out = ionarch(&["viz", "--schedule", sched.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(a, std::fs::read_to_string(&svg).unwrap());

    let out = ionarch(&["viz", "--circuit", "qrca", "--bits", "2", "--out", "/nonexistent-dir/t.svg"]);
    assert_eq!(out.status.code(), Some(1));
}
