use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use srqed_core::sweep::run_sweep_to_csv_limited;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn srqed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srqed")).args(args).env_remove("SRQED_WORKERS").output().unwrap()
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const JC: &str = r#""system": {
    "modes": [
      { "kind": "qubit", "freq_ghz": [6.0] },
      { "kind": "resonator", "freq_ghz": 6.0, "cutoff": 2 }
    ],
    "couplings": [ { "qubit": 0, "resonator": 1, "g_ghz": [0.05], "rwa": true } ]
  }"#;

#[test]
fn every_bundled_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(config("")).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap().to_owned();
        let cfg = srqed_cli::load_config(&path).unwrap();
        let cmd = if cfg.trajectory.is_some() {
            "simulate"
        } else if cfg.sweep.is_some() {
            "sweep"
        } else if cfg.gate.is_some() {
            "gate"
        } else {
            "find-resonance"
        };
        let out = dir.path().join(format!("{name}.out"));
        let o = srqed(&[cmd, "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
    }
}

#[test]
fn trajectory_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig4a.csv");
    let o = srqed(&["simulate", "--config", config("fig4a.cfg").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t_ns,ROT0,ROT1");
    assert_eq!(lines.len(), 2502);
    let first: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
    assert!(first[0] == 0.0 && first[1] < 1e-20 && first[2] < 1e-20, "{first:?}");
    let rot0_max = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).fold(0.0, f64::max);
    let rot1_max = lines[1..].iter().map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert!(rot0_max > 0.95 && rot1_max < 0.25, "{rot0_max} {rot1_max}");

    let o = srqed(&["simulate", "--config", config("fig4b.cfg").to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("t_ns,ROT00,ROT01,ROT10,ROT11\n"));
}

#[test]
fn resonant_swap_against_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "jc.cfg",
        &format!(
            r#"{{ {JC}, "trajectory": {{ "series": [ {{ "name": "swap", "initial": [1, 0], "target": [0, 1] }} ],
                 "times": {{ "t_ns": [0.0, 2.5, 5.0] }} }} }}"#
        ),
    );
    let o = srqed(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    // sin²(2π g t) at g = 0.05 GHz: 0, 1/2, 1
    let values: Vec<f64> = stdout(&o).lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    for (v, want) in values.iter().zip([0.0, 0.5, 1.0]) {
        assert!((v - want).abs() < 1e-8, "{v} vs {want}");
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            "simulate",
            format!(r#"{{ {JC}, "trajectory": {{ "series": [ {{ "name": "a", "initial": [1, 0], "target": [0, 1] }} ], "times": {{ "t_ns": [] }} }} }}"#),
            "empty",
        ),
        (
            "simulate",
            format!(r#"{{ {JC}, "trajectory": {{ "series": [], "times": {{ "t_ns": [1.0] }} }}, "colour": 1 }}"#),
            "unknown field `colour`",
        ),
        (
            "find-resonance",
            format!(r#"{{ {JC}, "find_resonance": {{ "target_qubit": 0, "scan": {{ "lo_ghz": 6.2, "hi_ghz": 5.8, "step_ghz": 0.01 }}, "initial": [1, 0], "target": [0, 1] }} }}"#),
            "lo_ghz",
        ),
        (
            "simulate",
            format!(r#"{{ {JC}, "trajectory": {{ "series": [ {{ "name": "a", "initial": [1, 5], "target": [0, 1] }} ], "times": {{ "t_ns": [1.0] }} }} }}"#),
            "series",
        ),
        ("gate", format!(r#"{{ {JC} }}"#), "missing `gate`"),
        ("simulate", "{ \"system\": ".to_owned(), "line"),
    ];
    for (k, (cmd, body, needle)) in cases.iter().enumerate() {
        let cfg = write_cfg(dir.path(), &format!("c{k}.cfg"), body);
        let o = srqed(&[cmd, "--config", cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "case {k}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "case {k}: {}", stderr(&o));
    }
    let o = srqed(&["gate", "--config", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_key_diagnostic_names_line() {
    let err = srqed_cli::parse_config("{\n  \"system\": {\n    \"modes\": [],\n    \"couplings\": [], \"x\": 1 }\n}").unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("unknown field `x`") && msg.contains("line 4"), "{msg}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn fredkin_coupling_mismatch_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(config("fredkin.cfg")).unwrap()).unwrap();
    cfg["gate"]["stage1"]["couplings"][3]["g_ghz"] = serde_json::json!([0.03, 0.03]);
    let path = write_cfg(dir.path(), "bad.cfg", &cfg.to_string());
    let o = srqed(&["gate", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let o = srqed(&["gate", "--config", config("fredkin.cfg").to_str().unwrap(), "--refine"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("no/such/dir/out.txt");
    let o = srqed(&["gate", "--config", config("cphase.cfg").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn gate_summary_and_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let txt = dir.path().join("r.txt");
    let csv = dir.path().join("r.csv");
    let cp = config("cphase.cfg");
    let a = srqed(&["gate", "--config", cp.to_str().unwrap(), "--out", txt.to_str().unwrap()]);
    let b = srqed(&["gate", "--config", cp.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).starts_with("cphase 0.914"));
    assert!(std::fs::read_to_string(&txt).unwrap().starts_with("kind: cphase\n"));
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("input,overlap_re,overlap_im,probability\n00,"));
}

#[test]
fn refine_flag_moves_duration() {
    let o = srqed(&["gate", "--config", config("cphase.cfg").to_str().unwrap(), "--refine"]);
    assert!(o.status.success());
    let f: Vec<f64> = stdout(&o).split_whitespace().skip(1).map(|x| x.parse().unwrap()).collect();
    assert!(f[0] > 0.914 && f[1] >= 0.9 / (2.0 * 0.0488) && f[1] <= 1.1 / (2.0 * 0.0488), "{f:?}");
}

#[test]
fn zero_coupling_gate_is_phases_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(config("cphase.cfg")).unwrap()).unwrap();
    cfg["system"]["couplings"][0]["g_ghz"] = serde_json::json!([0.0, 0.0]);
    cfg["system"]["couplings"][1]["g_ghz"] = serde_json::json!([0.0, 0.0]);
    cfg["gate"]["duration"] = serde_json::json!("fixed");
    cfg["gate"]["t_ns"] = serde_json::json!(10.0);
    let path = write_cfg(dir.path(), "zero.cfg", &cfg.to_string());
    let o = srqed(&["gate", "--config", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let f: Vec<f64> = stdout(&o).split_whitespace().skip(1).map(|x| x.parse().unwrap()).collect();
    // identity against a c-phase: |1 + e^{iφ₁} + e^{iφ₂}(e^{iφ₁} − 1)|²/16 peaks at φ₁ = π/2 with 1/2
    assert!(f[2] < 1e-12, "leakage {}", f[2]);
    assert!((f[0] - 0.5).abs() < 1e-9, "fidelity {}", f[0]);
}

#[test]
fn find_resonance_prints_six_decimals() {
    let o = srqed(&["find-resonance", "--config", config("fig4a_resonance.cfg").to_str().unwrap()]);
    assert!(o.status.success());
    let s = stdout(&o);
    let line = s.trim();
    assert_eq!(line.split('.').nth(1).unwrap().len(), 6);
    assert!((line.parse::<f64>().unwrap() - 6.035).abs() < 0.002, "{line}");

    let o = srqed(&["find-resonance", "--config", config("fig3_resonance.cfg").to_str().unwrap()]);
    let f: f64 = stdout(&o).trim().parse().unwrap();
    assert!((f - 5.96).abs() < 0.005, "{f}");
}

#[test]
fn sweep_resumes_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = srqed_cli::load_config(&config("fig3.cfg")).unwrap();
    let mut grid = cfg.sweep_grid().unwrap();
    grid.g_values.truncate(6);
    grid.freq_values.truncate(12);

    let whole = dir.path().join("whole.csv");
    let resumed = dir.path().join("resumed.csv");
    assert!(run_sweep_to_csv_limited(&grid, 1, &whole, None).unwrap());
    assert!(!run_sweep_to_csv_limited(&grid, 2, &resumed, Some(2)).unwrap());
    assert!(!resumed.exists());
    assert!(run_sweep_to_csv_limited(&grid, 3, &resumed, None).unwrap());
    assert_eq!(std::fs::read(&whole).unwrap(), std::fs::read(&resumed).unwrap());
}

#[test]
fn sweep_needs_out_and_workers_env_is_honoured() {
    let o = srqed(&["sweep", "--config", config("fig3.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_srqed"))
        .args(["find-resonance", "--config", config("fig4a_resonance.cfg").to_str().unwrap()])
        .env("SRQED_WORKERS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
