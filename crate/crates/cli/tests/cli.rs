use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use outreg_core::pipeline::overdetermined_output_config;
use outreg_core::synthesis::PROP_INFEASIBLE_WARNING;
use serde_json::Value;

fn outreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_outreg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn vtol_config(seed: u64) -> Value {
    let o = outreg(&["paper-example", "--emit-config", "--seed", &seed.to_string()]);
    assert!(o.status.success());
    serde_json::from_slice(&o.stdout).unwrap()
}

fn write_json(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn vtol_example_passes_its_property_bundle() {
    for args in [
        vec!["paper-example"],
        vec!["paper-example", "--seed", "4", "--factorization", "krylov"],
        vec!["paper-example", "--seed", "2", "--zero-w0"],
    ] {
        let o = outreg(&args);
        let out = stdout(&o);
        assert_eq!(o.status.code(), Some(0), "{args:?}\n{out}");
        assert_eq!(out.matches("bundle    PASS").count(), 3, "{out}");
        assert!(out.contains("all 17 checks pass"), "{out}");
    }
}

#[test]
fn report_is_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_json(tmp.path(), "vtol.json", &vtol_config(5));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = outreg(&["run", "--config", s(&cfg), "--out", s(dir)]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    }
    for file in [
        "report.json",
        "effective_config.json",
        "closed_loop.csv",
        "regressor.csv",
    ] {
        let x = std::fs::read(a.join(file)).unwrap();
        let y = std::fs::read(b.join(file)).unwrap();
        assert_eq!(x, y, "{file} differs");
    }
    let report: Value = serde_json::from_slice(&std::fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["all_pass"], Value::Bool(true));
    assert_eq!(report["synthesis"]["status"], "feasible");
}

#[test]
fn short_experiment_is_a_stage_error_with_hint() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = vtol_config(0);
    v["t"] = 3.into();
    let cfg = write_json(tmp.path(), "short.json", &v);
    let o = outreg(&["run", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("collect: experiment too short"), "{err}");
    assert!(err.contains("hint:"), "{err}");
}

#[test]
fn overdetermined_outputs_are_infeasible_with_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let v: Value = serde_json::from_str(&overdetermined_output_config(1).effective_json()).unwrap();
    let cfg = write_json(tmp.path(), "over.json", &v);
    for cmd in ["synthesize", "run"] {
        let o = outreg(&[cmd, "--config", s(&cfg)]);
        let out = stdout(&o);
        assert_eq!(o.status.code(), Some(1), "{out}");
        assert!(out.contains(PROP_INFEASIBLE_WARNING), "{out}");
        assert!(out.contains("sdp       Infeasible"), "{out}");
    }
}

#[test]
fn unmask_controls_exosystem_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_json(tmp.path(), "vtol.json", &vtol_config(0));
    let masked = outreg(&["collect", "--config", s(&cfg)]);
    let unmasked = outreg(&["collect", "--config", s(&cfg), "--unmask"]);
    assert!(masked.status.success() && unmasked.status.success());
    let header = |o: &Output| stdout(o).lines().next().unwrap().to_string();
    assert_eq!(header(&masked), "k,u_1,y_1,eta_1,eta_2");
    assert!(
        header(&unmasked).split(',').any(|c| c == "w_1"),
        "{}",
        header(&unmasked)
    );
    // Header, k = 0..=T, and the final η(T+1) row.
    assert_eq!(stdout(&masked).lines().count(), 23);

    let dir = tmp.path().join("run");
    let o = outreg(&["run", "--config", s(&cfg), "--out", s(&dir)]);
    assert!(o.status.success());
    let cl = std::fs::read_to_string(dir.join("closed_loop.csv")).unwrap();
    assert!(!cl.lines().next().unwrap().contains("w_"));
}

#[test]
fn designer_mode_uses_recorded_data_only() {
    let tmp = tempfile::tempdir().unwrap();
    let harness = write_json(tmp.path(), "vtol.json", &vtol_config(3));
    let rec_dir = tmp.path().join("rec");
    let o = outreg(&["collect", "--config", s(&harness), "--out", s(&rec_dir)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let mut v = vtol_config(3);
    let obj = v.as_object_mut().unwrap();
    obj.remove("plant");
    obj.remove("initial");
    obj.insert("record_csv".into(), s(&rec_dir.join("experiment.csv")).into());
    let designer = write_json(tmp.path(), "designer.json", &v);

    let out_dir = tmp.path().join("designer-out");
    let o = outreg(&["synthesize", "--config", s(&designer), "--out", s(&out_dir)]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let report: Value = serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["harness"], Value::Bool(false));
    assert!(report["checks"]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["name"] != "data_identity"));

    // The same gain as the harness run on the same inputs.
    let h = outreg(&["synthesize", "--config", s(&harness)]);
    let k_line = |o: &Output| stdout(o).lines().find(|l| l.starts_with("K ")).unwrap().to_string();
    assert_eq!(k_line(&o), k_line(&h));

    let o = outreg(&["verify", "--config", s(&designer)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("plant matrices"));
}

#[test]
fn sweep_runs_every_config_and_reports_worst_status() {
    let tmp = tempfile::tempdir().unwrap();
    let good: Vec<PathBuf> = (0..3)
        .map(|seed| write_json(tmp.path(), &format!("vtol{seed}.json"), &vtol_config(seed)))
        .collect();
    let out = tmp.path().join("sweep");
    let mut args = vec!["run", "--jobs", "2", "--out", s(&out), "--sweep"];
    args.extend(good.iter().map(|p| s(p)));
    let o = outreg(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    for seed in 0..3 {
        assert!(out.join(format!("vtol{seed}")).join("report.json").exists());
    }

    let over: Value = serde_json::from_str(&overdetermined_output_config(2).effective_json()).unwrap();
    let bad = write_json(tmp.path(), "over.json", &over);
    let o = outreg(&["run", "--sweep", s(&good[0]), s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("some failed"));
}

#[test]
fn seed_and_factorization_overrides_change_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_json(tmp.path(), "vtol.json", &vtol_config(0));
    let base = tmp.path().join("base");
    let over = tmp.path().join("over");
    assert!(outreg(&["run", "--config", s(&cfg), "--out", s(&base)])
        .status
        .success());
    let o = outreg(&[
        "run",
        "--config",
        s(&cfg),
        "--seed",
        "9",
        "--factorization",
        "krylov",
        "--out",
        s(&over),
    ]);
    assert!(o.status.success(), "{}", stdout(&o));
    let eff: Value = serde_json::from_slice(&std::fs::read(over.join("effective_config.json")).unwrap()).unwrap();
    assert_eq!(eff["input"]["seed"], 9);
    assert_eq!(eff["factorization"]["method"], "krylov");
    assert_eq!(eff["factorization"]["w_star"], serde_json::json!([1.0, 0.0]));
    assert_ne!(
        std::fs::read(base.join("experiment.csv")).unwrap(),
        std::fs::read(over.join("experiment.csv")).unwrap()
    );
}

#[test]
fn malformed_configs_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = vtol_config(0);
    v["bogus"] = 1.into();
    let cfg = write_json(tmp.path(), "bad.json", &v);
    let o = outreg(&["verify", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"), "{}", stderr(&o));

    let o = outreg(&["run", "--config", s(&tmp.path().join("missing.json"))]);
    assert_eq!(o.status.code(), Some(2));
}
