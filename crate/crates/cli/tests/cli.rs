use std::path::Path;
use std::process::{Command, Output};

fn akprop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_akprop")).args(args).env("AKPROP_THREADS", "1").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn kernel_eval_d1_at_origin() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = akprop(&["kernel-eval", "--d", "1", "--branch", "plus", "--lambda", "2", "--r", "0", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "0+0.25i");
    let m = akprop(&["kernel-eval", "--d", "1", "--branch", "minus", "--lambda", "2", "--r", "0", "--out", out]);
    assert_eq!(stdout(&m).trim(), "0-0.25i");
}

#[test]
fn spectral_check_on_empty_family_has_unit_margin() {
    let dir = tempfile::tempdir().unwrap();
    let o = akprop(&["spectral-check", "--d", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("margin 1.0"), "{s}");
    assert!(s.contains("CHECK name=spectral-condition status=PASS"), "{s}");
}

#[test]
fn malformed_configs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "a.json", r#"{"dimension": 1, "bogus": 3}"#);
    let o = akprop(&["run", "--config", &unknown]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"), "{}", stderr(&o));

    let no_experiment = write_config(dir.path(), "b.json", r#"{"dimension": 1}"#);
    let o = akprop(&["run", "--config", &no_experiment]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("experiment"));

    let bad_dim = write_config(dir.path(), "c.json", r#"{"dimension": 7, "experiment": "spectral-check"}"#);
    assert_eq!(akprop(&["run", "--config", &bad_dim]).status.code(), Some(2));

    let missing_times = write_config(
        dir.path(),
        "d.json",
        r#"{"dimension": 1, "experiment": "propagate", "points": {"kind": "axis", "r": 1.0, "n": 3}}"#,
    );
    let o = akprop(&["run", "--config", &missing_times]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("times"), "{}", stderr(&o));

    let negative_tol = write_config(
        dir.path(),
        "e.json",
        r#"{"dimension": 1, "experiment": "decay-fit", "points": {"kind": "axis", "r": 1.0, "n": 3},
            "times": {"t0": 1.0, "ratio": 2.0, "count": 5}, "decay": {"kernel": "free", "tolerance": -1.0}}"#,
    );
    let o = akprop(&["run", "--config", &negative_tol]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("decay.tolerance"), "{}", stderr(&o));

    assert_eq!(akprop(&["run", "--preset", "no-such-preset"]).status.code(), Some(2));
    assert_eq!(akprop(&["kernel-eval", "--d", "1", "--branch", "sideways", "--lambda", "1", "--r", "0"]).status.code(), Some(2));
}

#[test]
fn presets_are_listed() {
    let s = stdout(&akprop(&["presets"]));
    for p in ["free-baseline", "theorem1-d1", "theorem3-disjoint", "oscillatory-appendixA", "oracle-compare"] {
        assert!(s.lines().any(|l| l == p), "{p} missing from {s}");
    }
}

#[test]
fn free_baseline_passes_and_output_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = akprop(&["run", "--preset", "free-baseline", "--out", d.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).contains("CHECK name=decay-slope status=PASS"));
    }
    for f in ["free-baseline_fit.csv", "free-baseline_summary.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between runs");
    }
    let csv = std::fs::read_to_string(a.path().join("free-baseline_fit.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# akprop ") && header.contains("experiment=decay-fit") && header.contains("config_sha256="));
    assert_eq!(lines.next(), Some("t,norm"));
    assert_eq!(lines.count(), 7);
}

#[test]
fn failed_check_exits_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    // the rank-one d = 1 slope sits near −0.64 on this ladder: a 1e-6 tolerance cannot hold
    let cfg = write_config(
        dir.path(),
        "f.json",
        r#"{"dimension": 1, "experiment": "decay-fit", "points": {"kind": "axis", "r": 1.0, "n": 3},
            "family": {"kind": "explicit", "members": [{"shape": "gaussian"}], "weights": [1.0]},
            "times": {"t0": 1.0, "ratio": 2.0, "count": 7}, "decay": {"kernel": "difference", "tolerance": 1e-6}}"#,
    );
    let o = akprop(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stdout(&o).contains("status=FAIL"));
}

#[test]
fn propagate_writes_kernel_table_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "p.json",
        r#"{"name": "prop", "dimension": 1, "experiment": "propagate",
            "family": {"kind": "explicit", "members": [{"shape": "gaussian"}], "weights": [1.0]},
            "points": {"kind": "explicit", "xs": [[0.5]], "ys": [[-0.5]]}, "times": [1.0, 2.0]}"#,
    );
    let o = akprop(&["run", "--config", &cfg, "--t", "3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("prop_kernel.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 1, "{csv}");
    assert!(rows[0].starts_with("3,0.5,-0.5,"), "{csv}");
}
