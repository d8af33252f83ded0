//! End-to-end checks of the `sim` binary.

use std::path::Path;
use std::process::{Command, Output};

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sim"))
        .args(args)
        .output()
        .expect("sim runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn lists_every_scenario() {
    let out = sim(&["list-scenarios"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "two_atom_freq",
        "xx_xxx_switch",
        "freeze_2d",
        "dw_1d",
        "nflip_pbc",
        "single_atom_cycles",
        "finite_pulse",
    ] {
        assert!(text.contains(name), "{name} missing from {text}");
    }
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let out = sim(&["validate", "--config", path.to_str().unwrap()]);
        assert!(out.status.success(), "{}: {:?}", path.display(), out);
    }
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"scenario": "dw_1d", "n_atoms": 0}"#,
    );
    let out = sim(&["validate", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let unknown = write(dir.path(), "unknown.json", r#"{"scenario": "nope"}"#);
    assert_eq!(sim(&["run", "--config", &unknown]).status.code(), Some(2));

    let missing = dir.path().join("absent.json");
    let out = sim(&["run", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_series_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "switch.json",
        r#"{"scenario": "xx_xxx_switch", "seed": 3}"#,
    );
    let out_dir = dir.path().join("out");
    let out = sim(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--svg",
    ]);
    assert!(out.status.success(), "{out:?}");
    let series = std::fs::read_to_string(out_dir.join("xx_xxx_switch_series.csv")).unwrap();
    assert!(series.starts_with("time_us,t_prime,observable_name,site,mean,sem,n_shots"));
    assert!(series.contains("p_up_down"));
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("xx_xxx_switch_summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["scenario"], "xx_xxx_switch");
    assert!(std::fs::read_dir(&out_dir).unwrap().any(|e| e
        .unwrap()
        .path()
        .extension()
        .is_some_and(|x| x == "svg")));
}

#[test]
fn seed_override_changes_shot_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "single.json",
        r#"{"scenario": "single_atom_cycles", "realizations": 50}"#,
    );
    let series = |seed: &str, name: &str| {
        let out_dir = dir.path().join(name);
        let out = sim(&[
            "run",
            "--config",
            &cfg,
            "--seed",
            seed,
            "--shots",
            "500",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{out:?}");
        std::fs::read(out_dir.join("single_atom_cycles_series.csv")).unwrap()
    };
    let a = series("1", "a");
    assert_eq!(a, series("1", "b"));
    assert_ne!(a, series("2", "c"));
}
