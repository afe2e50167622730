use std::fs;
use std::process::Command;

fn qosp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qosp"))
}

#[test]
fn g2_point_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let status = qosp()
        .args(["g2-point", "--trials", "1000000000", "--seed", "3", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let point: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("g2-point.json")).unwrap())
            .unwrap();
    assert_eq!(point["counts"]["n_slots"], 1_000_000_000u64);
    let run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(run["seed"], 3);
}

#[test]
fn analytic_freq_sweep_leaves_mc_columns_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = qosp()
        .args([
            "freq-sweep",
            "--analytic-only",
            "--read-nm",
            "798,800,802",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("freq-sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[2].starts_with("800,"));
    assert!(rows[2].ends_with(",,"));
}

#[test]
fn shard_count_does_not_change_data() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (dir, shards) in [(&a, "1"), (&b, "3")] {
        let status = qosp()
            .args([
                "histogram",
                "--trials",
                "5000000000",
                "--shards",
                shards,
                "--out",
            ])
            .arg(dir.path())
            .status()
            .unwrap();
        assert!(status.success());
    }
    for name in ["histogram.csv", "histogram-summary.json"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap()
        );
    }
}

#[test]
fn exit_codes_distinguish_config_and_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"experiment": {"p_noise": 2.0}}"#).unwrap();
    let out = qosp()
        .args(["g2-point", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("experiment.p_noise"));
    assert!(!dir.path().join("o").exists());

    let missing = qosp()
        .args(["g2-point", "--config", "/no/such/file.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(3));

    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "").unwrap();
    let out = qosp()
        .args(["g2-point", "--analytic-only", "--out"])
        .arg(blocker.join("sub"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));

    let usage = qosp().args(["no-such-scenario"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
}
