use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const MINI: &str = r#"schema_version = 1
seed = 11
budget = 40

[grid]
rows = 4
cols = 4

[targets]
k = 1

[agents]
count = 1
policy = "rnd"
"#;

fn nats(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nats"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

#[test]
fn run_writes_trace_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("mini.toml"), MINI).unwrap();
    let out = nats(&["run", "--config", "mini.toml", "--out", "a"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let trace = fs::read_to_string(dir.path().join("a/trace.ndjson")).unwrap();
    let mut lines = trace
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap());
    let header = lines.next().unwrap();
    assert_eq!(header["schema"], "nats-trace");
    assert_eq!(header["config"]["grid"]["rows"], 4);
    assert_eq!(lines.next_back().unwrap()["type"], "end");

    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/metrics.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 11);
    assert_eq!(m["agents"], 1);
    let measurements = m["measurements"].as_u64().unwrap() as usize;
    assert_eq!(m["recovered"].as_array().unwrap().len(), measurements + 1);
}

#[test]
fn repeated_invocations_match_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("mini.toml"), MINI).unwrap();
    for out in ["a", "b"] {
        let o = nats(
            &["run", "--config", "mini.toml", "--out", out, "--drop", "0.5"],
            dir.path(),
        );
        assert!(o.status.success());
    }
    for f in ["trace.ndjson", "metrics.json"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn missing_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = nats(&["run", "--config", "nope.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.toml"));
}

#[test]
fn invalid_override_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("mini.toml"), MINI).unwrap();
    let out = nats(&["run", "--config", "mini.toml", "--drop", "1.5"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = nats(&["run", "--config", "mini.toml", "--delay", "gamma:2"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_writes_all_tables() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("mini.toml"), MINI).unwrap();
    let args = [
        "sweep",
        "--config",
        "mini.toml",
        "--trials",
        "4",
        "--vary",
        "policy",
        "--values",
        "rnd,point",
        "--t-step",
        "10",
        "--out",
        "s",
    ];
    let out = nats(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let curve = fs::read_to_string(dir.path().join("s/curve.csv")).unwrap();
    assert!(curve.starts_with("param,value,t,rate,se\n"));
    // two policies, T in {0, 10, 20, 30, 40}
    assert_eq!(curve.lines().count(), 1 + 2 * 5);
    let ttr = fs::read_to_string(dir.path().join("s/time_to_recovery.csv")).unwrap();
    assert_eq!(ttr.lines().count(), 3);
    let trials = fs::read_to_string(dir.path().join("s/trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 1 + 2 * 4);
}

#[test]
fn calibrate_and_viewshed_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("distance,confidence,label\n");
    for (d, y) in [(5, 0.9), (6, 0.95), (15, 0.8), (16, 0.7)] {
        csv.push_str(&format!("{d},{y},car\n"));
    }
    fs::write(dir.path().join("log.csv"), csv).unwrap();
    let out = nats(
        &["calibrate", "--input", "log.csv", "--edges", "0,10,20", "--out", "c"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.path().join("c/calibration.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);

    // an empty bin is reported as bad input
    let out = nats(
        &["calibrate", "--input", "log.csv", "--edges", "0,10,20,30"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[20, 30)"));

    let mut dem = String::from("ncols 11\nnrows 11\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n");
    for _ in 0..11 {
        dem.push_str(&["0"; 11].join(" "));
        dem.push('\n');
    }
    fs::write(dir.path().join("flat.asc"), dem).unwrap();
    let out = nats(
        &[
            "viewshed",
            "--dem",
            "flat.asc",
            "--spacing",
            "5",
            "--node",
            "1,1",
            "--out",
            "v",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = fs::read_to_string(dir.path().join("v/viewshed.csv")).unwrap();
    let rows: Vec<&str> = v.lines().skip(1).collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r.ends_with(",1")));
}
