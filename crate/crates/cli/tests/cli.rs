use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const HALF: &str = r#"
[measure]
type = "discrete"
atoms = [[1.0, [0.5, 0.5]]]

[run]
eta = 0.3
replicas = 2
"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn fragline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fragline")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn dyadic_line_has_four_quarters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "half.toml", HALF);
    let o = fragline(&["stopping-line", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("replica,fragment_id,mass,freeze_time,depth,weight"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    for row in rows {
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.25);
        assert_eq!(row[4], "2");
    }
}

#[test]
fn malthus_reports_roots_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "hq.toml",
        "[measure]\ntype = \"discrete\"\natoms = [[1.0, [0.5, 0.25]]]\n",
    );
    let o = fragline(&["malthus", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.contains("\"p_star\"")).unwrap();
    let value: f64 = line.split(':').nth(1).unwrap().trim().trim_end_matches(',').parse().unwrap();
    assert!((value + 0.3057580863693827).abs() < 1e-10);
    assert!(text.contains("\"conservative\": false"));
}

#[test]
fn unknown_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &format!("{HALF}bogus = 1\n"));
    let o = fragline(&["phi", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 9") && err.contains("bogus"), "{err}");
}

#[test]
fn invalid_value_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "neg.toml", &HALF.replace("eta = 0.3", "eta = -1.0"));
    let o = fragline(&["stopping-line", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_check_exits_with_one() {
    // at t = 1 the speed is far from its limit
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "b7.toml",
        "[measure]\ntype = \"discrete\"\natoms = [[1.0, [0.7, 0.3]]]\n[run]\nt = 1.0\nreplicas = 20\n",
    );
    let o = fragline(&["largest", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "half.toml", HALF);
    let out = dir.path().join("line.json");
    let o = fragline(&[
        "stopping-line",
        "-c",
        cfg.to_str().unwrap(),
        "--replicas",
        "1",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with('['));
    assert_eq!(text.matches("\"fragment_id\"").count(), 4);
}

#[test]
fn config_echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "half.toml", HALF);
    let first = stdout(&fragline(&["config", "-c", cfg.to_str().unwrap()]));
    let echoed = write(dir.path(), "echo.toml", &first);
    let second = stdout(&fragline(&["config", "-c", echoed.to_str().unwrap()]));
    assert_eq!(first, second);
    assert!(first.contains("replicas = 2"));
}

#[test]
fn seed_changes_the_sample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "half.toml", HALF);
    let a = stdout(&fragline(&["stopping-line", "-c", cfg.to_str().unwrap(), "--seed", "1"]));
    let b = stdout(&fragline(&["stopping-line", "-c", cfg.to_str().unwrap(), "--seed", "2"]));
    assert_ne!(a, b);
}
