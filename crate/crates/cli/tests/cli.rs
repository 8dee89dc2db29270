use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn dkcf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dkcf")).args(args).output().expect("spawn dkcf")
}

fn quickstart_with(dir: &Path, edit: impl Fn(String) -> String) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, edit(fs::read_to_string(config("quickstart.toml")).unwrap())).unwrap();
    path
}

fn short(text: String) -> String {
    text.replace("duration = 10.0", "duration = 2.0")
}

#[test]
fn shipped_configs_validate() {
    for name in ["quickstart.toml", "drift_asymmetry.toml", "latency_sweep.toml"] {
        let out = dkcf(&["validate", config(name).to_str().unwrap()]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn validate_lists_every_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quickstart_with(tmp.path(), |t| {
        t.replace("tick_period = 0.1", "tick_period = -0.1")
            .replace("epsilon = 0.3", "epsilon = 0.0")
            .replace("from = 1\nto = 0", "from = 1\nto = 7")
    });
    let out = dkcf(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for key in ["tick_period", "epsilon", "links"] {
        assert!(err.contains(key), "missing {key} in: {err}");
    }
}

#[test]
fn malformed_toml_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quickstart_with(tmp.path(), |t| t.replace("[model]", "[model]\nbogus_field = 3"));
    assert_eq!(dkcf(&["validate", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn missing_file_exits_two() {
    assert_eq!(dkcf(&["run", "/nonexistent/config.toml"]).status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quickstart_with(tmp.path(), short);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = dkcf(&["run", cfg.to_str().unwrap(), "--seed", "4", "--output-dir", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["report.json", "report.txt", "tracks.csv", "consensus.csv", "errors.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn zero_duration_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quickstart_with(tmp.path(), |t| t.replace("duration = 10.0", "duration = 0.0"));
    let out = dkcf(&["run", cfg.to_str().unwrap(), "--output-dir", tmp.path().join("out").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("out/report.json").exists());
}

#[test]
fn sweep_writes_each_run_and_an_aggregate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quickstart_with(tmp.path(), short);
    let out_dir = tmp.path().join("sweep");
    let out = dkcf(&["sweep", cfg.to_str().unwrap(), "--output-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let runs = fs::read_dir(&out_dir).unwrap().filter(|e| e.as_ref().unwrap().path().is_dir()).count();
    assert_eq!(runs, 6);
    assert!(out_dir.join("report.json").exists());
    assert!(out_dir.join("standard_lat0_drift1_seed2").join("errors.csv").exists());
}

#[test]
fn comparing_a_report_with_itself_gives_zero_deltas() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quickstart_with(tmp.path(), short);
    let dir = tmp.path().join("run");
    assert!(dkcf(&["run", cfg.to_str().unwrap(), "--output-dir", dir.to_str().unwrap()]).status.success());
    let report = dir.join("report.json");
    let out = dkcf(&["compare", report.to_str().unwrap(), report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("Robot")).collect();
    assert_eq!(rows.len(), 4, "{text}");
    assert!(rows.iter().all(|r| r.ends_with("+0.000")), "{text}");
}
