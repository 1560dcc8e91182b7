use std::path::Path;
use std::process::Command;

fn sdwsn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sdwsn"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("scenario.cfg");
    std::fs::write(&path, body).unwrap();
    path
}

const DESK: &str = "# small desk scenario\noverride = true\nnodes = 50\narena_width = 150\narena_height = 150\nduration = 30\nsessions = 4\n";

#[test]
fn run_writes_sorted_summary_and_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DESK);
    let out = dir.path().join("out");
    let status = sdwsn()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--seed", "7", "--repeat", "3", "--policy", "rl-trc", "--policy", "fixed-max", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "# sdwsn summary v1");
    assert_eq!(lines[1], "policy,seed,omc,ec_j,ntg_pct,adl_s,paln_pct,awe_pct,awt_pct");
    let keys: Vec<String> = lines[2..]
        .iter()
        .map(|l| l.split(',').take(2).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(
        keys,
        ["fixed-max,7", "fixed-max,8", "fixed-max,9", "rl-trc,7", "rl-trc,8", "rl-trc,9"]
    );
    let series = std::fs::read_to_string(out.join("series.csv")).unwrap();
    // 30 s in 10 s windows, six runs.
    assert_eq!(series.lines().count(), 2 + 6 * 3);
    assert!(out.join("runs/rl-trc-8.summary.csv").exists());
}

#[test]
fn single_threaded_and_parallel_runs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DESK);
    let mut outputs = Vec::new();
    for jobs in ["1", "4"] {
        let out = dir.path().join(format!("out{jobs}"));
        let status = sdwsn()
            .args(["run", "--repeat", "4", "--jobs", jobs, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push((
            std::fs::read(out.join("summary.csv")).unwrap(),
            std::fs::read(out.join("series.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn out_of_range_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "nodes = 20\nmx_atmpt = 9\n");
    let out = sdwsn()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("nodes") && err.contains("mx_atmpt"), "{err}");
}

#[test]
fn unknown_policy_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DESK);
    let status = sdwsn()
        .args(["run", "--policy", "greedy-ish", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn missing_config_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let status = sdwsn()
        .args(["run", "--config"])
        .arg(dir.path().join("absent.cfg"))
        .arg("--out")
        .arg(dir.path().join("o"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn check_prints_effective_settings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DESK);
    let out = sdwsn().arg("check").arg("--config").arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("nodes = 50"));
    assert!(text.contains("policy = rl-trc"));
}
