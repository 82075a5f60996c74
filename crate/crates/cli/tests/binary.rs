use std::fs;
use std::process::Command;

fn blockgrad() -> Command {
    Command::new(env!("CARGO_BIN_EXE_blockgrad"))
}

fn write_config(dir: &std::path::Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn regret_run_writes_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "experiment = \"regret\"\n[regret]\nhorizon = 40\nrepetitions = 3\n",
    );
    let out = dir.path().join("nested/regret.csv");
    let status = blockgrad()
        .args(["regret", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 41);
    assert!(
        lines[0].starts_with("t,mean_regret_B1,std_regret_B1"),
        "{}",
        lines[0]
    );
    let stdout = String::from_utf8_lossy(&status.stdout);
    assert!(stdout.contains("wrote"), "{stdout}");
}

#[test]
fn same_seed_gives_identical_bytes_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "experiment = \"nonconvex\"\npreset = \"quick\"\n[nonconvex]\nsteps = 30\nstride = 5\n",
    );
    let mut outputs = Vec::new();
    for threads in ["1", "3", "1"] {
        let out = dir.path().join(format!("nc_{}.csv", outputs.len()));
        let status = blockgrad()
            .args([
                "nonconvex",
                "--seed",
                "11",
                "--threads",
                threads,
                "--config",
            ])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);

    let out = dir.path().join("other.csv");
    blockgrad()
        .args(["nonconvex", "--seed", "12", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_ne!(outputs[0], fs::read(&out).unwrap());
}

#[test]
fn invalid_flag_exits_with_usage_code() {
    let out = blockgrad()
        .args(["regret", "--no-such-flag"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[regret]\nhorizon = 0\n");
    let out = blockgrad()
        .args(["regret", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizon"));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = blockgrad()
        .args(["regret", "--config", "/nonexistent/x.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn checkpoint_is_written_for_minnorm() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("state.ck");
    let out = dir.path().join("mn.csv");
    let status = blockgrad()
        .args(["minnorm", "--preset", "quick", "--checkpoint"])
        .arg(&ck)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let bytes = fs::read(&ck).unwrap();
    assert!(blockgrad::optim::state_deserialize(&bytes).is_ok());
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 21);
}

#[test]
fn checkpoint_rejected_for_other_experiments() {
    let out = blockgrad()
        .args(["diag", "--checkpoint", "x.ck"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn selftest_passes() {
    let out = blockgrad().arg("selftest").output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAILED"));
}
