use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn frontlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frontlab"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const QUICK: &str = r#"
name = "quick"

[reaction]
preset = "fisher-kpp"

[[kernels]]
family = "laplace"
param = 1.0

[semiwave]
length = 30.0
dx = 0.1

[simulation]
h0 = 3.0
dx = 0.1
t_final = 30.0
snapshot_times = [0.0, 30.0]
"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn heavy_kernel_is_classified() {
    let tmp = tempfile::tempdir().unwrap();
    let o = frontlab(&["check-kernel", "--family", "algebraic", "--param", "1.5"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&tmp.path().join("kernel_report.json"));
    assert_eq!(report[0]["conditions"]["satisfies_j1"], false);
    assert_eq!(report[0]["conditions"]["satisfies_j"], true);
}

#[test]
fn semiwave_writes_profile_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let o = frontlab(&["--preset", "fisher-kpp-laplace", "semiwave", "--c", "0.5", "--L", "20", "--dx", "0.1"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tmp.path().join("fisher-kpp-laplace");
    let csv = std::fs::read_to_string(dir.join("profile.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,phi_1"));
    assert_eq!(csv.lines().count(), 202);
    let summary = json(&dir.join("semiwave_summary.json"));
    assert_eq!(summary["regime"], "semi_wave");
    assert_eq!(summary["tail"]["kind"]["kind"], "exponential");
}

#[test]
fn schema_errors_exit_with_two_and_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.toml", &QUICK.replace("family = \"laplace\"\n", ""));
    let o = frontlab(&["--config", bad.to_str().unwrap(), "simulate"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kernels[0]"), "{}", stderr(&o));

    let negative = write(tmp.path(), "neg.toml", &QUICK.replace("h0 = 3.0", "h0 = -3.0"));
    let o = frontlab(&["--config", negative.to_str().unwrap(), "simulate"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("simulation.h0"), "{}", stderr(&o));

    let o = frontlab(&["--preset", "no-such-scenario", "simulate"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn speed_refuses_kernels_without_first_moment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = frontlab(&["--preset", "algebraic-1.5", "speed"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("first moment") && err.contains("accelerated"), "{err}");
}

#[test]
fn runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "quick.toml", QUICK);
    let mut trees = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("out{k}"));
        let o = frontlab(&["--config", cfg.to_str().unwrap(), "run"], &out);
        assert!(o.status.success(), "{}", stderr(&o));
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(out.join("quick"))
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
            })
            .collect();
        files.sort();
        trees.push(files);
    }
    let names: Vec<&str> = trees[0].iter().map(|(n, _)| n.as_str()).collect();
    for expected in [
        "kernel_report.json",
        "assumption_report.json",
        "semiwave_summary.json",
        "profile.csv",
        "trajectory.csv",
        "snapshot_0.csv",
        "snapshot_1.csv",
        "run_report.json",
        "asymptotics.json",
    ] {
        assert!(names.contains(&expected), "{expected} missing from {names:?}");
    }
    assert!(trees[0] == trees[1]);
}

#[test]
fn json_configs_and_trajectory_analysis() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "quick.json",
        r#"{"name": "quick-json", "reaction": {"preset": "fisher-kpp"},
            "kernels": [{"family": "laplace", "param": 1.0}],
            "simulation": {"h0": 3.0, "dx": 0.1, "t_final": 40.0}}"#,
    );
    let o = frontlab(&["--config", cfg.to_str().unwrap(), "simulate"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let traj = tmp.path().join("quick-json").join("trajectory.csv");
    let report = json(&tmp.path().join("quick-json").join("run_report.json"));
    assert_eq!(report["samples"], 41);
    let o = frontlab(&["analyze", "--trajectory", traj.to_str().unwrap(), "--c0", "0.27"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let slope = json(&tmp.path().join("asymptotics.json"))["linear_speed"]["slope"].as_f64().unwrap();
    assert!((0.2..0.3).contains(&slope), "{slope}");
}

#[test]
fn batch_reports_each_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "quick.toml", QUICK);
    write(tmp.path(), "broken.toml", &QUICK.replace("name = \"quick\"", "name = \"broken\"\nmu = [0.0]"));
    let batch = write(tmp.path(), "batch.toml", "scenarios = [\"quick.toml\", \"broken.toml\"]\n");
    let out = tmp.path().join("out");
    let o = frontlab(&["--config", batch.to_str().unwrap(), "--threads", "2", "batch"], &out);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let entries = json(&out.join("batch_report.json"));
    assert_eq!(entries[0]["exit_code"], 0);
    assert_eq!(entries[1]["exit_code"], 2);
    assert!(out.join("quick").join("trajectory.csv").is_file());
}
