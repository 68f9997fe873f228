use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_henon-mixing");

fn default_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/default.toml")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> PathBuf {
    let text = std::fs::read_to_string(default_config())
        .unwrap()
        .replace("resolution = [200, 200]", "resolution = [40, 30]");
    let path = dir.join("small.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn sample_files_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (a, b) = (dir.path().join("t1"), dir.path().join("t4"));
    for (out, threads) in [(&a, "1"), (&b, "4")] {
        let o = run(&["sample-mu", "--threads", threads], &cfg, out);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["sample.csv", "sample.json", "config.echo.toml"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn pipeline_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("run");
    for cmd in ["green", "sample-mu", "mixing", "clt"] {
        let o = run(&[cmd], &cfg, &out);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for name in [
        "green_plus.ppm",
        "green_plus.ppm.txt",
        "green_minus.csv",
        "sample.csv",
        "sample.json",
        "correlations.csv",
        "decay_fit.json",
        "clt.json",
        "histogram.csv",
        "normalized_sums.csv",
        "config.echo.toml",
        "report.json",
    ] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let ppm = std::fs::read(out.join("green_plus.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n40 30\n255\n"));
    assert_eq!(ppm.len(), b"P6\n40 30\n255\n".len() + 3 * 40 * 30);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["command"], "clt");
    assert!(report["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .all(|o| o["sha256"].as_str().unwrap().len() == 64));
    let sums = std::fs::read_to_string(out.join("normalized_sums.csv")).unwrap();
    assert_eq!(sums.lines().count(), 1 + 1024);
}

#[test]
fn missing_sample_names_the_command() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["mixing"], &default_config(), dir.path());
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("henon-mixing sample-mu --config"), "{err}");
}

#[test]
fn invalid_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(default_config())
        .unwrap()
        .replace("kappa = 1", "kappa = 0");
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, text).unwrap();
    let o = run(&["sample-mu"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("mixing.kappa") && err.contains("positive integer"),
        "{err}"
    );
}

#[test]
fn verify_passes_on_the_default_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify"], &default_config(), dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert!(report["checks"].as_array().unwrap().len() >= 10);
}

#[test]
fn seed_override_changes_the_sampler_stream() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = run(&["sample-mu", "--seed", "5"], &cfg, &dir.path().join("s"));
    assert!(o.status.success());
    let echo = std::fs::read_to_string(dir.path().join("s/config.echo.toml")).unwrap();
    assert!(echo.contains("seed = 5"), "{echo}");
}
