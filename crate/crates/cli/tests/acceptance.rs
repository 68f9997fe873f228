//! Acceptance criteria, one PASS/FAIL line each; exits nonzero if any fails.

use henon_mixing::{sample_mu, HenonMap, MeasureSample, Observable};
use henon_mixing_cli::config::{ExperimentConfig, Resolved};
use henon_mixing_cli::suite::{self, Check};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

const SEED: u64 = 20240611;

struct Criterion {
    number: usize,
    title: &'static str,
    limit: Duration,
    checks: Vec<Check>,
    seconds: f64,
}

impl Criterion {
    fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed) && self.seconds < self.limit.as_secs_f64()
    }
}

fn criterion(
    number: usize,
    title: &'static str,
    limit: Duration,
    body: impl FnOnce() -> anyhow::Result<Vec<Check>>,
) -> Criterion {
    let start = Instant::now();
    let checks = body().unwrap_or_else(|e| {
        vec![Check {
            id: "error".into(),
            passed: false,
            gating: true,
            detail: format!("{e:#}"),
            seconds: 0.0,
        }]
    });
    let c = Criterion {
        number,
        title,
        limit,
        checks,
        seconds: start.elapsed().as_secs_f64(),
    };
    println!(
        "{} criterion {} ({}): {:.2}s (limit {}s)",
        if c.passed() { "PASS" } else { "FAIL" },
        c.number,
        c.title,
        c.seconds,
        c.limit.as_secs()
    );
    for check in &c.checks {
        let verdict = if check.passed { "PASS" } else { "FAIL" };
        println!("    {verdict} {}: {}", check.id, check.detail);
    }
    c
}

fn resolve(text: &str) -> Resolved {
    ExperimentConfig::from_toml(text)
        .and_then(|c| c.resolve())
        .expect("shipped config resolves")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn horseshoe() -> HenonMap {
    HenonMap::quadratic(-6.0, 0.1).expect("valid map")
}

fn pick(r: &Resolved, names: &[&str]) -> Vec<Observable> {
    names.iter().map(|n| r.observables[*n].clone()).collect()
}

/// Runs every subcommand at two thread counts and compares all output files
/// except `report.json`, which records timings and the thread count.
fn determinism() -> anyhow::Result<Vec<Check>> {
    let dir = tempfile::tempdir()?;
    let cfg = configs().join("default.toml");
    let mut outs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("t{threads}"));
        for cmd in ["green", "sample-mu", "mixing", "clt", "verify"] {
            let status = Command::new(env!("CARGO_BIN_EXE_henon-mixing"))
                .args([cmd, "--threads", threads, "--config"])
                .arg(&cfg)
                .arg("--out")
                .arg(&out)
                .output()?
                .status;
            anyhow::ensure!(status.success(), "{cmd} at {threads} threads exited with {status}");
        }
        outs.push(out);
    }
    let mut names: Vec<String> = std::fs::read_dir(&outs[0])?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()?;
    names.retain(|n| n != "report.json");
    names.sort();
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| std::fs::read(outs[0].join(n)).ok() != std::fs::read(outs[1].join(n)).ok())
        .collect();
    Ok(vec![Check {
        id: "cli.determinism".into(),
        passed: differing.is_empty() && names.len() >= 15,
        gating: true,
        detail: format!(
            "{} files compared at 1 and 4 threads, differing: {differing:?}",
            names.len()
        ),
        seconds: 0.0,
    }])
}

fn main() {
    let f = horseshoe();
    let default = resolve(&std::fs::read_to_string(configs().join("default.toml")).unwrap());
    let clt12 = resolve(&std::fs::read_to_string(configs().join("clt12.toml")).unwrap());
    let secs = Duration::from_secs;
    let mut results = Vec::new();

    results.push(criterion(1, "Green functional equation", secs(5), || {
        let mut out = Vec::new();
        for (name, map) in [("a=1,c=0", HenonMap::quadratic(0.0, 1.0)?), ("horseshoe", horseshoe())] {
            let mut c = suite::green_functional_equation(&map, 10_000, 10.0, SEED)?;
            c.id = format!("{} [{name}]", c.id);
            out.push(c);
        }
        Ok(out)
    }));

    let mut census_samples: Vec<MeasureSample> = Vec::new();
    results.push(criterion(2, "periodic-point census", secs(120), || {
        let (c, samples) = suite::census(&f, 8, SEED)?;
        let cross = suite::census_cross_check(&f, &samples, 5);
        census_samples = samples;
        Ok(vec![c, cross])
    }));

    let p10 = sample_mu(&f, 10, 4000, SEED).expect("period-10 sample");
    let p12 = sample_mu(&f, 12, 16_000, SEED).expect("period-12 sample");
    results.push(criterion(3, "exact invariance", secs(300), || {
        let mut all: Vec<&MeasureSample> = census_samples.iter().collect();
        all.extend([&p10, &p12]);
        Ok(vec![suite::invariance(&f, &all, 20, SEED)?])
    }));

    results.push(criterion(4, "mixing decay, orders 1 and 2", secs(300), || {
        let gaps: Vec<usize> = (2..=20).collect();
        Ok(vec![
            suite::mixing_decay(&f, &p10, &pick(&default, &["bump_a", "bump_b"]), &gaps, 2.0)?,
            suite::mixing_decay(&f, &p10, &pick(&default, &["bump_a", "bump_b", "bump_c"]), &gaps, 2.0)?,
        ])
    }));

    results.push(criterion(5, "positivity brackets", secs(1), || {
        Ok(vec![suite::brackets()?])
    }));

    results.push(criterion(6, "C² decomposition", secs(30), || {
        Ok(vec![suite::decomposition(10, SEED)?])
    }));

    results.push(criterion(7, "central limit theorem", secs(300), || {
        let u = &clt12.observables["bump_a"];
        Ok(vec![suite::clt_experiment(&f, &p12, u, 200)?])
    }));

    results.push(criterion(8, "interpolation", secs(60), || {
        Ok(vec![suite::interpolation()?])
    }));

    results.push(criterion(9, "determinism", secs(600), determinism));

    let failed: Vec<usize> = results.iter().filter(|c| !c.passed()).map(|c| c.number).collect();
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
