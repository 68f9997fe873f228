//! Subcommand execution and output files.

use crate::config::{stream_seed, ExperimentConfig, Resolved};
use crate::suite::{self, timed, Check};
use crate::{MissingInput, VerificationFailed};
use anyhow::{bail, Context};
use henon_mixing::clt::{clt_test, histogram, write_histogram_csv};
use henon_mixing::green::{escape_radius, render_green_slice, Which};
use henon_mixing::mixing::{decay_curve, write_reports_csv};
use henon_mixing::sampler::{sample_mu_with, SampleHeader, SamplerConfig};
use henon_mixing::{HenonMap, MeasureSample, Observable};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Green,
    SampleMu,
    Mixing,
    Clt,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Green => "green",
            Command::SampleMu => "sample-mu",
            Command::Mixing => "mixing",
            Command::Clt => "clt",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Options {
    pub config: PathBuf,
    pub out: PathBuf,
    pub threads: Option<usize>,
    /// Overrides the root seed of the configuration.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config_fingerprint: String,
    pub seed: u64,
    pub threads: usize,
    pub outputs: Vec<OutputFile>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
    pub summary: serde_json::Value,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes files atomically (temporary file, then rename) and records their hashes.
struct OutDir {
    dir: PathBuf,
    written: Vec<OutputFile>,
}

impl OutDir {
    fn new(dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        let mut file = std::fs::File::create(&tmp).with_context(|| format!("writing {}", tmp.display()))?;
        file.write_all(bytes)
            .with_context(|| format!("writing {}", tmp.display()))?;
        file.sync_all()?;
        std::fs::rename(&tmp, &path).with_context(|| format!("renaming into {}", path.display()))?;
        self.written.push(OutputFile {
            file: name.to_string(),
            bytes: bytes.len(),
            sha256: hex(&Sha256::digest(bytes)),
        });
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

struct Timer(BTreeMap<String, f64>);

impl Timer {
    fn time<T>(&mut self, stage: &str, body: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = body();
        self.0.insert(stage.to_string(), start.elapsed().as_secs_f64());
        out
    }
}

/// Loads and validates the configuration, applying the seed override.
pub fn load_config(opts: &Options) -> anyhow::Result<Resolved> {
    let mut cfg = ExperimentConfig::load(&opts.config)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    Ok(cfg.resolve()?)
}

pub fn execute(cmd: Command, opts: &Options) -> anyhow::Result<RunReport> {
    let resolved = load_config(opts)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = opts.threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build()?;
    let threads = pool.current_num_threads();
    pool.install(|| execute_in_pool(cmd, opts, &resolved, threads))
}

fn execute_in_pool(cmd: Command, opts: &Options, r: &Resolved, threads: usize) -> anyhow::Result<RunReport> {
    let mut out = OutDir::new(&opts.out)?;
    let mut timer = Timer(BTreeMap::new());
    out.write("config.echo.toml", r.config.echo().as_bytes())?;
    let outcome = match cmd {
        Command::Green => green(r, &mut out, &mut timer),
        Command::SampleMu => sample(r, &mut out, &mut timer),
        Command::Mixing => mixing(r, &opts.config, &mut out, &mut timer),
        Command::Clt => clt(r, &opts.config, &mut out, &mut timer),
        Command::Verify => verify(r, &mut out, &mut timer),
    };
    let Outcome { summary, failure } = outcome?;
    let report = RunReport {
        command: cmd.name().to_string(),
        config_fingerprint: r.config.fingerprint(),
        seed: r.config.seed,
        threads,
        outputs: out.written.clone(),
        timings: timer.0,
        summary,
    };
    out.write_json("report.json", &report)?;
    match failure {
        Some(f) => Err(f.into()),
        None => Ok(report),
    }
}

struct Outcome {
    summary: serde_json::Value,
    failure: Option<VerificationFailed>,
}

impl From<serde_json::Value> for Outcome {
    fn from(summary: serde_json::Value) -> Self {
        Outcome { summary, failure: None }
    }
}

fn green(r: &Resolved, out: &mut OutDir, timer: &mut Timer) -> anyhow::Result<Outcome> {
    let Some(g) = &r.config.green else {
        bail!("green: the configuration has no [green] section");
    };
    let mut ranges = serde_json::Map::new();
    for (which, name) in [(Which::Plus, "green_plus"), (Which::Minus, "green_minus")] {
        let grid = timer.time(name, || {
            render_green_slice(
                &r.map,
                g.window(),
                (g.resolution[0], g.resolution[1]),
                which,
                g.max_iter,
            )
        })?;
        out.write(&format!("{name}.ppm"), &grid.to_ppm())?;
        out.write(&format!("{name}.ppm.txt"), grid.ramp_sidecar().as_bytes())?;
        out.write(&format!("{name}.csv"), grid.to_csv().as_bytes())?;
        let (lo, hi) = grid.min_max();
        ranges.insert(name.to_string(), serde_json::json!({ "min": lo, "max": hi }));
    }
    ranges.insert("escape_radius".into(), escape_radius(&r.map).into());
    Ok(serde_json::Value::Object(ranges).into())
}

fn sampler_config(r: &Resolved) -> SamplerConfig {
    let s = &r.config.sampler;
    SamplerConfig {
        budget: s.budget,
        box_radius: s.box_radius,
        tol: s.tol,
        rng_seed: stream_seed(r.config.seed, "sampler"),
    }
}

fn build_sample(r: &Resolved, timer: &mut Timer) -> anyhow::Result<MeasureSample> {
    let period = r.config.sampler.period;
    timer
        .time("sample", || sample_mu_with(&r.map, period, sampler_config(r)))
        .with_context(|| format!("sampling periodic saddles of period {period}"))
}

fn sample(r: &Resolved, out: &mut OutDir, timer: &mut Timer) -> anyhow::Result<Outcome> {
    let s = build_sample(r, timer)?;
    let mut csv = Vec::new();
    s.write_csv(&mut csv)?;
    out.write("sample.csv", &csv)?;
    let header = s.header(&r.map);
    out.write_json("sample.json", &header)?;
    Ok(serde_json::to_value(&header)?.into())
}

/// Reloads the sample written by `sample-mu` into the output directory.
fn load_sample(r: &Resolved, config_path: &Path, dir: &Path) -> anyhow::Result<MeasureSample> {
    let rerun = format!(
        "henon-mixing sample-mu --config {} --out {}",
        config_path.display(),
        dir.display()
    );
    let (json, csv) = (dir.join("sample.json"), dir.join("sample.csv"));
    if !json.exists() || !csv.exists() {
        return Err(MissingInput(format!("no sample in {}; run `{rerun}` first", dir.display())).into());
    }
    let header: SampleHeader = serde_json::from_str(&std::fs::read_to_string(&json)?)
        .with_context(|| format!("reading {}", json.display()))?;
    let cfg = sampler_config(r);
    let s = &r.config.sampler;
    if header.period != s.period || header.budget != s.budget || header.rng_seed != cfg.rng_seed {
        return Err(MissingInput(format!(
            "the sample in {} was made with a different sampler configuration; run `{rerun}` again",
            dir.display()
        ))
        .into());
    }
    let file = std::fs::File::open(&csv).with_context(|| format!("reading {}", csv.display()))?;
    Ok(MeasureSample::read(&r.map, &header, std::io::BufReader::new(file))?)
}

fn named<'a>(r: &'a Resolved, name: &str) -> &'a Observable {
    &r.observables[name]
}

fn mixing(r: &Resolved, config_path: &Path, out: &mut OutDir, timer: &mut Timer) -> anyhow::Result<Outcome> {
    let Some(m) = &r.config.mixing else {
        bail!("mixing: the configuration has no [mixing] section");
    };
    let s = load_sample(r, config_path, &out.dir)?;
    let gs: Vec<Observable> = m.observables.iter().map(|n| named(r, n).clone()).collect();
    let (fit, reports) = timer.time("correlations", || decay_curve(&s, &r.map, &gs, &m.gaps, m.gamma))?;
    let mut csv = Vec::new();
    write_reports_csv(&reports, &mut csv)?;
    out.write("correlations.csv", &csv)?;
    out.write_json("decay_fit.json", &fit)?;
    Ok(serde_json::json!({
        "status": fit.status,
        "slope": fit.slope,
        "theoretical_log_rate": fit.theoretical_rate.ln(),
        "fitted_gaps": fit.fitted_gaps,
    })
    .into())
}

fn clt(r: &Resolved, config_path: &Path, out: &mut OutDir, timer: &mut Timer) -> anyhow::Result<Outcome> {
    let Some(c) = &r.config.clt else {
        bail!("clt: the configuration has no [clt] section");
    };
    let s = load_sample(r, config_path, &out.dir)?;
    let u = named(r, &c.observable);
    let (report, normalized) = timer.time("clt", || clt_test(&s, &r.map, u, c.window, c.truncation))?;
    out.write_json("clt.json", &report)?;
    let bins = histogram(&normalized, report.sigma2_batch, c.histogram_bins);
    let mut csv = Vec::new();
    write_histogram_csv(&bins, &mut csv)?;
    out.write("histogram.csv", &csv)?;
    let mut sums = String::from("orbit,point,normalized_sum\n");
    let mut values = normalized.iter();
    for (o, i, _) in s.points() {
        let v = values.next().expect("one sum per sample point");
        sums.push_str(&format!("{o},{i},{v:?}\n"));
    }
    out.write("normalized_sums.csv", sums.as_bytes())?;
    Ok(serde_json::to_value(&report)?.into())
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    passed: bool,
    checks: Vec<Check>,
}

/// Runs every check; gating failures make the command fail after the report is written.
pub fn verify_checks(r: &Resolved) -> anyhow::Result<Vec<Check>> {
    let f: &HenonMap = &r.map;
    let v = &r.config.verify;
    let seed = stream_seed(r.config.seed, "verify");
    let mut checks = Vec::new();
    let radius = escape_radius(f);
    checks.push(timed("green.functional_equation", || {
        suite::green_functional_equation(f, v.green_points, 2.0 * radius, seed)
    }));
    let start = Instant::now();
    let census = suite::census(f, v.census_max_period, seed);
    let samples = match census {
        Ok((mut c, samples)) => {
            c.seconds = start.elapsed().as_secs_f64();
            checks.push(c);
            samples
        }
        Err(e) => {
            checks.push(timed("sampler.census", || Err(e)));
            Vec::new()
        }
    };
    checks.push(timed("sampler.brute_force_cross_check", || {
        Ok(suite::census_cross_check(f, &samples, 5))
    }));
    let main = sample_mu_with(f, r.config.sampler.period, sampler_config(r))?;
    let mut all: Vec<&MeasureSample> = samples.iter().collect();
    all.push(&main);
    checks.push(timed("sampler.exact_invariance", || {
        suite::invariance(f, &all, v.shift_queries, seed)
    }));
    checks.push(timed("observables.positivity_bracket", suite::brackets));
    checks.push(timed("observables.decomposition", || {
        suite::decomposition(v.decomposition_inputs, seed)
    }));
    checks.push(timed("observables.interpolation", suite::interpolation));
    let mixing_obs: Vec<Observable> = match &r.config.mixing {
        Some(m) => m.observables.iter().map(|n| named(r, n).clone()).collect(),
        None => r.observables.values().take(2).cloned().collect(),
    };
    let smaller = samples
        .iter()
        .filter(|s| s.period < main.period)
        .max_by_key(|s| s.period);
    if let Some(small) = smaller {
        checks.push(timed("mixing.invariants", || {
            suite::mixing_invariants(f, small, &main, &mixing_obs)
        }));
    }
    if let Some(c) = &r.config.clt {
        let u = named(r, &c.observable);
        checks.push(timed("clt.invariants", || suite::clt_invariants(f, &main, u, c.window)));
        checks.push(timed("clt.ks_trend", || suite::clt_ks_trend(f, &main, u, c.window / 2)).statistical());
    }
    checks.push(timed("sampler.determinism", || {
        suite::sampler_determinism(f, main.period.min(8), r.config.sampler.budget.min(4000), seed)
    }));
    if let Some(m) = &r.config.mixing {
        let id = format!("mixing.decay_kappa_{}", m.kappa);
        checks.push(timed(&id, || suite::mixing_decay(f, &main, &mixing_obs, &m.gaps, m.gamma)).statistical());
    }
    if let Some(c) = &r.config.clt {
        let u = named(r, &c.observable);
        checks.push(timed("clt.experiment", || suite::clt_experiment(f, &main, u, c.window)).statistical());
    }
    Ok(checks)
}

fn verify(r: &Resolved, out: &mut OutDir, timer: &mut Timer) -> anyhow::Result<Outcome> {
    let checks = timer.time("verify", || verify_checks(r))?;
    for c in &checks {
        let tag = if c.gating { "" } else { " [statistical]" };
        println!("{}{tag}", c.line());
    }
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| c.gating && !c.passed)
        .map(|c| c.id.clone())
        .collect();
    let report = VerifyReport {
        passed: failed.is_empty(),
        checks,
    };
    out.write_json("verify.json", &report)?;
    Ok(Outcome {
        summary: serde_json::json!({ "passed": report.passed, "failed": failed }),
        failure: (!failed.is_empty()).then_some(VerificationFailed(failed)),
    })
}
