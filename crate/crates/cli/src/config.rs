//! Experiment configuration (TOML).

use crate::ConfigError;
use henon_mixing::green::Window;
use henon_mixing::observables::spec::{build_observables, ObservableSpec};
use henon_mixing::observables::Observable;
use henon_mixing::{HenonMap, MapSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

pub const MAX_PERIOD: usize = 16;
pub const MAX_BUDGET: usize = 1_000_000;
pub const MAX_RESOLUTION: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root of every random stream.
    pub seed: u64,
    pub map: MapSpec,
    pub sampler: SamplerSection,
    #[serde(default)]
    pub observables: BTreeMap<String, ObservableSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub green: Option<GreenSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixing: Option<MixingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clt: Option<CltSection>,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub period: usize,
    pub budget: usize,
    /// Seed box radius; the map's escape radius when absent.
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub box_radius: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    henon_mixing::sampler::DEFAULT_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenSection {
    pub re_z: [f64; 2],
    pub re_w: [f64; 2],
    pub resolution: [usize; 2],
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_max_iter() -> usize {
    200
}

impl GreenSection {
    pub fn window(&self) -> Window {
        Window {
            re_z: self.re_z,
            re_w: self.re_w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingSection {
    pub kappa: usize,
    /// Names of `g₀, …, g_κ`.
    pub observables: Vec<String>,
    pub gaps: Vec<usize>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltSection {
    pub observable: String,
    pub window: usize,
    pub truncation: usize,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

fn default_bins() -> usize {
    40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Periods `1..=census_max_period` are counted.
    #[serde(default = "default_census")]
    pub census_max_period: usize,
    #[serde(default = "default_green_points")]
    pub green_points: usize,
    #[serde(default = "default_queries")]
    pub shift_queries: usize,
    #[serde(default = "default_inputs")]
    pub decomposition_inputs: usize,
}

fn default_census() -> usize {
    8
}
fn default_green_points() -> usize {
    10_000
}
fn default_queries() -> usize {
    20
}
fn default_inputs() -> usize {
    10
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            census_max_period: default_census(),
            green_points: default_green_points(),
            shift_queries: default_queries(),
            decomposition_inputs: default_inputs(),
        }
    }
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("{key}: {msg}"))
}

fn check_range<T: PartialOrd + std::fmt::Display>(key: &str, v: T, lo: T, hi: T) -> Result<(), ConfigError> {
    if v < lo || v > hi {
        return Err(invalid(key, format!("expected a value in [{lo}, {hi}], got {v}")));
    }
    Ok(())
}

/// Validated configuration with the map and observables built.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub map: HenonMap,
    pub observables: BTreeMap<String, Observable>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("config does not parse: {e}")))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::Error::new(e).context(format!("reading config {}", path.display())))?;
        Ok(Self::from_toml(&text)?)
    }

    /// Canonical TOML; parsing it yields an equal configuration.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical echo.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.echo().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn resolve(self) -> Result<Resolved, ConfigError> {
        let map = self.map.build().map_err(|e| invalid("map", e))?;
        let s = &self.sampler;
        check_range("sampler.period", s.period, 1, MAX_PERIOD)?;
        check_range("sampler.budget", s.budget, 1, MAX_BUDGET)?;
        if !(s.tol > 0.0 && s.tol <= 1e-6) {
            return Err(invalid(
                "sampler.tol",
                format!("expected a value in (0, 1e-6], got {}", s.tol),
            ));
        }
        if let Some(b) = s.box_radius {
            if !(b > 0.0 && b.is_finite()) {
                return Err(invalid("sampler.box", format!("expected a positive radius, got {b}")));
            }
        }
        let observables = build_observables(&self.observables, &map).map_err(|e| ConfigError(e.to_string()))?;
        let known = |key: &str, name: &str| {
            if observables.contains_key(name) {
                Ok(())
            } else {
                Err(invalid(key, format!("unknown observable `{name}`")))
            }
        };
        if let Some(g) = &self.green {
            for (key, w) in [("green.re_z", g.re_z), ("green.re_w", g.re_w)] {
                if !(w[0] < w[1] && w.iter().all(|v| v.is_finite())) {
                    return Err(invalid(key, format!("expected [lo, hi] with lo < hi, got {w:?}")));
                }
            }
            for v in g.resolution {
                check_range("green.resolution", v, 2, MAX_RESOLUTION)?;
            }
            check_range("green.max_iter", g.max_iter, 1, 100_000)?;
        }
        if let Some(m) = &self.mixing {
            if m.kappa == 0 {
                return Err(invalid(
                    "mixing.kappa",
                    "the correlation order must be a positive integer (κ ≥ 1), got 0",
                ));
            }
            check_range("mixing.kappa", m.kappa, 1, 8)?;
            if m.observables.len() != m.kappa + 1 {
                return Err(invalid(
                    "mixing.observables",
                    format!(
                        "expected kappa + 1 = {} names, got {}",
                        m.kappa + 1,
                        m.observables.len()
                    ),
                ));
            }
            for name in &m.observables {
                known("mixing.observables", name)?;
            }
            if m.gaps.is_empty() || m.gaps.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid("mixing.gaps", "expected a nonempty strictly ascending list"));
            }
            let cap = henon_mixing::mixing::MAX_TIME_PERIODS * s.period;
            let last = m.gaps[m.gaps.len() - 1] * m.kappa;
            if last > cap {
                return Err(invalid(
                    "mixing.gaps",
                    format!("kappa × largest gap = {last} exceeds {cap} (4 × sampler.period)"),
                ));
            }
            if !(m.gamma > 0.0 && m.gamma <= 2.0) {
                return Err(invalid(
                    "mixing.gamma",
                    format!("expected a value in (0, 2], got {}", m.gamma),
                ));
            }
        }
        if let Some(c) = &self.clt {
            known("clt.observable", &c.observable)?;
            if s.period < 2 {
                return Err(invalid("sampler.period", "the clt experiment needs period ≥ 2"));
            }
            check_range("clt.window", c.window, 8, 100_000)?;
            check_range("clt.truncation", c.truncation, 0, 100_000)?;
            check_range("clt.histogram_bins", c.histogram_bins, 1, 10_000)?;
        }
        let v = &self.verify;
        check_range("verify.census_max_period", v.census_max_period, 1, 12)?;
        check_range("verify.green_points", v.green_points, 1, 10_000_000)?;
        check_range("verify.shift_queries", v.shift_queries, 1, 10_000)?;
        check_range("verify.decomposition_inputs", v.decomposition_inputs, 1, 1_000)?;
        Ok(Resolved {
            config: self,
            map,
            observables,
        })
    }
}

/// Seed of the named stream derived from the root seed.
pub fn stream_seed(root: u64, purpose: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(purpose.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}
