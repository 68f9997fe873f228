//! Multi-order correlations on periodic-orbit samples.
//!
//! Compositions `g∘fⁿ` are evaluated by walking each orbit (`xᵢ ↦ x_{i+n mod q}`),
//! so every time shift is exact and costs one lookup.

use crate::error::{Error, Result};
use crate::henon::HenonMap;
use crate::observables::Observable;
use crate::sampler::MeasureSample;
use crate::sum::NeumaierSum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Largest admissible time as a multiple of the sample period.
pub const MAX_TIME_PERIODS: usize = 4;

#[derive(Debug, Clone)]
pub struct CorrelationQuery {
    /// `g₀, …, g_κ`.
    pub observables: Vec<Observable>,
    /// `0 = n₀ ≤ n₁ ≤ … ≤ n_κ`.
    pub times: Vec<usize>,
    /// Hölder exponent used for the theoretical rate.
    pub gamma: f64,
}

impl CorrelationQuery {
    pub fn new(observables: Vec<Observable>, times: Vec<usize>, gamma: f64) -> Result<Self> {
        if observables.is_empty() || observables.len() != times.len() {
            return Err(Error::arg(format!(
                "need one time per observable, got {} observables and {} times",
                observables.len(),
                times.len()
            )));
        }
        if times[0] != 0 || times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::arg(format!("times must be nondecreasing from 0, got {times:?}")));
        }
        if !(gamma > 0.0 && gamma <= 2.0) {
            return Err(Error::arg(format!("gamma must lie in (0, 2], got {gamma}")));
        }
        Ok(CorrelationQuery {
            observables,
            times,
            gamma,
        })
    }

    /// Times `nⱼ = j·gap`.
    pub fn equally_spaced(observables: Vec<Observable>, gap: usize, gamma: f64) -> Result<Self> {
        let times = (0..observables.len()).map(|j| j * gap).collect();
        Self::new(observables, times, gamma)
    }

    pub fn kappa(&self) -> usize {
        self.times.len() - 1
    }

    pub fn min_gap(&self) -> usize {
        self.times.windows(2).map(|w| w[1] - w[0]).min().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub kappa: usize,
    pub times: Vec<usize>,
    /// Signed `⟨μ̂, g₀∏(gⱼ∘f^{nⱼ})⟩ − ∏⟨μ̂, gⱼ⟩`.
    pub estimate: f64,
    pub min_gap: usize,
    /// Leave-one-orbit-out jackknife; infinite when the sample has one orbit.
    pub stderr: f64,
    pub sample_size: usize,
    pub orbits: usize,
    pub theoretical_rate: f64,
}

impl CorrelationReport {
    /// Consecutive differences `n_{j+1} − n_j`.
    pub fn gaps(&self) -> Vec<usize> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// `θκ = d^{−(γ/2)^{κ+1}/2}`.
pub fn theoretical_rate(kappa: usize, gamma: f64, d: u64) -> Result<f64> {
    if kappa == 0 {
        return Err(Error::arg("kappa must be at least 1"));
    }
    if !(gamma > 0.0 && gamma <= 2.0) {
        return Err(Error::arg(format!("gamma must lie in (0, 2], got {gamma}")));
    }
    if d < 2 {
        return Err(Error::arg(format!("degree must be at least 2, got {d}")));
    }
    let exponent = (gamma / 2.0).powi(kappa as i32 + 1) / 2.0;
    Ok((d as f64).powf(-exponent))
}

/// Values of each observable on the sample, `[observable][orbit][point]`.
#[derive(Debug, Clone)]
pub struct SampleValues {
    values: Vec<Vec<Vec<f64>>>,
}

impl SampleValues {
    pub fn new(s: &MeasureSample, observables: &[Observable]) -> Self {
        SampleValues {
            values: observables.iter().map(|g| s.values(g)).collect(),
        }
    }
}

/// Per-orbit partial sums of deviations from a common pivot.
struct OrbitSums {
    pivot: f64,
    sums: Vec<f64>,
    counts: Vec<usize>,
}

impl OrbitSums {
    fn new(per_orbit: Vec<Vec<f64>>) -> Self {
        let pivot = per_orbit.iter().find_map(|o| o.first().copied()).unwrap_or(0.0);
        let counts = per_orbit.iter().map(Vec::len).collect();
        let sums = per_orbit
            .iter()
            .map(|o| o.iter().map(|v| v - pivot).collect::<NeumaierSum>().value())
            .collect();
        OrbitSums { pivot, sums, counts }
    }

    /// Mean over all orbits except `skip`.
    fn mean(&self, skip: Option<usize>) -> f64 {
        let mut acc = NeumaierSum::new();
        let mut n = 0;
        for (o, (&s, &c)) in self.sums.iter().zip(&self.counts).enumerate() {
            if Some(o) != skip {
                acc.add(s);
                n += c;
            }
        }
        self.pivot + acc.value() / n as f64
    }
}

fn estimate(joint: &OrbitSums, marginals: &[OrbitSums], skip: Option<usize>) -> f64 {
    let prod = marginals.iter().fold(1.0, |p, m| p * m.mean(skip));
    joint.mean(skip) - prod
}

/// Jackknife standard error from leave-one-out estimates.
pub(crate) fn jackknife_stderr(loo: &[f64]) -> f64 {
    let k = loo.len();
    if k < 2 {
        return f64::INFINITY;
    }
    let mean = loo.iter().sum::<f64>() / k as f64;
    let ss: f64 = loo.iter().map(|e| (e - mean).powi(2)).sum();
    ((k as f64 - 1.0) / k as f64 * ss).sqrt()
}

pub fn multi_correlation(s: &MeasureSample, f: &HenonMap, q: &CorrelationQuery) -> Result<CorrelationReport> {
    let vals = SampleValues::new(s, &q.observables);
    multi_correlation_with(s, f, q, &vals)
}

/// [`multi_correlation`] with observable values precomputed by [`SampleValues::new`]
/// for `q.observables`.
pub fn multi_correlation_with(
    s: &MeasureSample,
    f: &HenonMap,
    q: &CorrelationQuery,
    vals: &SampleValues,
) -> Result<CorrelationReport> {
    s.check_map(f)?;
    let max_time = *q.times.last().expect("validated nonempty");
    if max_time > MAX_TIME_PERIODS * s.period {
        return Err(Error::arg(format!(
            "largest time {max_time} exceeds {MAX_TIME_PERIODS}× the sample period {}",
            s.period
        )));
    }
    if vals.values.len() != q.observables.len() {
        return Err(Error::arg("precomputed values do not match the query"));
    }
    let joint: Vec<Vec<f64>> = (0..s.orbits.len())
        .into_par_iter()
        .map(|o| {
            let len = s.orbits[o].points.len();
            (0..len)
                .map(|i| {
                    vals.values
                        .iter()
                        .zip(&q.times)
                        .fold(1.0, |acc, (g, &n)| acc * g[o][(i + n) % len])
                })
                .collect()
        })
        .collect();
    let joint = OrbitSums::new(joint);
    let marginals: Vec<OrbitSums> = vals.values.iter().map(|g| OrbitSums::new(g.clone())).collect();
    let est = estimate(&joint, &marginals, None);
    let loo: Vec<f64> = if s.orbits.len() > 1 {
        (0..s.orbits.len())
            .map(|o| estimate(&joint, &marginals, Some(o)))
            .collect()
    } else {
        Vec::new()
    };
    let kappa = q.kappa();
    let theoretical = if kappa == 0 {
        f64::NAN
    } else {
        theoretical_rate(kappa, q.gamma, f.degree())?
    };
    Ok(CorrelationReport {
        kappa,
        times: q.times.clone(),
        estimate: est,
        min_gap: q.min_gap(),
        stderr: jackknife_stderr(&loo),
        sample_size: s.point_count(),
        orbits: s.orbits.len(),
        theoretical_rate: theoretical,
    })
}

/// `|C(q) − C(q')|` where `q'` replaces `nⱼ` by `nⱼ − 1` (j ≥ 1) and `g₀` by
/// `g₀∘f⁻¹`, the latter evaluated by iterating the inverse map.
pub fn shift_consistency(s: &MeasureSample, f: &HenonMap, q: &CorrelationQuery) -> Result<f64> {
    if q.times.iter().skip(1).any(|&n| n == 0) {
        return Err(Error::arg("shift needs every nⱼ ≥ 1 for j ≥ 1"));
    }
    let mut observables = q.observables.clone();
    observables[0] = observables[0].pullback(f, -1);
    let mut times = q.times.clone();
    times.iter_mut().skip(1).for_each(|n| *n -= 1);
    let shifted = CorrelationQuery {
        observables,
        times,
        gamma: q.gamma,
    };
    let a = multi_correlation(s, f, q)?;
    let b = multi_correlation(s, f, &shifted)?;
    Ok((a.estimate - b.estimate).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Fitted,
    /// One gap above the noise floor; slope undefined.
    SinglePoint,
    AllBelowNoiseFloor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub kappa: usize,
    pub gaps: Vec<usize>,
    pub estimates: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// `ln|estimate|` for every gap.
    pub log_abs_correlations: Vec<f64>,
    /// Gaps with `|estimate| > 3·stderr`, the ones used in the fit.
    pub fitted_gaps: Vec<usize>,
    pub slope: f64,
    pub intercept: f64,
    /// Largest `|estimate|` among excluded gaps (0 when none is excluded).
    pub noise_floor: f64,
    pub theoretical_rate: f64,
    pub status: FitStatus,
}

pub const NOISE_SIGMAS: f64 = 3.0;

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Correlations with times `nⱼ = j·gap` for each gap, and a log-linear fit
/// over the gaps whose estimate clears the noise floor.
pub fn decay_curve(
    s: &MeasureSample,
    f: &HenonMap,
    observables: &[Observable],
    gaps: &[usize],
    gamma: f64,
) -> Result<(DecayFit, Vec<CorrelationReport>)> {
    if gaps.is_empty() || gaps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::arg(format!("gaps must be nonempty and ascending, got {gaps:?}")));
    }
    let kappa = observables.len().saturating_sub(1);
    if kappa == 0 {
        return Err(Error::arg("kappa must be at least 1"));
    }
    let vals = SampleValues::new(s, observables);
    let reports = gaps
        .iter()
        .map(|&gap| {
            let q = CorrelationQuery::equally_spaced(observables.to_vec(), gap, gamma)?;
            multi_correlation_with(s, f, &q, &vals)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut noise_floor = 0.0_f64;
    for (r, &gap) in reports.iter().zip(gaps) {
        if r.estimate.abs() > NOISE_SIGMAS * r.stderr {
            xs.push(gap as f64);
            ys.push(r.estimate.abs().ln());
        } else {
            noise_floor = noise_floor.max(r.estimate.abs());
        }
    }
    let (status, slope, intercept) = match xs.len() {
        0 => (FitStatus::AllBelowNoiseFloor, f64::NAN, f64::NAN),
        1 => (FitStatus::SinglePoint, f64::NAN, ys[0]),
        _ => {
            let (m, b) = least_squares(&xs, &ys);
            (FitStatus::Fitted, m, b)
        }
    };
    let fit = DecayFit {
        kappa,
        gaps: gaps.to_vec(),
        estimates: reports.iter().map(|r| r.estimate).collect(),
        stderrs: reports.iter().map(|r| r.stderr).collect(),
        log_abs_correlations: reports.iter().map(|r| r.estimate.abs().ln()).collect(),
        fitted_gaps: xs.iter().map(|&x| x as usize).collect(),
        slope,
        intercept,
        noise_floor,
        theoretical_rate: theoretical_rate(kappa, gamma, f.degree())?,
        status,
    };
    Ok((fit, reports))
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

/// CSV with columns `kappa, gaps, n_times, estimate, stderr, sample_size, theoretical_rate`.
pub fn write_reports_csv<W: Write>(reports: &[CorrelationReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "kappa",
        "gaps",
        "n_times",
        "estimate",
        "stderr",
        "sample_size",
        "theoretical_rate",
    ])?;
    for r in reports {
        w.write_record([
            r.kappa.to_string(),
            join(&r.gaps()),
            join(&r.times),
            format!("{:?}", r.estimate),
            format!("{:?}", r.stderr),
            r.sample_size.to_string(),
            format!("{:?}", r.theoretical_rate),
        ])?;
    }
    w.flush()?;
    Ok(())
}
