//! Birkhoff sums, asymptotic-variance estimators and a normality test for
//! normalized sums over a periodic-orbit sample.

use crate::error::{Error, Result};
use crate::henon::{ComplexPoint, HenonMap};
use crate::observables::Observable;
use crate::sampler::MeasureSample;
use crate::sum::{compensated_sum, pivoted_mean, NeumaierSum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::io::Write;

/// Variance estimates at or below this value use the degenerate branch.
pub const DEGENERATE_SIGMA2: f64 = 1e-8;

/// `u(x) + u(f(x)) + … + u(f^{n−1}(x))`, iterating the map.
pub fn birkhoff_sum(f: &HenonMap, u: &Observable, n: usize, x: ComplexPoint) -> Result<f64> {
    if n == 0 {
        return Err(Error::arg("window must be at least 1"));
    }
    let mut acc = NeumaierSum::new();
    let mut y = x;
    for k in 0..n {
        acc.add(u.eval(y));
        if k + 1 < n {
            y = f.apply(y).map_err(|_| Error::Escape { index: k + 1 })?;
        }
    }
    Ok(acc.value())
}

/// `u` on the sample, optionally centered by its sample mean.
#[derive(Debug, Clone)]
struct Centered {
    values: Vec<Vec<f64>>,
}

impl Centered {
    fn new(s: &MeasureSample, u: &Observable, center: bool) -> Self {
        let mut values = s.values(u);
        if center {
            let flat: Vec<f64> = values.iter().flatten().copied().collect();
            let mean = pivoted_mean(&flat);
            values.iter_mut().flatten().for_each(|v| *v -= mean);
        }
        Centered { values }
    }

    /// Window sums `S_n` from every start point, by index arithmetic.
    fn window_sums(&self, n: usize) -> Vec<Vec<f64>> {
        self.values
            .par_iter()
            .map(|orbit| {
                let q = orbit.len();
                (0..q)
                    .map(|i| compensated_sum((0..n).map(|k| orbit[(i + k) % q])))
                    .collect()
            })
            .collect()
    }

    /// `⟨μ̂, ũ(ũ∘fⁿ)⟩`.
    fn autocovariance(&self, n: usize) -> f64 {
        let total: usize = self.values.iter().map(Vec::len).sum();
        let sum: NeumaierSum = self
            .values
            .iter()
            .flat_map(|orbit| {
                let q = orbit.len();
                (0..q).map(move |i| orbit[i] * orbit[(i + n) % q])
            })
            .collect();
        sum.value() / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffSeries {
    pub observable: String,
    pub window: usize,
    /// `S_n` from each sample point, in sample order.
    pub values: Vec<f64>,
    pub centered: bool,
}

pub fn birkhoff_series(s: &MeasureSample, u: &Observable, n: usize, centered: bool) -> Result<BirkhoffSeries> {
    if n == 0 {
        return Err(Error::arg("window must be at least 1"));
    }
    let c = Centered::new(s, u, centered);
    Ok(BirkhoffSeries {
        observable: u.label().to_string(),
        window: n,
        values: c.window_sums(n).into_iter().flatten().collect(),
        centered,
    })
}

/// `⟨μ̂, ũ(ũ∘fⁿ)⟩` with `ũ = u − ⟨μ̂, u⟩`.
pub fn autocovariance(s: &MeasureSample, f: &HenonMap, u: &Observable, n: usize) -> Result<f64> {
    s.check_map(f)?;
    Ok(Centered::new(s, u, true).autocovariance(n))
}

/// `⟨μ̂, ũ²⟩ + 2 Σ_{n=1..N} (1 − n/(N+1)) ⟨μ̂, ũ(ũ∘fⁿ)⟩`.
///
/// The circular autocovariances of a sample are a positive-definite sequence
/// and the triangular weights have a nonnegative transform, so the value is
/// nonnegative up to rounding, which is clamped.
pub fn sigma2_green_kubo(s: &MeasureSample, f: &HenonMap, u: &Observable, truncation: usize) -> Result<f64> {
    s.check_map(f)?;
    let c = Centered::new(s, u, true);
    let mut acc = NeumaierSum::new();
    acc.add(c.autocovariance(0));
    for n in 1..=truncation {
        let w = 1.0 - n as f64 / (truncation as f64 + 1.0);
        acc.add(2.0 * w * c.autocovariance(n));
    }
    Ok(acc.value().max(0.0))
}

/// `(1/n) ⟨μ̂, S_n(ũ)²⟩`.
pub fn sigma2_batch(s: &MeasureSample, f: &HenonMap, u: &Observable, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::arg("window must be at least 1"));
    }
    s.check_map(f)?;
    let sums = Centered::new(s, u, true).window_sums(n);
    let total = s.point_count() as f64;
    let sq: NeumaierSum = sums.iter().flatten().map(|v| v * v).collect();
    Ok(sq.value() / total / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub sigma2_green_kubo: f64,
    pub sigma2_batch: f64,
    /// Batch estimate over one full sample period; every orbit sum of a
    /// coboundary telescopes, so this decides degeneracy.
    pub sigma2_period: f64,
    pub truncation: usize,
    pub window: usize,
    /// Distinct orbits contributing start points (windows overlap within an orbit).
    pub segments: usize,
    pub start_points: usize,
    pub degenerate: bool,
    /// Kolmogorov distance to `𝒩(0, σ̂²_batch)`, or to the point mass at 0 in
    /// the degenerate branch.
    pub ks_distance: f64,
    pub max_abs_normalized: f64,
}

/// Normalized sums `S_n(ũ)(xᵢ)/√n` and the report comparing them with
/// `𝒩(0, σ̂²_batch)`.
pub fn clt_test(
    s: &MeasureSample,
    f: &HenonMap,
    u: &Observable,
    n: usize,
    truncation: usize,
) -> Result<(CltReport, Vec<f64>)> {
    if s.period < 2 {
        return Err(Error::arg(format!(
            "sample period must be at least 2, got {}",
            s.period
        )));
    }
    if n < 8 {
        return Err(Error::arg(format!("window must be at least 8, got {n}")));
    }
    s.check_map(f)?;
    let c = Centered::new(s, u, true);
    let root = (n as f64).sqrt();
    let normalized: Vec<f64> = c.window_sums(n).into_iter().flatten().map(|v| v / root).collect();
    let sigma2_batch = compensated_sum(normalized.iter().map(|v| v * v)) / normalized.len() as f64;
    let sigma2_period = sigma2_batch_of(&c, s.period, s.point_count());
    let degenerate = sigma2_period <= DEGENERATE_SIGMA2;
    let mut sorted = normalized.clone();
    sorted.sort_by(f64::total_cmp);
    let ks_distance = if degenerate || sigma2_batch <= 0.0 {
        ks_against(&sorted, |x| if x >= 0.0 { 1.0 } else { 0.0 })
    } else {
        let normal = Normal::new(0.0, sigma2_batch.sqrt()).map_err(|e| Error::arg(e.to_string()))?;
        ks_against(&sorted, |x| normal.cdf(x))
    };
    let report = CltReport {
        sigma2_green_kubo: sigma2_green_kubo(s, f, u, truncation)?,
        sigma2_batch,
        sigma2_period,
        truncation,
        window: n,
        segments: s.orbits.len(),
        start_points: normalized.len(),
        degenerate,
        ks_distance,
        max_abs_normalized: normalized.iter().fold(0.0, |m, v| m.max(v.abs())),
    };
    Ok((report, normalized))
}

fn sigma2_batch_of(c: &Centered, n: usize, total: usize) -> f64 {
    let sq: NeumaierSum = c.window_sums(n).iter().flatten().map(|v| v * v).collect();
    sq.value() / total as f64 / n as f64
}

/// `sup_x |F_emp(x) − F(x)|` for sorted data and a nondecreasing `F`.
pub fn ks_against(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d = 0.0_f64;
    let mut i = 0;
    while i < sorted.len() {
        // ties: the empirical CDF jumps once across the whole run
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let fx = cdf(x);
        let left = cdf_left(&cdf, x);
        d = d.max((left - i as f64 / n).abs()).max((j as f64 / n - fx).abs());
        i = j;
    }
    d
}

/// `F(x⁻)`; differs from `F(x)` only at jumps of step functions.
fn cdf_left(cdf: &impl Fn(f64) -> f64, x: f64) -> f64 {
    let below = if x == 0.0 {
        -f64::MIN_POSITIVE
    } else {
        x - x.abs() * f64::EPSILON
    };
    cdf(below).min(cdf(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
    /// `𝒩(0, σ²)` density at the bin midpoint, scaled to expected counts.
    pub gaussian_count: f64,
}

pub fn histogram(values: &[f64], sigma2: f64, bins: usize) -> Vec<HistogramBin> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = values.len() as f64;
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| {
            let left = lo + width * k as f64;
            let mid = left + width / 2.0;
            let density = if sigma2 > 0.0 {
                (-mid * mid / (2.0 * sigma2)).exp() / (2.0 * std::f64::consts::PI * sigma2).sqrt()
            } else {
                0.0
            };
            HistogramBin {
                left,
                right: left + width,
                count,
                gaussian_count: density * width * n,
            }
        })
        .collect()
}

pub fn write_histogram_csv<W: Write>(bins: &[HistogramBin], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_left", "bin_right", "count", "gaussian_count"])?;
    for b in bins {
        w.write_record([
            format!("{:?}", b.left),
            format!("{:?}", b.right),
            b.count.to_string(),
            format!("{:?}", b.gaussian_count),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{constant, make_bump};
    use crate::sampler::sample_mu;
    use proptest::prelude::*;

    fn horseshoe() -> HenonMap {
        HenonMap::quadratic(-6.0, 0.1).unwrap()
    }

    fn bump() -> Observable {
        make_bump(ComplexPoint::real(2.4, 2.4), 1.5, 1.0).unwrap()
    }

    #[test]
    fn birkhoff_basics() {
        let f = horseshoe();
        let s = sample_mu(&f, 6, 1500, 1).unwrap();
        let g = HenonMap::quadratic(0.0, 0.5).unwrap();
        assert_eq!(
            birkhoff_sum(&g, &constant(1.0), 17, ComplexPoint::ORIGIN).unwrap(),
            17.0
        );
        let u = bump();
        let orbit = s.orbits.iter().find(|o| o.period == 3).unwrap();
        let x = orbit.points[0];
        let one = birkhoff_sum(&f, &u, 3, x).unwrap();
        // float orbits leave a saddle after roughly ten steps, so stay short
        let two = birkhoff_sum(&f, &u, 6, x).unwrap();
        assert!((two - 2.0 * one).abs() <= 1e-9);
        assert!(birkhoff_sum(&f, &u, 0, x).is_err());
        assert!(matches!(
            birkhoff_sum(&f, &u, 200, ComplexPoint::real(1e6, 0.0)),
            Err(Error::Escape { .. })
        ));
    }

    #[test]
    fn coboundary_telescopes() {
        let f = horseshoe();
        let v = bump();
        let u = Observable::coboundary(&v, &f);
        let x = ComplexPoint::real(1.1, -0.4);
        for n in [1, 2, 3] {
            let y = f.apply_n(x, n as i64).unwrap();
            let sn = birkhoff_sum(&f, &u, n, x).unwrap();
            assert!((sn - (v.eval(x) - v.eval(y))).abs() <= 1e-12);
            assert!(sn.abs() <= 2.0);
        }
    }

    #[test]
    fn centering() {
        let f = horseshoe();
        let s = sample_mu(&f, 8, 3000, 1).unwrap();
        let series = birkhoff_series(&s, &bump(), 1, true).unwrap();
        assert!(series.values.iter().sum::<f64>().abs() / (series.values.len() as f64) <= 1e-10);
    }

    #[test]
    fn constants_vanish() {
        let f = horseshoe();
        let s = sample_mu(&f, 8, 3000, 1).unwrap();
        let c = constant(0.37);
        assert!(sigma2_green_kubo(&s, &f, &c, 20).unwrap() <= 1e-10);
        assert!(sigma2_batch(&s, &f, &c, 40).unwrap() <= 1e-10);
        let (r, sums) = clt_test(&s, &f, &c, 16, 8).unwrap();
        assert!(r.degenerate);
        assert!(sums.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batch_window_one_is_variance() {
        let f = horseshoe();
        let s = sample_mu(&f, 8, 3000, 1).unwrap();
        let u = bump();
        let vals: Vec<f64> = s.values(&u).into_iter().flatten().collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!((sigma2_batch(&s, &f, &u, 1).unwrap() - var).abs() <= 1e-12);
        assert!((sigma2_green_kubo(&s, &f, &u, 0).unwrap() - var).abs() <= 1e-12);
    }

    #[test]
    fn green_kubo_shift_invariant() {
        let f = horseshoe();
        let s = sample_mu(&f, 8, 3000, 1).unwrap();
        let u = bump();
        let a = sigma2_green_kubo(&s, &f, &u, 12).unwrap();
        let b = sigma2_green_kubo(&s, &f, &u.add_constant(5.0), 12).unwrap();
        assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }

    #[test]
    fn autocovariance_time_symmetry() {
        let f = horseshoe();
        let s = sample_mu(&f, 8, 3000, 1).unwrap();
        let u = bump();
        let c = Centered::new(&s, &u, true);
        for n in 1..6 {
            // ⟨ũ(ũ∘fⁿ)⟩ = ⟨(ũ∘f^{−n})ũ⟩: reindex the sum by i ↦ i − n
            let back: f64 = c
                .values
                .iter()
                .flat_map(|o| {
                    let q = o.len();
                    (0..q).map(move |i| o[(i + q * n - n) % q] * o[i])
                })
                .sum::<f64>()
                / s.point_count() as f64;
            assert!((c.autocovariance(n) - back).abs() <= 1e-15);
        }
    }

    #[test]
    fn stationarity_on_sample() {
        let f = horseshoe();
        let s = sample_mu(&f, 8, 3000, 1).unwrap();
        let c = Centered::new(&s, &bump(), true);
        let sums = c.window_sums(13);
        let mut a: Vec<f64> = sums.iter().flatten().copied().collect();
        let mut b: Vec<f64> = sums
            .iter()
            .flat_map(|o| (0..o.len()).map(move |i| o[(i + 1) % o.len()]))
            .collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
    }

    #[test]
    fn coboundary_is_degenerate() {
        let f = horseshoe();
        let s = sample_mu(&f, 8, 3000, 1).unwrap();
        let v = bump();
        let u = Observable::coboundary(&v, &f);
        let n = 64;
        let (r, _) = clt_test(&s, &f, &u, n, 30).unwrap();
        assert!(r.degenerate, "{r:?}");
        assert!(r.max_abs_normalized <= 2.0 / (n as f64).sqrt() + 1e-12);
        assert!(r.sigma2_green_kubo <= 0.01);
    }

    #[test]
    fn argument_checks() {
        let f = horseshoe();
        let s = sample_mu(&f, 4, 300, 1).unwrap();
        assert!(clt_test(&s, &f, &bump(), 7, 4).is_err());
        assert!(sigma2_batch(&s, &f, &bump(), 0).is_err());
        let s1 = sample_mu(&f, 1, 50, 1).unwrap();
        assert!(clt_test(&s1, &f, &bump(), 8, 4).is_err());
    }

    #[test]
    fn ks_known_values() {
        let uniform = |x: f64| x.clamp(0.0, 1.0);
        assert!((ks_against(&[0.5], uniform) - 0.5).abs() < 1e-15);
        let grid: Vec<f64> = (1..=4).map(|k| k as f64 / 4.0).collect();
        assert!((ks_against(&grid, uniform) - 0.25).abs() < 1e-15);
        let step = |x: f64| if x >= 0.0 { 1.0 } else { 0.0 };
        assert_eq!(ks_against(&[0.0, 0.0, 0.0], step), 0.0);
        assert!((ks_against(&[-1.0, 0.0, 1.0], step) - 1.0 / 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn ks_in_unit_interval(mut xs in proptest::collection::vec(-5.0f64..5.0, 1..200)) {
            xs.sort_by(f64::total_cmp);
            let normal = Normal::new(0.0, 1.0).unwrap();
            let d = ks_against(&xs, |x| normal.cdf(x));
            prop_assert!((0.0..=1.0).contains(&d));
            // at least half a jump away from any continuous CDF
            prop_assert!(d >= 0.5 / xs.len() as f64 - 1e-12);
        }

        #[test]
        fn histogram_conserves_counts(xs in proptest::collection::vec(-5.0f64..5.0, 1..300), bins in 1usize..40) {
            let h = histogram(&xs, 1.0, bins);
            prop_assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), xs.len());
        }
    }
}
