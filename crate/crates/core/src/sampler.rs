//! Saddle periodic orbits and the uniform measures they carry.
//!
//! Periodic points of `f` with period dividing `n` are found by multiple
//! shooting: the orbit of `(z₀, w₀)` under the `N = n·m` factor steps is
//! determined by the scalar sequence `u_j` (the `z` coordinate after `j`
//! factor steps, with `w_j = u_{j−1}`), and periodicity becomes the cyclic
//! system `p_j(u_j) − a_j·u_{j−1} − u_{j+1} = 0`. Its Jacobian is cyclic
//! tridiagonal and stays well conditioned for saddles, unlike the Jacobian of
//! `fⁿ(x) − x`.

use crate::error::{Error, Result};
use crate::green::escape_radius;
use crate::henon::{ComplexPoint, HenonMap};
use crate::linalg::{eigen_from_trace_det, Mat2};
use crate::observables::Observable;
use crate::sum::{compensated_sum, NeumaierSum};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{Read, Write};

pub const MAX_NEWTON_ITERATIONS: usize = 200;
pub const MAX_HALVINGS: usize = 30;
/// Default Newton tolerance on the shooting residual.
pub const DEFAULT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbit {
    /// Minimal period.
    pub period: usize,
    /// `points[i+1] = f(points[i])`, starting from the lexicographically smallest point.
    pub points: Vec<ComplexPoint>,
    /// Eigenvalues of `Df^period` along the orbit, `|λ₁| ≥ |λ₂|`.
    pub multipliers: [C64; 2],
    /// `max ‖f(xᵢ) − xᵢ₊₁‖∞` over the orbit.
    pub residual: f64,
    /// The orbit is a non-simple fixed point of `fⁿ` (a multiplier power equals 1).
    pub multiple: bool,
}

impl PeriodicOrbit {
    pub fn is_saddle(&self) -> bool {
        self.multipliers[0].norm() > 1.0 && self.multipliers[1].norm() < 1.0
    }

    /// Builds the orbit through `x` of minimal period `period`, recomputing
    /// multipliers and residual.
    pub fn from_points(f: &HenonMap, points: Vec<ComplexPoint>, multiple_for: usize) -> Self {
        let q = points.len();
        let mut jac = Mat2::identity();
        let mut det = C64::new(1.0, 0.0);
        let mut residual = 0.0_f64;
        for (i, &p) in points.iter().enumerate() {
            let j = f.jacobian(p);
            det *= j.det();
            jac = j * jac;
            let next = points[(i + 1) % q];
            residual = residual.max((f.step(p) - next).norm_inf());
        }
        let multipliers = eigen_from_trace_det(jac.trace(), det);
        let power = (multiple_for / q).max(1) as u32;
        let multiple = multipliers
            .iter()
            .any(|m| (m.powu(power) - C64::new(1.0, 0.0)).norm() < 1e-6);
        PeriodicOrbit {
            period: q,
            points,
            multipliers,
            residual,
            multiple,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub seeds: usize,
    pub converged: usize,
    pub diverged: usize,
    pub iteration_cap: usize,
    /// Converged seeds that landed on an already-found orbit.
    pub duplicates: usize,
}

#[derive(Debug, Clone)]
pub struct PeriodicSearch {
    pub orbits: Vec<PeriodicOrbit>,
    pub stats: SearchStats,
}

enum Outcome {
    Converged(Vec<C64>),
    Diverged,
    Capped,
}

struct Shooting<'a> {
    f: &'a HenonMap,
    n: usize,
}

impl Shooting<'_> {
    fn len(&self) -> usize {
        self.n * self.f.factors().len()
    }

    fn factor(&self, j: usize) -> &crate::henon::ElementaryFactor {
        let fs = self.f.factors();
        &fs[j % fs.len()]
    }

    fn residual(&self, u: &[C64]) -> Vec<C64> {
        let len = u.len();
        (0..len)
            .map(|j| {
                let fac = self.factor(j);
                fac.p(u[j]) - fac.a() * u[(j + len - 1) % len] - u[(j + 1) % len]
            })
            .collect()
    }

    fn jacobian(&self, u: &[C64]) -> DMatrix<C64> {
        let len = u.len();
        let mut m = DMatrix::zeros(len, len);
        for j in 0..len {
            let fac = self.factor(j);
            let (_, dp, _) = fac.p_jet(u[j]);
            m[(j, j)] += dp;
            m[(j, (j + len - 1) % len)] += -fac.a();
            m[(j, (j + 1) % len)] += C64::new(-1.0, 0.0);
        }
        m
    }

    fn solve(&self, mut u: Vec<C64>, tol: f64, bound: f64) -> Outcome {
        let sup = |v: &[C64]| v.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
        let mut r = self.residual(&u);
        let mut rn = sup(&r);
        for _ in 0..MAX_NEWTON_ITERATIONS {
            if rn <= tol {
                // one polishing step at full length
                if let Some(step) = self.newton_step(&u, &r) {
                    let cand: Vec<C64> = u.iter().zip(step.iter()).map(|(a, d)| a + d).collect();
                    if sup(&self.residual(&cand)) <= rn {
                        u = cand;
                    }
                }
                return Outcome::Converged(u);
            }
            let Some(step) = self.newton_step(&u, &r) else {
                return Outcome::Diverged;
            };
            let mut t = 1.0;
            let mut cand: Vec<C64>;
            let mut cr;
            let mut halvings = 0;
            loop {
                cand = u.iter().zip(step.iter()).map(|(a, d)| a + d * t).collect();
                cr = self.residual(&cand);
                let crn = sup(&cr);
                if crn.is_finite() && crn < rn || halvings == MAX_HALVINGS {
                    break;
                }
                t *= 0.5;
                halvings += 1;
            }
            u = cand;
            r = cr;
            rn = sup(&r);
            if !rn.is_finite() || sup(&u) > bound {
                return Outcome::Diverged;
            }
        }
        Outcome::Capped
    }

    fn newton_step(&self, u: &[C64], r: &[C64]) -> Option<Vec<C64>> {
        let jac = self.jacobian(u);
        let rhs = DVector::from_iterator(r.len(), r.iter().map(|c| -c));
        let sol = jac.lu().solve(&rhs)?;
        sol.iter().all(|c| c.is_finite()).then(|| sol.iter().copied().collect())
    }

    /// Orbit points `x_k = (u_{km}, u_{km−1})`.
    fn points(&self, u: &[C64]) -> Vec<ComplexPoint> {
        let m = self.f.factors().len();
        let len = u.len();
        (0..self.n)
            .map(|k| ComplexPoint::new(u[k * m], u[(k * m + len - 1) % len]))
            .collect()
    }
}

fn minimal_period(points: &[ComplexPoint], tol: f64) -> usize {
    let n = points.len();
    (1..=n)
        .filter(|q| n.is_multiple_of(*q))
        .find(|&q| (0..n).all(|i| points[i].dist(&points[(i + q) % n]) <= tol))
        .unwrap_or(n)
}

fn canonical_rotation(points: &[ComplexPoint]) -> Vec<ComplexPoint> {
    let start = (0..points.len())
        .min_by(|&a, &b| points[a].lex_cmp(&points[b]))
        .unwrap_or(0);
    points[start..].iter().chain(&points[..start]).copied().collect()
}

fn random_in_disk(rng: &mut ChaCha8Rng, radius: f64) -> C64 {
    let r = radius * rng.random::<f64>().sqrt();
    C64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Orbits of `f` whose minimal period divides `n`, by damped Newton from
/// `seeds` random starts in `‖x‖∞ ≤ box`.
pub fn find_periodic(
    f: &HenonMap,
    n: usize,
    seeds: usize,
    box_radius: f64,
    tol: f64,
    rng_seed: u64,
) -> Result<PeriodicSearch> {
    if n == 0 || seeds == 0 {
        return Err(Error::arg("period and seed count must be at least 1"));
    }
    if !(tol > 0.0) || !(box_radius > 0.0) {
        return Err(Error::arg("tol and box must be positive"));
    }
    let shoot = Shooting { f, n };
    let bound = 4.0 * escape_radius(f).max(box_radius);
    let dedup_tol = 10.0 * tol;
    let outcomes: Vec<Outcome> = (0..seeds)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(i as u64);
            let u0: Vec<C64> = (0..shoot.len()).map(|_| random_in_disk(&mut rng, box_radius)).collect();
            shoot.solve(u0, tol, bound)
        })
        .collect();

    let mut stats = SearchStats {
        seeds,
        ..Default::default()
    };
    let mut candidates = Vec::new();
    for out in outcomes {
        match out {
            Outcome::Converged(u) => {
                stats.converged += 1;
                let pts = shoot.points(&u);
                let q = minimal_period(&pts, dedup_tol);
                candidates.push(canonical_rotation(&pts[..q]));
            }
            Outcome::Diverged => stats.diverged += 1,
            Outcome::Capped => stats.iteration_cap += 1,
        }
    }
    candidates.sort_by(|a, b| a[0].lex_cmp(&b[0]).then(a.len().cmp(&b.len())));

    // Deduplicate by looking up the candidate's first point among all points of
    // kept orbits, bucketed on a grid much coarser than the tolerance.
    let cell = (1e3 * dedup_tol).max(1e-6);
    let key = |p: &ComplexPoint| ((p.z.re / cell).floor() as i64, (p.w.re / cell).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<ComplexPoint>> = HashMap::new();
    let mut orbits = Vec::new();
    for cand in candidates {
        let p0 = cand[0];
        let (kx, ky) = key(&p0);
        let seen = (-1..=1).any(|dx| {
            (-1..=1).any(|dy| {
                buckets
                    .get(&(kx + dx, ky + dy))
                    .is_some_and(|v| v.iter().any(|q| q.dist(&p0) <= dedup_tol))
            })
        });
        if seen {
            stats.duplicates += 1;
            continue;
        }
        for p in &cand {
            buckets.entry(key(p)).or_default().push(*p);
        }
        orbits.push(PeriodicOrbit::from_points(f, cand, n));
    }
    Ok(PeriodicSearch { orbits, stats })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub budget: usize,
    /// Seeds are drawn with `|z|, |w| ≤ box`; defaults to the escape radius.
    pub box_radius: Option<f64>,
    pub tol: f64,
    pub rng_seed: u64,
}

impl SamplerConfig {
    pub fn new(budget: usize, rng_seed: u64) -> Self {
        SamplerConfig {
            budget,
            box_radius: None,
            tol: DEFAULT_TOL,
            rng_seed,
        }
    }
}

/// Uniform measure on the saddle orbits whose minimal period divides `period`.
#[derive(Debug, Clone)]
pub struct MeasureSample {
    pub period: usize,
    pub orbits: Vec<PeriodicOrbit>,
    pub map_fingerprint: String,
    pub config: SamplerConfig,
    pub stats: SearchStats,
    /// Converged non-saddle orbits left out of the sample.
    pub excluded_non_saddles: usize,
}

pub fn sample_mu(f: &HenonMap, n: usize, budget: usize, rng_seed: u64) -> Result<MeasureSample> {
    sample_mu_with(f, n, SamplerConfig::new(budget, rng_seed))
}

pub fn sample_mu_with(f: &HenonMap, n: usize, config: SamplerConfig) -> Result<MeasureSample> {
    let box_radius = config.box_radius.unwrap_or_else(|| escape_radius(f));
    let search = find_periodic(f, n, config.budget, box_radius, config.tol, config.rng_seed)?;
    let total = search.orbits.len();
    let orbits: Vec<PeriodicOrbit> = search.orbits.into_iter().filter(|o| o.is_saddle()).collect();
    if orbits.is_empty() {
        return Err(Error::NoSaddles {
            period: n,
            seeds: config.budget,
        });
    }
    Ok(MeasureSample {
        period: n,
        excluded_non_saddles: total - orbits.len(),
        orbits,
        map_fingerprint: f.fingerprint(),
        config,
        stats: search.stats,
    })
}

impl MeasureSample {
    pub fn point_count(&self) -> usize {
        self.orbits.iter().map(|o| o.points.len()).sum()
    }

    /// Uniform weight of each point.
    pub fn weight(&self) -> f64 {
        1.0 / self.point_count() as f64
    }

    /// `(orbit index, point index, point)` in storage order.
    pub fn points(&self) -> impl Iterator<Item = (usize, usize, ComplexPoint)> + '_ {
        self.orbits
            .iter()
            .enumerate()
            .flat_map(|(o, orb)| orb.points.iter().enumerate().map(move |(i, p)| (o, i, *p)))
    }

    pub fn check_map(&self, f: &HenonMap) -> Result<()> {
        let fp = f.fingerprint();
        if fp != self.map_fingerprint {
            return Err(Error::FingerprintMismatch {
                sample: self.map_fingerprint.clone(),
                map: fp,
            });
        }
        Ok(())
    }

    /// Values of `g` at every point, orbit by orbit.
    pub fn values(&self, g: &Observable) -> Vec<Vec<f64>> {
        self.orbits
            .par_iter()
            .map(|o| o.points.iter().map(|&p| g.eval(p)).collect())
            .collect()
    }

    /// Upper bound on the Hausdorff distance between `f(support)` and the
    /// support, through the bijection `xᵢ ↦ xᵢ₊₁` of each orbit.
    pub fn support_invariance(&self, f: &HenonMap) -> f64 {
        self.orbits
            .iter()
            .flat_map(|o| {
                let q = o.points.len();
                (0..q).map(move |i| f.step(o.points[i]).dist(&o.points[(i + 1) % q]))
            })
            .fold(0.0, f64::max)
    }
}

/// `Σ wᵢ g(xᵢ)` with compensated summation.
pub fn empirical_integral(s: &MeasureSample, g: &Observable) -> f64 {
    let vals = s.values(g);
    let sum: NeumaierSum = vals.iter().flatten().copied().collect();
    sum.value() * s.weight()
}

/// `|⟨μ̂, g₀·(h∘fⁿ)⟩ − ⟨μ̂, (g₀∘f^{−n/2})·(h∘f^{n/2})⟩|`, with every composition
/// evaluated by iterating the map.
pub fn invariance_identity_check(
    s: &MeasureSample,
    f: &HenonMap,
    g0: &Observable,
    h: &Observable,
    n: i64,
) -> Result<f64> {
    if n % 2 != 0 {
        return Err(Error::arg(format!("n must be even, got {n}")));
    }
    if n < 0 || n as usize > s.period {
        return Err(Error::arg(format!("n must lie in 0..={}, got {n}", s.period)));
    }
    s.check_map(f)?;
    if n == 0 {
        return Ok(0.0);
    }
    let lhs_h = h.pullback(f, n);
    let rhs_g = g0.pullback(f, -n / 2);
    let rhs_h = h.pullback(f, n / 2);
    let pts: Vec<ComplexPoint> = s.points().map(|(_, _, p)| p).collect();
    let lhs = compensated_sum(pts.iter().map(|&p| g0.eval(p) * lhs_h.eval(p)));
    let rhs = compensated_sum(pts.iter().map(|&p| rhs_g.eval(p) * rhs_h.eval(p)));
    Ok((lhs - rhs).abs() * s.weight())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleHeader {
    pub period: usize,
    pub map_fingerprint: String,
    pub map: crate::henon::MapSpec,
    pub rng_seed: u64,
    pub budget: usize,
    pub box_radius: Option<f64>,
    pub tol: f64,
    pub orbits: usize,
    pub points: usize,
    pub stats: SearchStats,
    pub excluded_non_saddles: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    period: usize,
    orbit_index: usize,
    point_index: usize,
    re_z: f64,
    im_z: f64,
    re_w: f64,
    im_w: f64,
    abs_l1: f64,
    abs_l2: f64,
    residual: f64,
}

impl MeasureSample {
    pub fn header(&self, f: &HenonMap) -> SampleHeader {
        SampleHeader {
            period: self.period,
            map_fingerprint: self.map_fingerprint.clone(),
            map: f.spec(),
            rng_seed: self.config.rng_seed,
            budget: self.config.budget,
            box_radius: self.config.box_radius,
            tol: self.config.tol,
            orbits: self.orbits.len(),
            points: self.point_count(),
            stats: self.stats,
            excluded_non_saddles: self.excluded_non_saddles,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (o, orb) in self.orbits.iter().enumerate() {
            for (i, p) in orb.points.iter().enumerate() {
                w.serialize(Row {
                    period: orb.period,
                    orbit_index: o,
                    point_index: i,
                    re_z: p.z.re,
                    im_z: p.z.im,
                    re_w: p.w.re,
                    im_w: p.w.im,
                    abs_l1: orb.multipliers[0].norm(),
                    abs_l2: orb.multipliers[1].norm(),
                    residual: orb.residual,
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reloads a sample written by [`write_csv`](Self::write_csv) and
    /// [`header`](Self::header); multipliers and residuals are recomputed
    /// with `f`, whose fingerprint must match.
    pub fn read<R: Read>(f: &HenonMap, header: &SampleHeader, csv_in: R) -> Result<MeasureSample> {
        let fp = f.fingerprint();
        if fp != header.map_fingerprint {
            return Err(Error::FingerprintMismatch {
                sample: header.map_fingerprint.clone(),
                map: fp,
            });
        }
        let mut rdr = csv::Reader::from_reader(csv_in);
        let mut groups: Vec<(usize, Vec<ComplexPoint>)> = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            if row.orbit_index == groups.len() {
                groups.push((row.period, Vec::new()));
            }
            let last = groups.len();
            let Some((period, pts)) = groups.last_mut() else {
                return Err(Error::MalformedSample(format!(
                    "orbit index {} out of order",
                    row.orbit_index
                )));
            };
            if row.period != *period || row.point_index != pts.len() || row.orbit_index + 1 != last {
                return Err(Error::MalformedSample(format!(
                    "unexpected row orbit {} point {}",
                    row.orbit_index, row.point_index
                )));
            }
            pts.push(ComplexPoint::new(
                C64::new(row.re_z, row.im_z),
                C64::new(row.re_w, row.im_w),
            ));
        }
        let orbits: Vec<PeriodicOrbit> = groups
            .into_iter()
            .map(|(period, pts)| {
                if pts.len() != period || !header.period.is_multiple_of(period) {
                    return Err(Error::MalformedSample(format!(
                        "orbit of period {period} has {} points",
                        pts.len()
                    )));
                }
                Ok(PeriodicOrbit::from_points(f, pts, header.period))
            })
            .collect::<Result<_>>()?;
        if orbits.is_empty() {
            return Err(Error::MalformedSample("no orbits".into()));
        }
        Ok(MeasureSample {
            period: header.period,
            orbits,
            map_fingerprint: header.map_fingerprint.clone(),
            config: SamplerConfig {
                budget: header.budget,
                box_radius: header.box_radius,
                tol: header.tol,
                rng_seed: header.rng_seed,
            },
            stats: header.stats,
            excluded_non_saddles: header.excluded_non_saddles,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::{classify, FiltrationTag};
    use crate::observables::{constant, make_bump};

    fn horseshoe() -> HenonMap {
        HenonMap::quadratic(-6.0, 0.1).unwrap()
    }

    #[test]
    fn fixed_points_of_z_squared() {
        let f = HenonMap::quadratic(0.0, 1.0).unwrap();
        let s = find_periodic(&f, 1, 200, 4.0, 1e-12, 0).unwrap();
        let mut pts: Vec<ComplexPoint> = s.orbits.iter().map(|o| o.points[0]).collect();
        pts.sort_by(|a, b| a.lex_cmp(b));
        assert_eq!(pts.len(), 2);
        assert!(pts[0].dist(&ComplexPoint::ORIGIN) < 1e-12);
        assert!(pts[1].dist(&ComplexPoint::real(2.0, 2.0)) < 1e-12);
    }

    #[test]
    fn two_fixed_points_for_quadratics() {
        // z² + c − a w = w on the diagonal: z² − (1 + a)z + c = 0
        for (c, a) in [(-6.0, 0.1), (0.3, -0.7), (-1.0, 0.5), (2.0, 1.0)] {
            let f = HenonMap::quadratic(c, a).unwrap();
            let s = find_periodic(&f, 1, 300, escape_radius(&f), 1e-12, 3).unwrap();
            assert_eq!(s.orbits.len(), 2, "c={c} a={a}");
            let b = 1.0 + a;
            let disc = C64::new(b * b - 4.0 * c, 0.0).sqrt();
            for root in [(C64::from(b) + disc) / 2.0, (C64::from(b) - disc) / 2.0] {
                let target = ComplexPoint::new(root, root);
                assert!(s.orbits.iter().any(|o| o.points[0].dist(&target) < 1e-10));
            }
        }
    }

    #[test]
    fn horseshoe_period_three() {
        let f = horseshoe();
        let s = find_periodic(&f, 3, 400, escape_radius(&f), DEFAULT_TOL, 1).unwrap();
        let count: usize = s.orbits.iter().map(|o| o.period).sum();
        assert_eq!(count, 8);
        let mut periods: Vec<usize> = s.orbits.iter().map(|o| o.period).collect();
        periods.sort();
        assert_eq!(periods, vec![1, 1, 3, 3]);
        assert!(s.orbits.iter().all(|o| o.is_saddle() && !o.multiple));
    }

    #[test]
    fn orbit_invariants() {
        let f = horseshoe();
        let s = sample_mu(&f, 6, 1500, 2).unwrap();
        assert_eq!(s.point_count(), 64);
        let det = f.jacobian_det();
        for o in &s.orbits {
            assert!(o.residual <= 1e-9);
            let expect = det.powu(o.period as u32);
            let prod = o.multipliers[0] * o.multipliers[1];
            assert!((prod - expect).norm() <= 1e-6 * expect.norm());
            let first = o.points[0];
            assert!(o.points.iter().all(|p| first.lex_cmp(p).is_le()));
        }
        assert!(s.support_invariance(&f) <= 1e-9);
        let w: f64 = (0..s.point_count()).map(|_| s.weight()).sum();
        assert!((w - 1.0).abs() < 1e-12);
        for (_, _, p) in s.points() {
            assert_eq!(classify(&f, p, 3).unwrap().tag, FiltrationTag::K);
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let f = horseshoe();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    let s = sample_mu(&f, 5, 300, 11).unwrap();
                    let mut buf = Vec::new();
                    s.write_csv(&mut buf).unwrap();
                    buf
                })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn integrals() {
        let f = horseshoe();
        let s = sample_mu(&f, 6, 1500, 4).unwrap();
        assert_eq!(empirical_integral(&s, &constant(0.7)), 0.7);
        let g = make_bump(ComplexPoint::real(2.4, 2.4), 1.5, 1.0).unwrap();
        let a = empirical_integral(&s, &g);
        let b = empirical_integral(&s, &g.pullback(&f, 1));
        assert!((a - b).abs() <= 1e-10);
    }

    #[test]
    fn identity_check() {
        let f = horseshoe();
        let s = sample_mu(&f, 8, 3000, 5).unwrap();
        let g0 = make_bump(ComplexPoint::real(2.4, 2.4), 1.5, 1.0).unwrap();
        let h = make_bump(ComplexPoint::real(-2.4, 2.4), 1.5, 1.0).unwrap();
        assert_eq!(invariance_identity_check(&s, &f, &g0, &h, 0).unwrap(), 0.0);
        for n in [2, 4, 6, 8] {
            let dev = invariance_identity_check(&s, &f, &g0, &h, n).unwrap();
            assert!(dev <= 1e-9, "n={n}: {dev}");
        }
        assert!(invariance_identity_check(&s, &f, &constant(1.0), &constant(2.0), 4).unwrap() <= 1e-15);
        assert!(invariance_identity_check(&s, &f, &g0, &h, 3).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let f = horseshoe();
        let s = sample_mu(&f, 4, 300, 6).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let header = s.header(&f);
        let back = MeasureSample::read(&f, &header, buf.as_slice()).unwrap();
        assert_eq!(back.orbits, s.orbits);
        let g = HenonMap::quadratic(-6.0, 0.2).unwrap();
        assert!(matches!(
            MeasureSample::read(&g, &header, buf.as_slice()),
            Err(Error::FingerprintMismatch { .. })
        ));
    }

    #[test]
    fn no_saddles_is_an_error() {
        // the origin attracts and the other fixed point of z² − 0.1w with
        // a seed budget of one may or may not be found; force failure with a
        // tiny box around the attracting point
        let f = HenonMap::quadratic(0.0, 0.1).unwrap();
        let cfg = SamplerConfig {
            budget: 5,
            box_radius: Some(0.05),
            tol: DEFAULT_TOL,
            rng_seed: 0,
        };
        assert!(matches!(sample_mu_with(&f, 1, cfg), Err(Error::NoSaddles { .. })));
    }
}
