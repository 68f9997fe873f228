//! Escape-rate Green functions `G± = lim d^{−n} log⁺‖f^{±n}‖` with explicit
//! error bounds, filtration classification, and real-slice rendering.
//!
//! Escape is certified by the filtration: with `R` from [`escape_radius`], a
//! point with `|z| ≥ max(|w|, R)` has every forward factor step at least
//! double `|z|` while staying in that region (symmetrically for `w` and the
//! inverse factors). Inside the region
//! `log|z'| = m·log|z| + c + log|1 + ε|` with `|ε| ≤ S/|z|`, which gives a
//! summable geometric tail.

use crate::error::{Error, Result};
use crate::henon::{ComplexPoint, Direction, ElementaryFactor, HenonMap};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Stop refining once the leading coordinate reaches this modulus.
const LARGE_MODULUS: f64 = 1e40;
/// Keep `|z|^m` representable.
const MAX_LOG10: f64 = 280.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenValue {
    pub value: f64,
    pub error_bound: f64,
    pub iterations_used: usize,
    /// Escape was certified (the orbit entered the filtration region).
    pub escaped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiltrationTag {
    /// Bounded in both time directions up to the horizon.
    K,
    KPlusOnly,
    KMinusOnly,
    EscapesBoth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiltrationClass {
    pub tag: FiltrationTag,
    pub horizon: usize,
}

fn forward_mass(f: &ElementaryFactor) -> f64 {
    f.lower_coeff_mass() + f.a().norm()
}

fn backward_mass(f: &ElementaryFactor) -> f64 {
    f.lower_coeff_mass() + 1.0
}

/// Radius `R` such that `‖x‖∞ ≥ R` with `|z| ≥ |w|` forces `|p(z) − a·w| ≥ 2|z|`
/// for every factor (and the mirrored statement for the inverse factors).
///
/// With `S` the sum of the moduli of the lower-order terms, `|z| ≥ S + 2`
/// gives `|z|^{m−2}(|z| − S) ≥ 2`.
pub fn escape_radius(f: &HenonMap) -> f64 {
    f.factors()
        .iter()
        .map(|fac| {
            let fwd = forward_mass(fac) + 2.0;
            let bwd = backward_mass(fac) + 2.0 * fac.a().norm().max(1.0);
            fwd.max(bwd)
        })
        .fold(0.0, f64::max)
}

/// Per-direction constants of the escape recursion.
struct Recursion {
    radius: f64,
    /// Largest lower-order mass; `|ε| ≤ mass / |lead|`.
    mass: f64,
    /// `log⁺`-growth constant for the unresolved upper bound.
    growth: f64,
    /// Shift `β` before each factor step (in application order) such that
    /// `log|lead| − β` scales exactly by the factor degree up to `log|1+ε|`.
    shifts: Vec<f64>,
    /// Factors in application order.
    order: Vec<usize>,
}

impl Recursion {
    fn new(f: &HenonMap, direction: Direction) -> Self {
        let n = f.factors().len();
        let order: Vec<usize> = match direction {
            Direction::Forward => (0..n).collect(),
            Direction::Backward => (0..n).rev().collect(),
        };
        let (mass, consts): (f64, Vec<f64>) = match direction {
            // monic p: no constant term in log|p(z) − a w|
            Direction::Forward => (f.factors().iter().map(forward_mass).fold(0.0, f64::max), vec![0.0; n]),
            Direction::Backward => (
                f.factors().iter().map(backward_mass).fold(0.0, f64::max),
                order.iter().map(|&i| -f.factors()[i].a().norm().ln()).collect(),
            ),
        };
        // β_{k+1} = m_k β_k + c_k around the cycle; fixed point of the affine
        // cycle map β ↦ D β + K.
        let degs: Vec<f64> = order.iter().map(|&i| f.factors()[i].degree() as f64).collect();
        let run = |beta0: f64| -> Vec<f64> {
            let mut out = Vec::with_capacity(n + 1);
            let mut b = beta0;
            out.push(b);
            for k in 0..n {
                b = degs[k] * b + consts[k];
                out.push(b);
            }
            out
        };
        let k = run(0.0)[n];
        let d = f.degree() as f64;
        let beta0 = -k / (d - 1.0);
        let mut shifts = run(beta0);
        shifts.pop();
        let growth = std::f64::consts::LN_2 + consts.iter().fold(0.0_f64, |m, &c| m.max(c));
        Recursion {
            radius: escape_radius(f).max(2.0 * mass),
            mass,
            growth,
            shifts,
            order,
        }
    }
}

fn lead(x: &ComplexPoint, direction: Direction) -> (f64, f64) {
    match direction {
        Direction::Forward => (x.z.norm(), x.w.norm()),
        Direction::Backward => (x.w.norm(), x.z.norm()),
    }
}

fn green(f: &HenonMap, x: ComplexPoint, max_iter: usize, direction: Direction) -> GreenValue {
    let rec = Recursion::new(f, direction);
    let factors = f.factors();
    let nf = factors.len();
    let mut p = x;
    // accumulated degree of the factor steps taken so far
    let mut deg_acc = 1.0_f64;
    let mut pos = 0usize;
    let mut iterations = 0usize;
    let mut certified = false;
    loop {
        let (lz, other) = lead(&p, direction);
        if !certified && lz >= rec.radius && lz >= other {
            certified = true;
        }
        let fac = &factors[rec.order[pos]];
        let at_cycle_start = pos == 0;
        if certified {
            let next_log10 = fac.degree() as f64 * lz.log10() + 1.0;
            if lz >= LARGE_MODULUS || next_log10 > MAX_LOG10 || (at_cycle_start && iterations >= max_iter) {
                let value = (lz.ln() - rec.shifts[pos]) / deg_acc;
                let error_bound = 4.0 / 3.0 * rec.mass / (lz * deg_acc);
                return GreenValue {
                    value: value.max(0.0),
                    error_bound,
                    iterations_used: iterations,
                    escaped: true,
                };
            }
        } else if at_cycle_start && iterations >= max_iter {
            // Unresolved: G(x) = G(xₙ)/dⁿ and G ≤ log max(‖·‖∞, R) + growth.
            let bound = (p.norm_inf().max(rec.radius).ln() + rec.growth) / deg_acc;
            return GreenValue {
                value: 0.0,
                error_bound: if bound.is_finite() { bound } else { f64::INFINITY },
                iterations_used: iterations,
                escaped: false,
            };
        }
        p = match direction {
            Direction::Forward => fac.step(p),
            Direction::Backward => fac.step_inverse(p),
        };
        deg_acc *= fac.degree() as f64;
        pos += 1;
        if pos == nf {
            pos = 0;
            iterations += 1;
        }
        if !p.is_finite() {
            // Only reachable for uncertified, wildly large inputs.
            return GreenValue {
                value: 0.0,
                error_bound: f64::INFINITY,
                iterations_used: iterations,
                escaped: false,
            };
        }
    }
}

/// `G⁺(x)`; satisfies `G⁺∘f = d·G⁺`.
pub fn green_plus(f: &HenonMap, x: ComplexPoint, max_iter: usize) -> Result<GreenValue> {
    if max_iter == 0 {
        return Err(Error::arg("max_iter must be at least 1"));
    }
    Ok(green(f, x, max_iter, Direction::Forward))
}

/// `G⁻(x)`; satisfies `G⁻∘f⁻¹ = d·G⁻`.
pub fn green_minus(f: &HenonMap, x: ComplexPoint, max_iter: usize) -> Result<GreenValue> {
    if max_iter == 0 {
        return Err(Error::arg("max_iter must be at least 1"));
    }
    Ok(green(f, x, max_iter, Direction::Backward))
}

fn escapes_within(f: &HenonMap, x: ComplexPoint, horizon: usize, direction: Direction) -> bool {
    let rec = Recursion::new(f, direction);
    let mut p = x;
    for i in 0..=horizon {
        let (lz, other) = lead(&p, direction);
        if !p.is_finite() || (lz >= rec.radius && lz >= other) {
            return true;
        }
        if i == horizon {
            break;
        }
        p = match direction {
            Direction::Forward => f.step(p),
            Direction::Backward => f.step_inverse(p),
        };
    }
    false
}

/// Classifies `x` by whether its forward/backward orbit enters the escape
/// region within `horizon` iterations. Entering the region is a certificate
/// of escape, so tags only move toward `EscapesBoth` as the horizon grows.
pub fn classify(f: &HenonMap, x: ComplexPoint, horizon: usize) -> Result<FiltrationClass> {
    if horizon == 0 {
        return Err(Error::arg("horizon must be at least 1"));
    }
    let fwd = escapes_within(f, x, horizon, Direction::Forward);
    let bwd = escapes_within(f, x, horizon, Direction::Backward);
    let tag = match (fwd, bwd) {
        (false, false) => FiltrationTag::K,
        (false, true) => FiltrationTag::KPlusOnly,
        (true, false) => FiltrationTag::KMinusOnly,
        (true, true) => FiltrationTag::EscapesBoth,
    };
    Ok(FiltrationClass { tag, horizon })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Plus,
    Minus,
}

/// Axis-aligned window in `(Re z, Re w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub re_z: [f64; 2],
    pub re_w: [f64; 2],
}

/// Row-major grid of Green values; row 0 is the top (largest `Re w`).
#[derive(Debug, Clone, PartialEq)]
pub struct GreenGrid {
    pub window: Window,
    pub nx: usize,
    pub ny: usize,
    pub which: Which,
    pub values: Vec<f64>,
}

impl GreenGrid {
    pub fn point(&self, col: usize, row: usize) -> ComplexPoint {
        grid_point(&self.window, self.nx, self.ny, col, row)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Binary PPM (P6).
    pub fn to_ppm(&self) -> Vec<u8> {
        let (lo, hi) = self.min_max();
        let mut out = format!("P6\n{} {}\n255\n", self.nx, self.ny).into_bytes();
        out.reserve(3 * self.values.len());
        for &v in &self.values {
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
            out.extend_from_slice(&ramp(t));
        }
        out
    }

    /// Text sidecar describing how values map onto the PPM colors.
    pub fn ramp_sidecar(&self) -> String {
        let (lo, hi) = self.min_max();
        let mut s = String::new();
        let _ = writeln!(
            s,
            "which {}",
            match self.which {
                Which::Plus => "plus",
                Which::Minus => "minus",
            }
        );
        let _ = writeln!(s, "window_re_z {} {}", self.window.re_z[0], self.window.re_z[1]);
        let _ = writeln!(s, "window_re_w {} {}", self.window.re_w[0], self.window.re_w[1]);
        let _ = writeln!(s, "resolution {} {}", self.nx, self.ny);
        let _ = writeln!(s, "min {lo:?}");
        let _ = writeln!(s, "max {hi:?}");
        let _ = writeln!(s, "ramp linear: min -> black, then blue, teal, yellow, max -> white");
        for (t, c) in RAMP_STOPS {
            let _ = writeln!(s, "stop {t} {} {} {}", c[0], c[1], c[2]);
        }
        s
    }

    /// CSV with header `x,y,value` (`x = Re z`, `y = Re w`).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,value\n");
        for row in 0..self.ny {
            for col in 0..self.nx {
                let p = self.point(col, row);
                let _ = writeln!(s, "{:?},{:?},{:?}", p.z.re, p.w.re, self.values[row * self.nx + col]);
            }
        }
        s
    }
}

const RAMP_STOPS: [(f64, [u8; 3]); 5] = [
    (0.0, [0, 0, 0]),
    (0.25, [30, 40, 160]),
    (0.5, [20, 150, 150]),
    (0.75, [240, 210, 40]),
    (1.0, [255, 255, 255]),
];

fn ramp(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    for pair in RAMP_STOPS.windows(2) {
        let (t0, c0) = pair[0];
        let (t1, c1) = pair[1];
        if t <= t1 {
            let s = (t - t0) / (t1 - t0);
            let mix = |a: u8, b: u8| (a as f64 + s * (b as f64 - a as f64)).round() as u8;
            return [mix(c0[0], c1[0]), mix(c0[1], c1[1]), mix(c0[2], c1[2])];
        }
    }
    RAMP_STOPS[4].1
}

fn grid_point(window: &Window, nx: usize, ny: usize, col: usize, row: usize) -> ComplexPoint {
    let x = window.re_z[0] + (window.re_z[1] - window.re_z[0]) * col as f64 / (nx - 1) as f64;
    let y = window.re_w[1] - (window.re_w[1] - window.re_w[0]) * row as f64 / (ny - 1) as f64;
    ComplexPoint::real(x, y)
}

/// Evaluates `G±` on the real slice `Im z = Im w = 0`.
pub fn render_green_slice(
    f: &HenonMap,
    window: Window,
    resolution: (usize, usize),
    which: Which,
    max_iter: usize,
) -> Result<GreenGrid> {
    let (nx, ny) = resolution;
    if nx < 2 || ny < 2 {
        return Err(Error::arg("resolution components must be at least 2"));
    }
    if max_iter == 0 {
        return Err(Error::arg("max_iter must be at least 1"));
    }
    let direction = match which {
        Which::Plus => Direction::Forward,
        Which::Minus => Direction::Backward,
    };
    let values: Vec<f64> = (0..nx * ny)
        .into_par_iter()
        .map(|i| green(f, grid_point(&window, nx, ny, i % nx, i / nx), max_iter, direction).value)
        .collect();
    Ok(GreenGrid {
        window,
        nx,
        ny,
        which,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn z2() -> HenonMap {
        HenonMap::quadratic(0.0, 1.0).unwrap()
    }

    fn horseshoe() -> HenonMap {
        HenonMap::quadratic(-6.0, 0.1).unwrap()
    }

    #[test]
    fn radius_satisfies_doubling_on_boundary_samples() {
        let f = z2();
        let r = escape_radius(&f);
        assert!(r <= 4.0);
        let fac = &f.factors()[0];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100_000 {
            let rz = r * (1.0 + rng.random::<f64>());
            let rw = rz * rng.random::<f64>();
            let z = C64::from_polar(rz, rng.random_range(0.0..std::f64::consts::TAU));
            let w = C64::from_polar(rw, rng.random_range(0.0..std::f64::consts::TAU));
            let img = fac.p(z) - fac.a() * w;
            assert!(img.norm() >= 2.0 * z.norm() * (1.0 - 1e-12));
        }
    }

    #[test]
    fn radius_grows_with_coefficients() {
        let mut last = 0.0;
        for t in [1.0, 2.0, 4.0, 8.0] {
            let f = HenonMap::quadratic(-6.0 * t, 0.1).unwrap();
            let r = escape_radius(&f);
            assert!(r > last);
            last = r;
        }
    }

    #[test]
    fn green_zero_on_bounded_orbit() {
        let g = green_plus(&z2(), ComplexPoint::ORIGIN, 50).unwrap();
        assert_eq!(g.value, 0.0);
        assert!(!g.escaped);
        assert!(g.error_bound > 0.0 && g.error_bound < 1e-12);
        assert_eq!(green_minus(&z2(), ComplexPoint::ORIGIN, 50).unwrap().value, 0.0);
    }

    #[test]
    fn functional_equation_at_ten() {
        let f = z2();
        let x = ComplexPoint::real(10.0, 0.0);
        let g0 = green_plus(&f, x, 100).unwrap();
        let g1 = green_plus(&f, f.step(x), 100).unwrap();
        assert!((g1.value - 2.0 * g0.value).abs() <= 1e-9);
    }

    #[test]
    fn leading_term_deep_in_escape_region() {
        let g = green_plus(&z2(), ComplexPoint::real(1e6, 0.0), 100).unwrap();
        assert!((g.value - 1e6_f64.ln()).abs() <= 1e-3);
    }

    #[test]
    fn backward_functional_equation() {
        let f = horseshoe();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut tested = 0;
        for _ in 0..2000 {
            let x = ComplexPoint::from_reals(std::array::from_fn(|_| rng.random_range(-10.0..10.0)));
            let g0 = green_minus(&f, x, 200).unwrap();
            if !g0.escaped {
                continue;
            }
            let g1 = green_minus(&f, f.step_inverse(x), 200).unwrap();
            assert!((g1.value - 2.0 * g0.value).abs() <= 1e-9 * (1.0 + g0.value), "{x}");
            tested += 1;
        }
        assert!(tested > 100);
    }

    /// For a single factor, `σ∘f⁻¹∘σ` with `σ(z,w) = (w,z)` is
    /// `(z,w) ↦ ((p(z) − w)/a, z)`; rescaling by `t` with `t^{m−1} = 1/a`
    /// makes it `(z² + c/a² − w/a, z)`, and rescaling leaves escape rates unchanged.
    #[test]
    fn minus_matches_plus_of_inverse_conjugate() {
        for (c, a) in [(-6.0, 0.1), (0.25, 1.0), (-1.0, -0.4)] {
            let f = HenonMap::quadratic(c, a).unwrap();
            let t = 1.0 / a; // m = 2
            let conj = HenonMap::new(vec![ElementaryFactor::new(
                vec![C64::new(c * t * t, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
                C64::new(1.0 / a, 0.0),
            )
            .unwrap()])
            .unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            for _ in 0..1000 {
                let x = ComplexPoint::from_reals(std::array::from_fn(|_| rng.random_range(-6.0..6.0)));
                let gm = green_minus(&f, x, 300).unwrap();
                let swapped = ComplexPoint::new(x.w * t, x.z * t);
                let gp = green_plus(&conj, swapped, 300).unwrap();
                assert_eq!(gm.escaped, gp.escaped, "{x} a={a}");
                assert!(
                    (gm.value - gp.value).abs() <= 1e-9 + gm.error_bound + gp.error_bound,
                    "{x}: {} vs {}",
                    gm.value,
                    gp.value
                );
            }
        }
    }

    #[test]
    fn classification() {
        let f = horseshoe();
        // fixed points solve z² − 1.1z − 6 = 0 on the diagonal
        let x = (1.1 + (1.21f64 + 24.0).sqrt()) / 2.0;
        let saddle = ComplexPoint::real(x, x);
        // floating-point orbits of a saddle leave it after a few dozen steps
        for h in [1, 3, 5] {
            assert_eq!(classify(&f, saddle, h).unwrap().tag, FiltrationTag::K);
        }
        let far = classify(&f, ComplexPoint::real(1e6, 0.0), 5).unwrap();
        assert!(matches!(
            far.tag,
            FiltrationTag::KMinusOnly | FiltrationTag::EscapesBoth
        ));
        assert!(classify(&f, saddle, 0).is_err());
    }

    #[test]
    fn classification_is_monotone() {
        let f = horseshoe();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let x = ComplexPoint::from_reals(std::array::from_fn(|_| rng.random_range(-4.0..4.0)));
            let mut prev = classify(&f, x, 1).unwrap().tag;
            for h in 2..30 {
                let tag = classify(&f, x, h).unwrap().tag;
                if prev == FiltrationTag::EscapesBoth {
                    assert_eq!(tag, FiltrationTag::EscapesBoth);
                }
                if prev == FiltrationTag::KPlusOnly {
                    assert!(matches!(tag, FiltrationTag::KPlusOnly | FiltrationTag::EscapesBoth));
                }
                prev = tag;
            }
        }
    }

    #[test]
    fn slice_matches_pointwise() {
        let f = horseshoe();
        let window = Window {
            re_z: [-3.0, 3.0],
            re_w: [-3.0, 3.0],
        };
        let grid = render_green_slice(&f, window, (61, 61), Which::Plus, 60).unwrap();
        for row in 0..grid.ny {
            for col in 0..grid.nx {
                let v = grid.values[row * grid.nx + col];
                assert!((v - green_plus(&f, grid.point(col, row), 60).unwrap().value).abs() <= 1e-12);
            }
        }
        assert!(render_green_slice(&f, window, (1, 5), Which::Plus, 10).is_err());
    }

    #[test]
    fn unresolved_set_avoids_escape_region() {
        // A short horizon gives the unresolved neighborhood of K⁺ positive area.
        let f = horseshoe();
        let r = escape_radius(&f);
        let zeros = |window: Window| {
            let grid = render_green_slice(&f, window, (201, 201), Which::Plus, 4).unwrap();
            let mut out = Vec::new();
            for row in 0..grid.ny {
                for col in 0..grid.nx {
                    if grid.values[row * grid.nx + col] == 0.0 {
                        out.push(grid.point(col, row));
                    }
                }
            }
            out
        };
        let inner = zeros(Window {
            re_z: [-3.0, 3.0],
            re_w: [-3.0, 3.0],
        });
        assert!(!inner.is_empty());
        assert!(inner.iter().all(|p| p.norm_inf() <= r));
        let outer = zeros(Window {
            re_z: [-20.0, 20.0],
            re_w: [-20.0, 20.0],
        });
        assert!(outer.iter().all(|p| p.z.norm() < r.max(p.w.norm())));
    }

    #[test]
    fn slice_is_zero_inside_bounded_region() {
        // The origin is an attracting fixed point of (z² − 0.1w, z).
        let f = HenonMap::quadratic(0.0, 0.1).unwrap();
        let window = Window {
            re_z: [-0.2, 0.2],
            re_w: [-0.2, 0.2],
        };
        let grid = render_green_slice(&f, window, (9, 9), Which::Plus, 50).unwrap();
        assert!(grid.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ppm_layout() {
        let f = horseshoe();
        let window = Window {
            re_z: [-3.0, 3.0],
            re_w: [-3.0, 3.0],
        };
        let grid = render_green_slice(&f, window, (4, 3), Which::Minus, 30).unwrap();
        let ppm = grid.to_ppm();
        let header = b"P6\n4 3\n255\n";
        assert_eq!(&ppm[..header.len()], header);
        assert_eq!(ppm.len(), header.len() + 36);
        assert_eq!(grid.to_csv().lines().count(), 13);
        assert!(grid.ramp_sidecar().contains("min "));
    }
}
