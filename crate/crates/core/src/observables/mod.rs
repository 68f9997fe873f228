//! Observables: real functions on ℂ² with Hölder/C² norm metadata and, when
//! available, exact complex second-order jets.
//!
//! The C^γ norm is the sum form: for γ ≤ 1, `sup|g| + [g]_γ`; for γ = 2,
//! `sup|g| + sup|∇g| + sup‖D²g‖` (Euclidean gradient, operator-norm Hessian,
//! real coordinates).

pub mod decompose;
pub mod forms;
pub mod mollify;
pub mod phi;
pub mod profiles;
pub mod spec;

use crate::error::{Error, Result};
use crate::henon::{ComplexPoint, HenonMap};
use forms::factor_second;
pub use forms::{loewner_leq, HermitianForm, Jet};
use nalgebra::Matrix4;
use profiles::Profile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

pub trait ScalarField: Send + Sync + fmt::Debug {
    fn value(&self, x: ComplexPoint) -> f64;

    fn jet(&self, _x: ComplexPoint) -> Option<Jet> {
        None
    }

    fn has_jet(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// Upper bound derived from closed-form derivative maxima.
    Declared,
    /// Maximum over sample points; a lower bound for the true norm.
    Estimated,
    /// No bound is tracked (e.g. pullbacks by high iterates).
    Unknown,
}

impl NormKind {
    fn combine(self, other: NormKind) -> NormKind {
        use NormKind::*;
        match (self, other) {
            (Unknown, _) | (_, Unknown) => Unknown,
            (Estimated, _) | (_, Estimated) => Estimated,
            _ => Declared,
        }
    }
}

/// Ball outside of which an observable vanishes (`radius: None` = unbounded).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub center: ComplexPoint,
    pub radius: Option<f64>,
}

impl Support {
    pub fn unbounded() -> Self {
        Support {
            center: ComplexPoint::ORIGIN,
            radius: None,
        }
    }

    pub fn ball(center: ComplexPoint, radius: f64) -> Self {
        Support {
            center,
            radius: Some(radius),
        }
    }

    /// Radius of a ball about `c` containing the support.
    pub fn radius_about(&self, c: ComplexPoint) -> Option<f64> {
        self.radius.map(|r| r + self.center.dist(&c))
    }
}

/// An evaluable real function with norm metadata.
#[derive(Clone)]
pub struct Observable {
    field: Arc<dyn ScalarField>,
    gamma: f64,
    norm_bound: f64,
    /// `[sup|g|, sup|∇g|, sup‖D²g‖]` when known.
    norm_parts: Option<[f64; 3]>,
    norm_kind: NormKind,
    support: Support,
    label: String,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("label", &self.label)
            .field("gamma", &self.gamma)
            .field("norm_bound", &self.norm_bound)
            .field("norm_kind", &self.norm_kind)
            .field("support", &self.support)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinate {
    ReZ,
    ImZ,
    ReW,
    ImW,
}

impl Coordinate {
    fn index(self) -> usize {
        match self {
            Coordinate::ReZ => 0,
            Coordinate::ImZ => 1,
            Coordinate::ReW => 2,
            Coordinate::ImW => 3,
        }
    }
}

impl Observable {
    pub fn new(
        field: Arc<dyn ScalarField>,
        gamma: f64,
        norm_bound: f64,
        norm_kind: NormKind,
        support: Support,
        label: impl Into<String>,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 2.0) {
            return Err(Error::arg(format!("gamma must lie in (0, 2], got {gamma}")));
        }
        Ok(Observable {
            field,
            gamma,
            norm_bound,
            norm_parts: None,
            norm_kind,
            support,
            label: label.into(),
        })
    }

    /// Wraps a closure; no derivatives are available.
    pub fn from_fn<F>(label: impl Into<String>, gamma: f64, norm_bound: f64, kind: NormKind, f: F) -> Result<Self>
    where
        F: Fn(ComplexPoint) -> f64 + Send + Sync + 'static,
    {
        Observable::new(
            Arc::new(FnField(Box::new(f))),
            gamma,
            norm_bound,
            kind,
            Support::unbounded(),
            label,
        )
    }

    #[inline]
    pub fn eval(&self, x: ComplexPoint) -> f64 {
        self.field.value(x)
    }

    pub fn jet(&self, x: ComplexPoint) -> Option<Jet> {
        self.field.jet(x)
    }

    pub fn has_jet(&self) -> bool {
        self.field.has_jet()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn norm_parts(&self) -> Option<[f64; 3]> {
        self.norm_parts
    }

    pub fn norm_kind(&self) -> NormKind {
        self.norm_kind
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn support_radius(&self) -> Option<f64> {
        self.support.radius
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    fn with_parts(mut self, parts: [f64; 3]) -> Self {
        self.norm_parts = Some(parts);
        self.norm_bound = parts.iter().sum();
        self
    }

    /// Replaces the norm metadata (e.g. with a measured value).
    pub fn with_norm(mut self, bound: f64, parts: Option<[f64; 3]>, kind: NormKind) -> Self {
        self.norm_bound = bound;
        self.norm_parts = parts;
        self.norm_kind = kind;
        self
    }

    /// `Σ wᵢ gᵢ + c`.
    pub fn sum(terms: &[(f64, Observable)], constant: f64) -> Result<Observable> {
        let gamma = terms.iter().map(|(_, g)| g.gamma).fold(2.0, f64::min);
        let kind = terms
            .iter()
            .fold(NormKind::Declared, |k, (_, g)| k.combine(g.norm_kind));
        let bound = terms.iter().map(|(w, g)| w.abs() * g.norm_bound).sum::<f64>() + constant.abs();
        let parts = terms.iter().try_fold([constant.abs(), 0.0, 0.0], |acc, (w, g)| {
            g.norm_parts.map(|p| {
                [
                    acc[0] + w.abs() * p[0],
                    acc[1] + w.abs() * p[1],
                    acc[2] + w.abs() * p[2],
                ]
            })
        });
        let support = if constant != 0.0 || terms.is_empty() {
            if terms.is_empty() && constant == 0.0 {
                Support::ball(ComplexPoint::ORIGIN, 0.0)
            } else {
                Support::unbounded()
            }
        } else {
            let c = terms[0].1.support.center;
            let r = terms
                .iter()
                .try_fold(0.0_f64, |m, (_, g)| g.support.radius_about(c).map(|r| m.max(r)));
            Support { center: c, radius: r }
        };
        let label = terms
            .iter()
            .map(|(w, g)| format!("{w}*{}", g.label))
            .chain((constant != 0.0).then(|| constant.to_string()))
            .collect::<Vec<_>>()
            .join(" + ");
        let field = AffineField {
            terms: terms.to_vec(),
            constant,
        };
        let mut out = Observable::new(Arc::new(field), gamma, bound, kind, support, label)?;
        if let Some(p) = parts {
            out = out.with_parts(p);
        }
        Ok(out)
    }

    pub fn scale(&self, t: f64) -> Observable {
        Observable::sum(&[(t, self.clone())], 0.0).expect("gamma already validated")
    }

    pub fn add_constant(&self, c: f64) -> Observable {
        Observable::sum(&[(1.0, self.clone())], c).expect("gamma already validated")
    }

    /// Pointwise product.
    pub fn product(factors: &[Observable]) -> Result<Observable> {
        if factors.is_empty() {
            return Ok(constant(1.0));
        }
        let gamma = factors.iter().map(|g| g.gamma).fold(2.0, f64::min);
        let kind = factors.iter().fold(NormKind::Declared, |k, g| k.combine(g.norm_kind));
        let parts = factors.iter().skip(1).try_fold(factors[0].norm_parts, |acc, g| {
            let (u, v) = (acc?, g.norm_parts?);
            Some(Some([
                u[0] * v[0],
                u[0] * v[1] + u[1] * v[0],
                u[0] * v[2] + 2.0 * u[1] * v[1] + u[2] * v[0],
            ]))
        });
        let bound = 2f64.powi(factors.len() as i32 - 1) * factors.iter().map(|g| g.norm_bound).product::<f64>();
        let support = factors
            .iter()
            .filter(|g| g.support.radius.is_some())
            .min_by(|a, b| a.support.radius.unwrap().total_cmp(&b.support.radius.unwrap()))
            .map(|g| g.support)
            .unwrap_or_else(Support::unbounded);
        let label = factors.iter().map(|g| g.label.as_str()).collect::<Vec<_>>().join(" * ");
        let field = ProductField {
            factors: factors.to_vec(),
        };
        let mut out = Observable::new(Arc::new(field), gamma, bound, kind, support, label)?;
        if let Some(Some(p)) = parts {
            out = out.with_parts(p);
        }
        Ok(out)
    }

    /// `g∘fⁿ` (negative `n` uses the inverse); evaluated by iterating at
    /// evaluation time.
    pub fn pullback(&self, f: &HenonMap, n: i64) -> Observable {
        if n == 0 {
            return self.clone();
        }
        Observable {
            field: Arc::new(PullbackField {
                inner: self.clone(),
                map: f.clone(),
                steps: n,
            }),
            gamma: self.gamma,
            norm_bound: f64::INFINITY,
            norm_parts: None,
            norm_kind: NormKind::Unknown,
            support: Support::unbounded(),
            label: format!("{}∘f^{n}", self.label),
        }
    }

    /// `v − v∘f`.
    pub fn coboundary(v: &Observable, f: &HenonMap) -> Observable {
        let mut out =
            Observable::sum(&[(1.0, v.clone()), (-1.0, v.pullback(f, 1))], 0.0).expect("gamma already validated");
        out.label = format!("cob({})", v.label);
        out
    }
}

pub fn constant(c: f64) -> Observable {
    Observable {
        field: Arc::new(ConstantField(c)),
        gamma: 2.0,
        norm_bound: c.abs(),
        norm_parts: Some([c.abs(), 0.0, 0.0]),
        norm_kind: NormKind::Declared,
        support: if c == 0.0 {
            Support::ball(ComplexPoint::ORIGIN, 0.0)
        } else {
            Support::unbounded()
        },
        label: c.to_string(),
    }
}

fn radial(center: ComplexPoint, profile: Profile, label: String, extent: f64) -> Observable {
    let parts = profile.norm_parts(extent);
    let support = match profile.support_radius() {
        Some(r) => Support::ball(center, r),
        None => Support::unbounded(),
    };
    Observable {
        field: Arc::new(RadialField { center, profile }),
        gamma: 2.0,
        norm_bound: parts.iter().sum(),
        norm_parts: Some(parts),
        norm_kind: NormKind::Declared,
        support,
        label,
    }
}

/// Smooth bump of the given height at `center`, vanishing at distance ≥ `radius`.
pub fn make_bump(center: ComplexPoint, radius: f64, height: f64) -> Result<Observable> {
    if !(radius > 0.0) || !height.is_finite() {
        return Err(Error::arg(format!(
            "bump needs radius > 0 and finite height, got {radius}, {height}"
        )));
    }
    Ok(radial(
        center,
        Profile::Bump { radius, height },
        format!("bump({center}, r={radius}, h={height})"),
        radius,
    ))
}

/// Smooth cutoff: 1 on the `r_in`-ball, 0 outside the `r_out`-ball.
pub fn cutoff(center: ComplexPoint, r_in: f64, r_out: f64) -> Result<Observable> {
    if !(r_in > 0.0 && r_out > r_in) {
        return Err(Error::arg(format!(
            "cutoff needs 0 < r_in < r_out, got {r_in}, {r_out}"
        )));
    }
    Ok(radial(
        center,
        Profile::Cutoff { r_in, r_out },
        format!("cutoff({center}, {r_in}, {r_out})"),
        r_out,
    ))
}

/// `‖x − c‖²`; its norm metadata refers to the ball of radius `extent`.
pub fn norm_squared(center: ComplexPoint, extent: f64) -> Observable {
    radial(center, Profile::Square, format!("|x-{center}|^2"), extent)
}

/// A real coordinate multiplied by a cutoff equal to 1 on the `cutoff_radius`
/// ball and vanishing beyond twice that radius.
pub fn coord(which: Coordinate, cutoff_radius: f64) -> Result<Observable> {
    if !(cutoff_radius > 0.0) {
        return Err(Error::arg("coord cutoff_radius must be positive"));
    }
    let r = cutoff_radius;
    let profile = Profile::Cutoff {
        r_in: r,
        r_out: 2.0 * r,
    };
    let rho = profile.norm_parts(2.0 * r);
    // u = coordinate on the 2r-ball: sup 2r, gradient 1, Hessian 0.
    let parts = [
        2.0 * r * rho[0],
        rho[0] + 2.0 * r * rho[1],
        2.0 * rho[1] + 2.0 * r * rho[2],
    ];
    Ok(Observable {
        field: Arc::new(CoordField { which, profile }),
        gamma: 2.0,
        norm_bound: parts.iter().sum(),
        norm_parts: Some(parts),
        norm_kind: NormKind::Declared,
        support: Support::ball(ComplexPoint::ORIGIN, 2.0 * r),
        label: format!("{which:?}(cutoff {r})"),
    })
}

/// `min(1, ‖x − c‖)^γ` for `γ ∈ (0, 1]`; C^γ norm ≤ 2 (sup 1, seminorm 1).
pub fn holder_cusp(center: ComplexPoint, gamma: f64) -> Result<Observable> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::arg(format!("holder_cusp gamma must lie in (0, 1], got {gamma}")));
    }
    Observable::new(
        Arc::new(CuspField { center, gamma }),
        gamma,
        2.0,
        NormKind::Declared,
        Support { center, radius: None },
        format!("cusp({center}, {gamma})"),
    )
}

#[derive(Debug)]
struct ConstantField(f64);

impl ScalarField for ConstantField {
    fn value(&self, _x: ComplexPoint) -> f64 {
        self.0
    }
    fn jet(&self, _x: ComplexPoint) -> Option<Jet> {
        Some(Jet::constant(self.0))
    }
    fn has_jet(&self) -> bool {
        true
    }
}

#[derive(Debug)]
struct RadialField {
    center: ComplexPoint,
    profile: Profile,
}

impl ScalarField for RadialField {
    fn value(&self, x: ComplexPoint) -> f64 {
        self.profile.eval((x - self.center).norm_sqr()).0
    }
    fn jet(&self, x: ComplexPoint) -> Option<Jet> {
        Some(self.profile.jet(self.center, x))
    }
    fn has_jet(&self) -> bool {
        true
    }
}

#[derive(Debug)]
struct CoordField {
    which: Coordinate,
    profile: Profile,
}

impl ScalarField for CoordField {
    fn value(&self, x: ComplexPoint) -> f64 {
        let rho = self.profile.eval(x.norm_sqr()).0;
        if rho == 0.0 {
            return 0.0;
        }
        x.to_reals()[self.which.index()] * rho
    }
    fn jet(&self, x: ComplexPoint) -> Option<Jet> {
        let rho = self.profile.jet(ComplexPoint::ORIGIN, x);
        if rho.value == 0.0 && rho.grad.norm() == 0.0 {
            return Some(Jet::constant(0.0));
        }
        let mut grad = [0.0; 4];
        grad[self.which.index()] = 1.0;
        let u = Jet::from_real(x.to_reals()[self.which.index()], grad, &Matrix4::zeros());
        Some(u.mul(&rho))
    }
    fn has_jet(&self) -> bool {
        true
    }
}

#[derive(Debug)]
struct CuspField {
    center: ComplexPoint,
    gamma: f64,
}

impl ScalarField for CuspField {
    fn value(&self, x: ComplexPoint) -> f64 {
        let r = x.dist(&self.center);
        if !r.is_finite() {
            return 1.0;
        }
        r.min(1.0).powf(self.gamma)
    }
}

#[derive(Debug)]
struct AffineField {
    terms: Vec<(f64, Observable)>,
    constant: f64,
}

impl ScalarField for AffineField {
    fn value(&self, x: ComplexPoint) -> f64 {
        self.terms.iter().map(|(w, g)| w * g.eval(x)).sum::<f64>() + self.constant
    }
    fn jet(&self, x: ComplexPoint) -> Option<Jet> {
        self.terms.iter().try_fold(Jet::constant(self.constant), |acc, (w, g)| {
            Some(acc.add(&g.jet(x)?.scale(*w)))
        })
    }
    fn has_jet(&self) -> bool {
        self.terms.iter().all(|(_, g)| g.has_jet())
    }
}

#[derive(Debug)]
struct ProductField {
    factors: Vec<Observable>,
}

impl ScalarField for ProductField {
    fn value(&self, x: ComplexPoint) -> f64 {
        let mut acc = 1.0;
        for g in &self.factors {
            let v = g.eval(x);
            if v == 0.0 {
                return 0.0;
            }
            acc *= v;
        }
        acc
    }
    fn jet(&self, x: ComplexPoint) -> Option<Jet> {
        self.factors
            .iter()
            .try_fold(Jet::constant(1.0), |acc, g| Some(acc.mul(&g.jet(x)?)))
    }
    fn has_jet(&self) -> bool {
        self.factors.iter().all(|g| g.has_jet())
    }
}

#[derive(Debug)]
struct PullbackField {
    inner: Observable,
    map: HenonMap,
    steps: i64,
}

impl PullbackField {
    fn factor_steps(&self) -> Vec<(usize, bool)> {
        let nf = self.map.factors().len();
        let n = self.steps.unsigned_abs() as usize;
        if self.steps > 0 {
            (0..n).flat_map(|_| (0..nf).map(|i| (i, false))).collect()
        } else {
            (0..n).flat_map(|_| (0..nf).rev().map(|i| (i, true))).collect()
        }
    }
}

impl ScalarField for PullbackField {
    fn value(&self, x: ComplexPoint) -> f64 {
        let y = if self.steps > 0 {
            (0..self.steps).fold(x, |p, _| self.map.step(p))
        } else {
            (0..-self.steps).fold(x, |p, _| self.map.step_inverse(p))
        };
        self.inner.eval(y)
    }

    fn jet(&self, x: ComplexPoint) -> Option<Jet> {
        let steps = self.factor_steps();
        let mut points = Vec::with_capacity(steps.len() + 1);
        points.push(x);
        for &(i, inv) in &steps {
            let fac = &self.map.factors()[i];
            let p = *points.last().unwrap();
            points.push(if inv { fac.step_inverse(p) } else { fac.step(p) });
        }
        let mut jet = self.inner.jet(*points.last().unwrap())?;
        for (k, &(i, inv)) in steps.iter().enumerate().rev() {
            let fac = &self.map.factors()[i];
            let p = points[k];
            let (jac, second) = if inv {
                let (_, _, p2) = fac.p_jet(p.w);
                (fac.jacobian_inverse(p), factor_second(p2, fac.a(), true))
            } else {
                let (_, _, p2) = fac.p_jet(p.z);
                (fac.jacobian(p), factor_second(p2, fac.a(), false))
            };
            jet = jet.pullback(&forms::to_matrix(&jac), &second);
        }
        Some(jet)
    }

    fn has_jet(&self) -> bool {
        self.inner.has_jet()
    }
}

struct FnField(Box<dyn Fn(ComplexPoint) -> f64 + Send + Sync>);

impl fmt::Debug for FnField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnField")
    }
}

impl ScalarField for FnField {
    fn value(&self, x: ComplexPoint) -> f64 {
        (self.0)(x)
    }
}

/// Step for central differences.
pub const FD_STEP: f64 = 1e-5;

fn shifted(x: ComplexPoint, i: usize, h: f64) -> ComplexPoint {
    let mut r = x.to_reals();
    r[i] += h;
    ComplexPoint::from_reals(r)
}

/// Real gradient and Hessian by central differences.
pub fn finite_difference_jet(g: &Observable, x: ComplexPoint, h: f64) -> Jet {
    let v = g.eval(x);
    let mut grad = [0.0; 4];
    let mut hess = Matrix4::zeros();
    for i in 0..4 {
        let p = g.eval(shifted(x, i, h));
        let m = g.eval(shifted(x, i, -h));
        grad[i] = (p - m) / (2.0 * h);
        hess[(i, i)] = (p - 2.0 * v + m) / (h * h);
    }
    for i in 0..4 {
        for j in (i + 1)..4 {
            let pp = g.eval(shifted(shifted(x, i, h), j, h));
            let pm = g.eval(shifted(shifted(x, i, h), j, -h));
            let mp = g.eval(shifted(shifted(x, i, -h), j, h));
            let mm = g.eval(shifted(shifted(x, i, -h), j, -h));
            let d = (pp - pm - mp + mm) / (4.0 * h * h);
            hess[(i, j)] = d;
            hess[(j, i)] = d;
        }
    }
    Jet::from_real(v, grad, &hess)
}

/// Exact jet when available, central differences otherwise.
pub fn jet_at(g: &Observable, x: ComplexPoint) -> Jet {
    g.jet(x).unwrap_or_else(|| finite_difference_jet(g, x, FD_STEP))
}

/// The Levi matrix `[∂²g/∂ζᵢ∂ζ̄ⱼ]`, symmetrized.
pub fn complex_hessian(g: &Observable, x: ComplexPoint) -> HermitianForm {
    jet_at(g, x).levi_form()
}

/// The rank-one matrix `[∂g/∂ζᵢ · conj(∂g/∂ζⱼ)]`.
pub fn gradient_form(g: &Observable, x: ComplexPoint) -> HermitianForm {
    jet_at(g, x).gradient_form()
}

/// Separate suprema `[|g|, |∇g|, ‖D²g‖]` over the given points.
pub fn measure_c2_parts(g: &Observable, points: &[ComplexPoint]) -> [f64; 3] {
    use rayon::prelude::*;
    points
        .par_iter()
        .map(|&x| {
            let j = jet_at(g, x);
            [j.value.abs(), j.gradient_norm(), j.hessian_norm()]
        })
        .reduce(|| [0.0; 3], |a, b| [a[0].max(b[0]), a[1].max(b[1]), a[2].max(b[2])])
}

/// Number of random points used by [`estimate_c2_norm`] by default (64⁴).
pub const NORM_ESTIMATE_POINTS: usize = 64 * 64 * 64 * 64;

/// Lower-bound estimate of the C² norm: maximum over `points` uniform random
/// points of the box `center ± half_width` (per real coordinate).
pub fn estimate_c2_norm(g: &Observable, center: ComplexPoint, half_width: f64, points: usize, seed: u64) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = center.to_reals();
    let pts: Vec<ComplexPoint> = (0..points)
        .map(|_| {
            ComplexPoint::from_reals(std::array::from_fn(|i| {
                c[i] + rng.random_range(-half_width..=half_width)
            }))
        })
        .collect();
    measure_c2_parts(g, &pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;

    fn rand_point(rng: &mut ChaCha8Rng, s: f64) -> ComplexPoint {
        ComplexPoint::from_reals(std::array::from_fn(|_| rng.random_range(-s..s)))
    }

    #[test]
    fn bump_basics() {
        let c = ComplexPoint::real(0.5, -0.25);
        let b = make_bump(c, 1.5, 0.7).unwrap();
        assert_eq!(b.eval(c), 0.7);
        assert_eq!(b.eval(ComplexPoint::real(2.0, -0.25)), 0.0);
        assert_eq!(b.eval(ComplexPoint::real(0.5, 1.25)), 0.0);
        assert!(make_bump(c, 0.0, 1.0).is_err());
    }

    #[test]
    fn bump_gradient_matches_differences() {
        let b = make_bump(ComplexPoint::real(0.2, 0.1), 1.2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut tested = 0;
        for _ in 0..1000 {
            let x = rand_point(&mut rng, 1.4);
            let exact = b.jet(x).unwrap().real_gradient();
            let fd = finite_difference_jet(&b, x, 1e-5).real_gradient();
            let scale = exact.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if scale < 1e-3 {
                continue;
            }
            tested += 1;
            for i in 0..4 {
                assert!((exact[i] - fd[i]).abs() <= 1e-6 * scale, "{x}: {exact:?} vs {fd:?}");
            }
        }
        assert!(tested > 100);
    }

    #[test]
    fn bump_hessian_matches_differences() {
        let b = make_bump(ComplexPoint::real(0.2, 0.1), 1.2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..300 {
            let x = rand_point(&mut rng, 1.0);
            let exact = complex_hessian(&b, x);
            let fd = finite_difference_jet(&b, x, 1e-4).levi_form();
            assert!((exact.0 - fd.0).norm() <= 1e-5, "{x}");
            assert!(exact.is_hermitian(1e-12));
        }
    }

    #[test]
    fn hessian_examples() {
        let sq = norm_squared(ComplexPoint::ORIGIN, 10.0);
        let x = ComplexPoint::new(C64::new(0.3, -1.0), C64::new(2.0, 0.5));
        let h = complex_hessian(&sq, x);
        assert!((h.0 - nalgebra::Matrix2::identity()).norm() < 1e-15);
        let re_z = Observable::from_fn("re z", 2.0, f64::INFINITY, NormKind::Unknown, |p| p.z.re).unwrap();
        let h = complex_hessian(&re_z, x);
        assert!(h.0.norm() < 1e-5);
        let gform = gradient_form(&re_z, x);
        assert!((gform.0[(0, 0)].re - 0.25).abs() < 1e-9);
        assert!(gform.0[(1, 1)].norm() < 1e-9 && gform.0[(0, 1)].norm() < 1e-9);
    }

    #[test]
    fn gradient_form_is_rank_one_psd() {
        let b = make_bump(ComplexPoint::real(0.0, 0.3), 2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x = rand_point(&mut rng, 1.5);
            let [lo, hi] = gradient_form(&b, x).eigenvalues();
            assert!(lo.abs() <= 1e-10 && hi >= -1e-12);
        }
        assert!(gradient_form(&b, ComplexPoint::real(0.0, 0.3)).0.norm() == 0.0);
    }

    #[test]
    fn gradient_form_below_hessian_for_modulus_squared() {
        // g = |z|²: |∂g|² e₁e₁* = |z|² e₁e₁* ≤ e₁e₁* ≤ I on |z| ≤ 1
        let g = Observable::sum(&[(1.0, norm_squared(ComplexPoint::ORIGIN, 2.0))], 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let z = C64::from_polar(rng.random::<f64>(), rng.random_range(0.0..6.3));
            let x = ComplexPoint::new(z, C64::new(0.0, 0.0));
            assert!(loewner_leq(&gradient_form(&g, x), &complex_hessian(&g, x), 1e-12));
        }
    }

    #[test]
    fn pullback_jet_matches_differences() {
        let f = HenonMap::quadratic(-1.0, 0.3).unwrap();
        let b = make_bump(ComplexPoint::real(0.3, -0.2), 1.5, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1, 2, -1, -2] {
            let g = b.pullback(&f, n);
            assert!(g.has_jet());
            for _ in 0..50 {
                let x = rand_point(&mut rng, 0.6);
                let exact = g.jet(x).unwrap();
                let fd = finite_difference_jet(&g, x, 1e-4);
                let scale = 1.0 + exact.levi.norm() + exact.hol.norm();
                assert!((exact.value - g.eval(x)).abs() < 1e-14);
                assert!((exact.grad - fd.grad).norm() <= 1e-5 * scale, "n={n} {x}");
                assert!((exact.levi - fd.levi).norm() <= 1e-3 * scale, "n={n} {x}");
                assert!((exact.hol - fd.hol).norm() <= 1e-3 * scale, "n={n} {x}");
            }
        }
    }

    #[test]
    fn products_and_sums_of_jets() {
        let a = make_bump(ComplexPoint::real(0.1, 0.0), 1.5, 1.0).unwrap();
        let b = coord(Coordinate::ImW, 1.0).unwrap();
        let p = Observable::product(&[a.clone(), b.clone()]).unwrap();
        let s = Observable::sum(&[(2.0, a.clone()), (-0.5, b.clone())], 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let x = rand_point(&mut rng, 1.2);
            for g in [&p, &s, &b] {
                let exact = g.jet(x).unwrap();
                let fd = finite_difference_jet(g, x, 1e-4);
                assert!((exact.value - g.eval(x)).abs() < 1e-14);
                assert!((exact.grad - fd.grad).norm() <= 1e-6);
                assert!((exact.levi - fd.levi).norm() <= 1e-5);
                assert!((exact.hol - fd.hol).norm() <= 1e-5);
            }
        }
    }

    #[test]
    fn declared_norms_dominate_measurements() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let obs = [
            make_bump(ComplexPoint::real(0.5, 0.5), 0.8, 1.0).unwrap(),
            coord(Coordinate::ReZ, 1.0).unwrap(),
            cutoff(ComplexPoint::ORIGIN, 1.0, 1.5).unwrap(),
        ];
        for g in &obs {
            let pts: Vec<ComplexPoint> = (0..20_000).map(|_| rand_point(&mut rng, 2.2)).collect();
            let m = measure_c2_parts(g, &pts);
            let d = g.norm_parts().unwrap();
            for i in 0..3 {
                assert!(m[i] <= d[i], "{g:?}: measured {m:?} declared {d:?}");
            }
        }
    }

    #[test]
    fn cusp_shape() {
        let c = holder_cusp(ComplexPoint::ORIGIN, 1.0).unwrap();
        assert_eq!(c.eval(ComplexPoint::ORIGIN), 0.0);
        assert_eq!(c.eval(ComplexPoint::real(3.0, 0.0)), 1.0);
        assert!((c.eval(ComplexPoint::real(0.3, 0.4)) - 0.5).abs() < 1e-15);
        assert!(holder_cusp(ComplexPoint::ORIGIN, 1.5).is_err());
        assert!(!c.has_jet());
    }

    #[test]
    fn coboundary_telescopes() {
        let f = HenonMap::quadratic(-6.0, 0.1).unwrap();
        let v = make_bump(ComplexPoint::real(2.4, 2.4), 1.0, 1.0).unwrap();
        let u = Observable::coboundary(&v, &f);
        let x = ComplexPoint::real(2.0, 2.5);
        assert!((u.eval(x) - (v.eval(x) - v.eval(f.step(x)))).abs() < 1e-15);
    }
}
