//! Generalized complex Hénon maps: compositions of elementary factors
//! `(z, w) ↦ (p(z) − a·w, z)` with `deg p ≥ 2` and `a ≠ 0`.

use crate::error::{Error, Result};
use crate::linalg::Mat2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

/// A point `(z, w)` of ℂ².
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexPoint {
    pub z: C64,
    pub w: C64,
}

impl ComplexPoint {
    pub const ORIGIN: ComplexPoint = ComplexPoint {
        z: C64 { re: 0.0, im: 0.0 },
        w: C64 { re: 0.0, im: 0.0 },
    };

    pub fn new(z: C64, w: C64) -> Self {
        Self { z, w }
    }

    pub fn real(z: f64, w: f64) -> Self {
        Self::new(C64::new(z, 0.0), C64::new(w, 0.0))
    }

    /// Builds a point from real coordinates `(Re z, Im z, Re w, Im w)`.
    pub fn from_reals(r: [f64; 4]) -> Self {
        Self::new(C64::new(r[0], r[1]), C64::new(r[2], r[3]))
    }

    pub fn to_reals(&self) -> [f64; 4] {
        [self.z.re, self.z.im, self.w.re, self.w.im]
    }

    pub fn coords(&self) -> [C64; 2] {
        [self.z, self.w]
    }

    pub fn norm_inf(&self) -> f64 {
        self.z.norm().max(self.w.norm())
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.z.norm_sqr() + self.w.norm_sqr()
    }

    pub fn dist(&self, other: &ComplexPoint) -> f64 {
        (*self - *other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.z.is_finite() && self.w.is_finite()
    }

    /// Lexicographic order on `(Re z, Im z, Re w, Im w)`.
    pub fn lex_cmp(&self, other: &ComplexPoint) -> std::cmp::Ordering {
        let a = self.to_reals();
        let b = other.to_reals();
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    }
}

impl std::ops::Sub for ComplexPoint {
    type Output = ComplexPoint;
    fn sub(self, rhs: ComplexPoint) -> ComplexPoint {
        ComplexPoint::new(self.z - rhs.z, self.w - rhs.w)
    }
}

impl std::ops::Add for ComplexPoint {
    type Output = ComplexPoint;
    fn add(self, rhs: ComplexPoint) -> ComplexPoint {
        ComplexPoint::new(self.z + rhs.z, self.w + rhs.w)
    }
}

impl std::ops::Mul<f64> for ComplexPoint {
    type Output = ComplexPoint;
    fn mul(self, t: f64) -> ComplexPoint {
        ComplexPoint::new(self.z * t, self.w * t)
    }
}

impl fmt::Display for ComplexPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.z, self.w)
    }
}

/// Raised when an iterate is no longer finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overflow;

impl From<Overflow> for Error {
    fn from(_: Overflow) -> Self {
        Error::Escape { index: 1 }
    }
}

/// One factor `(z, w) ↦ (p(z) − a·w, z)` with monic `p` of degree ≥ 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementaryFactor {
    /// Coefficients of `p`, constant term first; the last entry is 1.
    coeffs: Vec<C64>,
    a: C64,
}

impl ElementaryFactor {
    pub fn new(coeffs: Vec<C64>, a: C64) -> Result<Self> {
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| *c == C64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        let degree = coeffs.len().saturating_sub(1);
        if coeffs.iter().any(|c| !c.is_finite()) || !a.is_finite() {
            return Err(Error::InvalidMap("non-finite coefficient".into()));
        }
        if degree < 2 {
            return Err(Error::InvalidMap(format!(
                "deg p = {degree}: a factor with deg p < 2 is affine-triangular (elementary), \
                 and compositions of such factors are not Hénon maps; every factor needs deg p ≥ 2"
            )));
        }
        if a == C64::new(0.0, 0.0) {
            return Err(Error::InvalidMap(
                "a = 0: the factor is not invertible, so the map is not an automorphism".into(),
            ));
        }
        if coeffs[degree] != C64::new(1.0, 0.0) {
            return Err(Error::InvalidMap(format!(
                "p must be monic, leading coefficient is {}",
                coeffs[degree]
            )));
        }
        Ok(Self { coeffs, a })
    }

    /// `p(z) = z² + c`.
    pub fn quadratic(c: C64, a: C64) -> Result<Self> {
        Self::new(vec![c, C64::new(0.0, 0.0), C64::new(1.0, 0.0)], a)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn a(&self) -> C64 {
        self.a
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Sum of the moduli of the non-leading coefficients of `p`.
    pub fn lower_coeff_mass(&self) -> f64 {
        self.coeffs[..self.degree()].iter().map(|c| c.norm()).sum()
    }

    #[inline]
    pub fn p(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// `(p(z), p'(z), p''(z))` by a single Horner pass.
    #[inline]
    pub fn p_jet(&self, z: C64) -> (C64, C64, C64) {
        let zero = C64::new(0.0, 0.0);
        let (mut p0, mut p1, mut p2) = (zero, zero, zero);
        for &c in self.coeffs.iter().rev() {
            p2 = p2 * z + p1;
            p1 = p1 * z + p0;
            p0 = p0 * z + c;
        }
        (p0, p1, p2 * 2.0)
    }

    #[inline]
    pub fn step(&self, x: ComplexPoint) -> ComplexPoint {
        ComplexPoint::new(self.p(x.z) - self.a * x.w, x.z)
    }

    #[inline]
    pub fn step_inverse(&self, x: ComplexPoint) -> ComplexPoint {
        ComplexPoint::new(x.w, (self.p(x.w) - x.z) / self.a)
    }

    pub fn jacobian(&self, x: ComplexPoint) -> Mat2 {
        let (_, dp, _) = self.p_jet(x.z);
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        Mat2([[dp, -self.a], [one, zero]])
    }

    pub fn jacobian_inverse(&self, x: ComplexPoint) -> Mat2 {
        let (_, dp, _) = self.p_jet(x.w);
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        Mat2([[zero, one], [-one / self.a, dp / self.a]])
    }
}

/// Direction of iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// A finite piece of orbit; `escaped` records the index whose point first left
/// the cutoff (that point is the last one kept).
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSegment {
    pub start: ComplexPoint,
    pub points: Vec<ComplexPoint>,
    pub direction: Direction,
    pub escaped: Option<usize>,
}

/// `f = f_m ∘ … ∘ f_1`, stored as its factor list (first applied first).
#[derive(Debug, Clone, PartialEq)]
pub struct HenonMap {
    factors: Vec<ElementaryFactor>,
    degree: u64,
}

impl HenonMap {
    pub fn new(factors: Vec<ElementaryFactor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidMap("a Hénon map needs at least one factor".into()));
        }
        let degree = factors
            .iter()
            .try_fold(1u64, |acc, f| acc.checked_mul(f.degree() as u64))
            .ok_or_else(|| Error::InvalidMap("algebraic degree overflows u64".into()))?;
        Ok(Self { factors, degree })
    }

    /// Single factor `(z, w) ↦ (z² + c − a·w, z)`.
    pub fn quadratic(c: f64, a: f64) -> Result<Self> {
        Self::new(vec![ElementaryFactor::quadratic(C64::new(c, 0.0), C64::new(a, 0.0))?])
    }

    pub fn factors(&self) -> &[ElementaryFactor] {
        &self.factors
    }

    /// Algebraic degree `d = ∏ deg pᵢ`.
    pub fn degree(&self) -> u64 {
        self.degree
    }

    /// Constant Jacobian determinant `∏ aᵢ`.
    pub fn jacobian_det(&self) -> C64 {
        self.factors.iter().map(|f| f.a).product()
    }

    #[inline]
    pub fn step(&self, x: ComplexPoint) -> ComplexPoint {
        self.factors.iter().fold(x, |p, f| f.step(p))
    }

    #[inline]
    pub fn step_inverse(&self, x: ComplexPoint) -> ComplexPoint {
        self.factors.iter().rev().fold(x, |p, f| f.step_inverse(p))
    }

    pub fn apply(&self, x: ComplexPoint) -> Result<ComplexPoint, Overflow> {
        let y = self.step(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Overflow)
        }
    }

    pub fn apply_inverse(&self, x: ComplexPoint) -> Result<ComplexPoint, Overflow> {
        let y = self.step_inverse(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Overflow)
        }
    }

    /// `f^n(x)` for signed `n`.
    pub fn apply_n(&self, x: ComplexPoint, n: i64) -> Result<ComplexPoint, Overflow> {
        let mut p = x;
        for _ in 0..n.unsigned_abs() {
            p = if n > 0 { self.apply(p)? } else { self.apply_inverse(p)? };
        }
        Ok(p)
    }

    /// Iterates `f` (n > 0) or `f⁻¹` (n < 0) and stops after the first point
    /// with `‖·‖∞ > escape_radius`.
    pub fn iterate(&self, n: i64, x: ComplexPoint, escape_radius: f64) -> Result<OrbitSegment> {
        if !(escape_radius > 0.0) {
            return Err(Error::arg("escape_radius must be positive"));
        }
        let direction = if n >= 0 {
            Direction::Forward
        } else {
            Direction::Backward
        };
        let mut points = Vec::with_capacity(n.unsigned_abs() as usize + 1);
        points.push(x);
        let mut escaped = (x.norm_inf() > escape_radius || !x.is_finite()).then_some(0);
        let mut p = x;
        if escaped.is_none() {
            for i in 1..=n.unsigned_abs() as usize {
                p = match direction {
                    Direction::Forward => self.step(p),
                    Direction::Backward => self.step_inverse(p),
                };
                points.push(p);
                if !p.is_finite() || p.norm_inf() > escape_radius {
                    escaped = Some(i);
                    break;
                }
            }
        }
        Ok(OrbitSegment {
            start: x,
            points,
            direction,
            escaped,
        })
    }

    /// Chain-rule derivative `Df(x)`.
    pub fn jacobian(&self, x: ComplexPoint) -> Mat2 {
        let mut p = x;
        let mut acc = Mat2::identity();
        for f in &self.factors {
            acc = f.jacobian(p) * acc;
            p = f.step(p);
        }
        acc
    }

    /// `Df⁻¹(x)`.
    pub fn jacobian_inverse(&self, x: ComplexPoint) -> Mat2 {
        let mut p = x;
        let mut acc = Mat2::identity();
        for f in self.factors.iter().rev() {
            acc = f.jacobian_inverse(p) * acc;
            p = f.step_inverse(p);
        }
        acc
    }

    pub fn spec(&self) -> MapSpec {
        MapSpec {
            factors: self
                .factors
                .iter()
                .map(|f| FactorSpec {
                    a: f.a.into(),
                    p: f.coeffs.iter().map(|&c| c.into()).collect(),
                })
                .collect(),
        }
    }

    /// Stable hex digest of the coefficient bit patterns.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for f in &self.factors {
            hasher.update(b"factor");
            for c in f.coeffs.iter().chain(std::iter::once(&f.a)) {
                hasher.update(c.re.to_bits().to_le_bytes());
                hasher.update(c.im.to_bits().to_le_bytes());
            }
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Algebraic degrees of `F = (f, f⁻¹)` on ℂ⁴ = ℂ² × ℂ².
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProductDegrees {
    pub k: u32,
    pub p: u32,
    pub d_plus: u64,
    pub d_minus: u64,
}

impl ProductDegrees {
    /// Checks `d₊ᵖ = d₋^(k−p)`.
    pub fn is_consistent(&self) -> bool {
        self.d_plus.checked_pow(self.p) == self.d_minus.checked_pow(self.k - self.p)
    }
}

/// A point `(x, y)` of ℂ⁴ = ℂ² × ℂ².
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProductPoint {
    pub x: ComplexPoint,
    pub y: ComplexPoint,
}

impl ProductPoint {
    pub fn new(x: ComplexPoint, y: ComplexPoint) -> Self {
        Self { x, y }
    }

    pub fn diagonal(x: ComplexPoint) -> Self {
        Self { x, y: x }
    }
}

impl HenonMap {
    /// `Fⁿ(x, y) = (fⁿ(x), f⁻ⁿ(y))`.
    pub fn product_apply(&self, q: ProductPoint, n: i64) -> Result<ProductPoint, Overflow> {
        Ok(ProductPoint {
            x: self.apply_n(q.x, n)?,
            y: self.apply_n(q.y, -n)?,
        })
    }

    /// Each coordinate of `F` has degree `d` in both time directions (k = 4, p = 2).
    pub fn product_degrees(&self) -> ProductDegrees {
        ProductDegrees {
            k: 4,
            p: 2,
            d_plus: self.degree,
            d_minus: self.degree,
        }
    }
}

/// A complex number written either as `re` or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexSpec {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexSpec> for C64 {
    fn from(c: ComplexSpec) -> Self {
        match c {
            ComplexSpec::Real(re) => C64::new(re, 0.0),
            ComplexSpec::Pair([re, im]) => C64::new(re, im),
        }
    }
}

impl From<C64> for ComplexSpec {
    fn from(c: C64) -> Self {
        if c.im == 0.0 {
            ComplexSpec::Real(c.re)
        } else {
            ComplexSpec::Pair([c.re, c.im])
        }
    }
}

/// `{a: complex, p: [c₀, c₁, …, 1]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub a: ComplexSpec,
    pub p: Vec<ComplexSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub factors: Vec<FactorSpec>,
}

impl MapSpec {
    pub fn build(&self) -> Result<HenonMap> {
        let factors = self
            .factors
            .iter()
            .enumerate()
            .map(|(i, f)| {
                ElementaryFactor::new(f.p.iter().map(|&c| c.into()).collect(), f.a.into()).map_err(|e| match e {
                    Error::InvalidMap(msg) => Error::InvalidMap(format!("factor {i}: {msg}")),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        HenonMap::new(factors)
    }
}
