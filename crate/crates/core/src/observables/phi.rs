//! Product test functions `φ±(x, y) = g₀±(y)·h±(x)` on ℂ² × ℂ² built from
//! `κ + 1` observables with `M = 10κ`, and a pointwise check of the
//! Hessian lower bound that makes them plurisubharmonic near `K⁺ × K⁻`.

use super::forms::Jet;
use super::{cutoff, jet_at, Observable};
use crate::error::{Error, Result};
use crate::henon::{ComplexPoint, HenonMap, ProductPoint};
use crate::sampler::MeasureSample;
use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// `(M − 1)^κ [1 − (κ+1)/(M+1) · (1 + 2/(M−1))^κ]`, evaluated in the
/// expanded form `(M − 1)^κ − (κ+1)(M+1)^{κ−1}` (the two agree algebraically;
/// the expanded one is exact on integers).
pub fn positivity_bracket(kappa: u32, m: f64) -> Result<f64> {
    if !(m > 1.0) {
        return Err(Error::arg(format!("M must exceed 1, got {m}")));
    }
    let k = kappa as i32;
    Ok((m - 1.0).powi(k) - (kappa as f64 + 1.0) * (m + 1.0).powi(k - 1))
}

fn check_times(ns: &[i64]) -> Result<()> {
    if ns.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::arg(format!("times must be nondecreasing, got {ns:?}")));
    }
    Ok(())
}

fn check_unit_norm(g: &Observable) -> Result<()> {
    if !(g.norm_bound() <= 1.0 + 1e-12) {
        return Err(Error::arg(format!(
            "{} has declared C² norm {} > 1",
            g.label(),
            g.norm_bound()
        )));
    }
    Ok(())
}

/// `g̃ⱼ = gⱼ∘f^{nⱼ − n₁}`.
fn shifted(gs: &[Observable], f: &HenonMap, ns: &[i64]) -> Vec<Observable> {
    gs.iter().zip(ns).map(|(g, &n)| g.pullback(f, n - ns[0])).collect()
}

/// `h = g₁·(g₂∘f^{n₂−n₁})⋯(g_κ∘f^{n_κ−n₁})`.
pub fn build_h(gs: &[Observable], f: &HenonMap, ns: &[i64]) -> Result<Observable> {
    if gs.is_empty() || gs.len() != ns.len() {
        return Err(Error::arg(
            "build_h needs one time per observable and at least one observable",
        ));
    }
    check_times(ns)?;
    Observable::product(&shifted(gs, f, ns))
}

#[derive(Debug, Clone)]
pub struct PhiConstruction {
    pub kappa: usize,
    pub m: f64,
    pub b_radius: f64,
    pub chi: Observable,
    pub g0: Observable,
    /// `g̃₁..g̃_κ`.
    pub tilde: Vec<Observable>,
    pub g0_plus: Observable,
    pub g0_minus: Observable,
    pub h_plus: Observable,
    pub h_minus: Observable,
    /// `ℓⱼ = nⱼ − n₁`.
    pub offsets: Vec<i64>,
}

pub fn build_phi(
    g0: &Observable,
    gs: &[Observable],
    f: &HenonMap,
    ns: &[i64],
    b_radius: f64,
) -> Result<PhiConstruction> {
    if gs.is_empty() || gs.len() != ns.len() {
        return Err(Error::arg("build_phi needs κ ≥ 1 observables with one time each"));
    }
    check_times(ns)?;
    if !(b_radius > 0.0) {
        return Err(Error::arg("B_radius must be positive"));
    }
    check_unit_norm(g0)?;
    for g in gs {
        check_unit_norm(g)?;
    }
    let kappa = gs.len();
    let m = 10.0 * kappa as f64;
    let chi = cutoff(ComplexPoint::ORIGIN, 2.0 * b_radius, 3.0 * b_radius)?;
    let tilde = shifted(gs, f, ns);
    let shifted_plus_m: Vec<Observable> = tilde.iter().map(|g| g.add_constant(m)).collect();
    let prod = Observable::product(&shifted_plus_m)?;
    let top = 2.0 * (m + 1.0).powi(kappa as i32);
    let g0_plus = Observable::product(&[chi.clone(), g0.add_constant(m)])?.with_label("g0+");
    let g0_minus = Observable::product(&[chi.clone(), Observable::sum(&[(-1.0, g0.clone())], m)?])?.with_label("g0-");
    let h_plus = Observable::product(&[chi.clone(), prod.clone()])?.with_label("h+");
    let h_minus = Observable::product(&[chi.clone(), prod.add_constant(-top)])?.with_label("h-");
    Ok(PhiConstruction {
        kappa,
        m,
        b_radius,
        chi,
        g0: g0.clone(),
        tilde,
        g0_plus,
        g0_minus,
        h_plus,
        h_minus,
        offsets: ns.iter().map(|n| n - ns[0]).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl PhiConstruction {
    pub fn phi(&self, sign: Sign, q: ProductPoint) -> f64 {
        match sign {
            Sign::Plus => self.g0_plus.eval(q.y) * self.h_plus.eval(q.x),
            Sign::Minus => self.g0_minus.eval(q.y) * self.h_minus.eval(q.x),
        }
    }

    /// Levi matrix of `φ±` at `q` in the coordinates `(x₁, x₂, y₁, y₂)`.
    pub fn levi(&self, sign: Sign, q: ProductPoint) -> Matrix4<C64> {
        let (g0, h) = match sign {
            Sign::Plus => (&self.g0_plus, &self.h_plus),
            Sign::Minus => (&self.g0_minus, &self.h_minus),
        };
        product_levi(&jet_at(h, q.x), &jet_at(g0, q.y))
    }
}

/// Levi matrix of `(x, y) ↦ u(y)·h(x)` from the jets of `h` at `x` and `u` at `y`.
fn product_levi(h: &Jet, u: &Jet) -> Matrix4<C64> {
    let mut out = Matrix4::zeros();
    let cross: Matrix2<C64> = h.grad * u.grad.map(|c| c.conj()).transpose();
    for i in 0..2 {
        for j in 0..2 {
            out[(i, j)] = h.levi[(i, j)] * u.value;
            out[(i + 2, j + 2)] = u.levi[(i, j)] * h.value;
            out[(i, j + 2)] = cross[(i, j)];
            out[(j + 2, i)] = cross[(i, j)].conj();
        }
    }
    out
}

fn hermitian_min_eig(m: &Matrix4<C64>) -> f64 {
    let sym = (m + m.adjoint()) * C64::from(0.5);
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy)]
pub struct PhiCheckOptions {
    pub pairs: usize,
    /// Size of the random displacement applied to sample points.
    pub perturbation: f64,
    pub seed: u64,
    pub slack: f64,
}

impl Default for PhiCheckOptions {
    fn default() -> Self {
        PhiCheckOptions {
            pairs: 500,
            perturbation: 1e-3,
            seed: 0,
            slack: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PreconditionViolation {
    pub pair: usize,
    /// 0 for `g₀` (on the y copy), `j ≥ 1` for `g̃ⱼ` (on the x copy).
    pub index: usize,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhiHessianReport {
    pub bracket: f64,
    pub pairs_tested: usize,
    /// Pairs skipped because they left the region where `χ = 1`.
    pub pairs_outside: usize,
    /// Smallest eigenvalue of `Levi(φ±) − bracket·ΣLevi(g̃ⱼ)` over pairs where
    /// every precondition holds.
    pub min_margin_plus: f64,
    pub min_margin_minus: f64,
    /// Smallest eigenvalue of `Levi(φ±)` itself over the same pairs.
    pub min_eig_plus: f64,
    pub min_eig_minus: f64,
    pub violations: Vec<PreconditionViolation>,
    pub slack: f64,
}

impl PhiHessianReport {
    pub fn passed(&self) -> bool {
        self.min_margin_plus >= -self.slack && self.min_margin_minus >= -self.slack
    }
}

/// Evaluates the Hessian lower bound at pairs `(x, y)` of perturbed sample
/// points: `Levi(φ±) ≥ bracket · diag(Σⱼ≥₁ Levi g̃ⱼ(x), Levi g₀(y))`, which
/// holds wherever every `g̃ⱼ` has its gradient form dominated by its complex
/// Hessian. Points where that precondition fails are reported, not counted.
pub fn phi_hessian_check(
    phi: &PhiConstruction,
    sample: &MeasureSample,
    opts: PhiCheckOptions,
) -> Result<PhiHessianReport> {
    let points: Vec<ComplexPoint> = sample.points().map(|(_, _, p)| p).collect();
    if points.is_empty() {
        return Err(Error::arg("phi_hessian_check needs a nonempty sample"));
    }
    let bracket = positivity_bracket(phi.kappa as u32, phi.m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let perturb = |rng: &mut ChaCha8Rng, p: ComplexPoint| {
        let d: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0) * opts.perturbation);
        p + ComplexPoint::from_reals(d)
    };
    let mut report = PhiHessianReport {
        bracket,
        pairs_tested: 0,
        pairs_outside: 0,
        min_margin_plus: f64::INFINITY,
        min_margin_minus: f64::INFINITY,
        min_eig_plus: f64::INFINITY,
        min_eig_minus: f64::INFINITY,
        violations: Vec::new(),
        slack: opts.slack,
    };
    let inner = 2.0 * phi.b_radius;
    for pair in 0..opts.pairs {
        let x = points[rng.random_range(0..points.len())];
        let x = perturb(&mut rng, x);
        let y = points[rng.random_range(0..points.len())];
        let y = perturb(&mut rng, y);
        if x.norm() > inner || y.norm() > inner {
            report.pairs_outside += 1;
            continue;
        }
        let j0 = jet_at(&phi.g0, y);
        let tilde: Vec<Jet> = phi.tilde.iter().map(|g| jet_at(g, x)).collect();
        let mut ok = true;
        for (index, j) in std::iter::once(&j0).chain(tilde.iter()).enumerate() {
            let margin = (j.levi_form() - j.gradient_form()).min_eigenvalue();
            if margin < -opts.slack {
                report.violations.push(PreconditionViolation { pair, index, margin });
                ok = false;
            }
        }
        if !ok {
            continue;
        }
        report.pairs_tested += 1;
        let mut lower = Matrix4::<C64>::zeros();
        for j in &tilde {
            for a in 0..2 {
                for b in 0..2 {
                    lower[(a, b)] += j.levi[(a, b)] * bracket;
                }
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                lower[(a + 2, b + 2)] = j0.levi[(a, b)] * bracket;
            }
        }
        let q = ProductPoint::new(x, y);
        for sign in [Sign::Plus, Sign::Minus] {
            let levi = phi.levi(sign, q);
            let margin = hermitian_min_eig(&(levi - lower));
            let eig = hermitian_min_eig(&levi);
            match sign {
                Sign::Plus => {
                    report.min_margin_plus = report.min_margin_plus.min(margin);
                    report.min_eig_plus = report.min_eig_plus.min(eig);
                }
                Sign::Minus => {
                    report.min_margin_minus = report.min_margin_minus.min(margin);
                    report.min_eig_minus = report.min_eig_minus.min(eig);
                }
            }
        }
    }
    Ok(report)
}
