//! Splitting a C² function supported in a ball `D` into a difference of two
//! functions whose gradient forms are dominated by their complex Hessians on `D`:
//! `g = A(g⁺ − g⁻)` with `g⁺ = A⁻¹ρ(g + 2A₁‖x‖²)` and `g⁻ = 2A⁻¹A₁ρ‖x‖²`.

use super::{cutoff, jet_at, measure_c2_parts, norm_squared, Observable};
use crate::error::{Error, Result};
use crate::henon::ComplexPoint;
use rayon::prelude::*;

/// Lattice points per real axis of the verification grid (before clipping to the ball).
pub const GRID_PER_AXIS: usize = 16;
/// Largest Hessian bound tried by the doubling search.
pub const A1_CAP: f64 = 1024.0;

#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub a: f64,
    pub a1: f64,
    pub g_plus: Observable,
    pub g_minus: Observable,
    pub rho: Observable,
    pub d_radius: f64,
    pub dprime_radius: f64,
    /// Measured `[sup, gradient, Hessian]` of the input on the verification grid.
    pub measured_parts: [f64; 3],
    /// Points of the verification grid (all inside `D`).
    pub grid: Vec<ComplexPoint>,
}

/// Tensor lattice of `[−r, r]⁴` clipped to the closed `r`-ball.
pub fn ball_grid(radius: f64, per_axis: usize) -> Vec<ComplexPoint> {
    let step = 2.0 * radius / (per_axis - 1) as f64;
    let coord = |k: usize| -radius + step * k as f64;
    let mut out = Vec::new();
    for a in 0..per_axis {
        for b in 0..per_axis {
            for c in 0..per_axis {
                for d in 0..per_axis {
                    let p = ComplexPoint::from_reals([coord(a), coord(b), coord(c), coord(d)]);
                    if p.norm() <= radius {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

pub fn c2_decompose(g: &Observable, d_radius: f64, dprime_radius: f64) -> Result<DecompositionResult> {
    if !(d_radius > 0.0 && dprime_radius > d_radius) {
        return Err(Error::arg(format!(
            "need 0 < D_radius < Dprime_radius, got {d_radius}, {dprime_radius}"
        )));
    }
    match g.support().radius_about(ComplexPoint::ORIGIN) {
        Some(r) if r <= d_radius => {}
        Some(r) => {
            return Err(Error::arg(format!(
                "support of {} reaches radius {r}, outside D_radius {d_radius}",
                g.label()
            )))
        }
        None => return Err(Error::arg(format!("{} has unbounded support", g.label()))),
    }
    let declared = g.norm_bound();
    if !(declared <= 1.0) {
        return Err(Error::arg(format!("declared C² norm {declared} exceeds 1")));
    }
    let grid = ball_grid(d_radius, GRID_PER_AXIS);
    let measured_parts = measure_c2_parts(g, &grid);
    let measured: f64 = measured_parts.iter().sum();
    if measured > declared * (1.0 + 1e-9) {
        return Err(Error::DeclaredBoundViolated { declared, measured });
    }
    let levi_max = grid
        .par_iter()
        .map(|&x| jet_at(g, x).levi_form().max_abs_eigenvalue())
        .reduce(|| 0.0, f64::max);
    let mut a1 = 1.0;
    while levi_max > a1 {
        a1 *= 2.0;
        if a1 > A1_CAP {
            return Err(Error::HessianBoundCap {
                cap: A1_CAP,
                seen: levi_max,
            });
        }
    }

    let (r, rp) = (d_radius, dprime_radius);
    let rho = cutoff(ComplexPoint::ORIGIN, r, rp)?;
    let sq = norm_squared(ComplexPoint::ORIGIN, rp);
    // gradient forms on D: A ≥ (½ + 2A₁r)²/A₁ for g⁺ and A ≥ 2A₁r² for g⁻ (factor 2 margin);
    // C² norms: ‖g±‖ ≤ 2A⁻¹‖ρ‖(1 + 2A₁‖‖x‖²‖) with ‖‖x‖²‖ = r'² + 2r' + 2 on the D′-ball.
    let a = [
        2.0 * (0.5 + 2.0 * a1 * r).powi(2) / a1,
        4.0 * a1 * r * r,
        2.0 * rho.norm_bound() * (1.0 + 2.0 * a1 * (rp * rp + 2.0 * rp + 2.0)),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let inner = Observable::sum(&[(1.0, g.clone()), (2.0 * a1, sq.clone())], 0.0)?;
    let g_plus = Observable::product(&[rho.clone(), inner])?
        .scale(1.0 / a)
        .with_label(format!("g+[{}]", g.label()));
    let g_minus = Observable::product(&[rho.clone(), sq])?
        .scale(2.0 * a1 / a)
        .with_label(format!("g-[{}]", g.label()));
    Ok(DecompositionResult {
        a,
        a1,
        g_plus,
        g_minus,
        rho,
        d_radius,
        dprime_radius,
        measured_parts,
        grid,
    })
}

impl DecompositionResult {
    /// `A(g⁺ − g⁻)(x)`.
    pub fn reconstruct(&self, x: ComplexPoint) -> f64 {
        self.a * (self.g_plus.eval(x) - self.g_minus.eval(x))
    }

    /// Largest `|A(g⁺ − g⁻) − g|` over the verification grid.
    pub fn reconstruction_error(&self, g: &Observable) -> f64 {
        self.grid
            .par_iter()
            .map(|&x| (self.reconstruct(x) - g.eval(x)).abs())
            .reduce(|| 0.0, f64::max)
    }

    /// Smallest eigenvalue of `complex_hessian(g±) − gradient_form(g±)` over
    /// the verification grid, for `g⁺` and `g⁻`.
    pub fn loewner_margins(&self) -> [f64; 2] {
        [&self.g_plus, &self.g_minus].map(|h| {
            self.grid
                .par_iter()
                .map(|&x| {
                    let j = jet_at(h, x);
                    (j.levi_form() - j.gradient_form()).min_eigenvalue()
                })
                .reduce(|| f64::INFINITY, f64::min)
        })
    }
}
