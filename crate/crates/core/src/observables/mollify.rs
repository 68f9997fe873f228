//! Convolution with a product bump kernel of width ε, evaluated by a fixed
//! 5-node Gauss–Legendre tensor rule (5⁴ = 625 samples per evaluation).

use super::forms::Jet;
use super::{jet_at, measure_c2_parts, NormKind, Observable, ScalarField, Support};
use crate::error::{Error, Result};
use crate::henon::ComplexPoint;
use nalgebra::Matrix4;
use rayon::prelude::*;
use std::sync::Arc;

const NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Quadrature weights for the kernel and its first two derivatives.
///
/// `w0` sums to 1; `w1` has first moment −1; `w2` sums to 0 with second
/// moment 2. These are the moments of `k`, `k'`, `k''` for a unit-mass kernel,
/// so the rule differentiates affine and quadratic functions exactly.
#[derive(Debug, Clone, Copy)]
struct Weights {
    w0: [f64; 5],
    w1: [f64; 5],
    w2: [f64; 5],
}

fn kernel(t: f64) -> (f64, f64, f64) {
    let u = 1.0 - t * t;
    if u <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let k = (-1.0 / u).exp();
    let k1 = -2.0 * t * k / (u * u);
    let k2 = -2.0 * k / (u * u) - 2.0 * t * k1 / (u * u) - 8.0 * t * t * k / (u * u * u);
    (k, k1, k2)
}

fn weights() -> Weights {
    let mut w0 = [0.0; 5];
    let mut w1 = [0.0; 5];
    let mut w2 = [0.0; 5];
    for i in 0..5 {
        let (k, k1, k2) = kernel(NODES[i]);
        w0[i] = GAUSS_WEIGHTS[i] * k;
        w1[i] = GAUSS_WEIGHTS[i] * k1;
        w2[i] = GAUSS_WEIGHTS[i] * k2;
    }
    let m0: f64 = w0.iter().sum();
    w0.iter_mut().for_each(|w| *w /= m0);
    let m1: f64 = (0..5).map(|i| w1[i] * NODES[i]).sum();
    w1.iter_mut().for_each(|w| *w /= -m1);
    let s2: f64 = w2.iter().sum();
    let gsum: f64 = GAUSS_WEIGHTS.iter().sum();
    for i in 0..5 {
        w2[i] -= s2 * GAUSS_WEIGHTS[i] / gsum;
    }
    let m2: f64 = (0..5).map(|i| w2[i] * NODES[i] * NODES[i]).sum();
    w2.iter_mut().for_each(|w| *w *= 2.0 / m2);
    Weights { w0, w1, w2 }
}

#[derive(Debug)]
struct MollifiedField {
    inner: Observable,
    epsilon: f64,
    weights: Weights,
}

impl MollifiedField {
    /// Visits the 625 quadrature samples with `g(x − εt) − g(x)`.
    #[allow(clippy::needless_range_loop)]
    fn for_each_sample(&self, x: ComplexPoint, mut visit: impl FnMut([usize; 4], f64)) -> f64 {
        let base = self.inner.eval(x);
        let r = x.to_reals();
        let e = self.epsilon;
        for a in 0..5 {
            for b in 0..5 {
                for c in 0..5 {
                    for d in 0..5 {
                        let p = ComplexPoint::from_reals([
                            r[0] - e * NODES[a],
                            r[1] - e * NODES[b],
                            r[2] - e * NODES[c],
                            r[3] - e * NODES[d],
                        ]);
                        visit([a, b, c, d], self.inner.eval(p) - base);
                    }
                }
            }
        }
        base
    }
}

impl MollifiedField {
    /// Exact derivatives of the quadrature rule: `Σ w₀ Dg(x − εt)`.
    fn sampled_jet(&self, x: ComplexPoint) -> Jet {
        let w = &self.weights.w0;
        let r = x.to_reals();
        let e = self.epsilon;
        let mut acc: Option<Jet> = None;
        for a in 0..5 {
            for b in 0..5 {
                for c in 0..5 {
                    for d in 0..5 {
                        let p = ComplexPoint::from_reals([
                            r[0] - e * NODES[a],
                            r[1] - e * NODES[b],
                            r[2] - e * NODES[c],
                            r[3] - e * NODES[d],
                        ]);
                        let j = jet_at(&self.inner, p).scale(w[a] * w[b] * w[c] * w[d]);
                        acc = Some(match acc {
                            None => j,
                            Some(s) => s.add(&j),
                        });
                    }
                }
            }
        }
        let mut out = acc.expect("625 samples");
        out.value = self.value(x);
        out
    }

    /// Derivatives moved onto the kernel, `ε⁻¹ Σ w₁ g` and `ε⁻² Σ w₂ g`, for
    /// inner functions without derivatives.
    fn transferred_jet(&self, x: ComplexPoint) -> Jet {
        let Weights { w0, w1, w2 } = &self.weights;
        let mut val = 0.0;
        let mut grad = [0.0; 4];
        let mut hess = Matrix4::<f64>::zeros();
        let base = self.for_each_sample(x, |idx, v| {
            let k0 = idx.map(|i| w0[i]);
            let k1 = idx.map(|i| w1[i]);
            let k2 = idx.map(|i| w2[i]);
            let all: f64 = k0.iter().product();
            val += all * v;
            for i in 0..4 {
                let others: f64 = (0..4).filter(|&m| m != i).map(|m| k0[m]).product();
                grad[i] += k1[i] * others * v;
                hess[(i, i)] += k2[i] * others * v;
                for j in (i + 1)..4 {
                    let rest: f64 = (0..4).filter(|&m| m != i && m != j).map(|m| k0[m]).product();
                    hess[(i, j)] += k1[i] * k1[j] * rest * v;
                }
            }
        });
        let e = self.epsilon;
        for i in 0..4 {
            for j in (i + 1)..4 {
                hess[(j, i)] = hess[(i, j)];
            }
        }
        Jet::from_real(base + val, grad.map(|g| g / e), &(hess / (e * e)))
    }
}

impl ScalarField for MollifiedField {
    fn value(&self, x: ComplexPoint) -> f64 {
        let w = &self.weights.w0;
        let mut acc = 0.0;
        let base = self.for_each_sample(x, |i, v| acc += w[i[0]] * w[i[1]] * w[i[2]] * w[i[3]] * v);
        base + acc
    }

    fn jet(&self, x: ComplexPoint) -> Option<Jet> {
        if self.inner.has_jet() {
            Some(self.sampled_jet(x))
        } else {
            Some(self.transferred_jet(x))
        }
    }

    fn has_jet(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub struct Mollified {
    pub observable: Observable,
    pub epsilon: f64,
    /// `max |g_ε − g|` over the probe set.
    pub sup_error: f64,
    /// Measured `[sup, gradient, Hessian]` of `g_ε` over the probe set.
    pub c2_parts: [f64; 3],
    pub c2_norm: f64,
    pub probes: usize,
}

/// Probe set: a 7⁴ lattice over the support box (radius 1.5 when the support
/// is unbounded), fixed so errors at different ε are compared pointwise, plus a 5⁴ lattice at offsets `ε·{−1, −½, 0, ½, 1}` around
/// the support center, where non-smooth features are placed.
pub fn probe_points(g: &Observable, epsilon: f64) -> Vec<ComplexPoint> {
    let support = g.support();
    let c = support.center.to_reals();
    let half = support.radius.unwrap_or(1.5);
    let mut out = Vec::with_capacity(7usize.pow(4) + 5usize.pow(4));
    let mut lattice = |offsets: &[f64]| {
        for &a in offsets {
            for &b in offsets {
                for &cc in offsets {
                    for &d in offsets {
                        out.push(ComplexPoint::from_reals([c[0] + a, c[1] + b, c[2] + cc, c[3] + d]));
                    }
                }
            }
        }
    };
    let coarse: Vec<f64> = (0..7).map(|k| -half + 2.0 * half * k as f64 / 6.0).collect();
    lattice(&coarse);
    let fine: Vec<f64> = [-1.0, -0.5, 0.0, 0.5, 1.0].iter().map(|t| t * epsilon).collect();
    lattice(&fine);
    out
}

pub fn mollify(g: &Observable, epsilon: f64) -> Result<Mollified> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::arg(format!("epsilon must be positive, got {epsilon}")));
    }
    let field = MollifiedField {
        inner: g.clone(),
        epsilon,
        weights: weights(),
    };
    let support = Support {
        center: g.support().center,
        radius: g.support().radius.map(|r| r + 2.0 * epsilon),
    };
    let raw = Observable::new(
        Arc::new(field),
        2.0,
        f64::INFINITY,
        NormKind::Estimated,
        support,
        format!("moll({}, {epsilon})", g.label()),
    )?;
    let probes = probe_points(g, epsilon);
    let sup_error = probes
        .par_iter()
        .map(|&x| (raw.eval(x) - g.eval(x)).abs())
        .reduce(|| 0.0, f64::max);
    let c2_parts = measure_c2_parts(&raw, &probes);
    let c2_norm = c2_parts.iter().sum();
    Ok(Mollified {
        observable: raw.with_norm(c2_norm, Some(c2_parts), NormKind::Estimated),
        epsilon,
        sup_error,
        c2_parts,
        c2_norm,
        probes: probes.len(),
    })
}
