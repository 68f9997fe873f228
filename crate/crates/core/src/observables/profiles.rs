//! One-dimensional profiles `φ(s)` of the squared distance `s = ‖x − c‖²`.

use super::forms::Jet;
use crate::henon::ComplexPoint;
use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64 as C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `h·exp(1 − 1/(1 − s/r²))` for `s < r²`, zero beyond.
    Bump { radius: f64, height: f64 },
    /// Smooth step equal to 1 for `s ≤ r_in²` and 0 for `s ≥ r_out²`.
    Cutoff { r_in: f64, r_out: f64 },
    /// `φ(s) = s`.
    Square,
}

fn psi(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let e = (-1.0 / t).exp();
    let t2 = t * t;
    (e, e / t2, e * (1.0 / (t2 * t2) - 2.0 / (t2 * t)))
}

/// `S(t) = ψ(t)/(ψ(t) + ψ(1 − t))` with `ψ(t) = e^{−1/t}`, and its first two derivatives.
pub fn smooth_step(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let (a, a1, a2) = psi(t);
    let (b, b1, b2) = psi(1.0 - t);
    let (b1, b2) = (-b1, b2);
    let sum = a + b;
    let n = a1 * b - a * b1;
    let n1 = a2 * b - a * b2;
    let s1 = n / (sum * sum);
    let s2 = n1 / (sum * sum) - 2.0 * n * (a1 + b1) / (sum * sum * sum);
    (a / sum, s1, s2)
}

impl Profile {
    /// `(φ(s), φ'(s), φ''(s))`.
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        match *self {
            Profile::Bump { radius, height } => {
                let r2 = radius * radius;
                if !(s < r2) {
                    return (0.0, 0.0, 0.0);
                }
                let u = 1.0 / (1.0 - s / r2);
                let v = height * (1.0 - u).exp();
                let r4 = r2 * r2;
                (v, -v * u * u / r2, v * (u.powi(4) - 2.0 * u.powi(3)) / r4)
            }
            Profile::Cutoff { r_in, r_out } => {
                if !s.is_finite() {
                    return (0.0, 0.0, 0.0);
                }
                let (i2, o2) = (r_in * r_in, r_out * r_out);
                let k = -1.0 / (o2 - i2);
                let (v, d1, d2) = smooth_step((o2 - s) / (o2 - i2));
                (v, d1 * k, d2 * k * k)
            }
            Profile::Square => (s, 1.0, 0.0),
        }
    }

    /// Outer radius beyond which the profile vanishes.
    pub fn support_radius(&self) -> Option<f64> {
        match *self {
            Profile::Bump { radius, .. } => Some(radius),
            Profile::Cutoff { r_out, .. } => Some(r_out),
            Profile::Square => None,
        }
    }

    /// Jet of `φ(‖x − c‖²)` at `x`.
    pub fn jet(&self, center: ComplexPoint, x: ComplexPoint) -> Jet {
        let d = x - center;
        let (v, p1, p2) = self.eval(d.norm_sqr());
        let dc = Vector2::new(d.z.conj(), d.w.conj());
        let dv = Vector2::new(d.z, d.w);
        Jet {
            value: v,
            grad: dc * C64::from(p1),
            levi: dc * dv.transpose() * C64::from(p2) + Matrix2::identity() * C64::from(p1),
            hol: dc * dc.transpose() * C64::from(p2),
        }
    }

    /// Suprema of `|φ|`, `|∇φ|` and `‖D²φ‖` over the ball of radius `extent`
    /// (the support radius when bounded), by dense sampling in `s`.
    ///
    /// The real Hessian of `φ(‖x‖²)` has eigenvalues `2φ'` and `2φ' + 4sφ''`,
    /// and `|∇| = 2|φ'|√s`.
    pub fn norm_parts(&self, extent: f64) -> [f64; 3] {
        const SAMPLES: usize = 20_000;
        let rmax = self.support_radius().unwrap_or(extent);
        let mut parts = [0.0_f64; 3];
        for k in 0..=SAMPLES {
            let r = rmax * k as f64 / SAMPLES as f64;
            let s = r * r;
            let (v, d1, d2) = self.eval(s);
            parts[0] = parts[0].max(v.abs());
            parts[1] = parts[1].max(2.0 * d1.abs() * r);
            parts[2] = parts[2].max((2.0 * d1).abs().max((2.0 * d1 + 4.0 * s * d2).abs()));
        }
        // sampling slack; the profiles vary on scales far above the spacing
        parts.map(|p| p * (1.0 + 1e-3))
    }
}
