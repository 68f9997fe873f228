//! Second-order complex jets of real functions on ℂ² and the Hermitian
//! forms built from them.
//!
//! For a real `g`, the jet stores `∂g/∂ζᵢ`, the Levi matrix `∂²g/∂ζᵢ∂ζ̄ⱼ`
//! (Hermitian) and the holomorphic Hessian `∂²g/∂ζᵢ∂ζⱼ` (symmetric). Those
//! three objects determine the real gradient and Hessian, and they transform
//! simply under sums, products, post-composition and holomorphic pullback.

use crate::linalg::Mat2;
use nalgebra::{Matrix2, Matrix4, Vector2};
use num_complex::Complex64 as C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vector2<C64>,
    pub levi: Matrix2<C64>,
    pub hol: Matrix2<C64>,
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        Jet {
            value,
            grad: Vector2::zeros(),
            levi: Matrix2::zeros(),
            hol: Matrix2::zeros(),
        }
    }

    pub fn scale(&self, t: f64) -> Self {
        Jet {
            value: self.value * t,
            grad: self.grad * C64::from(t),
            levi: self.levi * C64::from(t),
            hol: self.hol * C64::from(t),
        }
    }

    pub fn add(&self, other: &Jet) -> Self {
        Jet {
            value: self.value + other.value,
            grad: self.grad + other.grad,
            levi: self.levi + other.levi,
            hol: self.hol + other.hol,
        }
    }

    pub fn add_constant(&self, c: f64) -> Self {
        Jet {
            value: self.value + c,
            ..*self
        }
    }

    pub fn mul(&self, other: &Jet) -> Self {
        let (u, v) = (C64::from(self.value), C64::from(other.value));
        let du = self.grad;
        let dv = other.grad;
        Jet {
            value: self.value * other.value,
            grad: du * v + dv * u,
            levi: self.levi * v
                + other.levi * u
                + du * dv.map(|c| c.conj()).transpose()
                + dv * du.map(|c| c.conj()).transpose(),
            hol: self.hol * v + other.hol * u + du * dv.transpose() + dv * du.transpose(),
        }
    }

    /// Jet of `φ∘g` given `(φ, φ', φ'')` evaluated at `g`.
    pub fn compose(&self, phi: (f64, f64, f64)) -> Self {
        let (p0, p1, p2) = phi;
        let d = self.grad;
        Jet {
            value: p0,
            grad: d * C64::from(p1),
            levi: self.levi * C64::from(p1) + d * d.map(|c| c.conj()).transpose() * C64::from(p2),
            hol: self.hol * C64::from(p1) + d * d.transpose() * C64::from(p2),
        }
    }

    /// Jet of `g∘F` at `x`, where this is the jet of `g` at `F(x)`, `jac` is
    /// `DF(x)` and `second[k]` is the holomorphic Hessian of the component `Fₖ`.
    pub fn pullback(&self, jac: &Matrix2<C64>, second: &[Matrix2<C64>; 2]) -> Self {
        let jt = jac.transpose();
        Jet {
            value: self.value,
            grad: jt * self.grad,
            levi: jt * self.levi * jac.map(|c| c.conj()),
            hol: jt * self.hol * jac + second[0] * self.grad[0] + second[1] * self.grad[1],
        }
    }

    /// Real gradient in `(Re z, Im z, Re w, Im w)`.
    pub fn real_gradient(&self) -> [f64; 4] {
        [
            2.0 * self.grad[0].re,
            -2.0 * self.grad[0].im,
            2.0 * self.grad[1].re,
            -2.0 * self.grad[1].im,
        ]
    }

    /// Real Hessian in `(Re z, Im z, Re w, Im w)`.
    pub fn real_hessian(&self) -> Matrix4<f64> {
        let (l, q) = (&self.levi, &self.hol);
        let mut h = Matrix4::zeros();
        for i in 0..2 {
            for j in 0..2 {
                h[(2 * i, 2 * j)] = 2.0 * (q[(i, j)] + l[(i, j)]).re;
                h[(2 * i + 1, 2 * j + 1)] = 2.0 * (l[(i, j)] - q[(i, j)]).re;
                h[(2 * i, 2 * j + 1)] = 2.0 * (l[(i, j)].im - q[(i, j)].im);
                h[(2 * i + 1, 2 * j)] = 2.0 * (-l[(i, j)].im - q[(i, j)].im);
            }
        }
        h
    }

    /// Inverse of [`real_gradient`](Self::real_gradient) / [`real_hessian`](Self::real_hessian).
    pub fn from_real(value: f64, grad: [f64; 4], hess: &Matrix4<f64>) -> Self {
        let mut g = Vector2::zeros();
        let mut levi = Matrix2::zeros();
        let mut hol = Matrix2::zeros();
        for i in 0..2 {
            g[i] = C64::new(grad[2 * i], -grad[2 * i + 1]) * 0.5;
            for j in 0..2 {
                let xx = hess[(2 * i, 2 * j)];
                let yy = hess[(2 * i + 1, 2 * j + 1)];
                let xy = hess[(2 * i, 2 * j + 1)];
                let yx = hess[(2 * i + 1, 2 * j)];
                levi[(i, j)] = C64::new(xx + yy, xy - yx) * 0.25;
                hol[(i, j)] = C64::new(xx - yy, -(xy + yx)) * 0.25;
            }
        }
        Jet {
            value,
            grad: g,
            levi,
            hol,
        }
    }

    /// Euclidean norm of the real gradient.
    pub fn gradient_norm(&self) -> f64 {
        2.0 * (self.grad[0].norm_sqr() + self.grad[1].norm_sqr()).sqrt()
    }

    /// Operator norm of the real Hessian.
    pub fn hessian_norm(&self) -> f64 {
        let h = self.real_hessian();
        let h = (h + h.transpose()) * 0.5;
        h.symmetric_eigenvalues().iter().fold(0.0, |m, e| m.max(e.abs()))
    }

    pub fn levi_form(&self) -> HermitianForm {
        HermitianForm::new(self.levi)
    }

    pub fn gradient_form(&self) -> HermitianForm {
        HermitianForm::new(self.grad * self.grad.map(|c| c.conj()).transpose())
    }
}

/// Coefficient matrix `[aᵢⱼ]` of a real (1,1)-form `i Σ aᵢⱼ dζᵢ ∧ dζ̄ⱼ` on ℂ².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitianForm(pub Matrix2<C64>);

impl HermitianForm {
    /// Symmetrizes `m` to `(m + m*)/2`.
    pub fn new(m: Matrix2<C64>) -> Self {
        HermitianForm((m + m.adjoint()) * C64::from(0.5))
    }

    pub fn zero() -> Self {
        HermitianForm(Matrix2::zeros())
    }

    pub fn identity() -> Self {
        HermitianForm(Matrix2::identity())
    }

    pub fn scale(&self, t: f64) -> Self {
        HermitianForm(self.0 * C64::from(t))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (self.0 - self.0.adjoint()).iter().all(|c| c.norm() <= tol)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let a = self.0[(0, 0)].re;
        let d = self.0[(1, 1)].re;
        let b = self.0[(0, 1)];
        let mean = 0.5 * (a + d);
        let half = 0.5 * (a - d);
        let r = (half * half + b.norm_sqr()).sqrt();
        [mean - r, mean + r]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        let [lo, hi] = self.eigenvalues();
        lo.abs().max(hi.abs())
    }
}

impl std::ops::Sub for HermitianForm {
    type Output = HermitianForm;
    fn sub(self, rhs: HermitianForm) -> HermitianForm {
        HermitianForm(self.0 - rhs.0)
    }
}

impl std::ops::Add for HermitianForm {
    type Output = HermitianForm;
    fn add(self, rhs: HermitianForm) -> HermitianForm {
        HermitianForm(self.0 + rhs.0)
    }
}

/// `A ≤ B` in the Loewner order, up to `slack`.
pub fn loewner_leq(a: &HermitianForm, b: &HermitianForm, slack: f64) -> bool {
    (*b - *a).min_eigenvalue() >= -slack
}

pub(crate) fn to_matrix(m: &Mat2) -> Matrix2<C64> {
    Matrix2::new(m.0[0][0], m.0[0][1], m.0[1][0], m.0[1][1])
}

/// Holomorphic Hessians of the two components of a factor step.
pub(crate) fn factor_second(p2: C64, a: C64, inverse: bool) -> [Matrix2<C64>; 2] {
    if inverse {
        [Matrix2::zeros(), Matrix2::new(ZERO, ZERO, ZERO, p2 / a)]
    } else {
        [Matrix2::new(p2, ZERO, ZERO, ZERO), Matrix2::zeros()]
    }
}
