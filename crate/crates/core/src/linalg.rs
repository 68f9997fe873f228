//! Fixed-size complex 2×2 matrices used for map derivatives.

use num_complex::Complex64 as C64;
use std::ops::Mul;

/// Row-major complex 2×2 matrix; `m[r][c]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub fn identity() -> Self {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        Mat2([[one, zero], [zero, one]])
    }

    pub fn det(&self) -> C64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[C64::new(0.0, 0.0); 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, entry) in row.iter_mut().enumerate() {
                *entry = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Mat2(out)
    }
}

/// Roots of λ² − tr·λ + det, ordered by decreasing modulus.
///
/// The small root is recovered as `det / λ₁`, which keeps it accurate when
/// the two moduli are many orders of magnitude apart (saddles of high period).
pub fn eigen_from_trace_det(tr: C64, det: C64) -> [C64; 2] {
    let disc = (tr * tr - 4.0 * det).sqrt();
    let plus = tr + disc;
    let minus = tr - disc;
    let big = if plus.norm() >= minus.norm() { plus } else { minus } * 0.5;
    if big.norm() == 0.0 {
        return [big, big];
    }
    [big, det / big]
}
