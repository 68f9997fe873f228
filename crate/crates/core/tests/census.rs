//! Periodic-point counts for the real horseshoe, cross-checked against plain
//! Newton on `fⁿ(x) − x` from a dense real grid.

use henon_mixing::green::escape_radius;
use henon_mixing::sampler::{find_periodic, sample_mu, DEFAULT_TOL};
use henon_mixing::{ComplexPoint, HenonMap};
use std::time::Instant;

fn horseshoe() -> HenonMap {
    HenonMap::quadratic(-6.0, 0.1).unwrap()
}

/// Real Newton on `fⁿ(x) − x` in `(z, w) ∈ ℝ²` with the Jacobian of `fⁿ`
/// accumulated along the orbit.
fn brute_force_fixed_points(n: usize, per_axis: usize, half: f64) -> Vec<[f64; 2]> {
    let step = |x: [f64; 2]| [x[0] * x[0] - 6.0 - 0.1 * x[1], x[0]];
    let mut found: Vec<[f64; 2]> = Vec::new();
    for i in 0..per_axis {
        for j in 0..per_axis {
            let mut x = [
                -half + 2.0 * half * i as f64 / (per_axis - 1) as f64,
                -half + 2.0 * half * j as f64 / (per_axis - 1) as f64,
            ];
            let mut converged = false;
            for _ in 0..60 {
                let mut y = x;
                let mut m = [[1.0, 0.0], [0.0, 1.0]];
                for _ in 0..n {
                    let jac = [[2.0 * y[0], -0.1], [1.0, 0.0]];
                    m = [
                        [
                            jac[0][0] * m[0][0] + jac[0][1] * m[1][0],
                            jac[0][0] * m[0][1] + jac[0][1] * m[1][1],
                        ],
                        [
                            jac[1][0] * m[0][0] + jac[1][1] * m[1][0],
                            jac[1][0] * m[0][1] + jac[1][1] * m[1][1],
                        ],
                    ];
                    y = step(y);
                }
                let r = [y[0] - x[0], y[1] - x[1]];
                if !(r[0].is_finite() && r[1].is_finite()) || x[0].abs() > 1e3 || x[1].abs() > 1e3 {
                    break;
                }
                if r[0].abs().max(r[1].abs()) < 1e-11 {
                    converged = true;
                    break;
                }
                let a = [[m[0][0] - 1.0, m[0][1]], [m[1][0], m[1][1] - 1.0]];
                let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
                if det == 0.0 {
                    break;
                }
                x[0] -= (a[1][1] * r[0] - a[0][1] * r[1]) / det;
                x[1] -= (-a[1][0] * r[0] + a[0][0] * r[1]) / det;
            }
            if converged
                && !found
                    .iter()
                    .any(|p| (p[0] - x[0]).abs().max((p[1] - x[1]).abs()) < 1e-8)
            {
                found.push(x);
            }
        }
    }
    found
}

#[test]
fn census_periods_one_to_eight() {
    let f = horseshoe();
    let start = Instant::now();
    for n in 1..=8usize {
        let s = sample_mu(&f, n, 400 * n * n, 7).unwrap();
        assert_eq!(s.point_count(), 1 << n, "period {n}: {:?}", s.stats);
        assert_eq!(s.excluded_non_saddles, 0);
        assert!(s.orbits.iter().all(|o| o.is_saddle() && !o.multiple));
    }
    assert!(start.elapsed().as_secs() < 120);
}

#[test]
fn census_matches_brute_force() {
    let f = horseshoe();
    for n in 1..=5usize {
        let oracle = brute_force_fixed_points(n, 200, 4.0);
        assert_eq!(oracle.len(), 1 << n, "oracle at period {n}");
        let s = find_periodic(&f, n, 400 * n * n, escape_radius(&f), DEFAULT_TOL, 1).unwrap();
        let ours: Vec<ComplexPoint> = s.orbits.iter().flat_map(|o| o.points.iter().copied()).collect();
        assert_eq!(ours.len(), oracle.len());
        for p in &oracle {
            let target = ComplexPoint::real(p[0], p[1]);
            assert!(
                ours.iter().any(|q| q.dist(&target) < 1e-8),
                "period {n}: missing {target}"
            );
        }
    }
}
