//! Shared fixtures for the benchmarks.

use henon_mixing::observables::make_bump;
use henon_mixing::{sample_mu, ComplexPoint, HenonMap, MeasureSample, Observable};

pub fn horseshoe() -> HenonMap {
    HenonMap::quadratic(-6.0, 0.1).expect("valid map")
}

pub fn sample(period: usize, budget: usize) -> MeasureSample {
    sample_mu(&horseshoe(), period, budget, 7).expect("saddles found")
}

pub fn bump(re_z: f64, re_w: f64) -> Observable {
    make_bump(ComplexPoint::real(re_z, re_w), 1.5, 1.0).expect("valid bump")
}
