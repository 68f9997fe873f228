//! Complex Hénon maps: Green functions, periodic-orbit samples of the measure
//! of maximal entropy, multi-order correlation estimates and CLT statistics.

// `!(x > 0.0)` style guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clt;
pub mod error;
pub mod green;
pub mod henon;
pub mod linalg;
pub mod mixing;
pub mod observables;
pub mod sampler;
pub mod sum;

pub use clt::{clt_test, CltReport};
pub use error::{Error, Result};
pub use henon::{
    ComplexPoint, ComplexSpec, Direction, ElementaryFactor, FactorSpec, HenonMap, MapSpec, OrbitSegment, Overflow,
    ProductDegrees, ProductPoint,
};
pub use mixing::{multi_correlation, theoretical_rate, CorrelationQuery, CorrelationReport, DecayFit};
pub use num_complex::Complex64;
pub use observables::{Observable, ScalarField};
pub use sampler::{empirical_integral, sample_mu, MeasureSample, PeriodicOrbit};
