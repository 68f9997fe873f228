//! Serializable observable definitions, resolved by name.

use super::{coord, holder_cusp, make_bump, Coordinate, Observable};
use crate::error::{Error, Result};
use crate::henon::{ComplexPoint, ComplexSpec, HenonMap};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    Bump {
        center: [ComplexSpec; 2],
        radius: f64,
        height: f64,
    },
    Coord {
        which: Coordinate,
        cutoff_radius: f64,
    },
    HolderCusp {
        center: [ComplexSpec; 2],
        gamma: f64,
    },
    /// `constant + Σ weight·term`.
    Sum {
        terms: Vec<WeightedName>,
        #[serde(default)]
        constant: f64,
    },
    /// `weight·∏ factors`.
    Product {
        factors: Vec<String>,
        #[serde(default = "one")]
        weight: f64,
    },
    /// `v − v∘f`.
    Coboundary {
        of: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedName {
    pub name: String,
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

fn point(c: &[ComplexSpec; 2]) -> ComplexPoint {
    ComplexPoint::new(c[0].into(), c[1].into())
}

/// Builds every named observable in `specs`, resolving references between
/// them. Unknown names and reference cycles are errors.
pub fn build_observables(
    specs: &BTreeMap<String, ObservableSpec>,
    f: &HenonMap,
) -> Result<BTreeMap<String, Observable>> {
    let mut built = BTreeMap::new();
    for name in specs.keys() {
        resolve(name, specs, f, &mut built, &mut Vec::new())?;
    }
    Ok(built)
}

fn resolve(
    name: &str,
    specs: &BTreeMap<String, ObservableSpec>,
    f: &HenonMap,
    built: &mut BTreeMap<String, Observable>,
    stack: &mut Vec<String>,
) -> Result<Observable> {
    if let Some(g) = built.get(name) {
        return Ok(g.clone());
    }
    if stack.iter().any(|s| s == name) {
        return Err(Error::arg(format!(
            "observables.{name}: cyclic reference via {}",
            stack.join(" -> ")
        )));
    }
    let spec = specs
        .get(name)
        .ok_or_else(|| Error::arg(format!("unknown observable `{name}`")))?;
    stack.push(name.to_string());
    let mut dep = |n: &str| resolve(n, specs, f, built, stack);
    let g = match spec {
        ObservableSpec::Bump { center, radius, height } => make_bump(point(center), *radius, *height),
        ObservableSpec::Coord { which, cutoff_radius } => coord(*which, *cutoff_radius),
        ObservableSpec::HolderCusp { center, gamma } => holder_cusp(point(center), *gamma),
        ObservableSpec::Sum { terms, constant } => {
            let parts = terms
                .iter()
                .map(|t| Ok((t.weight, dep(&t.name)?)))
                .collect::<Result<Vec<_>>>()?;
            Observable::sum(&parts, *constant)
        }
        ObservableSpec::Product { factors, weight } => {
            let parts = factors.iter().map(|n| dep(n)).collect::<Result<Vec<_>>>()?;
            Observable::product(&parts).map(|p| p.scale(*weight))
        }
        ObservableSpec::Coboundary { of } => dep(of).map(|v| Observable::coboundary(&v, f)),
    }
    .map_err(|e| match e {
        Error::InvalidArgument(msg) if !msg.starts_with("observables.") => {
            Error::arg(format!("observables.{name}: {msg}"))
        }
        other => other,
    })?
    .with_label(name);
    stack.pop();
    built.insert(name.to_string(), g.clone());
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> BTreeMap<String, ObservableSpec> {
        serde_json::from_str(src).unwrap()
    }

    #[test]
    fn builds_compositions() {
        let f = HenonMap::quadratic(-6.0, 0.1).unwrap();
        let specs = parse(
            r#"{
              "b": {"kind": "bump", "center": [1.0, [0.0, 0.5]], "radius": 1.0, "height": 2.0},
              "x": {"kind": "coord", "which": "re_z", "cutoff_radius": 3.0},
              "s": {"kind": "sum", "terms": [{"name": "b", "weight": 2.0}, {"name": "x", "weight": -1.0}], "constant": 0.5},
              "p": {"kind": "product", "factors": ["b", "x"], "weight": 3.0},
              "c": {"kind": "coboundary", "of": "b"}
            }"#,
        );
        let obs = build_observables(&specs, &f).unwrap();
        let x = ComplexPoint::new(1.2.into(), num_complex::Complex64::new(0.1, 0.4));
        let (b, c) = (obs["b"].eval(x), obs["x"].eval(x));
        assert!((obs["s"].eval(x) - (2.0 * b - c + 0.5)).abs() < 1e-14);
        assert!((obs["p"].eval(x) - 3.0 * b * c).abs() < 1e-14);
        assert!((obs["c"].eval(x) - (b - obs["b"].eval(f.step(x)))).abs() < 1e-14);
        assert_eq!(obs["s"].label(), "s");
    }

    #[test]
    fn rejects_cycles_and_unknown_names() {
        let f = HenonMap::quadratic(-6.0, 0.1).unwrap();
        let cyc = parse(r#"{"a": {"kind": "coboundary", "of": "b"}, "b": {"kind": "product", "factors": ["a"]}}"#);
        let err = build_observables(&cyc, &f).unwrap_err().to_string();
        assert!(err.contains("cyclic"), "{err}");
        let missing = parse(r#"{"a": {"kind": "coboundary", "of": "zz"}}"#);
        assert!(build_observables(&missing, &f).unwrap_err().to_string().contains("zz"));
        let bad = parse(r#"{"a": {"kind": "holder_cusp", "center": [0.0, 0.0], "gamma": 1.5}}"#);
        assert!(build_observables(&bad, &f)
            .unwrap_err()
            .to_string()
            .contains("observables.a"));
    }
}
