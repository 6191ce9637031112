use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::geometry::{DiskDomain, PlanePoint};

/// Built-in test functions on `S¹ × X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Observable {
    Constant {
        value: f64,
    },
    /// `x₁` (`axis = 0`) or `x₂` (`axis = 1`).
    Coordinate {
        axis: usize,
    },
    /// `exp(−|x − c|² / 2w²)`.
    Bump {
        center: PlanePoint,
        width: f64,
    },
    /// `cos(2π n t)`, depending on the base point only.
    BaseCos {
        freq: u32,
    },
    /// `cos(2π n t) · sin(a·x + phase)`.
    TrigProduct {
        freq: u32,
        wave: PlanePoint,
        phase: f64,
    },
}

impl Observable {
    #[inline]
    pub fn eval(&self, t: f64, x: PlanePoint) -> f64 {
        match *self {
            Observable::Constant { value } => value,
            Observable::Coordinate { axis } => {
                if axis == 0 {
                    x.x1
                } else {
                    x.x2
                }
            }
            Observable::Bump { center, width } => {
                let d = x - center;
                (-(d.dot(d)) / (2.0 * width * width)).exp()
            }
            Observable::BaseCos { freq } => (TAU * freq as f64 * t).cos(),
            Observable::TrigProduct { freq, wave, phase } => {
                (TAU * freq as f64 * t).cos() * (wave.dot(x) + phase).sin()
            }
        }
    }

    /// `sup |obs|` over `S¹ × X`.
    pub fn sup_norm(&self, domain: &DiskDomain) -> f64 {
        match *self {
            Observable::Constant { value } => value.abs(),
            Observable::Coordinate { axis } => {
                let c = if axis == 0 { domain.center.x1 } else { domain.center.x2 };
                c.abs() + domain.radius
            }
            Observable::Bump { .. } | Observable::BaseCos { .. } | Observable::TrigProduct { .. } => 1.0,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Observable::Constant { value } => format!("const({value})"),
            Observable::Coordinate { axis } => format!("x{}", axis + 1),
            Observable::Bump { center, width } => format!("bump({},{};{})", center.x1, center.x2, width),
            Observable::BaseCos { freq } => format!("cos{freq}t"),
            Observable::TrigProduct { freq, wave, phase } => {
                format!("trig({freq};{},{};{phase})", wave.x1, wave.x2)
            }
        }
    }

    /// The three default observables: both coordinates and a bump at the
    /// center of `X` with width `R/2`.
    pub fn builtins(domain: &DiskDomain) -> Vec<Observable> {
        vec![
            Observable::Coordinate { axis: 0 },
            Observable::Coordinate { axis: 1 },
            Observable::Bump { center: domain.center, width: 0.5 * domain.radius },
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dom() -> DiskDomain {
        DiskDomain { center: PlanePoint::new(0.1, -0.2), radius: 0.5 }
    }

    #[test]
    fn serde_tags() {
        let o = Observable::Bump { center: PlanePoint::new(1.0, 2.0), width: 0.5 };
        let s = serde_json::to_string(&o).unwrap();
        assert!(s.contains("\"kind\":\"bump\""));
        assert_eq!(serde_json::from_str::<Observable>(&s).unwrap(), o);
    }

    proptest! {
        #[test]
        fn bounded_by_sup_norm(t in 0.0f64..1.0, r in 0.0f64..1.0, a in 0.0f64..TAU, which in 0usize..5) {
            let d = dom();
            let x = d.center + PlanePoint::new(d.radius * r * a.cos(), d.radius * r * a.sin());
            let o = [
                Observable::Constant { value: -2.0 },
                Observable::Coordinate { axis: 0 },
                Observable::Coordinate { axis: 1 },
                Observable::BaseCos { freq: 3 },
                Observable::TrigProduct { freq: 2, wave: PlanePoint::new(3.0, -1.0), phase: 0.2 },
            ][which];
            prop_assert!(o.eval(t, x).abs() <= o.sup_norm(&d) + 1e-15);
        }
    }
}
