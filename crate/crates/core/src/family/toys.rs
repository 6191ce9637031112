//! Small fiber families with known behaviour, used as oracles and as
//! planted counterexamples for the diagnostics.

use std::f64::consts::TAU;
use std::sync::Arc;

use super::maps::{AffineMap, FiberMaps, PlaneMap};
use crate::geometry::{DiskDomain, Mat2, PlanePoint};

/// `f_t = f` for every `t`.
#[derive(Clone)]
pub struct ConstantFamily {
    pub map: Arc<dyn PlaneMap>,
    pub domain: DiskDomain,
    pub k: u32,
}

impl ConstantFamily {
    pub fn new(map: Arc<dyn PlaneMap>, domain: DiskDomain, k: u32) -> Self {
        ConstantFamily { map, domain, k }
    }

    /// `x ↦ p + r (x − p)`.
    pub fn contraction(p: PlanePoint, r: f64, domain: DiskDomain, k: u32) -> Self {
        let map = AffineMap::similarity(r, (1.0 - r) * p);
        ConstantFamily::new(Arc::new(map), domain, k)
    }
}

impl FiberMaps for ConstantFamily {
    fn k(&self) -> u32 {
        self.k
    }

    fn domain(&self) -> DiskDomain {
        self.domain
    }

    fn eval(&self, _t: f64, x: PlanePoint) -> PlanePoint {
        self.map.apply(x)
    }

    fn jacobian(&self, _t: f64, x: PlanePoint) -> Mat2 {
        self.map.jacobian(x)
    }

    fn lipschitz(&self, _t: f64) -> f64 {
        self.map.lipschitz()
    }

    fn inverse_lipschitz(&self, _t: f64) -> f64 {
        self.map.inverse_lipschitz()
    }

    fn t_lipschitz(&self) -> f64 {
        0.0
    }

    fn generator_angles(&self) -> Vec<f64> {
        vec![0.0]
    }

    fn name(&self) -> String {
        "constant".into()
    }

    fn t_derivative(&self, _t: f64, _x: PlanePoint) -> PlanePoint {
        PlanePoint::ORIGIN
    }

    fn inverse(&self, _t: f64, y: PlanePoint) -> crate::Result<PlanePoint> {
        self.map.invert(y)
    }
}

/// `f_t(x) = A x + r (cos 2πt, sin 2πt)`.
///
/// For `‖A‖ < 1` the invariant graph has the closed form
/// `γ(𝐭) = Σⱼ Aʲ c(t₋ⱼ)`.
#[derive(Debug, Clone, Copy)]
pub struct CircleDriftFamily {
    pub a: Mat2,
    pub r: f64,
    pub domain: DiskDomain,
    pub k: u32,
}

impl CircleDriftFamily {
    pub fn drift(&self, t: f64) -> PlanePoint {
        let (s, c) = (TAU * t).sin_cos();
        PlanePoint::new(self.r * c, self.r * s)
    }
}

impl FiberMaps for CircleDriftFamily {
    fn k(&self) -> u32 {
        self.k
    }

    fn domain(&self) -> DiskDomain {
        self.domain
    }

    fn eval(&self, t: f64, x: PlanePoint) -> PlanePoint {
        self.a.apply(x) + self.drift(t)
    }

    fn jacobian(&self, _t: f64, _x: PlanePoint) -> Mat2 {
        self.a
    }

    fn lipschitz(&self, _t: f64) -> f64 {
        self.a.norm()
    }

    fn inverse_lipschitz(&self, _t: f64) -> f64 {
        self.a.inverse().map_or(f64::INFINITY, |m| m.norm())
    }

    fn t_lipschitz(&self) -> f64 {
        TAU * self.r
    }

    fn generator_angles(&self) -> Vec<f64> {
        vec![0.0, 0.25, 0.5, 0.75]
    }

    fn name(&self) -> String {
        "circle-drift".into()
    }

    fn t_derivative(&self, t: f64, _x: PlanePoint) -> PlanePoint {
        let (s, c) = (TAU * t).sin_cos();
        PlanePoint::new(-TAU * self.r * s, TAU * self.r * c)
    }
}

/// `f_t = maps[⌊n t⌋]`: piecewise constant, hence discontinuous, in `t`.
#[derive(Clone)]
pub struct SwitchingFamily {
    pub maps: Vec<Arc<dyn PlaneMap>>,
    pub domain: DiskDomain,
    pub k: u32,
}

impl SwitchingFamily {
    fn piece(&self, t: f64) -> &Arc<dyn PlaneMap> {
        let n = self.maps.len();
        &self.maps[((t * n as f64) as usize).min(n - 1)]
    }
}

impl FiberMaps for SwitchingFamily {
    fn k(&self) -> u32 {
        self.k
    }

    fn domain(&self) -> DiskDomain {
        self.domain
    }

    fn eval(&self, t: f64, x: PlanePoint) -> PlanePoint {
        self.piece(t).apply(x)
    }

    fn jacobian(&self, t: f64, x: PlanePoint) -> Mat2 {
        self.piece(t).jacobian(x)
    }

    fn lipschitz(&self, t: f64) -> f64 {
        self.piece(t).lipschitz()
    }

    fn inverse_lipschitz(&self, t: f64) -> f64 {
        self.piece(t).inverse_lipschitz()
    }

    fn t_lipschitz(&self) -> f64 {
        f64::INFINITY
    }

    fn generator_angles(&self) -> Vec<f64> {
        let n = self.maps.len() as f64;
        (0..self.maps.len()).map(|i| (i as f64 + 0.5) / n).collect()
    }

    fn name(&self) -> String {
        "switching".into()
    }

    fn t_derivative(&self, _t: f64, _x: PlanePoint) -> PlanePoint {
        PlanePoint::ORIGIN
    }

    fn inverse(&self, t: f64, y: PlanePoint) -> crate::Result<PlanePoint> {
        self.piece(t).invert(y)
    }
}

/// Contracts each half plane `x₁ < 0`, `x₁ ≥ 0` toward its own well, so
/// both disks around the wells are invariant.
#[derive(Debug, Clone, Copy)]
pub struct TwoWellMap {
    pub wells: [PlanePoint; 2],
    pub rate: f64,
}

impl TwoWellMap {
    fn well(&self, x: PlanePoint) -> PlanePoint {
        if x.x1 < 0.0 {
            self.wells[0]
        } else {
            self.wells[1]
        }
    }
}

impl PlaneMap for TwoWellMap {
    fn apply(&self, x: PlanePoint) -> PlanePoint {
        let p = self.well(x);
        p + self.rate * (x - p)
    }

    fn jacobian(&self, _x: PlanePoint) -> Mat2 {
        Mat2::diag(self.rate, self.rate)
    }

    fn lipschitz(&self) -> f64 {
        // the jump between half planes breaks the global Lipschitz bound
        f64::INFINITY
    }

    fn inverse_lipschitz(&self) -> f64 {
        1.0 / self.rate
    }
}
