//! C¹-small perturbations `f̃_t = f_t + ε V(t, x)` of a fiber family, the
//! distances between families and the re-run diagnostic suite.

mod metrics;
mod suite;

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{FamilyConfig, FiberMaps, OrientedBox, PlateauFamily};
use crate::geometry::{DiskDomain, Mat2, PlanePoint};
use crate::{par, rng};

pub use metrics::{c1_distance, dominated_splitting_check, C1Distance, DS_STEP};
pub use suite::{robustness_suite, run_diagnostics, SuiteBudget, SuiteReport};

/// Smallest accepted `det Df̃ / det Df` on the validity samples.
pub const MIN_DET_RATIO: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub eps: f64,
    pub seed: u64,
    #[serde(default = "default_modes")]
    pub modes: usize,
}

fn default_modes() -> usize {
    4
}

impl PerturbationSpec {
    pub fn new(eps: f64, seed: u64) -> Self {
        PerturbationSpec { eps, seed, modes: default_modes() }
    }
}

/// One term `amp · cos(2π freq t + wave·(x − c) + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrigMode {
    pub amp: PlanePoint,
    pub freq: u32,
    pub wave: PlanePoint,
    pub phase: f64,
}

/// A random trigonometric vector field normalized so that
/// `Σ |amp| · |wave| = 1`, hence `sup ‖DV‖ ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigField {
    pub center: PlanePoint,
    pub modes: Vec<TrigMode>,
}

impl TrigField {
    /// Wave numbers have length in `[0.5, 2] / R` and time frequencies in
    /// `1..=3`.
    pub fn random(seed: u64, modes: usize, domain: &DiskDomain) -> Self {
        let mut r = rng::stream(rng::derive(seed, 0x7E27), 0);
        let mut raw: Vec<(f64, TrigMode)> = (0..modes)
            .map(|_| {
                let freq = r.random_range(1..=3u32);
                let wa: f64 = r.random_range(0.0..TAU);
                let wn = r.random_range(0.5..2.0) / domain.radius;
                let aa: f64 = r.random_range(0.0..TAU);
                let w = r.random_range(0.5..1.0);
                let phase = r.random_range(0.0..TAU);
                let mode = TrigMode {
                    amp: PlanePoint::new(aa.cos(), aa.sin()),
                    freq,
                    wave: PlanePoint::new(wn * wa.cos(), wn * wa.sin()),
                    phase,
                };
                (w, mode)
            })
            .collect();
        let total: f64 = raw.iter().map(|(w, m)| w * m.wave.norm()).sum();
        for (w, m) in raw.iter_mut() {
            m.amp = (*w / total) * m.amp;
        }
        TrigField { center: domain.center, modes: raw.into_iter().map(|(_, m)| m).collect() }
    }

    #[inline]
    fn angle(&self, m: &TrigMode, t: f64, x: PlanePoint) -> f64 {
        TAU * m.freq as f64 * t + m.wave.dot(x - self.center) + m.phase
    }
}

/// The direction `V` of a perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PerturbationField {
    Trig(TrigField),
    /// A constant translation.
    Shift {
        by: PlanePoint,
    },
}

impl PerturbationField {
    pub fn value(&self, t: f64, x: PlanePoint) -> PlanePoint {
        match self {
            PerturbationField::Trig(f) => {
                f.modes.iter().fold(PlanePoint::ORIGIN, |acc, m| acc + f.angle(m, t, x).cos() * m.amp)
            }
            PerturbationField::Shift { by } => *by,
        }
    }

    pub fn jacobian(&self, t: f64, x: PlanePoint) -> Mat2 {
        match self {
            PerturbationField::Trig(f) => f.modes.iter().fold(Mat2::ZERO, |acc, m| {
                let s = -f.angle(m, t, x).sin();
                acc.add(
                    &Mat2::new(m.amp.x1 * m.wave.x1, m.amp.x1 * m.wave.x2, m.amp.x2 * m.wave.x1, m.amp.x2 * m.wave.x2)
                        .scale(s),
                )
            }),
            PerturbationField::Shift { .. } => Mat2::ZERO,
        }
    }

    pub fn t_derivative(&self, t: f64, x: PlanePoint) -> PlanePoint {
        match self {
            PerturbationField::Trig(f) => f
                .modes
                .iter()
                .fold(PlanePoint::ORIGIN, |acc, m| acc + (-TAU * m.freq as f64 * f.angle(m, t, x).sin()) * m.amp),
            PerturbationField::Shift { .. } => PlanePoint::ORIGIN,
        }
    }

    /// Upper bound on `sup |V|`.
    pub fn value_bound(&self) -> f64 {
        match self {
            PerturbationField::Trig(f) => f.modes.iter().map(|m| m.amp.norm()).sum(),
            PerturbationField::Shift { by } => by.norm(),
        }
    }

    /// Upper bound on `sup ‖DV‖`.
    pub fn jacobian_bound(&self) -> f64 {
        match self {
            PerturbationField::Trig(f) => f.modes.iter().map(|m| m.amp.norm() * m.wave.norm()).sum(),
            PerturbationField::Shift { .. } => 0.0,
        }
    }

    /// Upper bound on `sup |∂V/∂t|`.
    pub fn t_bound(&self) -> f64 {
        match self {
            PerturbationField::Trig(f) => f.modes.iter().map(|m| TAU * m.freq as f64 * m.amp.norm()).sum(),
            PerturbationField::Shift { .. } => 0.0,
        }
    }
}

/// `f̃_t = f_t + ε V(t, ·)`. With `ε = 0` every evaluation is delegated to
/// the base family unchanged.
#[derive(Clone)]
pub struct PerturbedFamily {
    base: Arc<dyn FiberMaps>,
    field: PerturbationField,
    eps: f64,
}

/// Worst values seen by the validity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Validity {
    pub min_det_ratio: f64,
    /// Largest `|f̃_t(x) − c| / R`.
    pub max_image_radius: f64,
    pub samples: usize,
}

impl PerturbedFamily {
    /// No validity check.
    pub fn new_unchecked(base: Arc<dyn FiberMaps>, field: PerturbationField, eps: f64) -> Self {
        PerturbedFamily { base, field, eps }
    }

    /// The trigonometric perturbation of `spec`, rejected unless it passes
    /// [`PerturbedFamily::validate`].
    pub fn perturb(base: Arc<dyn FiberMaps>, spec: &PerturbationSpec) -> Result<Self> {
        if !(spec.eps >= 0.0 && spec.eps.is_finite()) {
            return Err(Error::Rejected(format!("eps must be finite and non-negative, got {}", spec.eps)));
        }
        let field = PerturbationField::Trig(TrigField::random(spec.seed, spec.modes, &base.domain()));
        let fam = PerturbedFamily::new_unchecked(base, field, spec.eps);
        let v = fam.validate(spec.seed)?;
        if v.min_det_ratio < MIN_DET_RATIO {
            return Err(Error::Rejected(format!(
                "det Df̃ / det Df = {:.4} < {MIN_DET_RATIO} on the samples",
                v.min_det_ratio
            )));
        }
        if v.max_image_radius > 1.0 {
            return Err(Error::Rejected(format!("image escapes X: |f̃(x) − c| / R = {:.4} > 1", v.max_image_radius)));
        }
        Ok(fam)
    }

    pub fn base(&self) -> &Arc<dyn FiberMaps> {
        &self.base
    }

    pub fn field(&self) -> &PerturbationField {
        &self.field
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Determinant ratios at random `(t, x)` and image radii over a grid of
    /// `t` times the boundary circle plus random interior points.
    pub fn validate(&self, seed: u64) -> Result<Validity> {
        const TS: usize = 64;
        const BOUNDARY: usize = 256;
        const INTERIOR: usize = 4096;
        let dom = self.domain();
        let ring = dom.boundary(BOUNDARY);
        let rows = par::map_indices(TS, |i| {
            let mut r = rng::stream(rng::derive(seed, 0xA11D), i as u64);
            let t = (i as f64 + r.random::<f64>()) / TS as f64;
            let mut det: f64 = f64::INFINITY;
            let mut rad: f64 = 0.0;
            let interior = (0..INTERIOR / TS).map(|_| (r.random::<f64>(), dom.sample(&mut r))).collect::<Vec<_>>();
            for &x in &ring {
                rad = rad.max(self.eval(t, x).dist(dom.center));
            }
            for (ti, x) in interior {
                rad = rad.max(self.eval(ti, x).dist(dom.center));
                let d0 = self.base.jacobian(ti, x).det();
                let d1 = self.jacobian(ti, x).det();
                det = det.min(if d0 != 0.0 { d1 / d0 } else { f64::NEG_INFINITY });
            }
            (det, rad)
        });
        let min_det_ratio = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
        let max_rad = rows.iter().map(|r| r.1).fold(0.0, f64::max);
        if !(min_det_ratio.is_finite() && max_rad.is_finite()) {
            return Err(Error::Rejected("non-finite values on the validity samples".into()));
        }
        Ok(Validity { min_det_ratio, max_image_radius: max_rad / dom.radius, samples: TS * (BOUNDARY + INTERIOR / TS) })
    }
}

impl FiberMaps for PerturbedFamily {
    fn k(&self) -> u32 {
        self.base.k()
    }

    fn domain(&self) -> DiskDomain {
        self.base.domain()
    }

    #[inline]
    fn eval(&self, t: f64, x: PlanePoint) -> PlanePoint {
        let y = self.base.eval(t, x);
        if self.eps == 0.0 {
            return y;
        }
        y + self.eps * self.field.value(t, x)
    }

    #[inline]
    fn jacobian(&self, t: f64, x: PlanePoint) -> Mat2 {
        let j = self.base.jacobian(t, x);
        if self.eps == 0.0 {
            return j;
        }
        j.add(&self.field.jacobian(t, x).scale(self.eps))
    }

    fn lipschitz(&self, t: f64) -> f64 {
        self.base.lipschitz(t) + self.eps * self.field.jacobian_bound()
    }

    fn inverse_lipschitz(&self, t: f64) -> f64 {
        if self.eps == 0.0 {
            return self.base.inverse_lipschitz(t);
        }
        // ‖Df̃ v‖ ≥ (1/L⁻ − ε‖DV‖) |v|
        let m = 1.0 / self.base.inverse_lipschitz(t) - self.eps * self.field.jacobian_bound();
        if m > 0.0 {
            1.0 / m
        } else {
            f64::INFINITY
        }
    }

    fn t_lipschitz(&self) -> f64 {
        self.base.t_lipschitz() + self.eps * self.field.t_bound()
    }

    fn generator_angles(&self) -> Vec<f64> {
        self.base.generator_angles()
    }

    fn name(&self) -> String {
        format!("perturbed({}, eps={})", self.base.name(), self.eps)
    }

    fn t_derivative(&self, t: f64, x: PlanePoint) -> PlanePoint {
        let d = self.base.t_derivative(t, x);
        if self.eps == 0.0 {
            return d;
        }
        d + self.eps * self.field.t_derivative(t, x)
    }

    fn map_box(&self, t: f64, b: &OrientedBox) -> OrientedBox {
        let out = self.base.map_box(t, b);
        if self.eps == 0.0 {
            return out;
        }
        // εV(x) ∈ εV(c) + ball(ε ‖DV‖ |x − c|)
        let shift = self.eps * self.field.value(t, b.center);
        let spread = self.eps * self.field.jacobian_bound() * b.a.hypot(b.b);
        let pad = 4.0 * f64::EPSILON * (out.center.norm() + 1.0);
        OrientedBox { center: out.center + shift, ..out }.inflate(spread + pad)
    }
}

/// The default-construction entry point: the plateau family of `base`
/// perturbed by `spec`.
pub fn perturb_family(base: &FamilyConfig, spec: &PerturbationSpec) -> Result<PerturbedFamily> {
    let fam: Arc<dyn FiberMaps> = Arc::new(PlateauFamily::new(base.clone())?);
    PerturbedFamily::perturb(fam, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn default_base() -> Arc<dyn FiberMaps> {
        Arc::new(PlateauFamily::new(FamilyConfig::default()).unwrap())
    }

    #[test]
    fn zero_eps_is_bit_identical() {
        let base = default_base();
        let f = PerturbedFamily::perturb(Arc::clone(&base), &PerturbationSpec::new(0.0, 3)).unwrap();
        let mut r = rng::stream(1, 0);
        let dom = base.domain();
        for _ in 0..1000 {
            let t: f64 = r.random();
            let x = dom.sample(&mut r);
            let (a, b) = (f.eval(t, x), base.eval(t, x));
            assert_eq!((a.x1.to_bits(), a.x2.to_bits()), (b.x1.to_bits(), b.x2.to_bits()));
            assert_eq!(f.jacobian(t, x), base.jacobian(t, x));
        }
    }

    #[test]
    fn small_eps_is_valid_and_large_is_rejected() {
        let cfg = FamilyConfig::default();
        let f = perturb_family(&cfg, &PerturbationSpec::new(1e-3, 0)).unwrap();
        let v = f.validate(0).unwrap();
        assert!(v.min_det_ratio > 0.9 && v.max_image_radius < 1.0, "{v:?}");
        match perturb_family(&cfg, &PerturbationSpec::new(10.0, 0)) {
            Err(Error::Rejected(msg)) => assert!(msg.contains("escapes") || msg.contains("det")),
            other => panic!("expected rejection, got {:?}", other.map(|_| ())),
        }
        assert!(matches!(perturb_family(&cfg, &PerturbationSpec::new(-1.0, 0)), Err(Error::Rejected(_))));
    }

    #[test]
    fn field_normalization() {
        let dom = FamilyConfig::default().domain;
        let f = PerturbationField::Trig(TrigField::random(5, 4, &dom));
        assert!((f.jacobian_bound() - 1.0).abs() < 1e-12);
        assert!(f.value_bound() <= 2.0 * dom.radius);
    }

    #[test]
    fn perturbed_box_encloses_images() {
        let f = perturb_family(&FamilyConfig::default(), &PerturbationSpec::new(5e-3, 1)).unwrap();
        let dom = f.domain();
        let mut r = rng::stream(2, 0);
        for _ in 0..200 {
            let t: f64 = r.random();
            let c = dom.sample_inner(&mut r, 0.5);
            let b = OrientedBox { center: c, angle: r.random_range(0.0..TAU), a: 0.01, b: 0.004 };
            let img = f.map_box(t, &b);
            for _ in 0..50 {
                let u = PlanePoint::new(r.random_range(-b.a..=b.a), r.random_range(-b.b..=b.b));
                let x = c + u.rotate_about(PlanePoint::ORIGIN, b.angle);
                assert!(img.contains(f.eval(t, x), 1e-15));
            }
        }
    }

    proptest! {
        #[test]
        fn field_derivatives_match_differences(t in 0.01f64..0.99, a in 0.0f64..TAU, rad in 0.0f64..0.9, seed in 0u64..50) {
            let dom = FamilyConfig::default().domain;
            let f = PerturbationField::Trig(TrigField::random(seed, 4, &dom));
            let x = dom.center + PlanePoint::new(rad * dom.radius * a.cos(), rad * dom.radius * a.sin());
            let h = 1e-6;
            let j = f.jacobian(t, x);
            let e1 = PlanePoint::new(h, 0.0);
            let e2 = PlanePoint::new(0.0, h);
            let d1 = (1.0 / (2.0 * h)) * (f.value(t, x + e1) - f.value(t, x - e1));
            let d2 = (1.0 / (2.0 * h)) * (f.value(t, x + e2) - f.value(t, x - e2));
            let fd = Mat2::new(d1.x1, d2.x1, d1.x2, d2.x2);
            prop_assert!(j.max_abs_diff(&fd) < 1e-6);
            let dt = (1.0 / (2.0 * h)) * (f.value(t + h, x) - f.value(t - h, x));
            prop_assert!(dt.dist(f.t_derivative(t, x)) < 1e-6);
            prop_assert!(f.value(t, x).norm() <= f.value_bound() + 1e-15);
        }
    }
}
