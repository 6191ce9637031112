use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::family::FiberMaps;
use crate::geometry::{wrap_unit, DiagnosticReport, Verdict};
use crate::{par, rng};

/// Step of the central differences in `t`.
pub const DS_STEP: f64 = 1e-6;

/// Sampled C¹ distance between two families and between their inverses.
/// Every field is a lower bound on the corresponding supremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C1Distance {
    pub value: f64,
    pub jacobian: f64,
    pub inverse_value: f64,
    pub inverse_jacobian: f64,
    pub samples: usize,
    /// Inverse comparisons skipped because a preimage left `X`.
    pub inverse_skipped: usize,
}

impl C1Distance {
    pub fn total(&self) -> f64 {
        self.value.max(self.jacobian).max(self.inverse_value).max(self.inverse_jacobian)
    }
}

/// Monte-Carlo `sup_{t, x}` of `|f − f̃|`, `‖Df − Df̃‖` and the same for the
/// inverses, which are compared at images of the sample under either family.
pub fn c1_distance(a: &dyn FiberMaps, b: &dyn FiberMaps, samples: usize, seed: u64) -> C1Distance {
    let dom = a.domain();
    let rows = par::map_indices(samples, |i| {
        let mut r = rng::stream(seed, i as u64);
        let t: f64 = r.random();
        let x = dom.sample(&mut r);
        let value = a.eval(t, x).dist(b.eval(t, x));
        let jacobian = a.jacobian(t, x).sub(&b.jacobian(t, x)).norm();
        let mut inv = [0.0f64; 2];
        let mut skipped = 0usize;
        for y in [a.eval(t, x), b.eval(t, x)] {
            match (a.inverse(t, y), b.inverse(t, y)) {
                (Ok(pa), Ok(pb)) => {
                    inv[0] = inv[0].max(pa.dist(pb));
                    let ja = a.jacobian(t, pa).inverse();
                    let jb = b.jacobian(t, pb).inverse();
                    inv[1] = inv[1].max(match (ja, jb) {
                        (Some(ja), Some(jb)) => ja.sub(&jb).norm(),
                        _ => f64::INFINITY,
                    });
                }
                _ => skipped += 1,
            }
        }
        (value, jacobian, inv, skipped)
    });
    let mut d = C1Distance {
        value: 0.0,
        jacobian: 0.0,
        inverse_value: 0.0,
        inverse_jacobian: 0.0,
        samples,
        inverse_skipped: 0,
    };
    for (v, j, inv, s) in rows {
        d.value = d.value.max(v);
        d.jacobian = d.jacobian.max(j);
        d.inverse_value = d.inverse_value.max(inv[0]);
        d.inverse_jacobian = d.inverse_jacobian.max(inv[1]);
        d.inverse_skipped += s;
    }
    d
}

/// Sampled `L = max(1/k + sup ‖∂f_t^{±1}/∂t‖, sup ‖∂f_t^{±1}/∂x‖)`.
///
/// `∂f_t/∂t` is a central difference in `t`; for the inverse at `y = f_t(x)`
/// it is `−Df_t(x)⁻¹ ∂f_t(x)/∂t`. PASS iff `L < k`.
pub fn dominated_splitting_check(family: &dyn FiberMaps, samples: usize, seed: u64) -> DiagnosticReport {
    let dom = family.domain();
    let rows = par::map_indices(samples, |i| {
        let mut r = rng::stream(seed, i as u64);
        let t: f64 = r.random();
        let x = dom.sample(&mut r);
        let j = family.jacobian(t, x);
        let dt =
            (1.0 / (2.0 * DS_STEP)) * (family.eval(wrap_unit(t + DS_STEP), x) - family.eval(wrap_unit(t - DS_STEP), x));
        match j.inverse() {
            Some(ji) => [j.norm(), ji.norm(), dt.norm(), ji.apply(dt).norm()],
            None => [j.norm(), f64::INFINITY, dt.norm(), f64::INFINITY],
        }
    });
    let mut sup = [0.0f64; 4];
    for row in &rows {
        for (s, v) in sup.iter_mut().zip(row) {
            *s = s.max(*v);
        }
    }
    let k = family.k() as f64;
    let l = (1.0 / k + sup[2].max(sup[3])).max(sup[0].max(sup[1]));
    DiagnosticReport::new("dominated_splitting", Verdict::from_bool(l < k), samples as u64, seed)
        .with_stat("sup_dx", sup[0])
        .with_stat("sup_dx_inverse", sup[1])
        .with_stat("sup_dt", sup[2])
        .with_stat("sup_dt_inverse", sup[3])
        .with_stat("L", l)
        .with_stat("k", k)
        .with_stat("margin", k - l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::family::{AffineMap, ConstantFamily, FamilyConfig, PlateauFamily};
    use crate::geometry::{DiskDomain, PlanePoint};
    use crate::perturbation::{perturb_family, PerturbationField, PerturbationSpec, PerturbedFamily};

    fn plateau() -> Arc<dyn FiberMaps> {
        Arc::new(PlateauFamily::new(FamilyConfig::default()).unwrap())
    }

    #[test]
    fn identical_families_are_at_distance_zero() {
        let p = plateau();
        let d = c1_distance(p.as_ref(), p.as_ref(), 2000, 1);
        assert_eq!(d.total(), 0.0);
    }

    #[test]
    fn constant_shift_has_value_distance_eps() {
        let eps = 1e-3;
        let p = plateau();
        let s = PerturbedFamily::new_unchecked(
            Arc::clone(&p),
            PerturbationField::Shift { by: PlanePoint::new(1.0, 0.0) },
            eps,
        );
        let d = c1_distance(p.as_ref(), &s, 2000, 2);
        assert!((d.value - eps).abs() < 1e-15, "{d:?}");
        assert_eq!(d.jacobian, 0.0);
        // f̃⁻¹(y) = f⁻¹(y − ε e₁), so the inverse values differ by at most ε·sup‖Df⁻¹‖
        let inv_lip = (0..1000).map(|i| p.inverse_lipschitz(i as f64 / 1000.0)).fold(0.0, f64::max);
        assert!(d.inverse_value > 0.0 && d.inverse_value <= eps * inv_lip + 1e-9, "{d:?}");
    }

    #[test]
    fn default_perturbation_distance_scales_with_eps() {
        let cfg = FamilyConfig::default();
        let p = plateau();
        let mut last = 0.0;
        for eps in [1e-4, 1e-3, 3e-3] {
            let f = perturb_family(&cfg, &PerturbationSpec::new(eps, 0)).unwrap();
            let d = c1_distance(p.as_ref(), &f, 20_000, 3);
            assert!(d.total() >= eps / 10.0 && d.total() <= 10.0 * eps, "eps={eps}: {d:?}");
            assert!(d.total() > last);
            last = d.total();
        }
    }

    #[test]
    fn distance_is_symmetric() {
        let p = plateau();
        let f = perturb_family(&FamilyConfig::default(), &PerturbationSpec::new(1e-3, 7)).unwrap();
        let ab = c1_distance(p.as_ref(), &f, 5000, 4);
        let ba = c1_distance(&f, p.as_ref(), 5000, 4);
        assert!((ab.total() - ba.total()).abs() <= 1e-9 * ab.total().max(1e-300) + 1e-15, "{ab:?} {ba:?}");
    }

    #[test]
    fn default_and_perturbed_have_dominated_splitting() {
        let p = plateau();
        let rep = dominated_splitting_check(p.as_ref(), 20_000, 5);
        assert!(rep.passed(), "{rep}");
        // the contraction bounds are certified, so sampling never exceeds them
        assert!(rep.stat("sup_dx").unwrap() <= 1.0 + 1e-12);
        assert!(rep.stat("sup_dt").unwrap() <= p.t_lipschitz() * (1.0 + 1e-6));
        let f = perturb_family(&FamilyConfig::default(), &PerturbationSpec::new(1e-3, 0)).unwrap();
        assert!(dominated_splitting_check(&f, 20_000, 5).passed());
    }

    #[test]
    fn lipschitz_nine_fails() {
        let dom = DiskDomain { center: PlanePoint::ORIGIN, radius: 1.0 };
        let f = ConstantFamily::new(Arc::new(AffineMap::similarity(9.0, PlanePoint::ORIGIN)), dom, 8);
        let rep = dominated_splitting_check(&f, 100, 0);
        assert!(!rep.passed());
        assert!((rep.stat("L").unwrap() - 9.0).abs() < 1e-12);
    }
}
