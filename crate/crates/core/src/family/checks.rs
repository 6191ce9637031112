//! Sampled certificates for a fiber family.

use rand::Rng;

use super::maps::{FiberMaps, PlateauFamily};
use crate::geometry::{DiagnosticReport, Mat2, PlanePoint, Verdict};
use crate::{par, rng};

const BATCH: usize = 4096;

/// Pairwise contraction ratios and Jacobian norms on the uniform plateaus.
///
/// PASS iff every sampled ratio `|f_t x − f_t y| / |x − y|` is at most
/// `1 + 1e-12` and, wherever `η(θ(t)) = δ`, `‖Df_t(x)‖ ≤ max(λ′, λ) + 1e-9`.
pub fn contraction_report(family: &PlateauFamily, samples: usize, seed: u64) -> DiagnosticReport {
    let cfg = family.config();
    let dom = cfg.domain;
    let uniform_bound = cfg.lambda_prime.max(cfg.lambda);
    let batches = samples.div_ceil(BATCH);
    let parts = par::map_indices(batches, |b| {
        let mut r = rng::stream(seed, b as u64);
        let n = BATCH.min(samples - b * BATCH);
        let (mut ratio, mut jmax, mut nu) = (0.0f64, 0.0f64, 0usize);
        for _ in 0..n {
            let t: f64 = r.random();
            let x = dom.sample(&mut r);
            let mut y = dom.sample(&mut r);
            while y == x {
                y = dom.sample(&mut r);
            }
            let d = x.dist(y);
            ratio = ratio.max(family.eval(t, x).dist(family.eval(t, y)) / d);
            if family.eta().value(family.theta().value(t)) == cfg.delta {
                nu += 1;
                jmax = jmax.max(family.jacobian(t, x).norm());
            }
        }
        (ratio, jmax, nu)
    });
    let (mut ratio, mut jmax, mut nu) = (0.0f64, 0.0f64, 0usize);
    for (a, b, c) in parts {
        ratio = ratio.max(a);
        jmax = jmax.max(b);
        nu += c;
    }
    let ok = ratio <= 1.0 + 1e-12 && jmax <= uniform_bound + 1e-9;
    DiagnosticReport::new("contraction", Verdict::from_bool(ok), samples as u64, seed)
        .with_stat("max_ratio", ratio)
        .with_stat("max_uniform_jacobian_norm", jmax)
        .with_stat("uniform_bound", uniform_bound)
        .with_stat("uniform_samples", nu as f64)
}

/// Analytic Jacobian against central differences at random `(t, x)`;
/// PASS iff the worst relative error is below `1e-6`.
pub fn jacobian_report(family: &dyn FiberMaps, samples: usize, seed: u64) -> DiagnosticReport {
    let dom = family.domain();
    let errs = par::map_indices(samples, |i| {
        let mut r = rng::stream(seed, i as u64);
        let t: f64 = r.random();
        let x = dom.sample_inner(&mut r, 0.999);
        relative_fd_error(family, t, x)
    });
    let worst = errs.iter().copied().fold(0.0, f64::max);
    DiagnosticReport::new("jacobian", Verdict::from_bool(worst < 1e-6), samples as u64, seed)
        .with_stat("max_relative_error", worst)
}

/// `‖J_fd − J‖ / ‖J‖` with step `1e-6 · diam(X)`.
pub fn relative_fd_error(family: &dyn FiberMaps, t: f64, x: PlanePoint) -> f64 {
    let h = 1e-6 * family.domain().diameter();
    let col = |e: PlanePoint| (0.5 / h) * (family.eval(t, x + h * e) - family.eval(t, x - h * e));
    let c1 = col(PlanePoint::new(1.0, 0.0));
    let c2 = col(PlanePoint::new(0.0, 1.0));
    let fd = Mat2::new(c1.x1, c2.x1, c1.x2, c2.x2);
    let j = family.jacobian(t, x);
    fd.sub(&j).norm() / j.norm()
}

/// Eigenvalues of `Df(x₀)` must be `{1, λ}` and those of `Dg(x₀)` must be
/// `{λ′, λ}`, both to `1e-9`.
pub fn eigen_report(family: &PlateauFamily) -> DiagnosticReport {
    let cfg = family.config();
    let mut report = DiagnosticReport::new("eigenvalues", Verdict::Pass, 2, 0);
    let x0 = match family.fixed_point(0.0) {
        Ok(p) => p,
        Err(e) => {
            report.verdict = Verdict::Inconclusive;
            report.note(e.to_string());
            return report;
        }
    };
    let ef = family.jacobian(0.0, x0).eigenvalues();
    let eg = family.g_jacobian(cfg.delta, cfg.x0).eigenvalues();
    let err_f = (ef[0].0 - 1.0).abs().max((ef[1].0 - cfg.lambda).abs()).max(ef[0].1.abs()).max(ef[1].1.abs());
    let err_g =
        (eg[0].0 - cfg.lambda_prime).abs().max((eg[1].0 - cfg.lambda).abs()).max(eg[0].1.abs()).max(eg[1].1.abs());
    report.set("df_x0_eig_max", ef[0].0);
    report.set("df_x0_eig_min", ef[1].0);
    report.set("dg_x0_eig_max", eg[0].0);
    report.set("dg_x0_eig_min", eg[1].0);
    report.set("fixed_point_offset", x0.dist(cfg.x0));
    report.verdict = Verdict::from_bool(err_f < 1e-9 && err_g < 1e-9);
    report
}

/// Distance from `h_τ(∂X)` to `∂X` over a τ-grid; since each `h_τ` is a
/// homeomorphism onto its image, the boundary image bounds the whole image.
pub fn clearance_report(family: &PlateauFamily, taus: usize, boundary: usize, min_clearance: f64) -> DiagnosticReport {
    let dom = family.config().domain;
    let bnd = dom.boundary(boundary);
    let worst = par::map_indices(taus + 1, |i| {
        let tau = i as f64 / taus as f64;
        bnd.iter().map(|x| family.h_eval(tau, *x).map_or(f64::INFINITY, |y| y.dist(dom.center))).fold(0.0, f64::max)
    })
    .into_iter()
    .fold(0.0, f64::max);
    let clearance = dom.radius - worst;
    DiagnosticReport::new("clearance", Verdict::from_bool(clearance >= min_clearance), (taus * boundary) as u64, 0)
        .with_stat("clearance", clearance)
        .with_stat("required", min_clearance)
}

/// Empirical Lipschitz constant of `τ ↦ h_τ(x)` over random nearby pairs.
pub fn tau_modulus(family: &PlateauFamily, samples: usize, seed: u64) -> f64 {
    let dom = family.config().domain;
    par::map_indices(samples, |i| {
        let mut r = rng::stream(seed, i as u64);
        let tau: f64 = r.random_range(0.0..0.999);
        let dt: f64 = r.random_range(1e-6..1e-3);
        let x = dom.sample(&mut r);
        let a = family.h_eval(tau, x).expect("x in X");
        let b = family.h_eval(tau + dt, x).expect("x in X");
        a.dist(b) / dt
    })
    .into_iter()
    .fold(0.0, f64::max)
}

/// Largest sampled `|∂f_t(x)/∂t|`.
pub fn sampled_t_derivative(family: &dyn FiberMaps, samples: usize, seed: u64) -> f64 {
    let dom = family.domain();
    par::map_indices(samples, |i| {
        let mut r = rng::stream(seed, i as u64);
        let t: f64 = r.random();
        family.t_derivative(t, dom.sample(&mut r)).norm()
    })
    .into_iter()
    .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::FamilyConfig;

    #[test]
    fn default_family_contracts() {
        let f = PlateauFamily::new(FamilyConfig::default()).unwrap();
        let r = contraction_report(&f, 20_000, 1);
        assert!(r.passed(), "{r}");
        assert!(r.stat("uniform_samples").unwrap() > 1000.0);
        assert!(r.stat("max_uniform_jacobian_norm").unwrap() > 0.85);
    }

    #[test]
    fn planted_expansion_fails() {
        let cfg = FamilyConfig { lambda_prime: 1.1, delta: 1.0 - 1.1, ..FamilyConfig::default() };
        let f = PlateauFamily::new_unchecked(cfg).unwrap();
        assert!(!contraction_report(&f, 5_000, 2).passed());
    }

    #[test]
    fn jacobian_and_eigen_checks() {
        let f = PlateauFamily::new(FamilyConfig::default()).unwrap();
        assert!(jacobian_report(&f, 1000, 3).passed());
        assert!(eigen_report(&f).passed());
        assert!(clearance_report(&f, 200, 360, 0.02).passed());
    }

    #[test]
    fn tau_continuity_modulus_is_finite() {
        let f = PlateauFamily::new(FamilyConfig::default()).unwrap();
        let c = tau_modulus(&f, 2000, 4);
        assert!(c.is_finite() && c > 0.0 && c < 10.0, "C = {c}");
    }
}
