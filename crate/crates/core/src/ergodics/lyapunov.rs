use std::fmt::Write as _;

use rand::Rng;

use super::{mean_and_sd, RunningSum};
use crate::family::FiberMaps;
use crate::geometry::{DiagnosticReport, PlanePoint, Verdict};
use crate::skew::{BaseOrbit, SkewOrbit, SkewState};
use crate::{par, rng};

// a fixed generic direction, away from the coordinate axes
const START_VECTOR: PlanePoint = PlanePoint::new(0.8, 0.6);

fn orbit_from(family: &dyn FiberMaps, start: SkewState, seed: u64) -> SkewOrbit {
    SkewOrbit::new(BaseOrbit::from_t(start.t.value(), family.k(), rng::stream(seed, 0)), start.x)
}

/// `(1/n) Σ log |Df v| / |v|` for a tangent vector renormalized every step.
pub fn lyapunov_top(family: &dyn FiberMaps, start: SkewState, n: usize, seed: u64) -> f64 {
    let mut orbit = orbit_from(family, start, seed);
    let mut v = START_VECTOR;
    let mut sum = RunningSum::default();
    for _ in 0..n.max(1) {
        let w = family.jacobian(orbit.base.t(), orbit.x).apply(v);
        let norm = w.norm();
        sum.add(norm.ln());
        v = (1.0 / norm) * w;
        orbit.step(family);
    }
    sum.value() / n.max(1) as f64
}

/// Both exponents `λ₁ ≥ λ₂` by Gram–Schmidt renormalization of a frame.
pub fn lyapunov_spectrum(family: &dyn FiberMaps, start: SkewState, n: usize, seed: u64) -> [f64; 2] {
    let mut orbit = orbit_from(family, start, seed);
    let mut q1 = START_VECTOR;
    let mut q2 = PlanePoint::new(-START_VECTOR.x2, START_VECTOR.x1);
    let (mut s1, mut s2) = (RunningSum::default(), RunningSum::default());
    for _ in 0..n.max(1) {
        let j = family.jacobian(orbit.base.t(), orbit.x);
        let m1 = j.apply(q1);
        let m2 = j.apply(q2);
        let r11 = m1.norm();
        q1 = (1.0 / r11) * m1;
        let u = m2 - q1.dot(m2) * q1;
        let r22 = u.norm();
        q2 = (1.0 / r22) * u;
        s1.add(r11.ln());
        s2.add(r22.ln());
        orbit.step(family);
    }
    let n = n.max(1) as f64;
    [s1.value() / n, s2.value() / n]
}

#[derive(Debug, Clone)]
pub struct LyapunovBatch {
    pub report: DiagnosticReport,
    pub starts: Vec<SkewState>,
    pub estimates: Vec<f64>,
    pub mean: f64,
    /// Percentile bootstrap 95% interval of the mean.
    pub ci95: (f64, f64),
}

/// `λ₁` from `starts` Lebesgue-random `(t, x)`; PASS iff the upper end of
/// the bootstrap 95% interval of the mean is negative.
pub fn lyapunov_batch(family: &dyn FiberMaps, starts: usize, n: usize, seed: u64) -> LyapunovBatch {
    const BOOTSTRAP: usize = 2000;
    let dom = family.domain();
    let runs = par::map_indices(starts, |i| {
        let mut r = rng::stream(rng::derive(seed, 1), i as u64);
        let start = SkewState::new(r.random(), dom.sample(&mut r));
        (start, lyapunov_top(family, start, n, rng::derive(seed, 2 + i as u64)))
    });
    let (starts_v, estimates): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let (mean, sd) = mean_and_sd(&estimates);
    let mut r = rng::stream(rng::derive(seed, 0), 0);
    let mut means: Vec<f64> = (0..BOOTSTRAP)
        .map(|_| {
            let mut s = RunningSum::default();
            for _ in 0..estimates.len() {
                s.add(estimates[r.random_range(0..estimates.len())]);
            }
            s.value() / estimates.len() as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let ci95 = if means.is_empty() || estimates.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (means[BOOTSTRAP * 25 / 1000], means[BOOTSTRAP * 975 / 1000 - 1])
    };
    let report = DiagnosticReport::new("lyapunov_top", Verdict::from_bool(ci95.1 < 0.0), starts as u64, seed)
        .with_stat("lambda1", mean)
        .with_stat("sd", sd)
        .with_stat("ci95_low", ci95.0)
        .with_stat("ci95_high", ci95.1)
        .with_stat("n", n as f64);
    LyapunovBatch { report, starts: starts_v, estimates, mean, ci95 }
}

/// CSV `start,t,x1,x2,lambda1`.
pub fn lyapunov_csv(batch: &LyapunovBatch, header: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        for line in h.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    out.push_str("start,t,x1,x2,lambda1\n");
    for (i, (s, l)) in batch.starts.iter().zip(&batch.estimates).enumerate() {
        let _ = writeln!(out, "{i},{:.16e},{:.16e},{:.16e},{:.16e}", s.t.value(), s.x.x1, s.x.x2, l);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::family::{AffineMap, ConstantFamily, FamilyConfig, FiberGenerator, PlaneMap, PlateauFamily};
    use crate::geometry::{DiskDomain, Mat2};

    fn unit() -> DiskDomain {
        DiskDomain { center: PlanePoint::ORIGIN, radius: 1.0 }
    }

    #[test]
    fn diagonal_map_gives_the_log_of_its_top_entry() {
        let f = ConstantFamily::new(Arc::new(AffineMap::new(Mat2::diag(0.7, 0.2), PlanePoint::ORIGIN)), unit(), 2);
        let l = lyapunov_top(&f, SkewState::new(0.1, PlanePoint::new(0.3, 0.3)), 2000, 1);
        assert!((l - 0.7f64.ln()).abs() < 1e-3);
        let [a, b] = lyapunov_spectrum(&f, SkewState::new(0.1, PlanePoint::ORIGIN), 2000, 1);
        assert!((a - 0.7f64.ln()).abs() < 1e-3 && (b - 0.2f64.ln()).abs() < 1e-3);
        // the spectrum sums to the mean log-determinant exactly
        assert!((a + b - (0.7f64 * 0.2).ln()).abs() < 1e-12);
    }

    #[test]
    fn uniform_generator_matches_its_fixed_point_linearization() {
        let p = PlateauFamily::new(FamilyConfig::default()).unwrap();
        let t2 = p.config().t[1];
        let fam: Arc<dyn FiberMaps> = Arc::new(p.clone());
        let f2: Arc<dyn PlaneMap> = Arc::new(FiberGenerator { family: fam, t: t2 });
        let c = ConstantFamily::new(Arc::clone(&f2), p.config().domain, 8);
        let fp = p.fixed_point(t2).unwrap();
        // the orbit settles at the fixed point, so the exponent is that of Df₂(p₂)
        let oracle = f2.jacobian(fp).spectral_radius().ln();
        let l = lyapunov_top(&c, SkewState::new(0.3, PlanePoint::new(-0.05, 0.05)), 100_000, 2);
        assert!((l - oracle).abs() < 1e-3, "{l} vs {oracle}");
        // without the rotation the same map has exponent log λ′
        let g = ConstantFamily::new(
            Arc::new(AffineMap::new(p.g_jacobian(p.config().delta, p.config().x0), PlanePoint::ORIGIN)),
            p.config().domain,
            8,
        );
        let l = lyapunov_top(&g, SkewState::new(0.3, PlanePoint::ORIGIN), 100_000, 2);
        assert!((l - p.config().lambda_prime.ln()).abs() < 1e-3, "{l}");
    }

    #[test]
    fn default_family_has_negative_exponent() {
        let p = PlateauFamily::new(FamilyConfig::default()).unwrap();
        let b = lyapunov_batch(&p, 12, 20_000, 4);
        assert!(b.report.passed(), "{}", b.report);
        assert!(b.ci95.0 <= b.mean && b.mean <= b.ci95.1);
        assert_eq!(lyapunov_csv(&b, None).lines().count(), 13);
    }

    #[test]
    fn batch_is_thread_count_independent() {
        let p = PlateauFamily::new(FamilyConfig::default()).unwrap();
        let a = par::with_threads(1, || lyapunov_batch(&p, 6, 2000, 9).mean);
        let b = par::with_threads(4, || lyapunov_batch(&p, 6, 2000, 9).mean);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
