use std::fmt::Write as _;

use rand::Rng;

use super::{mean_and_sd, Observable, RunningSum};
use crate::error::Result;
use crate::family::FiberMaps;
use crate::geometry::{DiagnosticReport, EmpiricalMeasure, Verdict};
use crate::graph::{pullback_gamma, SAMPLE_DEPTH};
use crate::skew::{sample_solenoid_with, BaseOrbit, SkewOrbit, SkewState};
use crate::{par, rng};

/// Batches used for the Monte-Carlo standard error of a time average.
const SE_BATCHES: usize = 50;

/// Time average of `obs` over `n` states of the orbit of `start`, with the
/// batch-means standard error.
fn average_with_se(family: &dyn FiberMaps, obs: &Observable, start: SkewState, n: usize, seed: u64) -> (f64, f64) {
    let n = n.max(1);
    let mut orbit = SkewOrbit::new(BaseOrbit::from_t(start.t.value(), family.k(), rng::stream(seed, 0)), start.x);
    let batches = SE_BATCHES.min(n);
    let len = n / batches;
    let mut total = RunningSum::default();
    let mut means = Vec::with_capacity(batches);
    let mut cur = RunningSum::default();
    for i in 0..n {
        let v = obs.eval(orbit.base.t(), orbit.x);
        total.add(v);
        cur.add(v);
        if (i + 1) % len == 0 && means.len() < batches {
            means.push(cur.value() / len as f64);
            cur = RunningSum::default();
        }
        orbit.step(family);
    }
    let (_, sd) = mean_and_sd(&means);
    (total.value() / n as f64, sd / (means.len() as f64).sqrt())
}

/// `(1/n) Σ_{i<n} obs(Fⁱ(t, x))`.
pub fn birkhoff_average(family: &dyn FiberMaps, obs: &Observable, start: SkewState, n: usize, seed: u64) -> f64 {
    average_with_se(family, obs, start, n, seed).0
}

/// Start-independence of time averages.
///
/// For each observable, the sample standard deviation of the averages from
/// `starts` random `(t, x)` is compared with the root-mean-square of their
/// batch-means standard errors; PASS iff it is at most three times that.
pub fn srb_independence(
    family: &dyn FiberMaps,
    observables: &[Observable],
    starts: usize,
    n: usize,
    seed: u64,
) -> DiagnosticReport {
    let dom = family.domain();
    let runs = par::map_indices(starts, |i| {
        let mut r = rng::stream(rng::derive(seed, 1), i as u64);
        let start = SkewState::new(r.random(), dom.sample(&mut r));
        observables
            .iter()
            .map(|o| average_with_se(family, o, start, n, rng::derive(seed, 2 + i as u64)))
            .collect::<Vec<_>>()
    });
    let mut ok = starts >= 2;
    let mut report =
        DiagnosticReport::new("srb_independence", Verdict::Pass, starts as u64, seed).with_stat("n", n as f64);
    for (j, o) in observables.iter().enumerate() {
        let avgs: Vec<f64> = runs.iter().map(|r| r[j].0).collect();
        let ses: Vec<f64> = runs.iter().map(|r| r[j].1 * r[j].1).collect();
        let (mean, spread) = mean_and_sd(&avgs);
        let se = (crate::geometry::measure::fsum(&ses) / ses.len().max(1) as f64).sqrt();
        ok &= spread <= 3.0 * se;
        let label = o.label();
        report.set(&format!("{label}.mean"), mean);
        report.set(&format!("{label}.spread"), spread);
        report.set(&format!("{label}.se"), se);
    }
    report.verdict = Verdict::from_bool(ok);
    report
}

/// Fiber marginal of the graph measure: `γ(𝐭)` for Lebesgue-random `𝐭`.
pub fn graph_measure_sample(family: &dyn FiberMaps, samples: usize, tol: f64, seed: u64) -> Result<EmpiricalMeasure> {
    let k = family.k();
    let points = par::map_indices(samples, |i| {
        let s = sample_solenoid_with(&mut rng::stream(seed, i as u64), SAMPLE_DEPTH, k)?;
        Ok(pullback_gamma(family, &s, tol)?.gamma)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    EmpiricalMeasure::uniform(points)
}

#[derive(Debug, Clone)]
pub struct Correlations {
    /// `Cₙ` for `n = 0..=n_max`.
    pub c: Vec<f64>,
    /// Block-bootstrap standard error of each `Cₙ`.
    pub se: Vec<f64>,
}

/// `Cₙ = |⟨a · b∘Fⁿ⟩ − ⟨a⟩⟨b⟩|` along one orbit of length `orbit_len` from a
/// random start, after a burn-in of 1000 steps.
///
/// Errors come from a block bootstrap over blocks of 100 consecutive
/// times, which keeps the serial dependence inside each block.
pub fn correlation_decay(
    family: &dyn FiberMaps,
    a: &Observable,
    b: &Observable,
    n_max: usize,
    orbit_len: usize,
    seed: u64,
) -> Correlations {
    const BLOCK: usize = 100;
    const BURN_IN: usize = 1000;
    const REPLICATES: usize = 200;
    let dom = family.domain();
    let mut r = rng::stream(seed, 0);
    let x = dom.sample(&mut r);
    let mut orbit = SkewOrbit::new(BaseOrbit::random(family.k(), rng::stream(seed, 1)), x);
    for _ in 0..BURN_IN {
        orbit.step(family);
    }
    let total = orbit_len + n_max;
    let mut va = Vec::with_capacity(total);
    let mut vb = Vec::with_capacity(total);
    for _ in 0..total {
        let t = orbit.base.t();
        va.push(a.eval(t, orbit.x));
        vb.push(b.eval(t, orbit.x));
        orbit.step(family);
    }
    let blocks = (orbit_len / BLOCK).max(1);
    let used = blocks * BLOCK.min(orbit_len);
    let width = used / blocks;
    // per-block sums: Σa, Σb and Σ a_i b_{i+n} for every lag
    let sums = par::map_indices(blocks, |j| {
        let range = j * width..(j + 1) * width;
        let sa: f64 = va[range.clone()].iter().sum();
        let sb: f64 = vb[range.clone()].iter().sum();
        let lags: Vec<f64> = (0..=n_max).map(|n| range.clone().map(|i| va[i] * vb[i + n]).sum()).collect();
        (sa, sb, lags)
    });
    let estimate = |pick: &[usize]| -> Vec<f64> {
        let m = (pick.len() * width) as f64;
        let mut sa = RunningSum::default();
        let mut sb = RunningSum::default();
        let mut lag = vec![RunningSum::default(); n_max + 1];
        for &j in pick {
            sa.add(sums[j].0);
            sb.add(sums[j].1);
            for (l, v) in lag.iter_mut().zip(&sums[j].2) {
                l.add(*v);
            }
        }
        let (ma, mb) = (sa.value() / m, sb.value() / m);
        lag.iter().map(|l| (l.value() / m - ma * mb).abs()).collect()
    };
    let all: Vec<usize> = (0..blocks).collect();
    let c = estimate(&all);
    let mut reps: Vec<Vec<f64>> = Vec::with_capacity(REPLICATES);
    let mut br = rng::stream(seed, 2);
    for _ in 0..REPLICATES {
        let pick: Vec<usize> = (0..blocks).map(|_| br.random_range(0..blocks)).collect();
        reps.push(estimate(&pick));
    }
    let se = (0..=n_max)
        .map(|n| {
            let col: Vec<f64> = reps.iter().map(|r| r[n]).collect();
            mean_and_sd(&col).1
        })
        .collect();
    Correlations { c, se }
}

/// Decay of autocorrelations: PASS iff `C_lag < C₁ / factor` for every
/// observable, each along its own orbit.
pub fn mixing_trend(
    family: &dyn FiberMaps,
    observables: &[Observable],
    lag: usize,
    factor: f64,
    orbit_len: usize,
    seed: u64,
) -> (DiagnosticReport, Vec<Correlations>) {
    let lag = lag.max(1);
    let idx: Vec<usize> = (0..observables.len()).collect();
    let corr = par::map_slice(&idx, |&i| {
        correlation_decay(family, &observables[i], &observables[i], lag, orbit_len, rng::derive(seed, i as u64))
    });
    let mut ok = !observables.is_empty();
    let mut report = DiagnosticReport::new("mixing", Verdict::Pass, orbit_len as u64, seed)
        .with_stat("lag", lag as f64)
        .with_stat("factor", factor);
    for (o, c) in observables.iter().zip(&corr) {
        ok &= c.c[lag] < c.c[1] / factor;
        let label = o.label();
        report.set(&format!("{label}.c1"), c.c[1]);
        report.set(&format!("{label}.c{lag}"), c.c[lag]);
        report.set(&format!("{label}.se1"), c.se[1]);
        report.set(&format!("{label}.se{lag}"), c.se[lag]);
    }
    report.verdict = Verdict::from_bool(ok);
    (report, corr)
}

/// CSV `lag,c,se`.
pub fn correlation_csv(c: &Correlations, header: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        for line in h.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    out.push_str("lag,c,se\n");
    for (n, (v, s)) in c.c.iter().zip(&c.se).enumerate() {
        let _ = writeln!(out, "{n},{v:.16e},{s:.6e}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::attractor::chaos_game;
    use crate::family::{generators, ConstantFamily, FamilyConfig, PlateauFamily, TwoWellMap};
    use crate::geometry::{wasserstein1, DiskDomain, PlanePoint};

    fn plateau() -> PlateauFamily {
        PlateauFamily::new(FamilyConfig::default()).unwrap()
    }

    #[test]
    fn constant_observable_averages_exactly() {
        let p = plateau();
        let one = Observable::Constant { value: 1.0 };
        assert_eq!(birkhoff_average(&p, &one, SkewState::new(0.2, PlanePoint::ORIGIN), 12_345, 1), 1.0);
        let rep = srb_independence(&p, &[Observable::Constant { value: 0.25 }], 5, 1000, 1);
        assert!(rep.passed());
        assert_eq!(rep.stat("const(0.25).spread"), Some(0.0));
    }

    #[test]
    fn contracting_family_averages_to_its_fixed_point() {
        let dom = DiskDomain { center: PlanePoint::ORIGIN, radius: 1.0 };
        let q = PlanePoint::new(0.3, -0.2);
        let f = ConstantFamily::contraction(q, 0.5, dom, 2);
        let x1 = Observable::Coordinate { axis: 0 };
        let start = SkewState::new(0.0, PlanePoint::new(-0.5, 0.5));
        for n in [100usize, 1000, 10_000] {
            let avg = birkhoff_average(&f, &x1, start, n, 0);
            // Σ 0.5ⁱ (−0.8) / n exactly
            assert!((avg - q.x1).abs() <= 1.6 / n as f64 + 1e-15);
        }
    }

    #[test]
    fn default_family_is_start_independent() {
        let p = plateau();
        let rep = srb_independence(&p, &Observable::builtins(&p.config().domain), 16, 20_000, 2);
        assert!(rep.passed(), "{rep}");
    }

    #[test]
    fn two_wells_are_not() {
        let dom = DiskDomain { center: PlanePoint::ORIGIN, radius: 1.0 };
        let wells = TwoWellMap { wells: [PlanePoint::new(-0.5, 0.0), PlanePoint::new(0.5, 0.0)], rate: 0.6 };
        let f = ConstantFamily::new(Arc::new(wells), dom, 2);
        let rep = srb_independence(&f, &[Observable::Coordinate { axis: 0 }], 20, 2000, 2);
        assert!(!rep.passed(), "{rep}");
    }

    #[test]
    fn graph_measure_is_self_consistent() {
        let p = plateau();
        let a = graph_measure_sample(&p, 2000, 1e-8, 1).unwrap();
        let b = graph_measure_sample(&p, 2000, 1e-8, 2).unwrap();
        let w = wasserstein1(&a, &b).unwrap();
        assert!(w.value < 1e-2 * p.config().domain.diameter(), "{w:?}");
        let fam: Arc<dyn FiberMaps> = Arc::new(p.clone());
        let chaos = chaos_game(&generators(&fam), 2000, 1000, 3, PlanePoint::ORIGIN);
        assert!(wasserstein1(&a, &chaos).unwrap().value.is_finite());
        let dom = DiskDomain { center: PlanePoint::ORIGIN, radius: 1.0 };
        let q = PlanePoint::new(0.1, 0.2);
        let c = graph_measure_sample(&ConstantFamily::contraction(q, 0.5, dom, 2), 50, 1e-10, 1).unwrap();
        assert!(c.points().iter().all(|x| x.dist(q) < 1e-10));
    }

    #[test]
    fn base_observables_follow_the_expanding_map() {
        // for Lebesgue and φ(t) = 4t, ⟨cos 8πt · cos(2π 4ⁿ t)⟩ is 1/2 at n = 1 and 0 otherwise
        let dom = DiskDomain { center: PlanePoint::ORIGIN, radius: 1.0 };
        let f = ConstantFamily::contraction(PlanePoint::ORIGIN, 0.5, dom, 4);
        let a = Observable::BaseCos { freq: 4 };
        let b = Observable::BaseCos { freq: 1 };
        let c = correlation_decay(&f, &a, &b, 5, 200_000, 3);
        for n in 0..=5 {
            let expected = if n == 1 { 0.5 } else { 0.0 };
            assert!((c.c[n] - expected).abs() < 4.0 * c.se[n] + 1e-3, "n={n}: {} ± {}", c.c[n], c.se[n]);
        }
        let k = Observable::Constant { value: 2.0 };
        let c = correlation_decay(&f, &k, &k, 3, 10_000, 3);
        assert!(c.c.iter().all(|&v| v < 1e-12));
    }

    #[test]
    fn coordinates_decorrelate() {
        let p = plateau();
        let x1 = Observable::Coordinate { axis: 0 };
        let c = correlation_decay(&p, &x1, &x1, 50, 200_000, 5);
        assert!(c.c[50] < c.c[1] / 5.0, "{:?}", (c.c[1], c.c[50]));
        assert_eq!(correlation_csv(&c, None).lines().count(), 52);
    }

    #[test]
    fn mixing_trend_passes_by_default_and_fails_for_a_rotation() {
        let obs = [Observable::Coordinate { axis: 0 }, Observable::Coordinate { axis: 1 }];
        let (rep, corr) = mixing_trend(&plateau(), &obs, 50, 5.0, 100_000, 2);
        assert!(rep.passed(), "{rep}");
        assert_eq!(corr.len(), 2);
        // a quarter turn is 4-periodic, so C₅₀ = C₂ while C₁ vanishes
        let quarter = crate::family::AffineMap::new(
            crate::geometry::Mat2::rotation(std::f64::consts::FRAC_PI_2),
            PlanePoint::ORIGIN,
        );
        let dom = DiskDomain { center: PlanePoint::ORIGIN, radius: 1.0 };
        let rot = ConstantFamily::new(Arc::new(quarter), dom, 2);
        assert!(!mixing_trend(&rot, &obs, 50, 5.0, 10_000, 2).0.passed());
    }
}
