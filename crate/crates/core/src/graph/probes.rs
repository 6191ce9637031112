use std::fmt::Write as _;

use rand::Rng;

use super::{
    fiber_set, graph_point, pullback, pullback_at_depth, pullback_gamma, GraphSample, PullbackDepth, SAMPLE_DEPTH,
};
use crate::error::{Error, Result};
use crate::family::FiberMaps;
use crate::geometry::{
    solenoid_metric, wrap_unit, DiagnosticReport, GridGeometry, GridSet, PlanePoint, SolenoidPoint, Verdict,
};
use crate::skew::{sample_solenoid_with, BaseOrbit};
use crate::{par, rng};

/// Largest bone fraction still read as a graph.
pub const BONE_FRACTION_LIMIT: f64 = 0.01;
/// The USC probe gives up below this `δ`.
pub const MIN_DELTA: f64 = 1.0 / (1u64 << 24) as f64;

/// A solenoid point within `d_S < delta` of `s`, with the same depth.
///
/// Moves `t₀` by at most `delta/4` and keeps enough leading digits that the
/// redrawn tail contributes at most `delta/8`; the rare draws that wrap
/// across `0` are rejected. Falls back to `s` itself.
pub fn sample_nearby<R: Rng + ?Sized>(s: &SolenoidPoint, delta: f64, r: &mut R) -> SolenoidPoint {
    let keep = ((4.0 / delta).log2().ceil().max(0.0) as usize).min(s.depth());
    for _ in 0..64 {
        let t0 = wrap_unit(s.t0() + 0.25 * delta * (2.0 * r.random::<f64>() - 1.0));
        let mut digits = s.digits()[..keep].to_vec();
        digits.extend((keep..s.depth()).map(|_| r.random_range(0..s.k())));
        let Ok(cand) = SolenoidPoint::new(t0, digits, s.k()) else { continue };
        if solenoid_metric(s, &cand).is_ok_and(|d| d < delta) {
            return cand;
        }
    }
    s.clone()
}

/// First `n` with `|x_n − y_n| < tol` along a shared base orbit, if any
/// `n ≤ max_steps`.
pub fn sync_pair(
    family: &dyn FiberMaps,
    mut base: BaseOrbit,
    mut x: PlanePoint,
    mut y: PlanePoint,
    max_steps: usize,
    tol: f64,
) -> Option<usize> {
    for n in 0..=max_steps {
        if x.dist(y) < tol {
            return Some(n);
        }
        let t = base.t();
        x = family.eval(t, x);
        y = family.eval(t, y);
        base.advance();
    }
    None
}

#[derive(Debug, Clone)]
pub struct SyncOutcome {
    pub report: DiagnosticReport,
    /// First synchronization step of each pair.
    pub steps: Vec<Option<usize>>,
}

/// Master–slave synchronization from random `(t, x, y)`.
///
/// PASS iff at least 99% of the pairs come within `tol` in `max_steps`.
pub fn sync_test(family: &dyn FiberMaps, pairs: usize, max_steps: usize, tol: f64, seed: u64) -> SyncOutcome {
    let dom = family.domain();
    let k = family.k();
    let steps = par::map_indices(pairs, |i| {
        let mut r = rng::stream(rng::derive(seed, 1), i as u64);
        let x = dom.sample(&mut r);
        let y = dom.sample(&mut r);
        let base = BaseOrbit::random(k, rng::stream(rng::derive(seed, 2), i as u64));
        sync_pair(family, base, x, y, max_steps, tol)
    });
    let mut hit: Vec<usize> = steps.iter().flatten().copied().collect();
    hit.sort_unstable();
    let frac = hit.len() as f64 / pairs.max(1) as f64;
    let mut report = DiagnosticReport::new("sync", Verdict::from_bool(pairs > 0 && frac >= 0.99), pairs as u64, seed)
        .with_stat("converged_fraction", frac)
        .with_stat("tol", tol)
        .with_stat("max_steps", max_steps as f64);
    if !hit.is_empty() {
        report.set("median_steps", hit[hit.len() / 2] as f64);
        report.set("max_converged_steps", hit[hit.len() - 1] as f64);
    }
    SyncOutcome { report, steps }
}

#[derive(Debug, Clone)]
pub struct BonyScan {
    pub report: DiagnosticReport,
    pub diameters: Vec<f64>,
}

/// Diameters of `X(𝐭, depth)` over Lebesgue-random solenoid points.
///
/// A fiber counts as a bone when its diameter exceeds `diam_tol`; PASS iff
/// at most 1% of the fibers are bones.
pub fn bony_scan(
    family: &dyn FiberMaps,
    samples: usize,
    depth: usize,
    diam_tol: f64,
    geom: &GridGeometry,
    seed: u64,
) -> Result<BonyScan> {
    let k = family.k();
    let diameters = par::map_indices(samples, |i| {
        let s = sample_solenoid_with(&mut rng::stream(seed, i as u64), depth.max(1), k)?;
        Ok(fiber_set(family, &s, depth, 64, geom)?.diameter())
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let bones = diameters.iter().filter(|&&d| d > diam_tol).count();
    let frac = bones as f64 / samples.max(1) as f64;
    let report =
        DiagnosticReport::new("bony_scan", Verdict::from_bool(frac <= BONE_FRACTION_LIMIT), samples as u64, seed)
            .with_stat("bone_fraction", frac)
            .with_stat("diam_tol", diam_tol)
            .with_stat("max_diameter", diameters.iter().copied().fold(0.0, f64::max))
            .with_stat("depth", depth as f64)
            .with_stat("h", geom.h);
    Ok(BonyScan { report, diameters })
}

/// Histogram CSV `diam_bin,count`; `diam_bin` is the lower bin edge.
pub fn bony_histogram_csv(diameters: &[f64], bin: f64, header: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        for line in h.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    out.push_str("diam_bin,count\n");
    let bins = diameters.iter().map(|d| (d / bin).floor() as usize).max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; bins];
    for d in diameters {
        counts[(d / bin).floor() as usize] += 1;
    }
    for (i, c) in counts.iter().enumerate() {
        let _ = writeln!(out, "{:.6e},{c}", i as f64 * bin);
    }
    out
}

/// Sampled upper semicontinuity of `𝐭 ↦ X(𝐭, depth)` at `s`.
///
/// Starting from `δ = 2⁻⁴` and halving, looks for the largest `δ` such that
/// every sampled `𝐭′` with `d_S(𝐭, 𝐭′) < δ` has its fiber set inside the
/// `eps`-neighborhood of the fiber set at `s`. PASS iff one is found above
/// [`MIN_DELTA`].
#[allow(clippy::too_many_arguments)]
pub fn usc_probe(
    family: &dyn FiberMaps,
    s: &SolenoidPoint,
    eps: f64,
    trials: usize,
    depth: usize,
    geom: &GridGeometry,
    seed: u64,
) -> Result<DiagnosticReport> {
    if eps <= 4.0 * geom.h {
        return Err(Error::InvalidArgument(format!("eps = {eps:.3e} must exceed 4h = {:.3e}", 4.0 * geom.h)));
    }
    let reference = fiber_set(family, s, depth, 64, geom)?;
    let hood = reference.dilate(eps);
    let mut delta = 1.0 / 16.0;
    let mut level = 0u64;
    let mut found = None;
    while delta >= MIN_DELTA {
        let ok = par::map_indices(trials, |i| -> Result<bool> {
            let mut r = rng::stream(rng::derive(seed, level), i as u64);
            let near = sample_nearby(s, delta, &mut r);
            fiber_set(family, &near, depth, 64, geom)?.is_subset(&hood)
        })
        .into_iter()
        .collect::<Result<Vec<bool>>>()?;
        if ok.iter().all(|&b| b) {
            found = Some(delta);
            break;
        }
        delta *= 0.5;
        level += 1;
    }
    let mut report = DiagnosticReport::new("usc_probe", Verdict::from_bool(found.is_some()), trials as u64, seed)
        .with_stat("eps", eps)
        .with_stat("levels_tried", (level + 1) as f64);
    if let Some(d) = found {
        report.set("delta", d);
    }
    Ok(report)
}

/// [`usc_probe`] at `points` random solenoid points drawn with `depth`
/// digits. PASS iff every point passes; reports the smallest `δ` found.
#[allow(clippy::too_many_arguments)]
pub fn usc_scan(
    family: &dyn FiberMaps,
    points: usize,
    eps: f64,
    trials: usize,
    depth: usize,
    geom: &GridGeometry,
    seed: u64,
) -> Result<DiagnosticReport> {
    let reports = par::map_indices(points, |i| {
        let s = sample_solenoid_with(&mut rng::stream(rng::derive(seed, 0), i as u64), depth.max(1), family.k())?;
        usc_probe(family, &s, eps, trials, depth, geom, rng::derive(seed, 1 + i as u64))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let verdict = reports.iter().fold(Verdict::Pass, |v, r| v.combine(r.verdict));
    let deltas: Vec<f64> = reports.iter().filter_map(|r| r.stat("delta")).collect();
    let mut rep = DiagnosticReport::new("usc_scan", verdict, points as u64, seed)
        .with_stat("eps", eps)
        .with_stat("points_passed", deltas.len() as f64)
        .with_stat("depth", depth as f64);
    if let Some(m) = deltas.iter().copied().reduce(f64::min) {
        rep.set("min_delta", m);
    }
    Ok(rep)
}

/// `|X(𝐭, n, x) − X(𝐭, n, y)|` for two random starts at the certified depth
/// `n` of [`pullback_gamma`] with tolerance `tol`. PASS iff every sample is
/// below `2 tol`; INCONCLUSIVE when a certificate cannot be reached.
pub fn two_start_discrepancy(family: &dyn FiberMaps, samples: usize, tol: f64, seed: u64) -> DiagnosticReport {
    let k = family.k();
    let dom = family.domain();
    let rows = par::map_indices(samples, |i| -> Result<(f64, usize)> {
        let mut r = rng::stream(seed, i as u64);
        let s = sample_solenoid_with(&mut r, SAMPLE_DEPTH, k)?;
        let g = pullback_gamma(family, &s, tol)?;
        let x = pullback(family, &s, g.depth_used, dom.sample(&mut r))?;
        let y = pullback(family, &s, g.depth_used, dom.sample(&mut r))?;
        Ok((x.dist(y), g.depth_used))
    });
    let ok: Vec<(f64, usize)> = rows.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let worst = ok.iter().map(|r| r.0).fold(0.0, f64::max);
    let verdict = if worst >= 2.0 * tol {
        Verdict::Fail
    } else if ok.len() < samples {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    DiagnosticReport::new("two_start_discrepancy", verdict, samples as u64, seed)
        .with_stat("max_discrepancy", worst)
        .with_stat("threshold", 2.0 * tol)
        .with_stat("max_depth", ok.iter().map(|r| r.1).max().unwrap_or(0) as f64)
        .with_stat("inconclusive", (samples - ok.len()) as f64)
}

/// Checks `f_{t₀}(γ(𝐭)) = γ(ξ(𝐭))` with both sides pulled back separately.
///
/// PASS iff on every sample both tails are below `tol` and the residual is
/// below `tol` plus the two tails. A truncated pullback therefore fails
/// even when its large tails would excuse the residual.
pub fn invariance_residual(
    family: &dyn FiberMaps,
    samples: usize,
    tol: f64,
    depth: PullbackDepth,
    seed: u64,
) -> DiagnosticReport {
    let k = family.k();
    let rows = par::map_indices(samples, |i| -> Result<(f64, f64)> {
        let s = sample_solenoid_with(&mut rng::stream(seed, i as u64), SAMPLE_DEPTH, k)?;
        let a = graph_point(family, &s, depth)?;
        let b = graph_point(family, &s.shift_forward(), depth)?;
        let residual = family.eval(s.t0(), a.gamma).dist(b.gamma);
        Ok((residual, a.tail_bound.max(b.tail_bound)))
    });
    let mut max_res: f64 = 0.0;
    let mut max_tail: f64 = 0.0;
    let mut failed = 0usize;
    let mut inconclusive = 0usize;
    for row in &rows {
        match row {
            Ok((res, tail)) => {
                max_res = max_res.max(*res);
                max_tail = max_tail.max(*tail);
                if *tail >= tol || *res >= tol + 2.0 * tail {
                    failed += 1;
                }
            }
            Err(_) => inconclusive += 1,
        }
    }
    let verdict = if failed > 0 {
        Verdict::Fail
    } else if inconclusive > 0 {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    DiagnosticReport::new("invariance_residual", verdict, samples as u64, seed)
        .with_stat("max_residual", max_res)
        .with_stat("max_tail", max_tail)
        .with_stat("tol", tol)
        .with_stat("failed", failed as f64)
        .with_stat("inconclusive", inconclusive as f64)
}

/// Empirical continuity modulus of `γ`: the largest `|γ(𝐭) − γ(𝐭′)|` over
/// sampled pairs with `d_S(𝐭, 𝐭′) < max_dist`. PASS iff below `threshold`.
pub fn continuity_modulus(
    family: &dyn FiberMaps,
    pairs: usize,
    max_dist: f64,
    threshold: f64,
    tol: f64,
    seed: u64,
) -> Result<DiagnosticReport> {
    let k = family.k();
    let diffs = par::map_indices(pairs, |i| -> Result<(f64, f64)> {
        let mut r = rng::stream(seed, i as u64);
        let s = sample_solenoid_with(&mut r, SAMPLE_DEPTH, k)?;
        let near = sample_nearby(&s, max_dist, &mut r);
        let a = pullback_gamma(family, &s, tol)?;
        let b = pullback_gamma(family, &near, tol)?;
        Ok((a.gamma.dist(b.gamma), solenoid_metric(&s, &near)?))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let worst = diffs.iter().map(|d| d.0).fold(0.0, f64::max);
    let dist = diffs.iter().map(|d| d.1).fold(0.0, f64::max);
    Ok(DiagnosticReport::new("continuity_modulus", Verdict::from_bool(worst < threshold), pairs as u64, seed)
        .with_stat("max_gamma_difference", worst)
        .with_stat("max_solenoid_distance", dist)
        .with_stat("threshold", threshold))
}

/// Pullback points over one base angle `t` along `branches` random
/// backward words of length `depth`.
pub fn base_fiber_samples(
    family: &dyn FiberMaps,
    t: f64,
    branches: usize,
    depth: usize,
    seed: u64,
) -> Result<Vec<GraphSample>> {
    let k = family.k();
    par::map_indices(branches, |i| {
        let mut r = rng::stream(seed, i as u64);
        let digits = (0..depth).map(|_| r.random_range(0..k)).collect();
        let s = SolenoidPoint::new(t, digits, k)?;
        pullback_at_depth(family, &s, depth)
    })
    .into_iter()
    .collect()
}

/// [`base_fiber_samples`] rasterized.
pub fn base_fiber_cloud(
    family: &dyn FiberMaps,
    t: f64,
    branches: usize,
    depth: usize,
    geom: &GridGeometry,
    seed: u64,
) -> Result<GridSet> {
    let pts: Vec<PlanePoint> = base_fiber_samples(family, t, branches, depth, seed)?.iter().map(|g| g.gamma).collect();
    Ok(GridSet::from_points(*geom, &pts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::attractor::{Hutchinson, HutchinsonMode};
    use crate::family::{
        AffineMap, CircleDriftFamily, ConstantFamily, FamilyConfig, PlaneMap, PlateauFamily, SwitchingFamily,
    };
    use crate::geometry::{DiskDomain, Mat2};
    use crate::skew::sample_solenoid;

    fn plateau() -> PlateauFamily {
        PlateauFamily::new(FamilyConfig::default()).unwrap()
    }

    fn unit() -> DiskDomain {
        DiskDomain { center: PlanePoint::ORIGIN, radius: 1.0 }
    }

    #[test]
    fn nearby_points_are_near() {
        let mut r = rng::stream(1, 0);
        let s = sample_solenoid(2, 100, 8).unwrap();
        for delta in [0.1, 1e-3, 1e-6] {
            for _ in 0..50 {
                let n = sample_nearby(&s, delta, &mut r);
                assert_eq!(n.depth(), s.depth());
                assert!(solenoid_metric(&s, &n).unwrap() < delta);
            }
        }
    }

    #[test]
    fn equal_starts_sync_at_once() {
        let p = plateau();
        let x = PlanePoint::new(0.01, 0.02);
        assert_eq!(sync_pair(&p, BaseOrbit::random(8, rng::stream(0, 0)), x, x, 10, 1e-8), Some(0));
    }

    #[test]
    fn default_family_synchronizes() {
        let out = sync_test(&plateau(), 100, 5000, 1e-8, 3);
        assert!(out.report.passed(), "{}", out.report);
        assert!(out.report.stat("median_steps").unwrap() > 0.0);
        // more steps never lose a pair
        let short = sync_test(&plateau(), 100, 100, 1e-8, 3);
        for (a, b) in short.steps.iter().zip(&out.steps) {
            if a.is_some() {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn expanding_family_does_not_synchronize() {
        let f = ConstantFamily::new(Arc::new(AffineMap::similarity(1.05, PlanePoint::ORIGIN)), unit(), 2);
        let out = sync_test(&f, 20, 2000, 1e-8, 1);
        assert!(!out.report.passed());
        assert_eq!(out.report.stat("converged_fraction"), Some(0.0));
    }

    #[test]
    fn bony_scan_of_the_default_family() {
        let p = plateau();
        let geom = GridGeometry::for_disk(&p.config().domain, 1024);
        let scan = bony_scan(&p, 60, 200, 10.0 * geom.h, &geom, 4).unwrap();
        assert!(scan.report.passed(), "{}", scan.report);
        let csv = bony_histogram_csv(&scan.diameters, geom.h, None);
        let total: usize = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap()).sum();
        assert_eq!(total, 60);
    }

    #[test]
    fn constant_contraction_has_no_bones() {
        let f = ConstantFamily::contraction(PlanePoint::new(0.1, 0.1), 0.5, unit(), 2);
        let geom = GridGeometry::for_disk(&unit(), 256);
        let scan = bony_scan(&f, 20, 40, 10.0 * geom.h, &geom, 1).unwrap();
        assert_eq!(scan.report.stat("bone_fraction"), Some(0.0));
    }

    #[test]
    fn usc_holds_for_the_default_family() {
        let p = plateau();
        let dom = p.config().domain;
        let geom = GridGeometry::for_disk(&dom, 512);
        for seed in 0..3 {
            let s = sample_solenoid(seed, 256, 8).unwrap();
            let rep = usc_probe(&p, &s, 1e-2 * dom.diameter(), 8, 200, &geom, seed).unwrap();
            assert!(rep.passed(), "{rep}");
        }
        let s = sample_solenoid(0, 256, 8).unwrap();
        assert!(usc_probe(&p, &s, 2.0 * geom.h, 8, 200, &geom, 0).is_err());
    }

    #[test]
    fn usc_fails_across_a_jump() {
        let a: Arc<dyn PlaneMap> = Arc::new(AffineMap::similarity(0.5, PlanePoint::new(0.4, 0.0)));
        let b: Arc<dyn PlaneMap> = Arc::new(AffineMap::similarity(0.5, PlanePoint::new(-0.4, 0.0)));
        let c: Arc<dyn PlaneMap> = Arc::new(AffineMap::similarity(0.5, PlanePoint::new(0.0, 0.4)));
        let f = SwitchingFamily { maps: vec![a, b, c], domain: unit(), k: 2 };
        let geom = GridGeometry::for_disk(&unit(), 256);
        // t₋₁ = 1/3 sits on the first jump, so every neighborhood sees two pieces
        let mut digits = sample_solenoid(9, 80, 2).unwrap().digits().to_vec();
        digits[0] = 0;
        let s = SolenoidPoint::new(2.0 / 3.0, digits, 2).unwrap();
        let rep = usc_probe(&f, &s, 0.05, 16, 60, &geom, 2).unwrap();
        assert!(!rep.passed(), "{rep}");
    }

    #[test]
    fn two_starts_agree_at_certified_depth() {
        let rep = two_start_discrepancy(&plateau(), 20, 1e-8, 5);
        assert!(rep.passed(), "{rep}");
        assert!(rep.stat("max_discrepancy").unwrap() < 2e-8);
        // a rotation never contracts, so no depth is certified
        let rot = ConstantFamily::new(Arc::new(AffineMap::new(Mat2::rotation(1.0), PlanePoint::ORIGIN)), unit(), 2);
        assert_eq!(two_start_discrepancy(&rot, 3, 1e-8, 5).verdict, Verdict::Inconclusive);
    }

    #[test]
    fn usc_scan_aggregates_points() {
        let p = plateau();
        let geom = GridGeometry::for_disk(&p.config().domain, 512);
        let rep = usc_scan(&p, 3, 1e-2 * p.config().domain.diameter(), 4, 120, &geom, 1).unwrap();
        assert!(rep.passed(), "{rep}");
        assert_eq!(rep.stat("points_passed"), Some(3.0));
    }

    #[test]
    fn invariance_holds_and_truncation_fails() {
        let p = plateau();
        let rep = invariance_residual(&p, 100, 1e-6, PullbackDepth::Certified { tol: 1e-7 }, 5);
        assert!(rep.passed(), "{rep}");
        let rep = invariance_residual(&p, 20, 1e-6, PullbackDepth::Fixed(3), 5);
        assert_eq!(rep.verdict, Verdict::Fail);
        assert!(rep.stat("max_residual").unwrap() > 1e-6);
    }

    #[test]
    fn constant_family_has_zero_residual() {
        let f = ConstantFamily::contraction(PlanePoint::new(0.2, 0.0), 0.5, unit(), 3);
        let rep = invariance_residual(&f, 10, 1e-9, PullbackDepth::Certified { tol: 1e-10 }, 1);
        assert!(rep.passed(), "{rep}");
        assert!(rep.stat("max_residual").unwrap() < 1e-15);
    }

    #[test]
    fn graph_is_continuous() {
        let p = plateau();
        let dom = p.config().domain;
        let rep = continuity_modulus(&p, 50, 1.0 / 1024.0, 1e-2 * dom.diameter(), 1e-8, 7).unwrap();
        assert!(rep.passed(), "{rep}");
        // a smooth family is Lipschitz along the solenoid
        let f = CircleDriftFamily { a: Mat2::diag(0.5, 0.5), r: 0.3, domain: unit(), k: 4 };
        let rep = continuity_modulus(&f, 50, 1e-6, 1e-4, 1e-10, 7).unwrap();
        assert!(rep.passed(), "{rep}");
    }

    #[test]
    fn one_branch_is_one_point() {
        let p = plateau();
        let geom = GridGeometry::for_disk(&p.config().domain, 256);
        assert_eq!(base_fiber_cloud(&p, 0.3, 1, 400, &geom, 1).unwrap().count(), 1);
    }

    #[test]
    fn base_fiber_cloud_lies_in_the_attractor() {
        let p = plateau();
        let dom = p.config().domain;
        let geom = GridGeometry::for_disk(&dom, 128);
        let fam: Arc<dyn FiberMaps> = Arc::new(p.clone());
        let hut = Hutchinson::for_family(&fam, HutchinsonMode::Circle { samples: 256 });
        let run = hut.iterate(&GridSet::from_disk(geom, &dom), 0.5 * geom.h, 400);
        assert!(run.converged);
        let samples = base_fiber_samples(&p, 0.37, 200, 400, 3).unwrap();
        let k = run.set.dilate(geom.h);
        for g in &samples {
            assert!(g.tail_bound < geom.h);
            assert!(k.contains_point(g.gamma));
        }
    }
}
