//! The invariant graph `γ` of the solenoidal skew product and the fiber sets
//! `Δ_𝐭 = ⋂ₙ X(𝐭, n)` it is built from.

mod probes;

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::family::{FiberMaps, OrientedBox};
use crate::geometry::{GridGeometry, GridSet, PlanePoint, SolenoidPoint};
use crate::{par, rng};

pub use probes::{
    base_fiber_cloud, base_fiber_samples, bony_histogram_csv, bony_scan, continuity_modulus, invariance_residual,
    sample_nearby, sync_pair, sync_test, two_start_discrepancy, usc_probe, usc_scan, BonyScan, SyncOutcome,
};

/// Word length of the first pullback attempt.
pub const INITIAL_DEPTH: usize = 16;
/// Digits drawn for solenoid samples in the probes.
pub const SAMPLE_DEPTH: usize = 2048;

/// `γ(𝐭)` with a certified error bound.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSample {
    pub s: SolenoidPoint,
    pub gamma: PlanePoint,
    /// Number of fiber maps composed.
    pub depth_used: usize,
    /// Upper bound on `diam X(𝐭, depth_used)`, hence on the error of `gamma`.
    pub tail_bound: f64,
}

/// How deep to pull back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PullbackDepth {
    /// Double the word length until the certified tail is below `tol / 2`.
    Certified { tol: f64 },
    /// Compose exactly this many maps, whatever the tail.
    Fixed(usize),
}

fn check_len(s: &SolenoidPoint, n: usize) -> Result<()> {
    if n == 0 || n > s.depth() {
        return Err(Error::Incompatible(format!(
            "a depth-{} solenoid point supports 1..={} maps, asked for {n}",
            s.depth(),
            s.depth()
        )));
    }
    Ok(())
}

/// `X(𝐭, n, x) = f_{t₋₁} ∘ f_{t₋₂} ∘ … ∘ f_{t₋ₙ}(x)`, the fiber over `𝐭`
/// reached from time `−n`. With this indexing `f_{t₀}(γ(𝐭)) = γ(ξ(𝐭))`.
pub fn pullback(family: &dyn FiberMaps, s: &SolenoidPoint, n: usize, x: PlanePoint) -> Result<PlanePoint> {
    check_len(s, n)?;
    let coords = s.coordinates();
    Ok(coords[1..=n].iter().rev().fold(x, |p, &t| family.eval(t, p)))
}

/// Image of the center of `X` under the maps at `coords` (outermost first),
/// with the smaller of the box-enclosure diameter and `Lip · diam X` as
/// error bound, plus a rounding allowance of a few ulps per map.
fn enclose(family: &dyn FiberMaps, coords: &[f64]) -> (PlanePoint, f64) {
    let dom = family.domain();
    let scale = dom.center.norm() + dom.radius;
    let rounding = 8.0 * f64::EPSILON * scale * coords.len() as f64;
    let mut x = dom.center;
    let mut bx = OrientedBox::around_disk(&dom);
    let mut lip = 1.0;
    for &t in coords.iter().rev() {
        x = family.eval(t, x);
        bx = family.map_box(t, &bx);
        lip *= family.lipschitz(t);
    }
    (x, bx.diameter().min(lip * dom.diameter()) + rounding)
}

/// Pulls back exactly `n` maps.
pub fn pullback_at_depth(family: &dyn FiberMaps, s: &SolenoidPoint, n: usize) -> Result<GraphSample> {
    check_len(s, n)?;
    let (gamma, tail_bound) = enclose(family, &s.coordinates()[1..=n]);
    Ok(GraphSample { s: s.clone(), gamma, depth_used: n, tail_bound })
}

/// `γ(𝐭)` to within `tol`.
///
/// The word length doubles from [`INITIAL_DEPTH`] until the certified
/// diameter of `X(𝐭, n)` drops below `tol / 2`; INCONCLUSIVE if the stored
/// digits run out first.
pub fn pullback_gamma(family: &dyn FiberMaps, s: &SolenoidPoint, tol: f64) -> Result<GraphSample> {
    let coords = s.coordinates();
    let avail = s.depth();
    if avail == 0 {
        return Err(Error::Inconclusive("no backward digits to pull back along".into()));
    }
    let mut n = INITIAL_DEPTH.min(avail);
    loop {
        let (gamma, tail_bound) = enclose(family, &coords[1..=n]);
        if tail_bound < 0.5 * tol {
            return Ok(GraphSample { s: s.clone(), gamma, depth_used: n, tail_bound });
        }
        if n == avail {
            return Err(Error::Inconclusive(format!(
                "all {n} maps used, certified tail {tail_bound:.3e} not below {:.3e}",
                0.5 * tol
            )));
        }
        n = (2 * n).min(avail);
    }
}

pub fn graph_point(family: &dyn FiberMaps, s: &SolenoidPoint, depth: PullbackDepth) -> Result<GraphSample> {
    match depth {
        PullbackDepth::Certified { tol } => pullback_gamma(family, s, tol),
        PullbackDepth::Fixed(n) => pullback_at_depth(family, s, n),
    }
}

/// `X(𝐭, depth)` rasterized.
///
/// The composed map is a homeomorphism onto its image, so the image of the
/// disk is the region bounded by the image of its boundary circle. The
/// circle is sampled with `boundary_samples` points and refined until
/// consecutive images are within `h/2`; the image polygon is then filled
/// by scanlines and its vertices stamped. Depth 0 is `X` itself.
pub fn fiber_set(
    family: &dyn FiberMaps,
    s: &SolenoidPoint,
    depth: usize,
    boundary_samples: usize,
    geom: &GridGeometry,
) -> Result<GridSet> {
    let dom = family.domain();
    if depth == 0 {
        return Ok(GridSet::from_disk(*geom, &dom));
    }
    check_len(s, depth)?;
    let coords = &s.coordinates()[1..=depth];
    let push = |a: f64| {
        let (sin, cos) = (std::f64::consts::TAU * a).sin_cos();
        let p = dom.center + PlanePoint::new(dom.radius * cos, dom.radius * sin);
        coords.iter().rev().fold(p, |x, &t| family.eval(t, x))
    };
    const MAX_VERTICES: usize = 1 << 20;
    let n0 = boundary_samples.max(8);
    let mut params: Vec<f64> = (0..n0).map(|i| i as f64 / n0 as f64).collect();
    let mut images = par::map_slice(&params, |&a| push(a));
    let gap = 0.5 * geom.h;
    while params.len() < MAX_VERTICES {
        let n = params.len();
        let mids: Vec<(usize, f64)> = (0..n)
            .filter(|&i| images[i].dist(images[(i + 1) % n]) > gap)
            .map(|i| {
                let next = if i + 1 == n { 1.0 } else { params[i + 1] };
                (i, 0.5 * (params[i] + next))
            })
            .collect();
        if mids.is_empty() {
            break;
        }
        let new_images = par::map_slice(&mids, |&(_, a)| push(a));
        let mut p2 = Vec::with_capacity(n + mids.len());
        let mut i2 = Vec::with_capacity(n + mids.len());
        let mut m = 0;
        for i in 0..n {
            p2.push(params[i]);
            i2.push(images[i]);
            if m < mids.len() && mids[m].0 == i {
                p2.push(mids[m].1);
                i2.push(new_images[m]);
                m += 1;
            }
        }
        params = p2;
        images = i2;
    }
    let mut set = fill_polygon(geom, &images);
    for p in &images {
        if let Some((ix, iy)) = geom.cell_of(*p) {
            set.insert(ix, iy);
        }
    }
    Ok(set)
}

/// Cells whose centers lie inside the closed polygon (even-odd rule).
fn fill_polygon(geom: &GridGeometry, poly: &[PlanePoint]) -> GridSet {
    let mut set = GridSet::empty(*geom);
    let n = poly.len();
    if n < 3 {
        return set;
    }
    let (lo, hi) = poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.x2), b.max(p.x2)));
    let row_of = |y: f64| ((y - geom.origin.x2) / geom.h - 0.5).max(0.0);
    let first = row_of(lo).floor() as usize;
    let last = (row_of(hi).ceil() as usize).min(geom.ny.saturating_sub(1));
    let mut xs = Vec::new();
    for iy in first..=last {
        let y = geom.center(0, iy).x2;
        xs.clear();
        for i in 0..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            if (a.x2 <= y) != (b.x2 <= y) {
                xs.push(a.x1 + (y - a.x2) / (b.x2 - a.x2) * (b.x1 - a.x1));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let c0 = ((pair[0] - geom.origin.x1) / geom.h - 0.5).ceil().max(0.0) as usize;
            let c1 = ((pair[1] - geom.origin.x1) / geom.h - 0.5).floor();
            if c1 < 0.0 {
                continue;
            }
            for ix in c0..=(c1 as usize).min(geom.nx - 1) {
                set.insert(ix, iy);
            }
        }
    }
    set
}

/// Short hex digest of a digit word.
pub fn digits_digest(digits: &[u32]) -> String {
    let h = digits.iter().fold(0x9e37_79b9_7f4a_7c15u64 ^ digits.len() as u64, |h, &d| rng::mix64(h ^ d as u64));
    format!("{h:016x}")
}

/// CSV `t0,digest(digits),gamma_x1,gamma_x2,depth,tail`.
pub fn graph_csv(samples: &[GraphSample], header: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        for line in h.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    out.push_str("t0,digest,gamma_x1,gamma_x2,depth,tail\n");
    for g in samples {
        let _ = writeln!(
            out,
            "{:.16e},{},{:.16e},{:.16e},{},{:.6e}",
            g.s.t0(),
            digits_digest(g.s.digits()),
            g.gamma.x1,
            g.gamma.x2,
            g.depth_used,
            g.tail_bound
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{CircleDriftFamily, ConstantFamily, FamilyConfig, PlateauFamily};
    use crate::geometry::{DiskDomain, Mat2};
    use crate::skew::sample_solenoid;

    fn plateau() -> PlateauFamily {
        PlateauFamily::new(FamilyConfig::default()).unwrap()
    }

    #[test]
    fn constant_family_graph_is_the_fixed_point() {
        let dom = DiskDomain { center: PlanePoint::ORIGIN, radius: 1.0 };
        let p = PlanePoint::new(0.3, -0.4);
        let f = ConstantFamily::contraction(p, 0.5, dom, 3);
        let s = sample_solenoid(1, 100, 3).unwrap();
        let g = pullback_gamma(&f, &s, 1e-12).unwrap();
        assert!(g.gamma.dist(p) <= g.tail_bound);
        assert!(g.tail_bound < 0.5e-12);
    }

    #[test]
    fn circle_drift_matches_the_series() {
        let a = Mat2::new(0.5, 0.2, -0.1, 0.4);
        let f = CircleDriftFamily { a, r: 0.3, domain: DiskDomain { center: PlanePoint::ORIGIN, radius: 1.0 }, k: 5 };
        for seed in 0..20 {
            let s = sample_solenoid(seed, 200, 5).unwrap();
            let g = pullback_gamma(&f, &s, 1e-10).unwrap();
            // γ = Σ Aʲ c(t₋ⱼ), summed independently of the pullback code
            let mut sum = PlanePoint::ORIGIN;
            let mut m = Mat2::IDENTITY;
            for &t in s.coordinates().iter().skip(1).take(150) {
                sum = sum + m.apply(f.drift(t));
                m = m.mul(&a);
            }
            assert!(g.gamma.dist(sum) < 1e-10, "seed {seed}");
        }
    }

    #[test]
    fn weak_backward_word_pulls_to_x0() {
        // t₋ⱼ = 0 for all j: every map is the weak generator
        let p = plateau();
        let s = SolenoidPoint::new(0.0, vec![0; 4000], 8).unwrap();
        let g = pullback_at_depth(&p, &s, 4000).unwrap();
        assert!(g.gamma.dist(p.config().x0) <= g.tail_bound);
        assert!(g.tail_bound < 5e-3);
    }

    #[test]
    fn limit_does_not_depend_on_the_start() {
        let p = plateau();
        let dom = p.config().domain;
        let mut r = rng::stream(3, 0);
        for seed in 0..30 {
            let s = sample_solenoid(seed, SAMPLE_DEPTH, 8).unwrap();
            let g = pullback_gamma(&p, &s, 1e-8).unwrap();
            let x = pullback(&p, &s, g.depth_used, dom.sample(&mut r)).unwrap();
            let y = pullback(&p, &s, g.depth_used, dom.sample(&mut r)).unwrap();
            assert!(x.dist(y) < 2e-8);
            assert!(x.dist(g.gamma) <= g.tail_bound);
        }
    }

    #[test]
    fn exhausted_digits_are_inconclusive() {
        let p = plateau();
        let s = sample_solenoid(4, 10, 8).unwrap();
        assert!(matches!(pullback_gamma(&p, &s, 1e-12), Err(Error::Inconclusive(_))));
        assert!(pullback(&p, &s, 11, PlanePoint::ORIGIN).is_err());
    }

    #[test]
    fn fiber_sets_nest() {
        let p = plateau();
        let dom = p.config().domain;
        let geom = GridGeometry::for_disk(&dom, 256);
        let s = sample_solenoid(5, 64, 8).unwrap();
        let x = fiber_set(&p, &s, 0, 64, &geom).unwrap();
        assert_eq!(x, GridSet::from_disk(geom, &dom));
        let mut prev = x;
        for d in [1usize, 5, 15, 25, 35] {
            let cur = fiber_set(&p, &s, d, 64, &geom).unwrap();
            assert!(cur.is_subset(&prev.dilate(2.0 * geom.h)).unwrap(), "depth {d}");
            prev = cur;
        }
    }

    #[test]
    fn polygon_fill_of_a_square() {
        let geom = GridGeometry::new(PlanePoint::ORIGIN, 1.0, 10, 10).unwrap();
        let sq = [
            PlanePoint::new(2.0, 2.0),
            PlanePoint::new(6.0, 2.0),
            PlanePoint::new(6.0, 5.0),
            PlanePoint::new(2.0, 5.0),
        ];
        let set = fill_polygon(&geom, &sq);
        // centers 2.5..5.5 by 2.5..4.5
        assert_eq!(set.count(), 4 * 3);
        assert!(set.contains_cell(2, 2) && set.contains_cell(5, 4) && !set.contains_cell(6, 2));
    }

    #[test]
    fn deep_fiber_set_is_small() {
        let p = plateau();
        let dom = p.config().domain;
        let geom = GridGeometry::for_disk(&dom, 1024);
        let s = sample_solenoid(6, 256, 8).unwrap();
        let set = fiber_set(&p, &s, 200, 64, &geom).unwrap();
        assert!(set.diameter() < 1e-3 * dom.diameter());
        let g = pullback_gamma(&p, &s, 1e-8).unwrap();
        assert!(set.dilate(geom.h).contains_point(g.gamma));
    }

    #[test]
    fn csv_has_one_row_per_sample() {
        let p = plateau();
        let mut r = rng::stream(8, 0);
        let gs: Vec<_> = (0..3)
            .map(|_| {
                let s = crate::skew::sample_solenoid_with(&mut r, 600, 8).unwrap();
                pullback_gamma(&p, &s, 1e-6).unwrap()
            })
            .collect();
        let csv = graph_csv(&gs, Some("hdr"));
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("# hdr\nt0,digest,"));
        assert_ne!(digits_digest(&[1, 2]), digits_digest(&[2, 1]));
    }
}
