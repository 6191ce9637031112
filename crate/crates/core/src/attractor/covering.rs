use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{generators, AffineMap, FiberMaps, OrientedBox, PlaneMap};
use crate::geometry::{inclusion_margin, DiagnosticReport, DiskDomain, GridGeometry, GridSet, PlanePoint, Verdict};
use crate::{par, rng};

/// Cells within this many cell widths of `Cl(B)` are tested for membership
/// in the union, which caps the reported margin.
const MARGIN_BAND: f64 = 8.0;

/// A closed planar region described by a 1-Lipschitz level function that is
/// `≤ 0` exactly on the region.
pub trait Region: Sync + Send {
    fn level(&self, p: PlanePoint) -> f64;

    /// Axis-aligned bounding box `(min, max)`.
    fn bounds(&self) -> (PlanePoint, PlanePoint);
}

impl Region for DiskDomain {
    fn level(&self, p: PlanePoint) -> f64 {
        p.dist(self.center) - self.radius
    }

    fn bounds(&self) -> (PlanePoint, PlanePoint) {
        let r = PlanePoint::new(self.radius, self.radius);
        (self.center - r, self.center + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Ellipse,
    Rectangle,
}

/// An ellipse or rectangle with semi-axes `a`, `b` along the frame rotated
/// by `angle`. Ellipses are normalized to `a ≥ b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub shape: Shape,
    pub center: PlanePoint,
    pub semi_axes: [f64; 2],
    pub angle: f64,
}

impl RegionSpec {
    pub fn new(shape: Shape, center: PlanePoint, a: f64, b: f64, angle: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() && angle.is_finite() && center.is_finite()) {
            return Err(Error::InvalidArgument(format!("semi-axes must be positive, got ({a}, {b})")));
        }
        let (a, b, angle) = if shape == Shape::Ellipse && b > a { (b, a, angle + FRAC_PI_2) } else { (a, b, angle) };
        Ok(RegionSpec { shape, center, semi_axes: [a, b], angle: angle.rem_euclid(PI) })
    }

    pub fn ellipse(center: PlanePoint, a: f64, b: f64, angle: f64) -> Result<Self> {
        RegionSpec::new(Shape::Ellipse, center, a, b, angle)
    }

    pub fn rectangle(min: PlanePoint, max: PlanePoint) -> Result<Self> {
        let c = 0.5 * (min + max);
        RegionSpec::new(Shape::Rectangle, c, 0.5 * (max.x1 - min.x1), 0.5 * (max.x2 - min.x2), 0.0)
    }

    fn local(&self, p: PlanePoint) -> PlanePoint {
        (p - self.center).rotate_about(PlanePoint::ORIGIN, -self.angle)
    }

    fn params(&self) -> [f64; 5] {
        [self.center.x1, self.center.x2, self.semi_axes[0], self.semi_axes[1], self.angle]
    }

    fn from_params(shape: Shape, p: [f64; 5]) -> Result<Self> {
        RegionSpec::new(shape, PlanePoint::new(p[0], p[1]), p[2], p[3], p[4])
    }
}

impl Region for RegionSpec {
    fn level(&self, p: PlanePoint) -> f64 {
        let d = self.local(p);
        let [a, b] = self.semi_axes;
        match self.shape {
            // q = |(d₁/a, d₂/b)| is (1/min(a, b))-Lipschitz
            Shape::Ellipse => a.min(b) * ((d.x1 / a).hypot(d.x2 / b) - 1.0),
            Shape::Rectangle => {
                let qx = d.x1.abs() - a;
                let qy = d.x2.abs() - b;
                qx.max(0.0).hypot(qy.max(0.0)) + qx.max(qy).min(0.0)
            }
        }
    }

    fn bounds(&self) -> (PlanePoint, PlanePoint) {
        let [a, b] = self.semi_axes;
        let (s, c) = self.angle.sin_cos();
        let (ex, ey) = match self.shape {
            Shape::Ellipse => ((a * c).hypot(b * s), (a * s).hypot(b * c)),
            Shape::Rectangle => (a * c.abs() + b * s.abs(), a * s.abs() + b * c.abs()),
        };
        let e = PlanePoint::new(ex, ey);
        (self.center - e, self.center + e)
    }
}

/// An IFS, the region `X` candidate sets must stay in, and the grid the
/// certificate is computed on.
#[derive(Clone)]
pub struct CoveringProblem {
    pub maps: Vec<Arc<dyn PlaneMap>>,
    pub container: Arc<dyn Region>,
    pub grid: GridGeometry,
}

impl CoveringProblem {
    pub fn for_family(family: &Arc<dyn FiberMaps>, cells: usize) -> Self {
        let dom = family.domain();
        CoveringProblem {
            maps: generators(family),
            container: Arc::new(dom),
            grid: GridGeometry::for_disk(&dom, cells),
        }
    }

    /// `x ↦ 0.6 x + c`, `c ∈ {0, 0.4}²`, on the unit square.
    pub fn overlapping_control(cells: usize) -> Self {
        Self::square_similarities(0.6, 0.4, cells)
    }

    /// `x ↦ x/3 + c`, `c ∈ {0, 2/3}²`: a Cantor dust.
    pub fn cantor_control(cells: usize) -> Self {
        Self::square_similarities(1.0 / 3.0, 2.0 / 3.0, cells)
    }

    fn square_similarities(r: f64, shift: f64, cells: usize) -> Self {
        let maps = [(0.0, 0.0), (shift, 0.0), (0.0, shift), (shift, shift)]
            .iter()
            .map(|&(x, y)| Arc::new(AffineMap::similarity(r, PlanePoint::new(x, y))) as Arc<dyn PlaneMap>)
            .collect();
        let pad = 0.05;
        let h = (1.0 + 2.0 * pad) / cells.max(1) as f64;
        let grid = GridGeometry::new(PlanePoint::new(-pad, -pad), h, cells.max(1), cells.max(1)).expect("valid grid");
        let square = RegionSpec::rectangle(PlanePoint::ORIGIN, PlanePoint::new(1.0, 1.0)).expect("valid square");
        CoveringProblem { maps, container: Arc::new(square), grid }
    }

    /// Cells that meet `Cl(B)`: center within half a diagonal of `B`.
    pub fn outer_raster(&self, region: &dyn Region) -> GridSet {
        let r = self.grid.h * FRAC_1_SQRT_2;
        GridSet::from_predicate(self.grid, |c| region.level(c) <= r)
    }

    /// Cells certified to lie inside `⋃ f_i(B)`, searched within `band` of
    /// `near`. A cell is inside `f(B)` when `f⁻¹` of its center is at depth
    /// at least `Lip(f⁻¹) · h/√2` in `B`.
    pub fn inner_union(&self, region: &dyn Region, near: &GridSet) -> GridSet {
        let h = self.grid.h;
        let r = h * FRAC_1_SQRT_2;
        let zone = near.dilate(MARGIN_BAND * h);
        let (lo, hi) = region.bounds();
        let bbox =
            OrientedBox { center: 0.5 * (lo + hi), angle: 0.0, a: 0.5 * (hi.x1 - lo.x1), b: 0.5 * (hi.x2 - lo.x2) };
        let images: Vec<(OrientedBox, f64)> =
            self.maps.iter().map(|f| (f.map_box(&bbox), f.inverse_lipschitz() * r)).collect();
        GridSet::from_predicate(self.grid, |c| {
            zone.contains_point(c)
                && self.maps.iter().zip(&images).any(|(f, (ibox, depth))| {
                    ibox.contains(c, 0.0) && f.invert(c).is_ok_and(|y| region.level(y) <= -depth)
                })
        })
    }

    /// Whether `B` lies in the container, up to the grid resolution.
    pub fn inside_container(&self, region: &dyn Region) -> bool {
        let a = self.outer_raster(region);
        let r = self.grid.h * FRAC_1_SQRT_2;
        let inside = a.cells().all(|(ix, iy)| self.container.level(self.grid.center(ix, iy)) <= r);
        inside
    }

    /// `inclusion_margin(Cl(B), ⋃ f_i(B))` on the grid, `−∞` if `B` is not
    /// in the container or misses the grid.
    pub fn margin(&self, region: &dyn Region) -> f64 {
        let a = self.outer_raster(region);
        if a.is_empty() || !self.inside_container(region) {
            return f64::NEG_INFINITY;
        }
        let u = self.inner_union(region, &a);
        inclusion_margin(&a, &u).expect("same geometry")
    }
}

/// Sound grid certificate of `Cl(B) ⊂ ⋃ f_i(B)`: PASS iff the margin is at
/// least `margin_req` and positive.
pub fn covering_verify(problem: &CoveringProblem, region: &dyn Region, margin_req: f64) -> DiagnosticReport {
    let a = problem.outer_raster(region);
    let inside = !a.is_empty() && problem.inside_container(region);
    let mut report = DiagnosticReport::new("covering", Verdict::Fail, a.count() as u64, 0);
    report.set("cells", a.count() as f64);
    report.set("h", problem.grid.h);
    if !inside {
        report.set("margin", f64::NEG_INFINITY);
        report.note("candidate region is not contained in the domain");
        return report;
    }
    let u = problem.inner_union(region, &a);
    let margin = inclusion_margin(&a, &u).expect("same geometry");
    report.set("margin", margin);
    report.set("covered_fraction", u.coverage_of(&a).expect("same geometry"));
    report.set("margin_required", margin_req);
    report.verdict = Verdict::from_bool(margin > 0.0 && margin >= margin_req);
    report
}

const DESCENT_STARTS: usize = 8;

/// Coordinate descent with step halving; returns the best spec, its margin
/// and the number of evaluations used.
fn descend(
    problem: &CoveringProblem,
    shape: Shape,
    start: (RegionSpec, f64),
    span: f64,
    budget: usize,
) -> (RegionSpec, f64, usize) {
    let (mut spec, mut score) = start;
    let mut steps = [0.05 * span, 0.05 * span, 0.05 * span, 0.05 * span, 0.2];
    let floor = 0.25 * problem.grid.h;
    let mut used = 0;
    while used < budget && steps[..4].iter().any(|&s| s > floor) {
        let mut improved = false;
        for k in 0..5 {
            for sign in [1.0, -1.0] {
                if used >= budget {
                    return (spec, score, used);
                }
                let mut p = spec.params();
                p[k] += sign * steps[k];
                used += 1;
                if let Ok(cand) = RegionSpec::from_params(shape, p) {
                    let m = problem.margin(&cand);
                    if m > score {
                        spec = cand;
                        score = m;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            for s in steps.iter_mut() {
                *s *= 0.5;
            }
        }
    }
    (spec, score, used)
}

#[derive(Debug, Clone)]
pub struct CoveringOutcome {
    pub best: Option<RegionSpec>,
    pub margin: f64,
    pub evaluations: usize,
    pub report: DiagnosticReport,
}

/// Random sampling followed by coordinate descent over the five shape
/// parameters, maximizing the covering margin within `budget` evaluations.
pub fn covering_search(problem: &CoveringProblem, shape: Shape, budget: usize, seed: u64) -> CoveringOutcome {
    let (lo, hi) = problem.container.bounds();
    let span = (hi.x1 - lo.x1).max(hi.x2 - lo.x2);
    let random_phase = (budget / 2).max(1).min(budget);
    let candidates: Vec<Option<RegionSpec>> = (0..random_phase)
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let c = PlanePoint::new(r.random_range(lo.x1..hi.x1), r.random_range(lo.x2..hi.x2));
            let a = span * r.random_range(0.05..0.5);
            let b = a * r.random_range(0.2..1.0);
            let angle = if r.random_bool(0.25) { 0.0 } else { r.random_range(0.0..PI) };
            RegionSpec::new(shape, c, a, b, angle).ok()
        })
        .collect();
    let scores = par::map_slice(&candidates, |c| c.map_or(f64::NEG_INFINITY, |s| problem.margin(&s)));
    let mut evaluations = candidates.len();
    let mut ranked: Vec<(RegionSpec, f64)> =
        candidates.iter().zip(&scores).filter_map(|(c, s)| c.map(|spec| (spec, *s))).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut best = ranked.first().copied();
    // coordinate descent from the best few starts, sharing what is left of the budget
    let starts = ranked.iter().take(DESCENT_STARTS).copied().collect::<Vec<_>>();
    for (i, start) in starts.iter().enumerate() {
        let share = (budget - evaluations) / (starts.len() - i);
        let (spec, score, used) = descend(problem, shape, *start, span, share);
        evaluations += used;
        if best.is_none_or(|(_, m)| score > m) {
            best = Some((spec, score));
        }
    }
    let margin = best.map_or(f64::NEG_INFINITY, |(_, m)| m);
    let mut report =
        DiagnosticReport::new("covering_search", Verdict::from_bool(margin > 0.0), evaluations as u64, seed)
            .with_stat("margin", margin)
            .with_stat("h", problem.grid.h);
    if let Some((s, _)) = best {
        report.set("center_x1", s.center.x1);
        report.set("center_x2", s.center.x2);
        report.set("semi_axis_a", s.semi_axes[0]);
        report.set("semi_axis_b", s.semi_axes[1]);
        report.set("angle", s.angle);
    }
    CoveringOutcome { best: best.map(|(s, _)| s), margin, evaluations, report }
}
