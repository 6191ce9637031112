use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the plane fiber.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanePoint {
    pub x1: f64,
    pub x2: f64,
}

impl PlanePoint {
    pub const ORIGIN: PlanePoint = PlanePoint { x1: 0.0, x2: 0.0 };

    pub const fn new(x1: f64, x2: f64) -> Self {
        PlanePoint { x1, x2 }
    }

    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x2)
    }

    pub fn dist(self, other: PlanePoint) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: PlanePoint) -> f64 {
        self.x1 * other.x1 + self.x2 * other.x2
    }

    /// Rotation by `angle` radians about `center`.
    pub fn rotate_about(self, center: PlanePoint, angle: f64) -> PlanePoint {
        let (s, c) = angle.sin_cos();
        let d = self - center;
        center + PlanePoint::new(c * d.x1 - s * d.x2, s * d.x1 + c * d.x2)
    }
}

impl Add for PlanePoint {
    type Output = PlanePoint;
    fn add(self, o: PlanePoint) -> PlanePoint {
        PlanePoint::new(self.x1 + o.x1, self.x2 + o.x2)
    }
}

impl Sub for PlanePoint {
    type Output = PlanePoint;
    fn sub(self, o: PlanePoint) -> PlanePoint {
        PlanePoint::new(self.x1 - o.x1, self.x2 - o.x2)
    }
}

impl Neg for PlanePoint {
    type Output = PlanePoint;
    fn neg(self) -> PlanePoint {
        PlanePoint::new(-self.x1, -self.x2)
    }
}

impl Mul<PlanePoint> for f64 {
    type Output = PlanePoint;
    fn mul(self, p: PlanePoint) -> PlanePoint {
        PlanePoint::new(self * p.x1, self * p.x2)
    }
}

/// Row-major 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };
    pub const ZERO: Mat2 = Mat2 { a: 0.0, b: 0.0, c: 0.0, d: 0.0 };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub const fn diag(p: f64, q: f64) -> Self {
        Mat2 { a: p, b: 0.0, c: 0.0, d: q }
    }

    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Mat2::new(c, -s, s, c)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn apply(&self, v: PlanePoint) -> PlanePoint {
        PlanePoint::new(self.a * v.x1 + self.b * v.x2, self.c * v.x1 + self.d * v.x2)
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn sub(&self, o: &Mat2) -> Mat2 {
        Mat2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        Mat2::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(s * self.a, s * self.b, s * self.c, s * self.d)
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Mat2::new(self.d / det, -self.b / det, -self.c / det, self.a / det))
    }

    /// Spectral norm (largest singular value), closed form.
    pub fn norm(&self) -> f64 {
        let (s1, _) = self.singular_values();
        s1
    }

    /// Singular values `(σ₁ ≥ σ₂)`.
    pub fn singular_values(&self) -> (f64, f64) {
        // σ₁,₂ = (√((a+d)²+(c−b)²) ± √((a−d)²+(b+c)²)) / 2
        let p = (self.a + self.d).hypot(self.c - self.b);
        let q = (self.a - self.d).hypot(self.b + self.c);
        (0.5 * (p + q), 0.5 * (p - q).abs())
    }

    /// Eigenvalues as `(re, im)` pairs, larger modulus first.
    pub fn eigenvalues(&self) -> [(f64, f64); 2] {
        let tr = self.trace();
        let det = self.det();
        let disc = 0.25 * tr * tr - det;
        if disc >= 0.0 {
            let r = disc.sqrt();
            let (l1, l2) = (0.5 * tr + r, 0.5 * tr - r);
            if l1.abs() >= l2.abs() {
                [(l1, 0.0), (l2, 0.0)]
            } else {
                [(l2, 0.0), (l1, 0.0)]
            }
        } else {
            let im = (-disc).sqrt();
            [(0.5 * tr, im), (0.5 * tr, -im)]
        }
    }

    pub fn spectral_radius(&self) -> f64 {
        let [(re, im), _] = self.eigenvalues();
        re.hypot(im)
    }

    /// Largest absolute entry difference, used for comparisons.
    pub fn max_abs_diff(&self, o: &Mat2) -> f64 {
        (self.a - o.a).abs().max((self.b - o.b).abs()).max((self.c - o.c).abs()).max((self.d - o.d).abs())
    }
}

/// Angle on the unit circle `S¹ = ℝ/ℤ`, stored in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CircleAngle(f64);

impl CircleAngle {
    pub fn new(t: f64) -> Self {
        CircleAngle(wrap_unit(t))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Reduces a real number to its representative in `[0, 1)`.
pub fn wrap_unit(t: f64) -> f64 {
    let r = t - t.floor();
    // t slightly below an integer can round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Arc-length metric on `S¹`.
pub fn circle_dist(a: CircleAngle, b: CircleAngle) -> f64 {
    let d = (a.0 - b.0).abs();
    d.min(1.0 - d)
}

/// Closed disk in the plane; the fiber domain `X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskDomain {
    pub center: PlanePoint,
    pub radius: f64,
}

impl DiskDomain {
    pub fn new(center: PlanePoint, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() {
            return Err(Error::InvalidArgument(format!("disk radius must be positive and finite, got {radius}")));
        }
        Ok(DiskDomain { center, radius })
    }

    pub fn contains(&self, p: PlanePoint) -> bool {
        p.dist(self.center) <= self.radius
    }

    /// Membership with a relative slack, for points produced by solvers.
    pub fn contains_tol(&self, p: PlanePoint, slack: f64) -> bool {
        p.dist(self.center) <= self.radius * (1.0 + slack)
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    /// Uniform sample from the disk.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PlanePoint {
        let r = self.radius * rng.random::<f64>().sqrt();
        let a = std::f64::consts::TAU * rng.random::<f64>();
        self.center + PlanePoint::new(r * a.cos(), r * a.sin())
    }

    /// Uniform sample from the concentric disk scaled by `frac`.
    pub fn sample_inner<R: Rng + ?Sized>(&self, rng: &mut R, frac: f64) -> PlanePoint {
        let inner = DiskDomain { center: self.center, radius: self.radius * frac };
        inner.sample(rng)
    }

    /// `n` equally spaced points on the boundary circle.
    pub fn boundary(&self, n: usize) -> Vec<PlanePoint> {
        (0..n)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n as f64;
                self.center + PlanePoint::new(self.radius * a.cos(), self.radius * a.sin())
            })
            .collect()
    }
}

/// Convex hull (Andrew's monotone chain), counter-clockwise, without
/// collinear points.
pub fn convex_hull(points: &[PlanePoint]) -> Vec<PlanePoint> {
    let mut pts: Vec<PlanePoint> = points.to_vec();
    pts.sort_by(|a, b| a.x1.total_cmp(&b.x1).then(a.x2.total_cmp(&b.x2)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross =
        |o: PlanePoint, a: PlanePoint, b: PlanePoint| (a.x1 - o.x1) * (b.x2 - o.x2) - (a.x2 - o.x2) * (b.x1 - o.x1);
    let mut hull: Vec<PlanePoint> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Diameter of a finite point cloud. Exact: the farthest pair is always a
/// pair of hull vertices.
pub fn cloud_diameter(points: &[PlanePoint]) -> f64 {
    let hull = if points.len() > 64 { convex_hull(points) } else { points.to_vec() };
    let mut best = 0.0f64;
    for (i, p) in hull.iter().enumerate() {
        for q in &hull[i + 1..] {
            best = best.max(p.dist(*q));
        }
    }
    best
}
