//! Fiber maps: the trait every family implements, the concrete family built
//! from a [`FamilyConfig`], and plane-map adapters for IFS-level work.

use std::f64::consts::TAU;
use std::sync::Arc;

use super::config::FamilyConfig;
use super::smooth::{Eta, Theta};
use crate::error::{Error, Result};
use crate::geometry::{wrap_unit, DiskDomain, Mat2, PlanePoint};

/// Newton residual accepted by inverse solves.
pub const INVERSE_TOL: f64 = 1e-12;
/// Successive-distance threshold for fixed-point solves.
pub const FIXED_POINT_TOL: f64 = 1e-13;
/// Iteration cap for fixed-point solves.
pub const FIXED_POINT_CAP: usize = 1_000_000;

/// Closed rectangle `center + [−a, a]·e₁ + [−b, b]·e₂` with
/// `e₁ = (cos angle, sin angle)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: PlanePoint,
    pub angle: f64,
    pub a: f64,
    pub b: f64,
}

impl OrientedBox {
    pub fn around_disk(d: &DiskDomain) -> Self {
        OrientedBox { center: d.center, angle: 0.0, a: d.radius, b: d.radius }
    }

    pub fn ball(center: PlanePoint, r: f64) -> Self {
        OrientedBox { center, angle: 0.0, a: r, b: r }
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.a.hypot(self.b)
    }

    /// Half-widths of the smallest rectangle aligned with the frame rotated
    /// by `frame` that contains this box.
    pub fn half_widths_in(&self, frame: f64) -> (f64, f64) {
        let rel = self.angle - frame;
        let (s, c) = rel.sin_cos();
        let (s, c) = (s.abs(), c.abs());
        (c * self.a + s * self.b, s * self.a + c * self.b)
    }

    /// Minkowski sum with a disk of radius `r`, enclosed in a box.
    pub fn inflate(&self, r: f64) -> Self {
        OrientedBox { a: self.a + r, b: self.b + r, ..*self }
    }

    pub fn contains(&self, p: PlanePoint, slack: f64) -> bool {
        let d = (p - self.center).rotate_about(PlanePoint::ORIGIN, -self.angle);
        d.x1.abs() <= self.a + slack && d.x2.abs() <= self.b + slack
    }
}

/// A single planar map with certified derivative bounds.
pub trait PlaneMap: Sync + Send {
    fn apply(&self, x: PlanePoint) -> PlanePoint;

    fn jacobian(&self, x: PlanePoint) -> Mat2;

    /// Upper bound on `sup ‖Df‖` (hence a Lipschitz constant).
    fn lipschitz(&self) -> f64;

    /// Upper bound on the Lipschitz constant of the inverse.
    fn inverse_lipschitz(&self) -> f64;

    fn invert(&self, y: PlanePoint) -> Result<PlanePoint> {
        newton_invert(|x| self.apply(x), |x| self.jacobian(x), y, y)
    }

    /// A box containing the image of `b`.
    fn map_box(&self, b: &OrientedBox) -> OrientedBox {
        OrientedBox::ball(self.apply(b.center), self.lipschitz() * b.a.hypot(b.b))
    }
}

/// A family `t ↦ f_t` of planar maps indexed by the circle, with `k` the
/// branching factor of the base map.
pub trait FiberMaps: Sync + Send {
    fn k(&self) -> u32;

    fn domain(&self) -> DiskDomain;

    /// `f_t(x)` for `t ∈ [0, 1)`. No domain check.
    fn eval(&self, t: f64, x: PlanePoint) -> PlanePoint;

    fn jacobian(&self, t: f64, x: PlanePoint) -> Mat2;

    /// Upper bound on `sup_{x ∈ X} ‖Df_t(x)‖`.
    fn lipschitz(&self, t: f64) -> f64;

    /// Upper bound on `sup ‖D(f_t⁻¹)‖` over `f_t(X)`.
    fn inverse_lipschitz(&self, t: f64) -> f64;

    /// Upper bound on `sup_{t, x} |∂f_t(x)/∂t|`.
    fn t_lipschitz(&self) -> f64;

    /// Base angles whose fiber maps form the generator IFS.
    fn generator_angles(&self) -> Vec<f64>;

    fn name(&self) -> String;

    /// `∂f_t(x)/∂t`; central differences unless overridden.
    fn t_derivative(&self, t: f64, x: PlanePoint) -> PlanePoint {
        let h = 1e-6;
        let a = self.eval(wrap_unit(t + h), x);
        let b = self.eval(wrap_unit(t - h), x);
        (1.0 / (2.0 * h)) * (a - b)
    }

    /// `f_t⁻¹(y)` by Newton iteration started at `y`; a domain error when
    /// the preimage is not in `X`.
    fn inverse(&self, t: f64, y: PlanePoint) -> Result<PlanePoint> {
        let x = newton_invert(|x| self.eval(t, x), |x| self.jacobian(t, x), y, y)?;
        if !self.domain().contains_tol(x, 1e-9) {
            return Err(Error::OutsideDomain { x1: x.x1, x2: x.x2 });
        }
        Ok(x)
    }

    /// A box containing `f_t(b)`.
    fn map_box(&self, t: f64, b: &OrientedBox) -> OrientedBox {
        OrientedBox::ball(self.eval(t, b.center), self.lipschitz(t) * b.a.hypot(b.b))
    }
}

/// Damped Newton solve of `f(x) = y`.
pub fn newton_invert(
    f: impl Fn(PlanePoint) -> PlanePoint,
    jac: impl Fn(PlanePoint) -> Mat2,
    y: PlanePoint,
    start: PlanePoint,
) -> Result<PlanePoint> {
    let mut x = start;
    let mut r = f(x) - y;
    for _ in 0..200 {
        let rn = r.norm();
        if rn <= 1e-15 || !rn.is_finite() {
            break;
        }
        let Some(inv) = jac(x).inverse() else {
            return Err(Error::Inverse(format!("singular Jacobian at ({}, {})", x.x1, x.x2)));
        };
        let step = inv.apply(r);
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-8 {
            let cand = x - alpha * step;
            let rc = f(cand) - y;
            if rc.norm() < rn {
                x = cand;
                r = rc;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let rn = r.norm();
    if rn < INVERSE_TOL && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Inverse(format!("Newton stalled with residual {rn:e}")))
    }
}

/// Fixed point of a map that is a (weak) contraction near `start`: Picard
/// steps, switched to Newton on `f(p) − p` whenever Newton does better.
pub fn solve_fixed_point(
    f: impl Fn(PlanePoint) -> PlanePoint,
    jac: impl Fn(PlanePoint) -> Mat2,
    start: PlanePoint,
) -> Result<PlanePoint> {
    let mut p = start;
    for _ in 0..FIXED_POINT_CAP {
        let fp = f(p);
        let res = (fp - p).norm();
        let mut next = fp;
        if let Some(inv) = jac(p).sub(&Mat2::IDENTITY).inverse() {
            let cand = p - inv.apply(fp - p);
            if cand.is_finite() && (f(cand) - cand).norm() < (f(fp) - fp).norm() {
                next = cand;
            }
        }
        let step = next.dist(p);
        p = next;
        if step < FIXED_POINT_TOL || res == 0.0 {
            return Ok(p);
        }
    }
    Err(Error::Inconclusive(format!("fixed point not reached in {FIXED_POINT_CAP} iterations")))
}

/// Rotation angle of `h_τ`; a full turn is taken as exactly zero so that
/// `h₁ = h₀` holds bit for bit.
#[inline]
fn turn(tau: f64) -> f64 {
    if tau >= 1.0 {
        TAU * (tau - 1.0)
    } else {
        TAU * tau
    }
}

/// `atan w − w` without cancellation for small `|w|`.
fn atan_minus_identity(w: f64) -> f64 {
    if w.abs() < 1e-2 {
        let w2 = w * w;
        // −w³/3 + w⁵/5 − w⁷/7 + w⁹/9; the next term is below rounding
        -w * w2 * (1.0 / 3.0 - w2 * (1.0 / 5.0 - w2 * (1.0 / 7.0 - w2 / 9.0)))
    } else {
        w.atan() - w
    }
}

/// Center-coordinate profile `s(u) = ℓ σ(u/ℓ)`, `σ(w) = (w + atan w)/2`:
/// `s(0) = 0`, `s′(0) = 1`, `s′ ∈ (1/2, 1]`, so `|s(u) − s(v)| < |u − v|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterProfile {
    pub scale: f64,
}

impl CenterProfile {
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        let w = u / self.scale;
        0.5 * self.scale * (w + w.atan())
    }

    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        let w = u / self.scale;
        0.5 + 0.5 / (1.0 + w * w)
    }
}

/// The concrete family `f_t = h_{θ(t)}`, `h_τ = R_{2πτ, z} ∘ g_{η(τ)}`,
/// `g_c(x₀ + (u, v)) = x₀ + ((1 − c) s(u), λ v)`.
#[derive(Debug, Clone)]
pub struct PlateauFamily {
    cfg: FamilyConfig,
    eta: Eta,
    theta: Theta,
    profile: CenterProfile,
    /// `sup_{x ∈ X} |x − x₀|`.
    reach: f64,
}

impl PlateauFamily {
    pub fn new(cfg: FamilyConfig) -> Result<Self> {
        cfg.validate()?;
        PlateauFamily::new_unchecked(cfg)
    }

    /// Builds the family without validating `cfg`. Only useful for planting
    /// counterexamples (an expanding `λ′`, say) in diagnostics.
    pub fn new_unchecked(cfg: FamilyConfig) -> Result<Self> {
        let theta = Theta::new(&cfg)?;
        let profile = CenterProfile { scale: cfg.x0.dist(cfg.z) };
        let reach = cfg.x0.dist(cfg.domain.center) + cfg.domain.radius;
        Ok(PlateauFamily { eta: Eta { delta: cfg.delta }, theta, profile, reach, cfg })
    }

    pub fn config(&self) -> &FamilyConfig {
        &self.cfg
    }

    pub fn eta(&self) -> &Eta {
        &self.eta
    }

    pub fn theta(&self) -> &Theta {
        &self.theta
    }

    pub fn profile(&self) -> &CenterProfile {
        &self.profile
    }

    fn check_domain(&self, x: PlanePoint) -> Result<()> {
        if self.cfg.domain.contains_tol(x, 1e-12) {
            Ok(())
        } else {
            Err(Error::OutsideDomain { x1: x.x1, x2: x.x2 })
        }
    }

    /// `Dg_c(x)`.
    pub fn g_jacobian(&self, c: f64, x: PlanePoint) -> Mat2 {
        Mat2::diag((1.0 - c) * self.profile.derivative(x.x1 - self.cfg.x0.x1), self.cfg.lambda)
    }

    #[inline]
    pub fn g(&self, c: f64, x: PlanePoint) -> PlanePoint {
        let d = x - self.cfg.x0;
        self.cfg.x0 + PlanePoint::new((1.0 - c) * self.profile.value(d.x1), self.cfg.lambda * d.x2)
    }

    #[inline]
    fn h_raw(&self, tau: f64, x: PlanePoint) -> PlanePoint {
        let c = self.eta.value(tau);
        self.g(c, x).rotate_about(self.cfg.z, turn(tau))
    }

    #[inline]
    fn h_jac(&self, tau: f64, x: PlanePoint) -> Mat2 {
        Mat2::rotation(turn(tau)).mul(&self.g_jacobian(self.eta.value(tau), x))
    }

    /// `h_τ(x)` for `τ ∈ [0, 1]`, `x ∈ X`.
    pub fn h_eval(&self, tau: f64, x: PlanePoint) -> Result<PlanePoint> {
        self.eta.eval(tau)?;
        self.check_domain(x)?;
        Ok(self.h_raw(tau, x))
    }

    pub fn h_jacobian(&self, tau: f64, x: PlanePoint) -> Result<Mat2> {
        self.eta.eval(tau)?;
        Ok(self.h_jac(tau, x))
    }

    /// `f_t(x) = h_{θ(t)}(x)` with a domain check.
    pub fn fiber_eval(&self, t: f64, x: PlanePoint) -> Result<PlanePoint> {
        self.check_domain(x)?;
        Ok(self.eval(wrap_unit(t), x))
    }

    /// The unique fixed point of `h_τ`.
    ///
    /// Solved for the displacement `d = p − x₀` with the residual
    /// `(R − I)(x₀ − z) + R G(d) − d` evaluated without cancellation, so that
    /// Newton keeps converging at the weak fixed point (a triple root of
    /// `s(u) − u` when `τ ∈ {0, 1/2, 1}`), where `h_τ(p) − p` computed in
    /// world coordinates drowns in rounding long before `10⁻¹³`.
    pub fn fixed_point(&self, tau: f64) -> Result<PlanePoint> {
        let c = self.eta.eval(tau)?;
        let (x0, z, lam, ell) = (self.cfg.x0, self.cfg.z, self.cfg.lambda, self.profile.scale);
        let sn = (turn(tau)).sin();
        let half = (0.5 * turn(tau)).sin();
        let r_minus_i = Mat2::new(-2.0 * half * half, -sn, sn, -2.0 * half * half);
        let offset = r_minus_i.apply(x0 - z);
        let residual = |d: PlanePoint| -> PlanePoint {
            let w = d.x1 / ell;
            // G(d) − d, with s(u) − u = (ℓ/2)(atan w − w)
            let su_minus_u = 0.5 * ell * atan_minus_identity(w);
            let g_minus_d = PlanePoint::new((1.0 - c) * su_minus_u - c * d.x1, (lam - 1.0) * d.x2);
            let g = d + g_minus_d;
            offset + r_minus_i.apply(g) + g_minus_d
        };
        let jac = |d: PlanePoint| -> Mat2 {
            let w = d.x1 / ell;
            let sp_minus_1 = -0.5 * w * w / (1.0 + w * w);
            let dg = Mat2::diag((1.0 - c) * (1.0 + sp_minus_1), lam);
            let dg_minus_i = Mat2::diag((1.0 - c) * sp_minus_1 - c, lam - 1.0);
            r_minus_i.mul(&dg).add(&dg_minus_i)
        };
        let mut d = z - x0;
        let mut r = residual(d);
        for _ in 0..FIXED_POINT_CAP {
            let step = match jac(d).inverse() {
                Some(inv) => inv.apply(r),
                None => -1.0 * r,
            };
            let mut alpha = 1.0;
            let mut next = d - step;
            let mut rn = residual(next);
            while rn.norm() > r.norm() && alpha > 1e-6 {
                alpha *= 0.5;
                next = d - alpha * step;
                rn = residual(next);
            }
            let moved = next.dist(d);
            d = next;
            r = rn;
            if moved < FIXED_POINT_TOL || r.norm() == 0.0 {
                return Ok(x0 + d);
            }
        }
        Err(Error::Inconclusive(format!("fixed point not reached in {FIXED_POINT_CAP} iterations")))
    }

    /// `min_{x ∈ X} s′(u)`.
    fn min_profile_slope(&self) -> f64 {
        self.profile.derivative(self.reach)
    }
}

impl FiberMaps for PlateauFamily {
    fn k(&self) -> u32 {
        self.cfg.k
    }

    fn domain(&self) -> DiskDomain {
        self.cfg.domain
    }

    #[inline]
    fn eval(&self, t: f64, x: PlanePoint) -> PlanePoint {
        self.h_raw(self.theta.value(t), x)
    }

    #[inline]
    fn jacobian(&self, t: f64, x: PlanePoint) -> Mat2 {
        self.h_jac(self.theta.value(t), x)
    }

    fn lipschitz(&self, t: f64) -> f64 {
        let c = self.eta.value(self.theta.value(t));
        (1.0 - c).max(self.cfg.lambda)
    }

    fn inverse_lipschitz(&self, t: f64) -> f64 {
        let c = self.eta.value(self.theta.value(t));
        (1.0 / ((1.0 - c) * self.min_profile_slope())).max(1.0 / self.cfg.lambda)
    }

    fn t_lipschitz(&self) -> f64 {
        let s_max = self.profile.value(self.reach);
        let g_reach = self.cfg.x0.dist(self.cfg.z) + s_max.hypot(self.cfg.lambda * self.reach);
        self.theta.max_slope() * (TAU * g_reach + self.eta.max_slope() * s_max)
    }

    fn generator_angles(&self) -> Vec<f64> {
        self.cfg.t.clone()
    }

    fn name(&self) -> String {
        "plateau".into()
    }

    fn t_derivative(&self, t: f64, x: PlanePoint) -> PlanePoint {
        let tau = self.theta.value(t);
        let dtau = self.theta.derivative(t);
        let c = self.eta.value(tau);
        let dc = self.eta.derivative(tau) * dtau;
        let z = self.cfg.z;
        let gx = self.g(c, x);
        let rot = Mat2::rotation(turn(tau));
        // d/dt R(2πτ)(g − z) = 2π τ′ R J (g − z) + R ∂g/∂c · c′
        let perp = PlanePoint::new(-(gx.x2 - z.x2), gx.x1 - z.x1);
        let dg = PlanePoint::new(-self.profile.value(x.x1 - self.cfg.x0.x1) * dc, 0.0);
        rot.apply((TAU * dtau) * perp + dg)
    }

    fn map_box(&self, t: f64, b: &OrientedBox) -> OrientedBox {
        let tau = self.theta.value(t);
        let c = self.eta.value(tau);
        let (hu, hv) = b.half_widths_in(0.0);
        let d = b.center - self.cfg.x0;
        let u_lo = (1.0 - c) * self.profile.value(d.x1 - hu);
        let u_hi = (1.0 - c) * self.profile.value(d.x1 + hu);
        let lam = self.cfg.lambda;
        let mid = self.cfg.x0 + PlanePoint::new(0.5 * (u_lo + u_hi), lam * d.x2);
        // rounding in the profile is far below these widths; pad by a few ulps
        let pad = 4.0 * f64::EPSILON * (self.reach + 1.0);
        OrientedBox {
            center: mid.rotate_about(self.cfg.z, turn(tau)),
            angle: turn(tau),
            a: 0.5 * (u_hi - u_lo) + pad,
            b: lam * hv + pad,
        }
    }
}

/// `f_t` for a fixed `t`, viewed as a single plane map.
#[derive(Clone)]
pub struct FiberGenerator {
    pub family: Arc<dyn FiberMaps>,
    pub t: f64,
}

impl PlaneMap for FiberGenerator {
    fn apply(&self, x: PlanePoint) -> PlanePoint {
        self.family.eval(self.t, x)
    }

    fn jacobian(&self, x: PlanePoint) -> Mat2 {
        self.family.jacobian(self.t, x)
    }

    fn lipschitz(&self) -> f64 {
        self.family.lipschitz(self.t)
    }

    fn inverse_lipschitz(&self) -> f64 {
        self.family.inverse_lipschitz(self.t)
    }

    fn invert(&self, y: PlanePoint) -> Result<PlanePoint> {
        newton_invert(|x| self.apply(x), |x| self.jacobian(x), y, y)
    }

    fn map_box(&self, b: &OrientedBox) -> OrientedBox {
        self.family.map_box(self.t, b)
    }
}

/// `x ↦ A x + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub a: Mat2,
    pub c: PlanePoint,
}

impl AffineMap {
    pub fn new(a: Mat2, c: PlanePoint) -> Self {
        AffineMap { a, c }
    }

    /// `x ↦ r x + c`.
    pub fn similarity(r: f64, c: PlanePoint) -> Self {
        AffineMap { a: Mat2::diag(r, r), c }
    }
}

impl PlaneMap for AffineMap {
    fn apply(&self, x: PlanePoint) -> PlanePoint {
        self.a.apply(x) + self.c
    }

    fn jacobian(&self, _x: PlanePoint) -> Mat2 {
        self.a
    }

    fn lipschitz(&self) -> f64 {
        self.a.norm()
    }

    fn inverse_lipschitz(&self) -> f64 {
        self.a.inverse().map_or(f64::INFINITY, |m| m.norm())
    }

    fn invert(&self, y: PlanePoint) -> Result<PlanePoint> {
        let inv = self.a.inverse().ok_or_else(|| Error::Inverse("singular affine map".into()))?;
        Ok(inv.apply(y - self.c))
    }
}

/// The generator maps `f_{t_i}` of a family.
pub fn generators(family: &Arc<dyn FiberMaps>) -> Vec<Arc<dyn PlaneMap>> {
    family
        .generator_angles()
        .into_iter()
        .map(|t| Arc::new(FiberGenerator { family: Arc::clone(family), t }) as Arc<dyn PlaneMap>)
        .collect()
}
