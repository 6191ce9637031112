//! The base map `φ(t) = k t mod 1`, the skew product `F(t, x) = (φ(t), f_t(x))`
//! and its invertible extension over the solenoid.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::FiberMaps;
use crate::geometry::{wrap_unit, CircleAngle, PlanePoint, SolenoidPoint};
use crate::rng::{self, StreamRng};

/// Default truncation depth of sampled solenoid points.
pub const DEFAULT_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewState {
    pub t: CircleAngle,
    pub x: PlanePoint,
}

impl SkewState {
    pub fn new(t: f64, x: PlanePoint) -> Self {
        SkewState { t: CircleAngle::new(t), x }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolenoidState {
    pub s: SolenoidPoint,
    pub x: PlanePoint,
}

/// `φ(t) = k t mod 1`.
#[inline]
pub fn expand_map(t: f64, k: u32) -> f64 {
    wrap_unit(k as f64 * t)
}

/// `F(t, x) = (φ(t), f_t(x))`.
pub fn step_f(family: &dyn FiberMaps, state: SkewState) -> SkewState {
    let t = state.t.value();
    SkewState { t: CircleAngle::new(expand_map(t, family.k())), x: family.eval(t, state.x) }
}

/// `Fⁿ` by repeated steps. Floating-point `φ` loses one base-`k` digit of
/// `t` per step, so long orbits should use [`BaseOrbit`] instead.
pub fn step_f_n(family: &dyn FiberMaps, mut state: SkewState, n: usize) -> SkewState {
    for _ in 0..n {
        state = step_f(family, state);
    }
    state
}

/// `G(𝐭, x) = (ξ(𝐭), f_{t₀}(x))`.
pub fn step_g(family: &dyn FiberMaps, state: &SolenoidState) -> SolenoidState {
    SolenoidState { s: state.s.shift_forward(), x: family.eval(state.s.t0(), state.x) }
}

/// `G⁻¹(𝐭, x) = (ξ⁻¹(𝐭), f_{t₋₁}⁻¹(x))`.
pub fn step_g_inv(family: &dyn FiberMaps, state: &SolenoidState) -> Result<SolenoidState> {
    let s = state.s.pull_back()?;
    let x = family.inverse(s.t0(), state.x)?;
    Ok(SolenoidState { s, x })
}

/// Lift of Lebesgue measure to the solenoid: uniform `t₀`, i.i.d. uniform
/// digits. Deterministic in `seed`.
pub fn sample_solenoid(seed: u64, depth: usize, k: u32) -> Result<SolenoidPoint> {
    let mut r = rng::stream(seed, 0);
    sample_solenoid_with(&mut r, depth, k)
}

pub fn sample_solenoid_with<R: Rng + ?Sized>(r: &mut R, depth: usize, k: u32) -> Result<SolenoidPoint> {
    if depth == 0 {
        return Err(Error::InvalidArgument("solenoid depth must be at least 1".into()));
    }
    let t0: f64 = r.random();
    let digits = (0..depth).map(|_| r.random_range(0..k)).collect();
    SolenoidPoint::new(t0, digits, k)
}

/// An orbit of `φ` started at a Lebesgue-random point, exact to `k^{−D}`.
///
/// The state holds the first `D` base-`k` digits of `t` as an integer
/// (`k^D ≤ 2⁵³`). Each step drops the leading digit and reveals one more
/// digit from the random stream, which is exactly how the digits of a
/// uniformly distributed `t` behave under `φ`. A plain `t ← k t mod 1` in
/// floating point instead collapses to 0 after about `53 / log₂ k` steps.
#[derive(Debug, Clone)]
pub struct BaseOrbit {
    k: u64,
    modulus: u64,
    numer: u64,
    rng: StreamRng,
}

impl BaseOrbit {
    /// Uniformly random start.
    pub fn random(k: u32, mut rng: StreamRng) -> Self {
        let (modulus, _) = Self::modulus(k);
        let numer = rng.random_range(0..modulus);
        BaseOrbit { k: k as u64, modulus, numer, rng }
    }

    /// Start at (the truncation of) `t`; later digits come from `rng`.
    pub fn from_t(t: f64, k: u32, rng: StreamRng) -> Self {
        let (modulus, _) = Self::modulus(k);
        let numer = ((wrap_unit(t) * modulus as f64) as u64).min(modulus - 1);
        BaseOrbit { k: k as u64, modulus, numer, rng }
    }

    fn modulus(k: u32) -> (u64, u32) {
        let k = k.max(2) as u64;
        let mut m = 1u64;
        let mut d = 0;
        while m.checked_mul(k).is_some_and(|v| v <= 1 << 53) {
            m *= k;
            d += 1;
        }
        (m, d)
    }

    #[inline]
    pub fn t(&self) -> f64 {
        self.numer as f64 / self.modulus as f64
    }

    #[inline]
    pub fn advance(&mut self) {
        let fresh = self.rng.random_range(0..self.k);
        self.numer = (self.numer * self.k) % self.modulus + fresh;
    }
}

/// A skew-product orbit driven by a [`BaseOrbit`].
#[derive(Debug, Clone)]
pub struct SkewOrbit {
    pub base: BaseOrbit,
    pub x: PlanePoint,
}

impl SkewOrbit {
    pub fn new(base: BaseOrbit, x: PlanePoint) -> Self {
        SkewOrbit { base, x }
    }

    pub fn state(&self) -> SkewState {
        SkewState::new(self.base.t(), self.x)
    }

    #[inline]
    pub fn step(&mut self, family: &dyn FiberMaps) {
        self.x = family.eval(self.base.t(), self.x);
        self.base.advance();
    }
}

/// CSV `n,t,x1,x2` of `n + 1` states of an orbit.
pub fn orbit_csv(family: &dyn FiberMaps, mut orbit: SkewOrbit, n: usize, header: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        for line in h.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    out.push_str("n,t,x1,x2\n");
    for i in 0..=n {
        let _ = writeln!(out, "{i},{:.16e},{:.16e},{:.16e}", orbit.base.t(), orbit.x.x1, orbit.x.x2);
        orbit.step(family);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{FamilyConfig, PlateauFamily};

    fn family() -> PlateauFamily {
        PlateauFamily::new(FamilyConfig::default()).unwrap()
    }

    #[test]
    fn expand_examples() {
        assert!((expand_map(0.3, 8) - 0.4).abs() < 1e-15);
        assert_eq!(expand_map(0.0, 8), 0.0);
        assert_eq!(expand_map(0.125, 8), 0.0);
    }

    #[test]
    fn step_f_examples() {
        let f = family();
        let x0 = f.config().x0;
        let s = step_f(&f, SkewState::new(0.01, x0));
        assert_eq!(s.x, x0);
        assert_eq!(s.t.value(), expand_map(0.01, 8));
        let start = SkewState::new(0.3, PlanePoint::new(0.01, 0.02));
        let mut manual = start;
        for _ in 0..8 {
            manual = SkewState::new(expand_map(manual.t.value(), 8), f.eval(manual.t.value(), manual.x));
        }
        assert_eq!(step_f_n(&f, start, 8), manual);
    }

    #[test]
    fn g_round_trip_and_semiconjugacy() {
        let f = family();
        for seed in 0..200 {
            let s = sample_solenoid(seed, 16, 8).unwrap();
            let mut r = rng::stream(seed, 1);
            let x = f.domain().sample(&mut r);
            let st = SolenoidState { s: s.clone(), x };
            let fwd = step_g(&f, &st);
            assert_eq!(fwd.s.t0(), expand_map(s.t0(), 8));
            let back = step_g_inv(&f, &fwd).unwrap();
            assert_eq!(back.s, s);
            assert!(back.x.dist(x) < 1e-10);
        }
    }

    #[test]
    fn constant_digits_keep_x0() {
        let f = family();
        let x0 = f.config().x0;
        let s = SolenoidPoint::new(0.0, vec![0; 10], 8).unwrap();
        let next = step_g(&f, &SolenoidState { s, x: x0 });
        assert_eq!(next.x, x0);
    }

    #[test]
    fn semiconjugacy_along_orbits() {
        for seed in 0..1000u64 {
            let mut s = sample_solenoid(seed, 4, 8).unwrap();
            let mut t = s.t0();
            for _ in 0..100 {
                s = s.shift_forward();
                t = expand_map(t, 8);
                assert_eq!(s.t0(), t);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        assert_eq!(sample_solenoid(42, 64, 8).unwrap(), sample_solenoid(42, 64, 8).unwrap());
        assert!(sample_solenoid(1, 0, 8).is_err());
    }

    fn ks_statistic(mut xs: Vec<f64>) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| ((i as f64 + 1.0) / n - x).abs().max((x - i as f64 / n).abs()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn t0_is_uniform_and_digits_balanced() {
        let n = 100_000usize;
        let mut r = rng::stream(7, 0);
        let mut t0s = Vec::with_capacity(n);
        let mut counts = [0usize; 8];
        for _ in 0..n {
            let s = sample_solenoid_with(&mut r, 4, 8).unwrap();
            t0s.push(s.t0());
            for d in s.digits() {
                counts[*d as usize] += 1;
            }
        }
        // KS critical value at p = 0.01 is 1.628/√n
        let d = ks_statistic(t0s.clone());
        assert!(d < 1.628 / (n as f64).sqrt(), "KS D = {d}");
        let total = (4 * n) as f64;
        let sigma = (total * (1.0 / 8.0) * (7.0 / 8.0)).sqrt();
        for c in counts {
            assert!((c as f64 - total / 8.0).abs() < 3.0 * sigma);
        }
        // Lebesgue measure is φ-invariant
        let pushed: Vec<f64> = t0s.iter().map(|&t| expand_map(t, 8)).collect();
        assert!(ks_statistic(pushed) < 1.628 / (n as f64).sqrt());
    }

    #[test]
    fn base_orbit_stays_uniform() {
        let mut o = BaseOrbit::random(8, rng::stream(3, 0));
        let mut ts = Vec::new();
        for _ in 0..100_000 {
            ts.push(o.t());
            o.advance();
        }
        assert!(ks_statistic(ts) < 1.628 / (100_000f64).sqrt());
    }

    #[test]
    fn base_orbit_follows_phi() {
        let mut o = BaseOrbit::random(8, rng::stream(4, 0));
        for _ in 0..1000 {
            let t = o.t();
            o.advance();
            // the newly revealed digit only moves t by less than k^{-D}
            assert!((o.t() - expand_map(t, 8)).abs() < 8.0 / (1u64 << 51) as f64);
        }
    }

    #[test]
    fn orbit_csv_has_header_and_rows() {
        let f = family();
        let o = SkewOrbit::new(BaseOrbit::from_t(0.2, 8, rng::stream(1, 0)), PlanePoint::new(0.0, 0.01));
        let csv = orbit_csv(&f, o, 5, Some("ergograph"));
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[1], "n,t,x1,x2");
        assert_eq!(lines.len(), 8);
    }
}
