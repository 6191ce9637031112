//! The bump `η` and the plateau map `θ`, both built from the quintic
//! smoothstep so that every junction is C².

use super::config::FamilyConfig;
use crate::error::{Error, Result};

/// `S(s) = s³(10 − 15s + 6s²)` on `[0, 1]`, clamped outside.
#[inline]
pub fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

#[inline]
pub fn smoothstep_prime(s: f64) -> f64 {
    if !(0.0..=1.0).contains(&s) {
        return 0.0;
    }
    30.0 * s * s * (1.0 - s) * (1.0 - s)
}

/// `max S′ = S′(1/2)`.
pub const SMOOTHSTEP_MAX_SLOPE: f64 = 1.875;

/// Six-piece bump: 0 at `{0, 1/2, 1}`, `δ` on the two plateaus
/// `[δ, 1/2 − δ]` and `[1/2 + δ, 1 − δ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eta {
    pub delta: f64,
}

impl Eta {
    pub fn eval(&self, tau: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidArgument(format!("eta is defined on [0, 1], got {tau}")));
        }
        Ok(self.value(tau))
    }

    /// Unchecked evaluation for `τ ∈ [0, 1]`.
    #[inline]
    pub fn value(&self, tau: f64) -> f64 {
        let d = self.delta;
        if tau <= d {
            d * smoothstep(tau / d)
        } else if tau < 0.5 - d {
            d
        } else if tau <= 0.5 {
            d * smoothstep((0.5 - tau) / d)
        } else if tau <= 0.5 + d {
            d * smoothstep((tau - 0.5) / d)
        } else if tau < 1.0 - d {
            d
        } else {
            d * smoothstep((1.0 - tau) / d)
        }
    }

    #[inline]
    pub fn derivative(&self, tau: f64) -> f64 {
        let d = self.delta;
        if tau <= d {
            smoothstep_prime(tau / d)
        } else if tau < 0.5 - d {
            0.0
        } else if tau <= 0.5 {
            -smoothstep_prime((0.5 - tau) / d)
        } else if tau <= 0.5 + d {
            smoothstep_prime((tau - 0.5) / d)
        } else if tau < 1.0 - d {
            0.0
        } else {
            -smoothstep_prime((1.0 - tau) / d)
        }
    }

    pub fn max_slope(&self) -> f64 {
        SMOOTHSTEP_MAX_SLOPE
    }
}

/// Plateau map: equal to `t_i` on the arc `I_i`, smoothstep between
/// consecutive arcs, rising from `t_2m` to 1 across the wrap gap.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    values: Vec<f64>,
    arcs: Vec<[f64; 2]>,
}

impl Theta {
    pub fn new(cfg: &FamilyConfig) -> Result<Self> {
        let arcs = cfg.normalized_arcs().map_err(|i| Error::Config {
            pointer: format!("/arcs/{i}"),
            message: "arc does not contain its plateau angle".into(),
        })?;
        Ok(Theta { values: cfg.t.clone(), arcs })
    }

    pub fn plateau_values(&self) -> &[f64] {
        &self.values
    }

    pub fn arcs(&self) -> &[[f64; 2]] {
        &self.arcs
    }

    /// Index of the arc containing `t`, if any.
    pub fn arc_index(&self, t: f64) -> Option<usize> {
        let t = self.window(t);
        self.arcs.iter().position(|&[lo, hi]| lo <= t && t <= hi)
    }

    /// Moves `t ∈ [0, 1)` into `[lo_1, lo_1 + 1)`.
    #[inline]
    fn window(&self, t: f64) -> f64 {
        if t >= self.arcs[0][0] + 1.0 {
            t - 1.0
        } else {
            t
        }
    }

    /// Locates `t`: `(segment start value, rise, gap parameter, gap length)`.
    #[inline]
    fn locate(&self, t: f64) -> (f64, f64, f64, f64) {
        let t = self.window(t);
        let n = self.arcs.len();
        for i in 0..n {
            let [lo, hi] = self.arcs[i];
            if t >= lo && t <= hi {
                return (self.values[i], 0.0, 0.0, 1.0);
            }
            let (next_lo, next_val) =
                if i + 1 < n { (self.arcs[i + 1][0], self.values[i + 1]) } else { (self.arcs[0][0] + 1.0, 1.0) };
            if t > hi && t < next_lo {
                let len = next_lo - hi;
                return (self.values[i], next_val - self.values[i], (t - hi) / len, len);
            }
        }
        (self.values[0], 0.0, 0.0, 1.0)
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        let (base, rise, s, _) = self.locate(t);
        if rise == 0.0 {
            base
        } else {
            base + rise * smoothstep(s)
        }
    }

    #[inline]
    pub fn derivative(&self, t: f64) -> f64 {
        let (_, rise, s, len) = self.locate(t);
        rise * smoothstep_prime(s) / len
    }

    /// `sup |θ′|`, attained at a gap midpoint.
    pub fn max_slope(&self) -> f64 {
        let n = self.arcs.len();
        (0..n)
            .map(|i| {
                let hi = self.arcs[i][1];
                let (next_lo, next_val) =
                    if i + 1 < n { (self.arcs[i + 1][0], self.values[i + 1]) } else { (self.arcs[0][0] + 1.0, 1.0) };
                SMOOTHSTEP_MAX_SLOPE * (next_val - self.values[i]).abs() / (next_lo - hi)
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_junctions() {
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert_eq!(smoothstep(0.5), 0.5);
        assert_eq!(smoothstep_prime(0.0), 0.0);
        assert_eq!(smoothstep_prime(1.0), 0.0);
        // second derivative 60s(1-s)(1-2s) vanishes at both ends
        let h = 1e-5;
        let d2 = |s: f64| (smoothstep_prime(s + h) - smoothstep_prime(s - h)) / (2.0 * h);
        assert!(d2(h).abs() < 1e-3 && d2(1.0 - h).abs() < 1e-3);
    }

    #[test]
    fn eta_examples() {
        let eta = Eta { delta: 0.1 };
        assert_eq!(eta.eval(0.0).unwrap(), 0.0);
        assert_eq!(eta.eval(0.25).unwrap(), 0.1);
        assert_eq!(eta.eval(0.5).unwrap(), 0.0);
        assert_eq!(eta.eval(1.0).unwrap(), 0.0);
        assert_eq!(eta.eval(0.75).unwrap(), 0.1);
        assert!(eta.eval(1.5).is_err());
        assert!(eta.eval(-0.1).is_err());
    }

    #[test]
    fn eta_derivative_matches_differences() {
        let eta = Eta { delta: 0.1 };
        let h = 1e-7;
        for i in 1..200 {
            let tau = i as f64 / 200.0;
            let fd = (eta.value(tau + h) - eta.value(tau - h)) / (2.0 * h);
            assert!((fd - eta.derivative(tau)).abs() < 1e-5, "tau={tau}");
        }
    }

    #[test]
    fn theta_examples() {
        let cfg = FamilyConfig::default();
        let th = Theta::new(&cfg).unwrap();
        let t2 = cfg.t[1];
        assert_eq!(th.value(t2), t2);
        assert_eq!(th.value(0.0), 0.0);
        assert_eq!(th.value(0.97), 0.0);
        let mid = 0.5 * (cfg.arcs[1][1] + cfg.arcs[2][0]);
        assert!((th.value(mid) - 0.5 * (t2 + 0.5)).abs() < 1e-15);
        // the wrap gap climbs to 1 where it meets I_1
        let end = cfg.arcs[0][0] + 1.0;
        assert!((th.value(end - 1e-12) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn theta_is_monotone_and_bounded() {
        let th = Theta::new(&FamilyConfig::default()).unwrap();
        let mut prev = th.value(0.0625 + 1e-12);
        for i in 0..100_000 {
            let t = 0.0625 + 1e-12 + i as f64 * (0.875 / 100_000.0);
            let v = th.value(t);
            assert!(v >= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn theta_slope_bound_holds() {
        let th = Theta::new(&FamilyConfig::default()).unwrap();
        let bound = th.max_slope();
        let h = 1e-7;
        let mut seen = 0.0f64;
        for i in 0..20_000 {
            let t = (i as f64 + 0.5) / 20_000.0;
            let d = th.derivative(t);
            seen = seen.max(d.abs());
            if (h..1.0 - h).contains(&t) {
                let fd = (th.value(t + h) - th.value(t - h)) / (2.0 * h);
                assert!((fd - d).abs() < 1e-4 * (1.0 + d.abs()), "t={t}");
            }
        }
        assert!(seen <= bound + 1e-12 && seen > 0.95 * bound);
    }
}
