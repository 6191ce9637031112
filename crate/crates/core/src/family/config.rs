use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_unit, DiskDomain, PlanePoint};

/// Tolerance for the arithmetic identities a config must satisfy
/// (`k = 4m` is exact; `δ = 1 − λ′`, `t_i = n_i β mod 1` and arc lengths are
/// compared to this).
const IDENTITY_TOL: f64 = 1e-12;

/// All construction parameters of the fiber family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub m: u32,
    pub k: u32,
    /// Smallest eigenvalue of `Df(x₀)`.
    pub lambda: f64,
    /// Largest eigenvalue of `Dg(x₀)`.
    pub lambda_prime: f64,
    pub delta: f64,
    /// Irrational rotation number.
    pub beta: f64,
    /// Exponents `n_2 … n_m`.
    pub n: Vec<u32>,
    /// Plateau angles `t_1 … t_2m`.
    pub t: Vec<f64>,
    /// Arcs `I_i = [lo, hi]`; `lo` may be negative for the arc around 0.
    pub arcs: Vec<[f64; 2]>,
    pub x0: PlanePoint,
    pub z: PlanePoint,
    pub domain: DiskDomain,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig::with_geometry(
            DiskDomain { center: PlanePoint::ORIGIN, radius: 0.15 },
            PlanePoint::new(0.05, 0.0),
            PlanePoint::ORIGIN,
        )
    }
}

impl FamilyConfig {
    /// Default parameters on a disk of radius 3 with `x₀ = (1, 0)`.
    pub fn unit_scale() -> Self {
        FamilyConfig::with_geometry(
            DiskDomain { center: PlanePoint::ORIGIN, radius: 3.0 },
            PlanePoint::new(1.0, 0.0),
            PlanePoint::ORIGIN,
        )
    }

    /// `m = 2`, `k = 8`, `λ = 0.5`, `λ′ = 0.9`, golden-mean `β`, `n_2 = 2`
    /// on the given geometry.
    pub fn with_geometry(domain: DiskDomain, x0: PlanePoint, z: PlanePoint) -> Self {
        let m = 2u32;
        let k = 4 * m;
        let lambda_prime = 0.9;
        let beta = (5f64.sqrt() - 1.0) / 2.0;
        let n = vec![2u32];
        let t2 = wrap_unit(n[0] as f64 * beta);
        let t = vec![0.0, t2, 0.5, wrap_unit(t2 + 0.5)];
        let half = 0.5 / k as f64;
        let arcs = t.iter().map(|&c| [c - half, c + half]).collect();
        FamilyConfig { m, k, lambda: 0.5, lambda_prime, delta: 1.0 - lambda_prime, beta, n, t, arcs, x0, z, domain }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: FamilyConfig =
            serde_json::from_str(text).map_err(|e| Error::Config { pointer: String::new(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every structural constraint, naming the offending field by
    /// JSON pointer.
    pub fn validate(&self) -> Result<()> {
        let err = |pointer: String, message: String| Err(Error::Config { pointer, message });
        let m = self.m as usize;
        if self.m < 2 {
            return err("/m".into(), format!("m must be at least 2, got {}", self.m));
        }
        if self.k != 4 * self.m {
            return err("/k".into(), format!("k must equal 4m = {}, got {}", 4 * self.m, self.k));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return err("/lambda".into(), format!("lambda must lie in (0, 1), got {}", self.lambda));
        }
        if !(self.lambda_prime > self.lambda && self.lambda_prime < 1.0) {
            return err(
                "/lambda_prime".into(),
                format!("lambda_prime must lie in (lambda, 1), got {}", self.lambda_prime),
            );
        }
        if (self.delta - (1.0 - self.lambda_prime)).abs() > IDENTITY_TOL {
            return err("/delta".into(), format!("delta must equal 1 - lambda_prime, got {}", self.delta));
        }
        if !(self.delta > 0.0 && self.delta < 0.25) {
            return err("/delta".into(), format!("delta must lie in (0, 1/4), got {}", self.delta));
        }
        if !self.beta.is_finite() {
            return err("/beta".into(), "beta must be finite".into());
        }
        if self.n.len() != m - 1 {
            return err("/n".into(), format!("expected {} exponents n_2..n_m, got {}", m - 1, self.n.len()));
        }
        if self.t.len() != 2 * m {
            return err("/t".into(), format!("expected {} plateau angles, got {}", 2 * m, self.t.len()));
        }
        if let Some(i) = self.t.iter().position(|x| !x.is_finite()) {
            return err(format!("/t/{i}"), "angle must be finite".into());
        }
        if let Some((i, msg)) = self.ordering_violation() {
            return err(
                format!("/t/{i}"),
                format!(
                    "{msg}; required ordering is 0 = t_1 < delta < t_2 < ... < t_m < 1/2 - delta \
                     < t_(m+1) = 1/2 < 1/2 + delta < ... < t_2m < 1"
                ),
            );
        }
        for i in 1..m {
            let expect = wrap_unit(self.n[i - 1] as f64 * self.beta);
            if circle_gap(self.t[i], expect) > IDENTITY_TOL {
                return err(format!("/t/{i}"), format!("t_{} must equal n_{} * beta mod 1 = {expect}", i + 1, i + 1));
            }
            let partner = wrap_unit(self.t[i] + 0.5);
            if circle_gap(self.t[m + i], partner) > IDENTITY_TOL {
                return err(format!("/t/{}", m + i), format!("t_{} must equal t_{} + 1/2 mod 1", m + i + 1, i + 1));
            }
        }
        if self.arcs.len() != 2 * m {
            return err("/arcs".into(), format!("expected {} arcs, got {}", 2 * m, self.arcs.len()));
        }
        let len = 1.0 / self.k as f64;
        for (i, [lo, hi]) in self.arcs.iter().enumerate() {
            if !((hi - lo) - len).abs().le(&IDENTITY_TOL) {
                return err(format!("/arcs/{i}"), format!("arc length must be 1/k = {len}, got {}", hi - lo));
            }
        }
        let arcs = match self.normalized_arcs() {
            Ok(a) => a,
            Err(i) => {
                let [lo, hi] = self.arcs[i];
                return err(format!("/arcs/{i}"), format!("arc [{lo}, {hi}] must contain t_{} = {}", i + 1, self.t[i]));
            }
        };
        for i in 0..2 * m {
            let j = (i + 1) % (2 * m);
            let next_lo = if j == 0 { arcs[0][0] + 1.0 } else { arcs[j][0] };
            if arcs[i][1] >= next_lo {
                return err(format!("/arcs/{j}"), format!("arcs {} and {} overlap", i + 1, j + 1));
            }
        }
        if !(self.domain.radius > 0.0 && self.domain.radius.is_finite()) {
            return err("/domain/radius".into(), "radius must be positive".into());
        }
        if !self.x0.is_finite() || self.x0.dist(self.domain.center) >= self.domain.radius {
            return err("/x0".into(), "x0 must lie in the interior of the domain".into());
        }
        if !self.z.is_finite() || !self.domain.contains(self.z) {
            return err("/z".into(), "z must lie in the domain".into());
        }
        if self.x0.dist(self.z) == 0.0 {
            return err("/x0".into(), "x0 must differ from the rotation center z".into());
        }
        Ok(())
    }

    /// Arcs shifted by whole turns so that `lo ≤ t_i ≤ hi`; on failure the
    /// index of an arc that misses its angle.
    pub fn normalized_arcs(&self) -> std::result::Result<Vec<[f64; 2]>, usize> {
        self.arcs
            .iter()
            .zip(&self.t)
            .enumerate()
            .map(|(i, (&[lo, hi], &c))| {
                [-1.0, 0.0, 1.0].iter().find(|&&s| lo + s <= c && c <= hi + s).map(|s| [lo + s, hi + s]).ok_or(i)
            })
            .collect()
    }

    fn ordering_violation(&self) -> Option<(usize, String)> {
        let m = self.m as usize;
        let t = &self.t;
        let d = self.delta;
        if t[0] != 0.0 {
            return Some((0, format!("t_1 must be 0, got {}", t[0])));
        }
        if t[m] != 0.5 {
            return Some((m, format!("t_{} must be 1/2, got {}", m + 1, t[m])));
        }
        // lower bounds and upper bounds for t_2..t_m and t_{m+2}..t_2m
        for i in 1..m {
            let lo = if i == 1 { d } else { t[i - 1] };
            if t[i].is_nan() || t[i] <= lo {
                return Some((i, format!("t_{} = {} must exceed {lo}", i + 1, t[i])));
            }
        }
        if t[m - 1].is_nan() || t[m - 1] >= 0.5 - d {
            return Some((m - 1, format!("t_{} = {} must be below 1/2 - delta", m, t[m - 1])));
        }
        for i in m + 1..2 * m {
            let lo = if i == m + 1 { 0.5 + d } else { t[i - 1] };
            if t[i].is_nan() || t[i] <= lo {
                return Some((i, format!("t_{} = {} must exceed {lo}", i + 1, t[i])));
            }
        }
        if t[2 * m - 1].is_nan() || t[2 * m - 1] >= 1.0 {
            return Some((2 * m - 1, format!("t_{} must be below 1", 2 * m)));
        }
        None
    }
}

fn circle_gap(a: f64, b: f64) -> f64 {
    let d = (wrap_unit(a) - wrap_unit(b)).abs();
    d.min(1.0 - d)
}
