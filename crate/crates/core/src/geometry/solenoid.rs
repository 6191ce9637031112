use std::fmt;
use std::str::FromStr;

use super::point::{circle_dist, wrap_unit, CircleAngle};
use crate::error::{Error, Result};

/// A point of the solenoid (inverse limit of `t ↦ k t mod 1`), truncated to
/// a finite backward word.
///
/// The backward orbit is `t₋ⱼ = (t₋ⱼ₊₁ + d₋ⱼ) / k`, so `φ(t₋ⱼ₋₁) = t₋ⱼ` holds
/// up to one rounding of the division.
#[derive(Debug, Clone, PartialEq)]
pub struct SolenoidPoint {
    t0: CircleAngle,
    /// `d₋₁, d₋₂, …, d₋N`.
    digits: Vec<u32>,
    k: u32,
}

impl SolenoidPoint {
    pub fn new(t0: f64, digits: Vec<u32>, k: u32) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!("branching factor must be ≥ 2, got {k}")));
        }
        if let Some(d) = digits.iter().find(|&&d| d >= k) {
            return Err(Error::InvalidArgument(format!("digit {d} out of range for k = {k}")));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidArgument("t0 must be finite".into()));
        }
        Ok(SolenoidPoint { t0: CircleAngle::new(t0), digits, k })
    }

    pub fn t0(&self) -> f64 {
        self.t0.value()
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    pub fn depth(&self) -> usize {
        self.digits.len()
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// `[t₀, t₋₁, …, t₋N]`.
    pub fn coordinates(&self) -> Vec<f64> {
        let kf = self.k as f64;
        let mut out = Vec::with_capacity(self.digits.len() + 1);
        let mut t = self.t0.value();
        out.push(t);
        for &d in &self.digits {
            t = (t + d as f64) / kf;
            out.push(t);
        }
        out
    }

    /// The shift `ξ`: prepends the digit of `t₀` and advances `t₀` by `φ`.
    /// Depth grows by one, so `pull_back` undoes it exactly.
    pub fn shift_forward(&self) -> SolenoidPoint {
        let kt = self.k as f64 * self.t0.value();
        let d = (kt.floor() as u32).min(self.k - 1);
        let mut digits = Vec::with_capacity(self.digits.len() + 1);
        digits.push(d);
        digits.extend_from_slice(&self.digits);
        SolenoidPoint { t0: CircleAngle::new(kt - d as f64), digits, k: self.k }
    }

    /// `ξ⁻¹`: pops `t₋₁` into the present. Fails on an empty word.
    pub fn pull_back(&self) -> Result<SolenoidPoint> {
        let (&d, rest) = self
            .digits
            .split_first()
            .ok_or_else(|| Error::Incompatible("cannot pull back a depth-0 solenoid point".into()))?;
        let t = (self.t0.value() + d as f64) / self.k as f64;
        Ok(SolenoidPoint { t0: CircleAngle::new(t), digits: rest.to_vec(), k: self.k })
    }

    /// Same point with the word truncated (or kept) at `depth`.
    pub fn truncated(&self, depth: usize) -> SolenoidPoint {
        SolenoidPoint { t0: self.t0, digits: self.digits[..depth.min(self.digits.len())].to_vec(), k: self.k }
    }
}

/// `d_S(a, b) = Σᵢ d(t₋ᵢ, t′₋ᵢ) / 2ⁱ`, summed over the stored depth.
pub fn solenoid_metric(a: &SolenoidPoint, b: &SolenoidPoint) -> Result<f64> {
    if a.k != b.k {
        return Err(Error::Incompatible(format!("k mismatch: {} vs {}", a.k, b.k)));
    }
    if a.depth() != b.depth() {
        return Err(Error::Incompatible(format!("depth mismatch: {} vs {}", a.depth(), b.depth())));
    }
    let ca = a.coordinates();
    let cb = b.coordinates();
    let mut weight = 1.0;
    let mut sum = 0.0;
    for (x, y) in ca.iter().zip(&cb) {
        sum += weight * circle_dist(CircleAngle::new(*x), CircleAngle::new(*y));
        weight *= 0.5;
    }
    Ok(sum)
}

impl fmt::Display for SolenoidPoint {
    /// `t0;d-1,d-2,…`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};", self.t0.value())?;
        for (i, d) in self.digits.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl SolenoidPoint {
    /// Parses the `t0;d-1,d-2,…` form for a given `k`.
    pub fn parse(s: &str, k: u32) -> Result<Self> {
        let (t, ds) =
            s.trim().split_once(';').ok_or_else(|| Error::Parse(format!("missing ';' in solenoid point {s:?}")))?;
        let t0 = f64::from_str(t.trim()).map_err(|e| Error::Parse(e.to_string()))?;
        let digits = if ds.trim().is_empty() {
            Vec::new()
        } else {
            ds.split(',')
                .map(|d| u32::from_str(d.trim()).map_err(|e| Error::Parse(e.to_string())))
                .collect::<Result<Vec<_>>>()?
        };
        if wrap_unit(t0) != t0 {
            return Err(Error::Parse(format!("t0 = {t0} is not in [0, 1)")));
        }
        SolenoidPoint::new(t0, digits, k)
    }
}
