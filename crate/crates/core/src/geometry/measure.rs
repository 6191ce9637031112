use std::fmt::Write as _;

use rand::Rng;

use super::grid::{pgm_header, GridGeometry};
use super::point::{DiskDomain, PlanePoint};
use crate::error::{Error, Result};

/// Weight-sum tolerance for a normalized measure.
pub const MASS_TOL: f64 = 1e-12;

/// A finitely supported probability measure on the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    points: Vec<PlanePoint>,
    weights: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Builds a measure, rejecting negative weights and total mass off 1.
    pub fn new(points: Vec<PlanePoint>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidArgument(format!("{} points but {} weights", points.len(), weights.len())));
        }
        if points.is_empty() {
            return Err(Error::Unnormalized(0.0));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("support points must be finite".into()));
        }
        let total = fsum(&weights);
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Unnormalized(total));
        }
        Ok(EmpiricalMeasure { points, weights })
    }

    /// Equal weights `1/n`.
    pub fn uniform(points: Vec<PlanePoint>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::Unnormalized(0.0));
        }
        let w = 1.0 / n as f64;
        EmpiricalMeasure::new(points, vec![w; n])
    }

    pub fn dirac(p: PlanePoint) -> Self {
        EmpiricalMeasure { points: vec![p], weights: vec![1.0] }
    }

    /// Rescales arbitrary non-negative weights to mass 1.
    pub fn normalized(points: Vec<PlanePoint>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::Unnormalized(total));
        }
        let w = weights.iter().map(|w| w / total).collect();
        EmpiricalMeasure::new(points, w)
    }

    pub fn points(&self) -> &[PlanePoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        fsum(&self.weights)
    }

    /// Log-density heat map as a binary PGM on `geom`, rows as in
    /// [`GridSet::to_pgm`](super::GridSet::to_pgm). Empty cells are 0, the
    /// heaviest cell 255 and the lightest occupied cell 1. Mass outside the
    /// grid is dropped.
    pub fn density_pgm(&self, geom: &GridGeometry, header: Option<&str>) -> Vec<u8> {
        let mut mass = vec![0.0f64; geom.len()];
        for (p, w) in self.points.iter().zip(&self.weights) {
            if let Some((ix, iy)) = geom.cell_of(*p) {
                mass[iy * geom.nx + ix] += w;
            }
        }
        let occupied = mass.iter().copied().filter(|&m| m > 0.0);
        let lo = occupied.clone().fold(f64::INFINITY, f64::min).ln();
        let hi = occupied.fold(0.0, f64::max).ln();
        let mut out = pgm_header(geom, header);
        for iy in (0..geom.ny).rev() {
            for ix in 0..geom.nx {
                let m = mass[iy * geom.nx + ix];
                out.push(if m <= 0.0 {
                    0
                } else if hi > lo {
                    (1.0 + 254.0 * (m.ln() - lo) / (hi - lo)).round() as u8
                } else {
                    255
                });
            }
        }
        out
    }

    pub fn all_inside(&self, disk: &DiskDomain, slack: f64) -> bool {
        self.points.iter().all(|p| disk.contains_tol(*p, slack))
    }

    /// `∫ f dμ`, summed in support order.
    pub fn integrate(&self, f: impl Fn(PlanePoint) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(*p)).sum()
    }

    pub fn mean(&self) -> PlanePoint {
        PlanePoint::new(self.integrate(|p| p.x1), self.integrate(|p| p.x2))
    }

    /// Systematic resampling to `n` equally weighted atoms (duplicates merged).
    /// The result is a deterministic function of the measure and `rng`.
    pub fn resample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> EmpiricalMeasure {
        if n == 0 || n >= self.len() {
            return self.clone();
        }
        let u0: f64 = rng.random::<f64>() / n as f64;
        let step = 1.0 / n as f64;
        let mut counts = vec![0usize; self.len()];
        let mut cum = 0.0;
        let mut i = 0;
        for j in 0..n {
            let target = u0 + j as f64 * step;
            while i + 1 < self.len() && cum + self.weights[i] < target {
                cum += self.weights[i];
                i += 1;
            }
            counts[i] += 1;
        }
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (p, c) in self.points.iter().zip(&counts) {
            if *c > 0 {
                points.push(*p);
                weights.push(*c as f64 / n as f64);
            }
        }
        EmpiricalMeasure { points, weights }
    }

    /// CSV `x1,x2,w` with 17 significant digits.
    pub fn to_csv(&self, header: Option<&str>) -> String {
        let mut out = String::with_capacity(self.len() * 72 + 64);
        if let Some(h) = header {
            for line in h.lines() {
                let _ = writeln!(out, "# {line}");
            }
        }
        out.push_str("x1,x2,w\n");
        for (p, w) in self.points.iter().zip(&self.weights) {
            let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", p.x1, p.x2, w);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("x1") {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Parse(format!("expected 3 columns: {line:?}")));
            }
            let v = cols
                .iter()
                .map(|c| c.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{c:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            points.push(PlanePoint::new(v[0], v[1]));
            weights.push(v[2]);
        }
        EmpiricalMeasure::new(points, weights)
    }
}

/// Compensated (Neumaier) sum; plain summation of 10⁵ equal weights can
/// drift past [`MASS_TOL`].
pub fn fsum(xs: &[f64]) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for &x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn dirac_renders_one_bright_cell() {
        let geom = GridGeometry::new(PlanePoint::ORIGIN, 0.1, 10, 10).unwrap();
        let pgm = EmpiricalMeasure::dirac(PlanePoint::new(0.35, 0.72)).density_pgm(&geom, Some("x"));
        let pixels = &pgm[pgm.len() - 100..];
        assert_eq!(pixels.iter().filter(|&&v| v == 255).count(), 1);
        assert_eq!(pixels.iter().filter(|&&v| v != 0).count(), 1);
        // row 0 of the image is the top row, iy = 9; the point sits in iy = 7, ix = 3
        assert_eq!(pixels[2 * 10 + 3], 255);
        let back = crate::geometry::GridSet::from_pgm(&pgm).unwrap();
        assert!(back.contains_cell(3, 7) && back.count() == 1);
    }

    #[test]
    fn density_levels_are_logarithmic() {
        let geom = GridGeometry::new(PlanePoint::ORIGIN, 1.0, 3, 1).unwrap();
        let pts = vec![PlanePoint::new(0.5, 0.5), PlanePoint::new(1.5, 0.5), PlanePoint::new(2.5, 0.5)];
        let mu = EmpiricalMeasure::new(pts, vec![1.0 / 13.0, 3.0 / 13.0, 9.0 / 13.0]).unwrap();
        let pgm = mu.density_pgm(&geom, None);
        // ln weights are equally spaced, so the middle cell sits halfway
        assert_eq!(&pgm[pgm.len() - 3..], &[1, 128, 255]);
    }

    #[test]
    fn rejects_unnormalized() {
        let p = vec![PlanePoint::ORIGIN, PlanePoint::new(1.0, 0.0)];
        assert!(matches!(EmpiricalMeasure::new(p.clone(), vec![0.5, 0.6]), Err(Error::Unnormalized(_))));
        assert!(EmpiricalMeasure::new(p, vec![-0.5, 1.5]).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = EmpiricalMeasure::normalized(
            vec![PlanePoint::new(0.1, -1.0 / 3.0), PlanePoint::new(std::f64::consts::PI, 2e-300)],
            vec![1.0, 2.0],
        )
        .unwrap();
        let back = EmpiricalMeasure::from_csv(&m.to_csv(Some("hdr"))).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn resampling_keeps_mass() {
        let pts: Vec<PlanePoint> = (0..1000).map(|i| PlanePoint::new(i as f64, 0.0)).collect();
        let m = EmpiricalMeasure::uniform(pts).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let r = m.resample(100, &mut rng);
        assert!((r.total_weight() - 1.0).abs() < 1e-12);
        assert!(r.len() <= 100);
    }
}
