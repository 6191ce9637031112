use crate::family::{FamilyConfig, PlaneMap};
use crate::geometry::{cloud_diameter, GridGeometry, GridSet, PlanePoint};

/// `W₁ = x₀ + ℓ·([0.05, 0.35] × [−0.15, 0.15])` with `ℓ = |x₀ − z|`: a
/// rectangle on the weakly contracting side of `x₀`.
pub fn default_cusp_rect(cfg: &FamilyConfig) -> (PlanePoint, PlanePoint) {
    let l = cfg.x0.dist(cfg.z);
    (cfg.x0 + l * PlanePoint::new(0.05, -0.15), cfg.x0 + l * PlanePoint::new(0.35, 0.15))
}

#[derive(Debug, Clone)]
pub struct CuspSequence {
    /// `W₁, …, W_depth` rasterized.
    pub sets: Vec<GridSet>,
    /// Diameter of the exact image cloud of each `W_k`.
    pub diameters: Vec<f64>,
    /// Largest distance from `W_k` to the anchor point.
    pub reach: Vec<f64>,
}

impl CuspSequence {
    /// Whether the diameters never increase from `W_from` on (1-based).
    pub fn monotone_from(&self, from: usize) -> bool {
        self.diameters.windows(2).skip(from.saturating_sub(1)).all(|w| w[1] <= w[0] * (1.0 + 1e-12))
    }
}

/// `W_{k+1} = f(W_k)` starting from the rectangle `[min, max]`.
///
/// The rectangle is sampled at half the grid spacing and the samples are
/// pushed forward exactly; since `f` does not expand distances, the image
/// cloud stays dense at grid scale and each `W_k` is its rasterization.
pub fn cusp_regions(
    f: &dyn PlaneMap,
    rect: (PlanePoint, PlanePoint),
    anchor: PlanePoint,
    grid: &GridGeometry,
    depth: usize,
) -> CuspSequence {
    let (lo, hi) = rect;
    let step = 0.5 * grid.h;
    let nx = ((hi.x1 - lo.x1) / step).ceil() as usize + 1;
    let ny = ((hi.x2 - lo.x2) / step).ceil() as usize + 1;
    let mut cloud: Vec<PlanePoint> = (0..ny)
        .flat_map(|j| {
            (0..nx).map(move |i| {
                let u = (i as f64 / (nx - 1).max(1) as f64).min(1.0);
                let v = (j as f64 / (ny - 1).max(1) as f64).min(1.0);
                PlanePoint::new(lo.x1 + u * (hi.x1 - lo.x1), lo.x2 + v * (hi.x2 - lo.x2))
            })
        })
        .collect();
    let mut sets = Vec::with_capacity(depth);
    let mut diameters = Vec::with_capacity(depth);
    let mut reach = Vec::with_capacity(depth);
    for k in 0..depth {
        if k > 0 {
            for p in cloud.iter_mut() {
                *p = f.apply(*p);
            }
        }
        sets.push(GridSet::from_points(*grid, &cloud));
        diameters.push(cloud_diameter(&cloud));
        reach.push(cloud.iter().map(|p| p.dist(anchor)).fold(0.0, f64::max));
    }
    CuspSequence { sets, diameters, reach }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::family::{FiberGenerator, PlateauFamily};
    use crate::geometry::hausdorff_distance;

    #[test]
    fn cusp_shrinks_toward_x0() {
        let p = PlateauFamily::new(FamilyConfig::default()).unwrap();
        let cfg = p.config().clone();
        let grid = GridGeometry::for_disk(&cfg.domain, 1024);
        let f = FiberGenerator { family: Arc::new(p.clone()), t: 0.0 };
        let seq = cusp_regions(&f, default_cusp_rect(&cfg), cfg.x0, &grid, 50);
        assert_eq!(seq.sets.len(), 50);
        assert!(seq.monotone_from(2));
        assert!(seq.diameters[49] < seq.diameters[0]);
        let x = GridSet::from_disk(grid, &cfg.domain);
        assert!(seq.sets.iter().all(|w| w.is_subset(&x).unwrap()));
        // the far corner of W_k follows the one-dimensional profile iteration
        let l = cfg.x0.dist(cfg.z);
        let mut u = 0.35 * l;
        for k in 1..50 {
            u = p.profile().value(u);
            let expected = u.hypot(0.15 * l * cfg.lambda.powi(k as i32));
            assert!((seq.reach[k] - expected).abs() < 1e-12, "k={k}");
        }
        let anchor = GridSet::from_points(grid, &[cfg.x0]);
        let d: Vec<f64> = seq.sets.iter().map(|w| hausdorff_distance(w, &anchor).unwrap()).collect();
        assert!(d[49] < d[9] && d[9] < d[0]);
    }
}
