use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::family::{generators, FiberGenerator, FiberMaps, PlaneMap};
use crate::geometry::{hausdorff_distance, GridSet, PlanePoint, Verdict};
use crate::par;

const HALF_DIAGONAL: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HutchinsonMode {
    /// Conservative images under the `2m` generators.
    Generators,
    /// Images of cell centers only. Not an enclosure; useful to inspect
    /// where individual cells go.
    Centers,
    /// Conservative images under `f_t` for `t` on a grid of at least `4k`
    /// angles, dilated by the `t`-Lipschitz modulus.
    Circle { samples: usize },
}

/// The set map `K ↦ ⋃ f(K)` on occupancy grids.
#[derive(Clone)]
pub struct Hutchinson {
    maps: Vec<Arc<dyn PlaneMap>>,
    conservative: bool,
    extra: f64,
}

#[derive(Debug, Clone)]
pub struct AttractorRun {
    pub set: GridSet,
    /// Hausdorff distance between successive iterates.
    pub distances: Vec<f64>,
    pub converged: bool,
}

impl AttractorRun {
    pub fn iterations(&self) -> usize {
        self.distances.len()
    }

    pub fn verdict(&self) -> Verdict {
        if self.converged {
            Verdict::Pass
        } else {
            Verdict::Inconclusive
        }
    }

    /// Convergence log as CSV `iteration,hausdorff`.
    pub fn log_csv(&self, header: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(h) = header {
            for line in h.lines() {
                let _ = writeln!(out, "# {line}");
            }
        }
        out.push_str("iteration,hausdorff\n");
        for (i, d) in self.distances.iter().enumerate() {
            let _ = writeln!(out, "{},{:.16e}", i + 1, d);
        }
        out
    }
}

impl Hutchinson {
    pub fn new(maps: Vec<Arc<dyn PlaneMap>>, conservative: bool) -> Self {
        Hutchinson { maps, conservative, extra: 0.0 }
    }

    pub fn for_family(family: &Arc<dyn FiberMaps>, mode: HutchinsonMode) -> Self {
        match mode {
            HutchinsonMode::Generators => Hutchinson::new(generators(family), true),
            HutchinsonMode::Centers => Hutchinson::new(generators(family), false),
            HutchinsonMode::Circle { samples } => {
                let n = samples.max(4 * family.k() as usize);
                let maps = (0..n)
                    .map(|j| {
                        Arc::new(FiberGenerator { family: Arc::clone(family), t: j as f64 / n as f64 })
                            as Arc<dyn PlaneMap>
                    })
                    .collect();
                // every t is within 1/(2n) of a sample
                let extra = family.t_lipschitz() * 0.5 / n as f64;
                Hutchinson { maps, conservative: true, extra }
            }
        }
    }

    pub fn maps(&self) -> &[Arc<dyn PlaneMap>] {
        &self.maps
    }

    /// Radius added around each image point in the circle mode.
    pub fn t_dilation(&self) -> f64 {
        self.extra
    }

    /// One application of the operator. In conservative modes every image
    /// point of every cell of `k` lies in an occupied cell of the result.
    pub fn step(&self, k: &GridSet) -> GridSet {
        let geom = *k.geometry();
        let h = geom.h;
        let centers = k.centers();
        if !self.conservative {
            let images: Vec<PlanePoint> =
                centers.iter().flat_map(|&c| self.maps.iter().map(move |f| f.apply(c))).collect();
            return GridSet::from_points(geom, &images);
        }
        // group the images by map, since the stamping radius depends on it
        let mut out = GridSet::empty(geom);
        for f in &self.maps {
            let images = par::map_slice(&centers, |&c| f.apply(c));
            let radius = (f.lipschitz() * h * HALF_DIAGONAL + h * HALF_DIAGONAL + self.extra) * (1.0 + 1e-12);
            out = out.union(&GridSet::from_balls(geom, &images, radius)).expect("same geometry");
        }
        out
    }

    /// Iterates from `seed` until successive iterates are within `tol` in
    /// Hausdorff distance; INCONCLUSIVE after `max_iters` steps.
    pub fn iterate(&self, seed: &GridSet, tol: f64, max_iters: usize) -> AttractorRun {
        let mut cur = seed.clone();
        let mut distances = Vec::new();
        for _ in 0..max_iters {
            let next = self.step(&cur);
            let d = hausdorff_distance(&cur, &next).expect("same geometry");
            distances.push(d);
            cur = next;
            if d < tol {
                return AttractorRun { set: cur, distances, converged: true };
            }
        }
        AttractorRun { set: cur, distances, converged: false }
    }
}
