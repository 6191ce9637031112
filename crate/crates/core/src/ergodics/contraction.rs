use std::sync::Arc;

use rand::Rng;

use crate::family::PlaneMap;
use crate::geometry::{DiagnosticReport, DiskDomain, PlanePoint, Verdict};
use crate::{par, rng};

/// Sums closer to zero than this are read as no contraction at all.
const ZERO_MARGIN: f64 = 1e-9;

/// Contraction on average with equal weights.
///
/// Each Lipschitz constant `Cᵢ` is estimated as the largest distance ratio
/// over `samples` pairs per generator: half are random pairs in `X`, half
/// are infinitesimal pairs (separation `1e-7 · diam X` in a random
/// direction), which probe `‖Df‖` where distant pairs cannot. PASS iff
/// `(1/N) Σ log Cᵢ < 0` by more than rounding.
pub fn avg_contraction_check(
    maps: &[Arc<dyn PlaneMap>],
    domain: &DiskDomain,
    samples: usize,
    seed: u64,
) -> DiagnosticReport {
    let eps = 1e-7 * domain.diameter();
    let lips = par::map_indices(maps.len(), |i| {
        let f = &maps[i];
        let mut r = rng::stream(seed, i as u64);
        let mut best: f64 = 0.0;
        for j in 0..samples {
            let x = domain.sample(&mut r);
            let y = if j % 2 == 0 {
                domain.sample(&mut r)
            } else {
                let a = std::f64::consts::TAU * r.random::<f64>();
                x + PlanePoint::new(eps * a.cos(), eps * a.sin())
            };
            let d = x.dist(y);
            if d > 0.0 {
                best = best.max(f.apply(x).dist(f.apply(y)) / d);
            }
        }
        best
    });
    let logs: Vec<f64> = lips.iter().map(|c| c.ln()).collect();
    let avg = logs.iter().sum::<f64>() / maps.len().max(1) as f64;
    let mut report = DiagnosticReport::new(
        "avg_contraction",
        Verdict::from_bool(!maps.is_empty() && avg < -ZERO_MARGIN),
        samples as u64,
        seed,
    )
    .with_stat("mean_log_lipschitz", avg)
    .with_stat("margin", -avg);
    for (i, c) in lips.iter().enumerate() {
        report.set(&format!("lipschitz_{}", i + 1), *c);
    }
    report
}
