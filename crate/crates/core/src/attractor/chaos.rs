use std::sync::Arc;

use rand::Rng;

use crate::family::PlaneMap;
use crate::geometry::{wasserstein1, DiagnosticReport, DiskDomain, EmpiricalMeasure, PlanePoint, Verdict};
use crate::{par, rng};

/// Largest support kept by [`transfer_step`].
pub const TRANSFER_SUPPORT_CAP: usize = 1 << 16;

/// Orbit of `x ↦ f_{ωₙ}(x)` with `ωₙ` i.i.d. uniform over the maps; the
/// first `burn_in` points are discarded and the next `n` returned with unit
/// weights.
pub fn chaos_game(
    maps: &[Arc<dyn PlaneMap>],
    n: usize,
    burn_in: usize,
    seed: u64,
    start: PlanePoint,
) -> EmpiricalMeasure {
    let mut r = rng::stream(seed, 0);
    let mut x = start;
    let k = maps.len();
    for _ in 0..burn_in {
        x = maps[r.random_range(0..k)].apply(x);
    }
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        x = maps[r.random_range(0..k)].apply(x);
        points.push(x);
    }
    EmpiricalMeasure::uniform(points).expect("nonempty orbit")
}

/// Start-independence of the chaos game.
///
/// Runs the game from `a` and `b` with the same symbol sequence and reports
/// their W₁ distance; PASS iff it is below `5e-3 · diam(X)`. For reference it
/// also reports W₁ between independent symbol sequences from different
/// starts and from the same start: the latter is the Monte-Carlo noise
/// floor, so the two should agree when the stationary measure is unique.
pub fn stationary_uniqueness(
    maps: &[Arc<dyn PlaneMap>],
    domain: &DiskDomain,
    a: PlanePoint,
    b: PlanePoint,
    n: usize,
    burn_in: usize,
    seed: u64,
) -> DiagnosticReport {
    let s1 = rng::derive(seed, 1);
    let s2 = rng::derive(seed, 2);
    let runs = par::map_indices(4, |i| match i {
        0 => chaos_game(maps, n, burn_in, s1, a),
        1 => chaos_game(maps, n, burn_in, s1, b),
        2 => chaos_game(maps, n, burn_in, s2, b),
        _ => chaos_game(maps, n, burn_in, s2, a),
    });
    let w = |i: usize, j: usize| wasserstein1(&runs[i], &runs[j]).expect("normalized");
    let coupled = w(0, 1);
    let independent = w(0, 2);
    let floor = w(0, 3);
    let threshold = 5e-3 * domain.diameter();
    DiagnosticReport::new("stationary_uniqueness", Verdict::from_bool(coupled.value < threshold), n as u64, seed)
        .with_stat("w1_coupled", coupled.value)
        .with_stat("w1_coupled_lower", coupled.lower)
        .with_stat("w1_independent", independent.value)
        .with_stat("w1_independent_lower", independent.lower)
        .with_stat("w1_noise_floor", floor.value)
        .with_stat("threshold", threshold)
}

/// Pushforward form of the transfer operator: every atom `(x, w)` becomes
/// the atoms `(f_i(x), w/N)`. Supports larger than `cap` are thinned by
/// systematic resampling.
pub fn transfer_step(maps: &[Arc<dyn PlaneMap>], mu: &EmpiricalMeasure, cap: usize, seed: u64) -> EmpiricalMeasure {
    let k = maps.len() as f64;
    let mut points = Vec::with_capacity(mu.len() * maps.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for (x, w) in mu.points().iter().zip(mu.weights()) {
        for f in maps {
            points.push(f.apply(*x));
            weights.push(w / k);
        }
    }
    let out = EmpiricalMeasure::normalized(points, weights).expect("positive weights");
    if out.len() > cap {
        out.resample(cap, &mut rng::stream(seed, 0))
    } else {
        out
    }
}
