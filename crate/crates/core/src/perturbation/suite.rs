use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::metrics::{c1_distance, dominated_splitting_check, C1Distance};
use super::{PerturbationSpec, PerturbedFamily};
use crate::ergodics::{lyapunov_batch, srb_independence, Observable};
use crate::error::Result;
use crate::family::{FamilyConfig, FiberMaps, PlateauFamily};
use crate::geometry::{DiagnosticReport, GridGeometry, Verdict};
use crate::graph::{bony_scan, invariance_residual, sync_test, usc_scan, PullbackDepth};
use crate::rng;

/// Sample sizes of every stage of the suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteBudget {
    pub sync_pairs: usize,
    pub sync_steps: usize,
    pub sync_tol: f64,
    pub lyapunov_starts: usize,
    pub lyapunov_steps: usize,
    pub fibers: usize,
    pub fiber_depth: usize,
    /// Cells across `X` for fiber rasters.
    pub grid: usize,
    /// A fiber is a bone when its diameter exceeds this many cells.
    pub bone_cells: f64,
    pub usc_points: usize,
    pub usc_trials: usize,
    /// USC neighborhood radius as a fraction of `diam(X)`.
    pub usc_eps: f64,
    pub invariance_samples: usize,
    pub invariance_tol: f64,
    pub srb_starts: usize,
    pub srb_steps: usize,
    pub splitting_samples: usize,
    pub c1_samples: usize,
}

impl Default for SuiteBudget {
    fn default() -> Self {
        SuiteBudget {
            sync_pairs: 100,
            sync_steps: 5000,
            sync_tol: 1e-8,
            lyapunov_starts: 50,
            lyapunov_steps: 100_000,
            fibers: 200,
            fiber_depth: 200,
            grid: 1024,
            bone_cells: 10.0,
            usc_points: 100,
            usc_trials: 8,
            usc_eps: 1e-2,
            invariance_samples: 100,
            invariance_tol: 1e-6,
            srb_starts: 50,
            srb_steps: 100_000,
            splitting_samples: 100_000,
            c1_samples: 100_000,
        }
    }
}

impl SuiteBudget {
    /// A budget small enough for unit tests.
    pub fn quick() -> Self {
        SuiteBudget {
            sync_pairs: 40,
            sync_steps: 5000,
            lyapunov_starts: 8,
            lyapunov_steps: 10_000,
            fibers: 30,
            fiber_depth: 120,
            grid: 512,
            usc_points: 3,
            usc_trials: 4,
            invariance_samples: 20,
            srb_starts: 8,
            srb_steps: 10_000,
            splitting_samples: 5000,
            c1_samples: 5000,
            ..SuiteBudget::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub eps: f64,
    pub seed: u64,
    pub verdict: Verdict,
    pub c1_distance: C1Distance,
    pub stages: BTreeMap<String, DiagnosticReport>,
}

fn or_inconclusive(name: &str, seed: u64, r: Result<DiagnosticReport>) -> DiagnosticReport {
    r.unwrap_or_else(|e| {
        let mut rep = DiagnosticReport::new(name, Verdict::Inconclusive, 0, seed);
        rep.note(e.to_string());
        rep
    })
}

/// The diagnostic stages run against one family, in a fixed order and each
/// with its own derived seed.
pub fn run_diagnostics(family: &dyn FiberMaps, b: &SuiteBudget, seed: u64) -> Vec<DiagnosticReport> {
    let dom = family.domain();
    let geom = GridGeometry::for_disk(&dom, b.grid);
    let s = |i| rng::derive(seed, i);
    vec![
        dominated_splitting_check(family, b.splitting_samples, s(1)),
        sync_test(family, b.sync_pairs, b.sync_steps, b.sync_tol, s(2)).report,
        lyapunov_batch(family, b.lyapunov_starts, b.lyapunov_steps, s(3)).report,
        or_inconclusive(
            "bony_scan",
            s(4),
            bony_scan(family, b.fibers, b.fiber_depth, b.bone_cells * geom.h, &geom, s(4)).map(|r| r.report),
        ),
        or_inconclusive(
            "usc_scan",
            s(5),
            usc_scan(family, b.usc_points, b.usc_eps * dom.diameter(), b.usc_trials, b.fiber_depth, &geom, s(5)),
        ),
        invariance_residual(
            family,
            b.invariance_samples,
            b.invariance_tol,
            PullbackDepth::Certified { tol: 0.1 * b.invariance_tol },
            s(6),
        ),
        srb_independence(family, &Observable::builtins(&dom), b.srb_starts, b.srb_steps, s(7)),
    ]
}

/// Validates the perturbation of the plateau family of `base`, then runs
/// the diagnostics on it, plus the splitting check on the base family.
/// Invalid perturbations are refused before anything runs.
pub fn robustness_suite(base: &FamilyConfig, spec: &PerturbationSpec, budget: &SuiteBudget) -> Result<SuiteReport> {
    let base_family: Arc<dyn FiberMaps> = Arc::new(PlateauFamily::new(base.clone())?);
    let perturbed = PerturbedFamily::perturb(Arc::clone(&base_family), spec)?;
    let mut stages = BTreeMap::new();
    let mut base_ds =
        dominated_splitting_check(base_family.as_ref(), budget.splitting_samples, rng::derive(spec.seed, 1));
    base_ds.name = "dominated_splitting_base".into();
    stages.insert(base_ds.name.clone(), base_ds);
    for rep in run_diagnostics(&perturbed, budget, spec.seed) {
        stages.insert(rep.name.clone(), rep);
    }
    let verdict = stages.values().fold(Verdict::Pass, |v, r| v.combine(r.verdict));
    let c1 = c1_distance(base_family.as_ref(), &perturbed, budget.c1_samples, rng::derive(spec.seed, 8));
    Ok(SuiteReport { eps: spec.eps, seed: spec.seed, verdict, c1_distance: c1, stages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn zero_eps_reproduces_the_baseline() {
        let cfg = FamilyConfig::default();
        let b = SuiteBudget::quick();
        let suite = robustness_suite(&cfg, &PerturbationSpec::new(0.0, 11), &b).unwrap();
        let base = PlateauFamily::new(cfg).unwrap();
        for rep in run_diagnostics(&base, &b, 11) {
            assert_eq!(suite.stages[&rep.name], rep);
        }
        assert_eq!(suite.c1_distance.total(), 0.0);
    }

    #[test]
    fn small_perturbation_passes() {
        let suite =
            robustness_suite(&FamilyConfig::default(), &PerturbationSpec::new(1e-3, 0), &SuiteBudget::quick()).unwrap();
        for (name, rep) in &suite.stages {
            assert!(rep.passed(), "{name}: {rep} {:?}", rep.notes);
        }
        assert_eq!(suite.verdict, Verdict::Pass);
        let json = serde_json::to_string(&suite).unwrap();
        assert!(json.contains("\"dominated_splitting_base\""));
    }

    #[test]
    fn invalid_perturbation_is_refused() {
        let r = robustness_suite(&FamilyConfig::default(), &PerturbationSpec::new(10.0, 0), &SuiteBudget::quick());
        assert!(matches!(r, Err(Error::Rejected(_))));
    }
}
