use std::sync::Arc;

use ergograph::attractor::{chaos_game, Hutchinson, HutchinsonMode};
use ergograph::ergodics::lyapunov_batch;
use ergograph::family::{generators, FamilyConfig, FiberMaps, PlateauFamily};
use ergograph::geometry::{GridGeometry, GridSet, PlanePoint};
use ergograph::graph::{pullback_gamma, sync_test};
use ergograph::par;
use ergograph::perturbation::{PerturbationSpec, PerturbedFamily};
use ergograph::skew::sample_solenoid;
use proptest::prelude::*;

fn family() -> Arc<dyn FiberMaps> {
    Arc::new(PlateauFamily::new(FamilyConfig::default()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn graph_is_invariant(seed in any::<u64>()) {
        let fam = family();
        let s = sample_solenoid(seed, 2048, 8).unwrap();
        let a = pullback_gamma(fam.as_ref(), &s, 1e-10).unwrap();
        let b = pullback_gamma(fam.as_ref(), &s.shift_forward(), 1e-10).unwrap();
        let r = fam.eval(s.t0(), a.gamma).dist(b.gamma);
        prop_assert!(r < 1e-9, "residual {r}");
    }

    #[test]
    fn small_perturbations_keep_the_graph(seed in any::<u64>(), eps in 1e-5f64..2e-3) {
        let p = PerturbedFamily::perturb(family(), &PerturbationSpec::new(eps, seed)).unwrap();
        let s = sample_solenoid(seed ^ 1, 2048, 8).unwrap();
        let a = pullback_gamma(&p, &s, 1e-9).unwrap();
        let b = pullback_gamma(&p, &s.shift_forward(), 1e-9).unwrap();
        prop_assert!(p.eval(s.t0(), a.gamma).dist(b.gamma) < 1e-8);
    }
}

#[test]
fn chaos_game_stays_on_the_attractor() {
    let fam = family();
    let dom = fam.domain();
    let geom = GridGeometry::for_disk(&dom, 256);
    let run =
        Hutchinson::for_family(&fam, HutchinsonMode::Generators).iterate(&GridSet::from_disk(geom, &dom), 1e-300, 400);
    assert!(run.converged);
    let k = run.set.dilate(geom.h);
    let mu = chaos_game(&generators(&fam), 20_000, 500, 4, PlanePoint::new(0.1, 0.05));
    let outside = mu.points().iter().filter(|&&p| !k.contains_point(p)).count();
    assert_eq!(outside, 0);
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let fam = PlateauFamily::new(FamilyConfig::default()).unwrap();
    let one = par::with_threads(1, || lyapunov_batch(&fam, 12, 5000, 9));
    let three = par::with_threads(3, || lyapunov_batch(&fam, 12, 5000, 9));
    assert_eq!(one.estimates, three.estimates);
    assert_eq!(one.report, three.report);
}

#[test]
fn zero_perturbation_synchronizes_identically() {
    let base = family();
    let p = PerturbedFamily::perturb(Arc::clone(&base), &PerturbationSpec::new(0.0, 5)).unwrap();
    let a = sync_test(base.as_ref(), 30, 2000, 1e-8, 2);
    let b = sync_test(&p, 30, 2000, 1e-8, 2);
    assert_eq!(a.steps, b.steps);
    assert_eq!(a.report, b.report);
}
