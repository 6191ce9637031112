//! One function per subcommand: run the diagnostics, write the artifacts,
//! return the verdict that decides the exit code.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use ergograph::attractor::{
    chaos_game, covering_search, covering_verify, cusp_regions, default_cusp_rect, stationary_uniqueness,
    weak_hyperbolicity_scan, CoveringProblem, Hutchinson, RegionSpec,
};
use ergograph::ergodics::{
    avg_contraction_check, correlation_csv, lyapunov_batch, lyapunov_csv, mixing_trend, srb_independence, Observable,
};
use ergograph::family::{
    checks::{clearance_report, contraction_report, eigen_report, jacobian_report},
    generators, FiberGenerator, FiberMaps, PlateauFamily,
};
use ergograph::geometry::{
    hausdorff_distance, DiagnosticReport, EmpiricalMeasure, GridGeometry, GridSet, PlanePoint, Verdict,
};
use ergograph::graph::{
    bony_histogram_csv, bony_scan, graph_csv, invariance_residual, pullback_gamma, sync_test, two_start_discrepancy,
    usc_scan, PullbackDepth, SAMPLE_DEPTH,
};
use ergograph::perturbation::{
    c1_distance, dominated_splitting_check, robustness_suite, PerturbationSpec, PerturbedFamily,
};
use ergograph::skew::sample_solenoid;
use ergograph::{par, rng, Error, Result};
use serde_json::{json, Map, Value};

use crate::artifact::{overall, to_value, Artifacts};
use crate::config::ExperimentConfig;

pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub art: Artifacts,
}

impl Ctx<'_> {
    fn seed(&self) -> u64 {
        self.cfg.master_seed
    }

    fn sub(&self, purpose: u64) -> u64 {
        rng::derive(self.cfg.master_seed, purpose)
    }

    fn plateau(&self) -> Result<PlateauFamily> {
        PlateauFamily::new(self.cfg.family.clone())
    }

    fn family(&self) -> Result<Arc<dyn FiberMaps>> {
        Ok(Arc::new(self.plateau()?))
    }

    fn grid_full(&self) -> GridGeometry {
        GridGeometry::for_disk(&self.cfg.family.domain, self.cfg.grid_cells)
    }

    fn header(&self) -> String {
        self.art.prov.header()
    }

    /// Prints the reports and writes `<name>.json`; the verdict combines all
    /// of them.
    fn finish(&mut self, name: &str, reports: &[DiagnosticReport], extra: Map<String, Value>) -> Result<Verdict> {
        for r in reports {
            println!("{r}");
        }
        self.art.report_json(&format!("{name}.json"), reports, extra)?;
        Ok(overall(reports))
    }
}

fn obj(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

pub fn family_check(ctx: &mut Ctx) -> Result<Verdict> {
    let p = ctx.cfg.family_check.clone();
    let fam = ctx.plateau()?;
    let arc: Arc<dyn FiberMaps> = Arc::new(fam.clone());
    let reports = vec![
        jacobian_report(&fam, p.jacobian_samples, ctx.sub(1)),
        eigen_report(&fam),
        contraction_report(&fam, p.contraction_samples, ctx.sub(2)),
        clearance_report(&fam, p.clearance_taus, p.clearance_boundary, p.min_clearance),
        dominated_splitting_check(&fam, p.splitting_samples, ctx.sub(3)),
        avg_contraction_check(&generators(&arc), &ctx.cfg.family.domain, p.avg_contraction_samples, ctx.sub(4)),
    ];
    ctx.finish("family_check", &reports, Map::new())
}

pub fn attractor(ctx: &mut Ctx) -> Result<Verdict> {
    let p = ctx.cfg.attractor.clone();
    let fam = ctx.family()?;
    let dom = ctx.cfg.family.domain;
    let geom = ctx.grid_full();
    let h = geom.h;
    let op = Hutchinson::for_family(&fam, p.mode);
    let from_x = op.iterate(&GridSet::from_disk(geom, &dom), p.tol_cells * h, p.max_iters);
    let strict = DiagnosticReport::new("strict_attractor", from_x.verdict(), from_x.iterations() as u64, ctx.seed())
        .with_stat("iterations", from_x.iterations() as f64)
        .with_stat("final_hausdorff", from_x.distances.last().copied().unwrap_or(f64::NAN))
        .with_stat("tol", p.tol_cells * h)
        .with_stat("cells", from_x.set.count() as f64)
        .with_stat("h", h);

    // seed independence between the discrete fixed points reached from X
    // and from a single cell
    let point = p.seed_point.unwrap_or(dom.center);
    let mut single = GridSet::empty(geom);
    let (ix, iy) = geom
        .cell_of(point)
        .ok_or_else(|| Error::InvalidArgument(format!("seed point ({}, {}) is off the grid", point.x1, point.x2)))?;
    single.insert(ix, iy);
    let exact = f64::MIN_POSITIVE;
    let starts = [&from_x.set, &single];
    let mut runs = par::map_indices(2, |i| op.iterate(starts[i], exact, p.fixed_point_iters));
    let fc = runs.pop().expect("two runs");
    let fx = runs.pop().expect("two runs");
    let dist = hausdorff_distance(&fx.set, &fc.set)?;
    let limit = p.independence_cells * h;
    let verdict = if dist > limit {
        Verdict::Fail
    } else if fx.converged && fc.converged {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    };
    let independence = DiagnosticReport::new("seed_independence", verdict, 2, ctx.seed())
        .with_stat("hausdorff", dist)
        .with_stat("hausdorff_cells", dist / h)
        .with_stat("limit", limit)
        .with_stat("iterations_from_x", (from_x.iterations() + fx.iterations()) as f64)
        .with_stat("iterations_from_cell", fc.iterations() as f64)
        .with_stat("fixed_from_x", fx.converged as u8 as f64)
        .with_stat("fixed_from_cell", fc.converged as u8 as f64);

    let maps = generators(&fam);
    let scan = weak_hyperbolicity_scan(&maps, &dom, p.words, p.depth, ctx.sub(1));
    let header = ctx.header();
    ctx.art.bytes("attractor.pgm", &from_x.set.to_pgm(Some(&header)))?;
    ctx.art.text("attractor_convergence.csv", &from_x.log_csv(Some(&header)))?;
    let mut profile = String::new();
    for line in header.lines() {
        let _ = writeln!(profile, "# {line}");
    }
    profile.push_str("depth,max_diameter,mean_diameter\n");
    for (d, (mx, mean)) in scan.max_profile.iter().zip(&scan.mean_profile).enumerate() {
        let _ = writeln!(profile, "{d},{mx:.16e},{mean:.16e}");
    }
    ctx.art.text("weak_hyperbolicity.csv", &profile)?;
    ctx.finish("attractor", &[strict, independence, scan.report], Map::new())
}

pub fn chaos(ctx: &mut Ctx) -> Result<Verdict> {
    let p = ctx.cfg.chaos.clone();
    let fam = ctx.family()?;
    let dom = ctx.cfg.family.domain;
    let a = p.start_a.unwrap_or(dom.center + PlanePoint::new(-0.9 * dom.radius, 0.0));
    let b = p.start_b.unwrap_or(dom.center + PlanePoint::new(0.9 * dom.radius, 0.0));
    let maps = generators(&fam);
    let rep = stationary_uniqueness(&maps, &dom, a, b, p.n, p.burn_in, ctx.seed());
    // the first of the coupled runs inside the uniqueness check
    let mu = chaos_game(&maps, p.n, p.burn_in, ctx.sub(1), a);
    let header = ctx.header();
    ctx.art.text("chaos.csv", &mu.to_csv(Some(&header)))?;
    ctx.art.bytes("chaos.pgm", &mu.density_pgm(&ctx.grid_full(), Some(&header)))?;
    ctx.finish("chaos", &[rep], Map::new())
}

fn region_json(spec: &RegionSpec, margin: f64, verdict: Verdict) -> Value {
    json!({
        "shape": spec.shape,
        "center": spec.center,
        "semi_axes": spec.semi_axes,
        "angle": spec.angle,
        "margin": margin,
        "verdict": verdict,
    })
}

/// The certificate is gated on its controls; the family's own search result
/// is recorded but does not affect the exit code.
pub fn covering(ctx: &mut Ctx) -> Result<Verdict> {
    let p = ctx.cfg.covering.clone();
    let pos = CoveringProblem::overlapping_control(p.control_cells);
    let pos_b = RegionSpec::rectangle(PlanePoint::new(0.1, 0.1), PlanePoint::new(0.9, 0.9))?;
    let mut positive = covering_verify(&pos, &pos_b, 0.0);
    positive.name = "covering_positive_control".into();
    let neg = CoveringProblem::cantor_control(p.control_cells);
    let neg_b = RegionSpec::rectangle(PlanePoint::ORIGIN, PlanePoint::new(1.0, 1.0))?;
    let mut negative = covering_verify(&neg, &neg_b, 0.0);
    negative.name = "covering_negative_control".into();
    negative.note(format!("certificate verdict {}; the control passes when it fails", negative.verdict));
    negative.verdict = Verdict::from_bool(!negative.passed());

    let fam = ctx.family()?;
    let problem = CoveringProblem::for_family(&fam, p.cells);
    let outcome = covering_search(&problem, p.shape, p.budget, ctx.seed());
    let best = match &outcome.best {
        Some(spec) => {
            let rep = covering_verify(&problem, spec, p.margin);
            region_json(spec, outcome.margin, rep.verdict)
        }
        None => json!({ "margin": outcome.margin, "verdict": Verdict::Fail }),
    };
    println!("{}", outcome.report);
    let extra = obj(json!({ "family": best, "search": to_value(&outcome.report)? }));
    ctx.finish("covering", &[positive, negative], extra)
}

pub fn cusp(ctx: &mut Ctx) -> Result<Verdict> {
    let depth = ctx.cfg.cusp.depth.max(1);
    let fam = ctx.family()?;
    let cfg = &ctx.cfg.family;
    let f1 = FiberGenerator { family: Arc::clone(&fam), t: cfg.t[0] };
    let geom = ctx.grid_full();
    let seq = cusp_regions(&f1, default_cusp_rect(cfg), cfg.x0, &geom, depth);
    let disk = GridSet::from_disk(geom, &cfg.domain).dilate(geom.h);
    let mut inside = true;
    let mut union = GridSet::empty(geom);
    for s in &seq.sets {
        inside &= s.is_subset(&disk)?;
        union = union.union(s)?;
    }
    let monotone = seq.monotone_from(2);
    let first = seq.diameters[0];
    let last = *seq.diameters.last().expect("depth >= 1");
    let rep = DiagnosticReport::new("cusp", Verdict::from_bool(monotone && inside), depth as u64, ctx.seed())
        .with_stat("monotone_from_2", monotone as u8 as f64)
        .with_stat("inside_domain", inside as u8 as f64)
        .with_stat("first_diameter", first)
        .with_stat("last_diameter", last)
        .with_stat("last_reach", *seq.reach.last().expect("depth >= 1"));
    let header = ctx.header();
    let mut csv = String::new();
    for line in header.lines() {
        let _ = writeln!(csv, "# {line}");
    }
    csv.push_str("k,diameter,reach\n");
    for (k, (d, r)) in seq.diameters.iter().zip(&seq.reach).enumerate() {
        let _ = writeln!(csv, "{},{d:.16e},{r:.16e}", k + 1);
    }
    ctx.art.text("cusp.csv", &csv)?;
    ctx.art.bytes("cusp.pgm", &union.to_pgm(Some(&header)))?;
    ctx.finish("cusp", &[rep], Map::new())
}

pub fn graph(ctx: &mut Ctx) -> Result<Verdict> {
    let p = ctx.cfg.graph.clone();
    let fam = ctx.plateau()?;
    let k = fam.config().k;
    let two = two_start_discrepancy(&fam, p.samples, p.tol, ctx.sub(1));
    let inv = invariance_residual(
        &fam,
        p.samples,
        p.invariance_tol,
        PullbackDepth::Certified { tol: p.invariance_certified },
        ctx.sub(2),
    );
    let seed = ctx.sub(3);
    let samples = par::map_indices(p.export, |i| {
        let s = sample_solenoid(rng::derive(seed, i as u64), SAMPLE_DEPTH, k)?;
        pullback_gamma(&fam, &s, p.tol)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let header = ctx.header();
    ctx.art.text("graph.csv", &graph_csv(&samples, Some(&header)))?;
    ctx.finish("graph", &[two, inv], Map::new())
}

pub fn bony(ctx: &mut Ctx) -> Result<Verdict> {
    let p = ctx.cfg.bony.clone();
    let fam = ctx.plateau()?;
    let geom = ctx.grid_full();
    let scan = bony_scan(&fam, p.samples, p.depth, p.bone_cells * geom.h, &geom, ctx.seed())?;
    let header = ctx.header();
    ctx.art.text("bony_histogram.csv", &bony_histogram_csv(&scan.diameters, p.bin_cells * geom.h, Some(&header)))?;
    ctx.finish("bony", &[scan.report], Map::new())
}

pub fn usc(ctx: &mut Ctx) -> Result<Verdict> {
    let p = ctx.cfg.usc.clone();
    let fam = ctx.plateau()?;
    let geom = ctx.grid_full();
    let eps = p.eps * ctx.cfg.family.domain.diameter();
    let rep = usc_scan(&fam, p.points, eps, p.trials, p.depth, &geom, ctx.seed())?;
    ctx.finish("usc", &[rep], Map::new())
}

pub fn sync(ctx: &mut Ctx) -> Result<Verdict> {
    let p = ctx.cfg.sync.clone();
    let fam = ctx.plateau()?;
    let out = sync_test(&fam, p.pairs, p.max_steps, p.tol, ctx.seed());
    let mut csv = String::new();
    for line in ctx.header().lines() {
        let _ = writeln!(csv, "# {line}");
    }
    csv.push_str("pair,steps\n");
    for (i, s) in out.steps.iter().enumerate() {
        match s {
            Some(n) => writeln!(csv, "{i},{n}"),
            None => writeln!(csv, "{i},"),
        }
        .expect("string write");
    }
    ctx.art.text("sync.csv", &csv)?;
    ctx.finish("sync", &[out.report], Map::new())
}

pub fn lyapunov(ctx: &mut Ctx) -> Result<Verdict> {
    let p = ctx.cfg.lyapunov.clone();
    let fam = ctx.plateau()?;
    let batch = lyapunov_batch(&fam, p.starts, p.n, ctx.seed());
    let header = ctx.header();
    ctx.art.text("lyapunov.csv", &lyapunov_csv(&batch, Some(&header)))?;
    let extra = obj(json!({ "lambda1": batch.mean, "ci95": [batch.ci95.0, batch.ci95.1] }));
    ctx.finish("lyapunov", &[batch.report], extra)
}

pub fn birkhoff(ctx: &mut Ctx) -> Result<Verdict> {
    let p = ctx.cfg.birkhoff.clone();
    let fam = ctx.plateau()?;
    let obs = p.observables.unwrap_or_else(|| Observable::builtins(&ctx.cfg.family.domain));
    let rep = srb_independence(&fam, &obs, p.starts, p.n, ctx.seed());
    ctx.finish("birkhoff", &[rep], Map::new())
}

pub fn mixing(ctx: &mut Ctx) -> Result<Verdict> {
    let p = ctx.cfg.mixing.clone();
    let fam = ctx.plateau()?;
    let obs = [Observable::Coordinate { axis: 0 }, Observable::Coordinate { axis: 1 }];
    let (rep, corr) = mixing_trend(&fam, &obs, p.lag, p.factor, p.orbit, ctx.seed());
    let header = ctx.header();
    for (o, c) in obs.iter().zip(&corr) {
        ctx.art.text(&format!("mixing_{}.csv", o.label()), &correlation_csv(c, Some(&header)))?;
    }
    ctx.finish("mixing", &[rep], Map::new())
}

fn spec(ctx: &Ctx) -> PerturbationSpec {
    let p = &ctx.cfg.perturb;
    PerturbationSpec { eps: p.eps, seed: ctx.seed(), modes: p.modes }
}

pub fn perturb_suite(ctx: &mut Ctx) -> Result<Verdict> {
    let suite = robustness_suite(&ctx.cfg.family, &spec(ctx), &ctx.cfg.perturb.budget)?;
    let reports: Vec<DiagnosticReport> = suite.stages.values().cloned().collect();
    let extra = obj(json!({
        "eps": suite.eps,
        "modes": ctx.cfg.perturb.modes,
        "c1_distance": suite.c1_distance,
        "c1_distance_total": suite.c1_distance.total(),
        "stages": to_value(&suite.stages)?,
    }));
    ctx.finish("perturb_suite", &reports, extra)
}

pub fn perturb_distance(ctx: &mut Ctx) -> Result<Verdict> {
    let base = ctx.family()?;
    let perturbed = PerturbedFamily::perturb(Arc::clone(&base), &spec(ctx))?;
    let samples = ctx.cfg.perturb.budget.c1_samples;
    let d = c1_distance(base.as_ref(), &perturbed, samples, ctx.sub(8));
    let ds_samples = ctx.cfg.perturb.budget.splitting_samples;
    let mut base_ds = dominated_splitting_check(base.as_ref(), ds_samples, ctx.sub(1));
    base_ds.name = "dominated_splitting_base".into();
    let ds = dominated_splitting_check(&perturbed, ds_samples, ctx.sub(1));
    let validity = perturbed.validate(ctx.seed())?;
    println!(
        "c1_distance {:.6e} (value {:.3e}, jacobian {:.3e}, inverse {:.3e}, inverse jacobian {:.3e})",
        d.total(),
        d.value,
        d.jacobian,
        d.inverse_value,
        d.inverse_jacobian
    );
    let extra = obj(json!({
        "eps": ctx.cfg.perturb.eps,
        "c1_distance": d,
        "c1_distance_total": d.total(),
        "validity": validity,
        "field": to_value(perturbed.field())?,
    }));
    ctx.finish("perturb_distance", &[base_ds, ds], extra)
}

/// PGM of a grid-set PGM (re-headed) or of a measure CSV (log-density on
/// the config grid).
pub fn render(ctx: &mut Ctx, input: &Path, output: &Path, cells: Option<usize>) -> Result<Verdict> {
    let data = std::fs::read(input).map_err(|e| Error::Io(format!("{}: {e}", input.display())))?;
    let header = format!("{}\nsource={}", ctx.header(), input.file_name().and_then(|n| n.to_str()).unwrap_or(""));
    let img = if data.starts_with(b"P5") {
        GridSet::from_pgm(&data)?.to_pgm(Some(&header))
    } else {
        let text = String::from_utf8(data).map_err(|e| Error::Parse(format!("{}: {e}", input.display())))?;
        let mu = EmpiricalMeasure::from_csv(&text)?;
        let geom = GridGeometry::for_disk(&ctx.cfg.family.domain, cells.unwrap_or(ctx.cfg.grid_cells));
        mu.density_pgm(&geom, Some(&header))
    };
    crate::artifact::write(output, &img)?;
    println!("wrote {}", output.display());
    Ok(Verdict::Pass)
}
