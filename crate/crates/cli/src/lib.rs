//! Command-line front end: parses arguments, loads the config, applies
//! overrides and dispatches to one diagnostic per subcommand.
//!
//! Exit codes: 0 PASS, 1 FAIL, 2 INCONCLUSIVE, 3 for errors and bad usage.

pub mod artifact;
pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use ergograph::geometry::Verdict;
use ergograph::{par, Error, Result};

use artifact::{exit_code, Artifacts, Provenance};
use commands::Ctx;
use config::ExperimentConfig;

/// Exit code for errors, including argument errors.
pub const EXIT_ERROR: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ergograph", version, about = "Diagnostics for skew products with weakly contractive fibers")]
pub struct Cli {
    /// Experiment config (JSON); defaults apply to missing fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; falls back to ERGOGRAPH_THREADS, then all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Main sample count of the command.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Main depth of the command.
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    /// Main tolerance of the command.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    /// Neighborhood radius (usc) or perturbation size (perturb).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub eps: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derivative, eigenvalue, contraction, clearance and splitting checks.
    FamilyCheck,
    /// Hutchinson iteration, seed independence and word diameters.
    Attractor,
    /// Chaos game and uniqueness of the stationary measure.
    Chaos,
    /// Covering certificate and its controls.
    Covering,
    /// Forward images of a rectangle near the cusp.
    Cusp,
    /// Invariant graph: two-start discrepancy and invariance residual.
    Graph,
    /// Fiber diameters along random solenoid points.
    Bony,
    /// Upper semicontinuity of the fiber map.
    Usc,
    /// Master-slave synchronization.
    Sync,
    /// Top Lyapunov exponent.
    Lyapunov,
    /// Start independence of time averages.
    Birkhoff,
    /// Decay of autocorrelations.
    Mixing,
    /// Perturbed families.
    Perturb {
        #[command(subcommand)]
        action: PerturbAction,
    },
    /// PGM image of a grid-set PGM or a measure CSV.
    Render {
        input: PathBuf,
        /// Defaults to `<out>/<input stem>.pgm`.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Grid cells across X for measure CSVs.
        #[arg(long)]
        cells: Option<usize>,
    },
    /// Print the default config as JSON.
    DefaultConfig,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum PerturbAction {
    /// All diagnostics on the perturbed family.
    Suite,
    /// C¹ distance to the base family and the splitting check.
    Distance,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::FamilyCheck => "family-check",
            Command::Attractor => "attractor",
            Command::Chaos => "chaos",
            Command::Covering => "covering",
            Command::Cusp => "cusp",
            Command::Graph => "graph",
            Command::Bony => "bony",
            Command::Usc => "usc",
            Command::Sync => "sync",
            Command::Lyapunov => "lyapunov",
            Command::Birkhoff => "birkhoff",
            Command::Mixing => "mixing",
            Command::Perturb { action: PerturbAction::Suite } => "perturb suite",
            Command::Perturb { action: PerturbAction::Distance } => "perturb distance",
            Command::Render { .. } => "render",
            Command::DefaultConfig => "default-config",
        }
    }
}

fn unused(flag: &str, cmd: &Command) -> Error {
    Error::InvalidArgument(format!("--{flag} has no meaning for `{}`", cmd.name()))
}

/// Writes `--n`, `--depth`, `--tol` and `--eps` into the config block of the
/// command; a flag the command does not read is an error.
pub fn apply_overrides(cli: &Cli, cfg: &mut ExperimentConfig) -> Result<()> {
    use Command as C;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    let cmd = &cli.command;
    if let Some(n) = cli.n {
        match cmd {
            C::FamilyCheck => cfg.family_check.contraction_samples = n,
            C::Attractor => cfg.attractor.words = n,
            C::Chaos => cfg.chaos.n = n,
            C::Covering => cfg.covering.budget = n,
            C::Graph => cfg.graph.samples = n,
            C::Bony => cfg.bony.samples = n,
            C::Usc => cfg.usc.points = n,
            C::Sync => cfg.sync.pairs = n,
            C::Lyapunov => cfg.lyapunov.n = n,
            C::Birkhoff => cfg.birkhoff.n = n,
            C::Mixing => cfg.mixing.orbit = n,
            _ => return Err(unused("n", cmd)),
        }
    }
    if let Some(d) = cli.depth {
        match cmd {
            C::Attractor => cfg.attractor.depth = d,
            C::Cusp => cfg.cusp.depth = d,
            C::Bony => cfg.bony.depth = d,
            C::Usc => cfg.usc.depth = d,
            C::Perturb { .. } => cfg.perturb.budget.fiber_depth = d,
            _ => return Err(unused("depth", cmd)),
        }
    }
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("--tol must be positive, got {t}")));
        }
        match cmd {
            C::Attractor => cfg.attractor.tol_cells = t,
            C::Graph => cfg.graph.tol = t,
            C::Sync => cfg.sync.tol = t,
            C::Perturb { .. } => cfg.perturb.budget.sync_tol = t,
            _ => return Err(unused("tol", cmd)),
        }
    }
    if let Some(e) = cli.eps {
        match cmd {
            C::Usc => cfg.usc.eps = e,
            C::Perturb { .. } => cfg.perturb.eps = e,
            _ => return Err(unused("eps", cmd)),
        }
    }
    Ok(())
}

fn threads(cli: &Cli) -> Result<usize> {
    if let Some(t) = cli.threads {
        return Ok(t);
    }
    match std::env::var("ERGOGRAPH_THREADS") {
        Ok(v) if !v.trim().is_empty() => {
            v.trim().parse().map_err(|_| Error::InvalidArgument(format!("ERGOGRAPH_THREADS={v} is not a thread count")))
        }
        _ => Ok(0),
    }
}

/// Runs a parsed command and returns its verdict.
pub fn execute(cli: &Cli) -> Result<Verdict> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    apply_overrides(cli, &mut cfg)?;
    if let Command::DefaultConfig = cli.command {
        print!("{}", cfg.to_json());
        println!();
        return Ok(Verdict::Pass);
    }
    let threads = threads(cli)?;
    let prov = Provenance { config_hash: cfg.hash(), seed: cfg.master_seed, command: cli.command.name().into() };
    let mut ctx = Ctx { cfg: &cfg, art: Artifacts::new(cfg.output_dir.clone(), prov) };
    par::with_threads(threads, || -> Result<Verdict> {
        match &cli.command {
            Command::FamilyCheck => commands::family_check(&mut ctx),
            Command::Attractor => commands::attractor(&mut ctx),
            Command::Chaos => commands::chaos(&mut ctx),
            Command::Covering => commands::covering(&mut ctx),
            Command::Cusp => commands::cusp(&mut ctx),
            Command::Graph => commands::graph(&mut ctx),
            Command::Bony => commands::bony(&mut ctx),
            Command::Usc => commands::usc(&mut ctx),
            Command::Sync => commands::sync(&mut ctx),
            Command::Lyapunov => commands::lyapunov(&mut ctx),
            Command::Birkhoff => commands::birkhoff(&mut ctx),
            Command::Mixing => commands::mixing(&mut ctx),
            Command::Perturb { action: PerturbAction::Suite } => commands::perturb_suite(&mut ctx),
            Command::Perturb { action: PerturbAction::Distance } => commands::perturb_distance(&mut ctx),
            Command::Render { input, output, cells } => {
                let output = match output {
                    Some(o) => o.clone(),
                    None => {
                        let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("render");
                        std::fs::create_dir_all(&cfg.output_dir)
                            .map_err(|e| Error::Io(format!("{}: {e}", cfg.output_dir.display())))?;
                        cfg.output_dir.join(format!("{stem}.pgm"))
                    }
                };
                commands::render(&mut ctx, input, &output, *cells)
            }
            Command::DefaultConfig => unreachable!("handled above"),
        }
    })
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(v) => {
            if !matches!(cli.command, Command::DefaultConfig) {
                println!("verdict: {v}");
            }
            exit_code(v)
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
