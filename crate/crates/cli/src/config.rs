//! The experiment config: the family plus one parameter block per command.

use std::path::{Path, PathBuf};

use ergograph::attractor::{HutchinsonMode, Shape};
use ergograph::ergodics::Observable;
use ergograph::family::FamilyConfig;
use ergograph::geometry::PlanePoint;
use ergograph::perturbation::SuiteBudget;
use ergograph::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: FamilyConfig,
    /// Grid cells across `diam(X)`, so `h = diam(X) / grid_cells`.
    pub grid_cells: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub family_check: FamilyCheckParams,
    pub attractor: AttractorParams,
    pub chaos: ChaosParams,
    pub covering: CoveringParams,
    pub cusp: CuspParams,
    pub graph: GraphParams,
    pub bony: BonyParams,
    pub usc: UscParams,
    pub sync: SyncParams,
    pub lyapunov: LyapunovParams,
    pub birkhoff: BirkhoffParams,
    pub mixing: MixingParams,
    pub perturb: PerturbParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            family: FamilyConfig::default(),
            grid_cells: 1024,
            master_seed: 0,
            output_dir: PathBuf::from("out"),
            family_check: FamilyCheckParams::default(),
            attractor: AttractorParams::default(),
            chaos: ChaosParams::default(),
            covering: CoveringParams::default(),
            cusp: CuspParams::default(),
            graph: GraphParams::default(),
            bony: BonyParams::default(),
            usc: UscParams::default(),
            sync: SyncParams::default(),
            lyapunov: LyapunovParams::default(),
            birkhoff: BirkhoffParams::default(),
            mixing: MixingParams::default(),
            perturb: PerturbParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyCheckParams {
    pub jacobian_samples: usize,
    pub contraction_samples: usize,
    pub clearance_taus: usize,
    pub clearance_boundary: usize,
    pub min_clearance: f64,
    pub splitting_samples: usize,
    pub avg_contraction_samples: usize,
}

impl Default for FamilyCheckParams {
    fn default() -> Self {
        FamilyCheckParams {
            jacobian_samples: 1000,
            contraction_samples: 100_000,
            clearance_taus: 200,
            clearance_boundary: 360,
            min_clearance: 0.02,
            splitting_samples: 100_000,
            avg_contraction_samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttractorParams {
    pub mode: HutchinsonMode,
    /// Convergence threshold on successive Hausdorff distances, in cells.
    pub tol_cells: f64,
    pub max_iters: usize,
    /// Cap on the iterations spent reaching the discrete fixed points that
    /// are compared for seed independence.
    pub fixed_point_iters: usize,
    /// The single-cell seed; the center of `X` when absent.
    pub seed_point: Option<PlanePoint>,
    pub independence_cells: f64,
    pub words: usize,
    pub depth: usize,
}

impl Default for AttractorParams {
    fn default() -> Self {
        AttractorParams {
            mode: HutchinsonMode::Generators,
            tol_cells: 2.0,
            max_iters: 200,
            fixed_point_iters: 400,
            seed_point: None,
            independence_cells: 3.0,
            words: 1000,
            depth: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChaosParams {
    pub n: usize,
    pub burn_in: usize,
    /// Defaults to the two ends of the horizontal diameter at `0.9 R`.
    pub start_a: Option<PlanePoint>,
    pub start_b: Option<PlanePoint>,
}

impl Default for ChaosParams {
    fn default() -> Self {
        ChaosParams { n: 100_000, burn_in: 1000, start_a: None, start_b: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoveringParams {
    pub cells: usize,
    pub control_cells: usize,
    pub shape: Shape,
    pub budget: usize,
    pub margin: f64,
}

impl Default for CoveringParams {
    fn default() -> Self {
        CoveringParams { cells: 256, control_cells: 200, shape: Shape::Rectangle, budget: 400, margin: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CuspParams {
    pub depth: usize,
}

impl Default for CuspParams {
    fn default() -> Self {
        CuspParams { depth: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphParams {
    pub samples: usize,
    pub tol: f64,
    pub invariance_tol: f64,
    /// Certified pullback tolerance used inside the invariance check.
    pub invariance_certified: f64,
    /// Graph points written to `graph.csv`.
    pub export: usize,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams { samples: 100, tol: 1e-8, invariance_tol: 1e-6, invariance_certified: 1e-7, export: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BonyParams {
    pub samples: usize,
    pub depth: usize,
    pub bone_cells: f64,
    pub bin_cells: f64,
}

impl Default for BonyParams {
    fn default() -> Self {
        BonyParams { samples: 200, depth: 200, bone_cells: 10.0, bin_cells: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UscParams {
    pub points: usize,
    pub trials: usize,
    /// Neighborhood radius as a fraction of `diam(X)`.
    pub eps: f64,
    pub depth: usize,
}

impl Default for UscParams {
    fn default() -> Self {
        UscParams { points: 100, trials: 8, eps: 1e-2, depth: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyncParams {
    pub pairs: usize,
    pub max_steps: usize,
    pub tol: f64,
}

impl Default for SyncParams {
    fn default() -> Self {
        SyncParams { pairs: 100, max_steps: 5000, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovParams {
    pub starts: usize,
    pub n: usize,
}

impl Default for LyapunovParams {
    fn default() -> Self {
        LyapunovParams { starts: 50, n: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BirkhoffParams {
    pub starts: usize,
    pub n: usize,
    /// The built-in observables when absent.
    pub observables: Option<Vec<Observable>>,
}

impl Default for BirkhoffParams {
    fn default() -> Self {
        BirkhoffParams { starts: 50, n: 100_000, observables: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixingParams {
    pub orbit: usize,
    pub lag: usize,
    pub factor: f64,
}

impl Default for MixingParams {
    fn default() -> Self {
        MixingParams { orbit: 1_000_000, lag: 50, factor: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbParams {
    pub eps: f64,
    pub modes: usize,
    pub budget: SuiteBudget,
}

impl Default for PerturbParams {
    fn default() -> Self {
        PerturbParams { eps: 1e-3, modes: 4, budget: SuiteBudget::default() }
    }
}

/// `a.b[2].c` as reported by `serde_path_to_error`, as a JSON pointer.
fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } | Segment::Enum { variant: key } => {
                out.push_str(&key.replace('~', "~0").replace('/', "~1"))
            }
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

impl ExperimentConfig {
    /// Parses and validates; errors carry the JSON pointer of the offending
    /// value.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Config { pointer: pointer(e.path()), message: e.inner().to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate().map_err(|e| match e {
            Error::Config { pointer, message } => Error::Config { pointer: format!("/family{pointer}"), message },
            other => other,
        })?;
        if self.grid_cells < 2 {
            return Err(Error::Config { pointer: "/grid_cells".into(), message: "need at least 2 cells".into() });
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON, with the
    /// output directory left out since it does not affect any result.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let digest = Sha256::digest(serde_json::to_vec(&c).expect("config serializes"));
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Grid spacing `h`.
    pub fn h(&self) -> f64 {
        self.family.domain.diameter() / self.grid_cells as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_losslessly() {
        let mut c = ExperimentConfig::default();
        c.birkhoff.observables = Some(vec![Observable::BaseCos { freq: 3 }]);
        c.chaos.start_a = Some(PlanePoint::new(0.1, -0.0));
        c.attractor.mode = HutchinsonMode::Circle { samples: 40 };
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn empty_object_is_the_default() {
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn errors_name_the_json_pointer() {
        let err = ExperimentConfig::from_json(r#"{"sync": {"pairs": "many"}}"#).unwrap_err();
        assert!(matches!(&err, Error::Config { pointer, .. } if pointer == "/sync/pairs"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"lyapunov": {"stars": 3}}"#).unwrap_err();
        assert!(matches!(&err, Error::Config { pointer, .. } if pointer.starts_with("/lyapunov")), "{err}");
        // t₂ below δ breaks the plateau ordering
        let mut c = ExperimentConfig::default();
        c.family.t[1] = 0.05;
        let err = ExperimentConfig::from_json(&c.to_json()).unwrap_err();
        match err {
            Error::Config { pointer, message } => {
                assert_eq!(pointer, "/family/t/1");
                assert!(message.contains("ordering"), "{message}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn hash_ignores_the_output_dir_only() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.master_seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
