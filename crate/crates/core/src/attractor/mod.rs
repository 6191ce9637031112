//! IFS-level machinery: Hutchinson iteration, coding map, weak-hyperbolicity
//! scans, covering certificates, chaos game, transfer operator and cusp
//! regions.

mod chaos;
mod coding;
mod covering;
mod cusp;
mod hutchinson;

pub use chaos::{chaos_game, stationary_uniqueness, transfer_step, TRANSFER_SUPPORT_CAP};
pub use coding::{coding_point, weak_hyperbolicity_scan, word_profile, CodingPoint, HyperbolicityScan, SymbolWord};
pub use covering::{covering_search, covering_verify, CoveringOutcome, CoveringProblem, Region, RegionSpec, Shape};
pub use cusp::{cusp_regions, default_cusp_rect, CuspSequence};
pub use hutchinson::{AttractorRun, Hutchinson, HutchinsonMode};
