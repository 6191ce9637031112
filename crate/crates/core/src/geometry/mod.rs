//! Planar, circle and solenoid primitives, and the metrics built on them.

pub mod grid;
pub mod measure;
pub mod point;
pub mod report;
pub mod solenoid;
pub mod wasserstein;

pub use grid::{hausdorff_distance, inclusion_margin, GridGeometry, GridSet};
pub use measure::EmpiricalMeasure;
pub use point::{circle_dist, cloud_diameter, wrap_unit, CircleAngle, DiskDomain, Mat2, PlanePoint};
pub use report::{DiagnosticReport, Verdict};
pub use solenoid::{solenoid_metric, SolenoidPoint};
pub use wasserstein::{wasserstein1, W1Estimate};
