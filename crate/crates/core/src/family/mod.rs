//! The fiber family `t ↦ f_t` and its certified properties.

pub mod checks;
pub mod config;
pub mod maps;
pub mod smooth;
pub mod toys;

pub use config::FamilyConfig;
pub use maps::{generators, AffineMap, CenterProfile, FiberGenerator, FiberMaps, OrientedBox, PlaneMap, PlateauFamily};
pub use smooth::{smoothstep, Eta, Theta};
pub use toys::{CircleDriftFamily, ConstantFamily, SwitchingFamily, TwoWellMap};
