//! Shared data model: diffusion, drift fields, reference systems, grids,
//! noise, path storage and empirical measures.

mod diffusion;
mod ensemble;
mod field;
mod grid;
mod measure;
mod noise;
mod reference;

pub use diffusion::DiffusionMatrix;
pub use ensemble::{PathEnsemble, PathStatus, Recording, SchemeTag};
pub use field::{norm, norm_diff, DriftField, SpaceGrowth};
pub use grid::{t_floor, TimeGrid};
pub(crate) use grid::floor_index;
pub use measure::{ess, normalize_log_weights, EmpiricalMeasure};
pub use noise::{NoiseSource, PathNoise};
pub use reference::{make_reference_system, DomainBox, GradientFn, PotentialFn, PotentialSpec, ReferenceSystem};
