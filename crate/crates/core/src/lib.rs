//! Exact Kronecker coefficients of the symmetric group, labeled datasets
//! for the question "is `g(λ,μ,ν)` zero?", and three classifier families
//! trained and evaluated on them.

pub mod characters;
pub mod dataset;
mod error;
pub mod eval;
pub mod kronecker;
pub mod metrics;
pub mod models;
pub mod partitions;
pub mod seeds;
pub mod verify;

pub use characters::{CharacterTable, CycleType};
pub use dataset::{EncodingKind, LabeledDataset, LabeledTriples, SplitManifest, SplitSpec};
pub use error::{Error, Result};
pub use kronecker::{KroneckerCube, Triple};
pub use partitions::{PaddedPartition, Partition};
