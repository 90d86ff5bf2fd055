//! Learning a block-structure concept from a handful of noisy examples and
//! generating new instances of it.
//!
//! The pipeline: qualitative relations are extracted from block scenes
//! ([`scene`], [`qsr`]), assembled into a training corpus ([`dataset`]), and
//! used to train three small networks ([`nn`]). Generation ([`planner`])
//! alternates network predictions with a heuristic choice of move
//! ([`heuristics`], [`graphmatch`]); [`eval`] scores the results.

pub mod bundle;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod graphmatch;
pub mod heuristics;
pub mod nn;
pub mod par;
pub mod planner;
pub mod qsr;
pub mod scene;

pub use error::{Error, Result};
pub use qsr::{Atom, BlockId, Label, RelTriple, RelationSet};
pub use scene::{Move, MoveRelation, Pose, Scene};

/// Tool version embedded in every artifact file.
pub const VERSION: &str = concat!("blockstair ", env!("CARGO_PKG_VERSION"));
