//! Plane-wave Kohn-Sham DFT for two-dimensional heterobilayers.

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod elements;
pub mod error;
pub mod kgrid;
pub mod linalg;
pub mod pipeline;
pub mod postproc;
pub mod pseudo;
pub mod pwbasis;
pub mod scf;
pub mod special;
pub mod structure;
pub mod units;
pub mod xc;

pub use error::{Error, Result};
pub use kgrid::{KMesh, KNode, KPath};
pub use pipeline::{CalculationKind, Deck, Manifest, RunOptions};
pub use postproc::{BandStructure, GapKind, GapReport};
pub use pseudo::{D2Params, Pseudopotential};
pub use pwbasis::DensityGrid;
pub use scf::{ScfOptions, ScfResult, SmearingKind, System};
pub use structure::{Cell, LayerTag, StackingPattern};
pub use xc::Functional;
