//! Norm-conserving pseudopotentials on radial tables, UPF file-name
//! parsing, separable nonlocal projectors and Grimme-D2 dispersion.

mod d2;
mod nonlocal;
mod table;
mod upf;

pub use d2::{grimme_d2, D2Element, D2Params, DEFAULT_D2_CUTOFF};
pub use nonlocal::{kb_apply, NonlocalProjectors, ProjectorTables};
pub use table::{
    check_norm_conservation, log_derivative, vloc_reciprocal, ChannelNorm, NormReport, Projector,
    Pseudopotential, DEFAULT_NORM_TOLERANCE,
};
pub use upf::{parse_upf_name, PseudoMeta, XC_TAGS};
