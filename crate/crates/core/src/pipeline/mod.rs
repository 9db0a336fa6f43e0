//! Input decks and the workflows they drive.

pub mod deck;
pub mod run;
pub mod scan;

pub use deck::{CalculationKind, Deck, KPointsCard, PathNode, PositionUnit, SpeciesEntry};
pub use run::{
    deck_cell, deck_path, detect_stacking, load_deck, prepare, run_deck, scf_options, sha256_hex,
    Checkpoint, Manifest, OutputFile, Prepared, RunOptions, CHECKPOINT_FILE, MANIFEST_FILE,
    PSEUDO_PATH_ENV,
};
pub use scan::{
    at_distance, binding_curve, binding_row, binding_summary, gap_row, gap_table, gap_vs_distance,
    parabolic_minimum, strain_row, strain_sweep, strain_table, sweep_values, BindingCurve,
    BindingMinimum, BindingRow, GapRow, LayerReferences, ScanSettings, StrainRow, SummaryRow,
    SystemBuilder, BINDING_TABLE_HEADER, GAP_TABLE_HEADER,
};
