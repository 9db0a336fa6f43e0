//! Fixtures shared by the benchmarks.

use std::collections::BTreeMap;

use pwdft::pseudo::Pseudopotential;
use pwdft::structure::{build_heterobilayer, Layer};
use pwdft::{Cell, Result, StackingPattern};

/// Germanene on GaP in stacking pattern I at `d` Å.
pub fn bilayer(d: f64) -> Result<Cell> {
    let gap = Layer::honeycomb(3.89, ["Ga", "P"], 0.38)?;
    let ge = Layer::honeycomb(3.95, ["Ge", "Ge"], 0.38)?;
    build_heterobilayer(&ge, &gap, StackingPattern::I, d, 20.0)
}

/// Rocksalt conventional cube with ±1 charges.
pub fn rocksalt() -> Result<(Cell, Vec<f64>)> {
    let mut cell = Cell::cubic(5.64)?;
    let mut q = Vec::new();
    for f in [
        [0.0, 0.0, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
        [0.5, 0.5, 0.0],
    ] {
        cell.push_atom_frac("Na", f, 1.0, None)?;
        cell.push_atom_frac("Cl", [f[0] + 0.5, f[1], f[2]], -1.0, None)?;
        q.extend([1.0, -1.0]);
    }
    Ok((cell, q))
}

/// Gaussian-screened ions with one s projector each.
pub fn pseudos(cell: &Cell) -> Result<BTreeMap<String, Pseudopotential>> {
    cell.unique_species()
        .into_iter()
        .map(|s| {
            let z = pwdft::elements::default_valence(&s).unwrap_or(4.0);
            let ps =
                Pseudopotential::erf_screened(&s, z, 1.0)?.with_gaussian_projector(0, 0.55, 0.5)?;
            Ok((s, ps))
        })
        .collect()
}
