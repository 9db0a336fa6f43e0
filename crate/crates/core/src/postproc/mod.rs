//! Post-processing of converged runs: band structures, gaps, densities of
//! states and charge-density differences.

mod cdd;
mod dos;
mod gap;
mod pdos;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use cdd::{cdd_cube, charge_density_difference, DEFAULT_ISOVALUE};
pub use dos::{dos, dos_of_solution, energy_grid, gaussian, DEFAULT_DOS_SIGMA};
pub use gap::{analyze_gap, point_label, GapKind, GapPoint, GapReport, SEGMENT_SEPARATOR};
pub use pdos::{
    atomic_projectors, lowdin_orthonormalize, normalize_projectors, pdos, projection_weights,
    OrbitalProjector, Pdos, DEFAULT_PROJECTOR_WIDTH,
};

use crate::kgrid::KPath;
use crate::pwbasis::DensityGrid;
use crate::scf::{non_self_consistent, DiagOptions, ScfResult, System};
use crate::units::HARTREE_EV;
use crate::{Error, Result};

/// Bands along a path in eV relative to the Fermi level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandStructure {
    pub path: KPath,
    /// One ascending list per path point.
    pub energies: Vec<Vec<f64>>,
    pub n_electrons: f64,
    /// Fermi level of the underlying SCF run in eV (absolute).
    pub fermi_level: f64,
}

impl BandStructure {
    pub fn n_bands(&self) -> usize {
        self.energies.first().map_or(0, Vec::len)
    }

    /// Cumulative distance (Å⁻¹) followed by every band, tab separated.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("# distance(1/A)");
        for n in 1..=self.n_bands() {
            let _ = write!(s, "\tE{n}(eV)");
        }
        s.push('\n');
        for (d, e) in self.path.cumulative_distance.iter().zip(&self.energies) {
            let _ = write!(s, "{d:.10}");
            for x in e {
                let _ = write!(s, "\t{x:.10}");
            }
            s.push('\n');
        }
        s
    }

    /// Node positions for plotting, one `distance label` line per point.
    pub fn labels_text(&self) -> String {
        self.path.to_text()
    }
}

/// Bands along `path` in the potential of a fixed density. `fermi_level` is
/// in Hartree and becomes the energy zero.
pub fn bands_at_density(
    system: &System,
    density: &DensityGrid,
    fermi_level: f64,
    ecut_wfc: f64,
    path: &KPath,
    n_bands: usize,
    diag: &DiagOptions,
) -> Result<BandStructure> {
    let solved = non_self_consistent(system, density, ecut_wfc, &path.points, n_bands, diag)?;
    let energies: Vec<Vec<f64>> = solved
        .iter()
        .map(|(_, e)| {
            e.values
                .iter()
                .map(|x| (x - fermi_level) * HARTREE_EV)
                .collect()
        })
        .collect();
    if energies.iter().any(|e| e.len() != n_bands) {
        return Err(Error::InsufficientBands {
            bands: energies.iter().map(Vec::len).min().unwrap_or(0),
            electrons: system.n_electrons,
        });
    }
    Ok(BandStructure {
        path: path.clone(),
        energies,
        n_electrons: system.n_electrons,
        fermi_level: fermi_level * HARTREE_EV,
    })
}

/// Bands along `path` from a finished SCF run. An unconverged run is refused
/// unless `force` is set.
pub fn band_structure(
    system: &System,
    scf: &ScfResult,
    ecut_wfc: f64,
    path: &KPath,
    n_bands: usize,
    force: bool,
    diag: &DiagOptions,
) -> Result<BandStructure> {
    if !scf.converged {
        if !force {
            return Err(Error::NotConverged(scf.iterations));
        }
        log::warn!("computing bands from an unconverged density");
    }
    bands_at_density(
        system,
        &scf.final_density,
        scf.solution.fermi_level,
        ecut_wfc,
        path,
        n_bands,
        diag,
    )
}
