use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::linalg::{self, Vec3};
use crate::pseudo::{D2Params, Pseudopotential, DEFAULT_D2_CUTOFF};
use crate::pwbasis::FftGrid;
use crate::structure::Cell;
use crate::units::BOHR_ANGSTROM;
use crate::xc::Functional;
use crate::{Error, Result};

/// Which energy terms enter the Hamiltonian and the total energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interactions {
    pub hartree: bool,
    pub xc: Option<Functional>,
    pub local: bool,
    pub nonlocal: bool,
    pub ewald: bool,
    pub dispersion: bool,
}

impl Interactions {
    /// Non-interacting electrons.
    pub fn none() -> Self {
        Interactions {
            hartree: false,
            xc: None,
            local: false,
            nonlocal: false,
            ewald: false,
            dispersion: false,
        }
    }

    /// Every term, with the given functional and optional dispersion.
    pub fn full(functional: Functional, dispersion: bool) -> Self {
        Interactions {
            hartree: true,
            xc: Some(functional),
            local: true,
            nonlocal: true,
            ewald: true,
            dispersion,
        }
    }
}

/// Model potentials added to the local potential (Hartree).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExternalPotential {
    /// `-depth Σ_L exp(-|r-c-L|²/(2 width²))`, width in Bohr, centre fractional.
    GaussianWell {
        depth: f64,
        width: f64,
        center: Vec3,
    },
    /// `amplitude cos(G·r)` for the reciprocal vector with the given Miller indices.
    Cosine { amplitude: f64, miller: [i32; 3] },
}

impl ExternalPotential {
    /// Values on the real-space grid of `cell`.
    pub fn sample(&self, cell: &Cell, dims: [usize; 3]) -> Vec<f64> {
        let fft = FftGrid::new(dims);
        let a = cell.lattice_bohr();
        match self {
            ExternalPotential::GaussianWell {
                depth,
                width,
                center,
            } => {
                let reach = 8.0 * width;
                let b = cell.reciprocal_bohr();
                let m =
                    [0, 1, 2].map(|i| (reach * linalg::norm(&b[i]) / (2.0 * PI)).ceil() as i64 + 1);
                (0..fft.len())
                    .map(|idx| {
                        let i = fft.unflat(idx);
                        let f = [0, 1, 2].map(|k| {
                            let d = i[k] as f64 / dims[k] as f64 - center[k];
                            d - d.round()
                        });
                        let mut s = 0.0;
                        for n0 in -m[0]..=m[0] {
                            for n1 in -m[1]..=m[1] {
                                for n2 in -m[2]..=m[2] {
                                    let g = [f[0] + n0 as f64, f[1] + n1 as f64, f[2] + n2 as f64];
                                    let r = linalg::row_times(&g, &a);
                                    let r2 = linalg::dot(&r, &r);
                                    if r2 < reach * reach {
                                        s += (-r2 / (2.0 * width * width)).exp();
                                    }
                                }
                            }
                        }
                        -depth * s
                    })
                    .collect()
            }
            ExternalPotential::Cosine { amplitude, miller } => (0..fft.len())
                .map(|idx| {
                    let i = fft.unflat(idx);
                    let ph: f64 = (0..3)
                        .map(|k| miller[k] as f64 * i[k] as f64 / dims[k] as f64)
                        .sum();
                    amplitude * (2.0 * PI * ph).cos()
                })
                .collect(),
        }
    }
}

/// Everything defining a Kohn-Sham problem apart from numerical settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct System {
    pub cell: Cell,
    pub pseudos: BTreeMap<String, Pseudopotential>,
    pub n_electrons: f64,
    pub interactions: Interactions,
    pub external: Vec<ExternalPotential>,
    pub d2: D2Params,
    /// Dispersion lattice-sum cutoff in Å.
    pub d2_cutoff: f64,
    /// Allows electrons and ions to differ in total charge; a uniform
    /// background restores neutrality.
    pub charged_background: bool,
}

impl System {
    /// Atoms with pseudopotentials and all interactions; the electron count
    /// is the total valence charge.
    pub fn new(
        cell: Cell,
        pseudos: BTreeMap<String, Pseudopotential>,
        functional: Functional,
        dispersion: bool,
    ) -> Result<Self> {
        let mut cell = cell;
        for s in cell.unique_species() {
            let ps = pseudos
                .get(&s)
                .ok_or_else(|| Error::Config(format!("no pseudopotential for species {s}")))?;
            cell.set_valence(&s, ps.z_valence);
        }
        let n_electrons = cell.total_valence();
        Ok(System {
            cell,
            pseudos,
            n_electrons,
            interactions: Interactions::full(functional, dispersion),
            external: Vec::new(),
            d2: D2Params::bundled(),
            d2_cutoff: DEFAULT_D2_CUTOFF,
            charged_background: false,
        })
    }

    /// Non-interacting electrons in an empty cell.
    pub fn free_electrons(cell: Cell, n_electrons: f64) -> Self {
        System {
            cell,
            pseudos: BTreeMap::new(),
            n_electrons,
            interactions: Interactions::none(),
            external: Vec::new(),
            d2: D2Params::bundled(),
            d2_cutoff: DEFAULT_D2_CUTOFF,
            charged_background: true,
        }
    }

    /// Two electrons with Hartree and LDA interactions bound by a Gaussian
    /// well in an 8 Bohr cubic box.
    pub fn gaussian_well() -> Self {
        let cell = Cell::cubic(8.0 * BOHR_ANGSTROM).expect("positive box");
        let mut s = System::free_electrons(cell, 2.0);
        s.interactions.hartree = true;
        s.interactions.xc = Some(Functional::Pz);
        s.external.push(ExternalPotential::GaussianWell {
            depth: 2.0,
            width: 1.0,
            center: [0.5, 0.5, 0.5],
        });
        s
    }

    /// Ionic charges, taken from the pseudopotentials when available.
    pub fn ionic_charges(&self) -> Vec<f64> {
        self.cell
            .species()
            .iter()
            .zip(self.cell.valence())
            .map(|(s, &z)| self.pseudos.get(s).map_or(z, |p| p.z_valence))
            .collect()
    }

    pub(crate) fn check(&self) -> Result<()> {
        if !(self.n_electrons >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "electron count must be >= 0, got {}",
                self.n_electrons
            )));
        }
        let ions: f64 = self.ionic_charges().iter().sum();
        if (ions - self.n_electrons).abs() > 1e-8 && !self.charged_background {
            return Err(Error::ChargedCell(ions - self.n_electrons));
        }
        if self.interactions.local || self.interactions.nonlocal {
            for s in self.cell.unique_species() {
                if !self.pseudos.contains_key(&s) {
                    return Err(Error::Config(format!("no pseudopotential for species {s}")));
                }
            }
        }
        Ok(())
    }
}
