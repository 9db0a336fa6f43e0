use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dos::gaussian;
use crate::linalg;
use crate::pwbasis::PlaneWaveBasis;
use crate::scf::{KsSolution, SPIN_DEGENERACY};
use crate::special::real_ylm;
use crate::structure::Cell;
use crate::units::HARTREE_EV;
use crate::{Error, Result};

/// Radial width (Bohr) of the Gaussian orbitals used for projection.
pub const DEFAULT_PROJECTOR_WIDTH: f64 = 1.5;

const L_MAX: u32 = 1;
const L_LETTERS: [char; 2] = ['s', 'p'];

/// One atom-centred orbital expanded on a plane-wave basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitalProjector {
    pub atom: usize,
    pub species: String,
    pub l: u32,
    pub m: i32,
    pub coefficients: Vec<Complex64>,
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Orbitals `r^l exp(-r²/2w²) Y_lm` on every atom for `l ≤ 1`, normalised
/// on the basis. Their transform is `(-i)^l q^l exp(-q²w²/2) Y_lm(q̂)` times
/// the phase of the atom position.
pub fn atomic_projectors(
    cell: &Cell,
    basis: &PlaneWaveBasis,
    width: f64,
) -> Result<Vec<OrbitalProjector>> {
    if !(width > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "projector width must be > 0, got {width}"
        )));
    }
    let minus_i = Complex64::new(0.0, -1.0);
    let mut out = Vec::new();
    for (atom, (species, tau)) in cell.species().iter().zip(cell.positions_bohr()).enumerate() {
        for l in 0..=L_MAX {
            let prefactor = minus_i.powu(l);
            for m in -(l as i32)..=(l as i32) {
                let coefficients: Vec<Complex64> = basis
                    .kpg
                    .iter()
                    .map(|q| {
                        let q2 = linalg::dot(q, q);
                        let radial = q2.sqrt().powi(l as i32) * (-0.5 * q2 * width * width).exp();
                        let phase = Complex64::from_polar(1.0, -linalg::dot(q, &tau));
                        prefactor * phase * (radial * real_ylm(l, m, q))
                    })
                    .collect();
                out.push(OrbitalProjector {
                    atom,
                    species: species.clone(),
                    l,
                    m,
                    coefficients,
                });
            }
        }
    }
    for p in &mut out {
        let n = inner(&p.coefficients, &p.coefficients).re.sqrt();
        if n == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "projector (atom {}, l {}) vanishes on the basis",
                p.atom, p.l
            )));
        }
        p.coefficients.iter_mut().for_each(|c| *c /= n);
    }
    Ok(out)
}

/// Rescales each projector to unit norm, warning about any that were not.
pub fn normalize_projectors(projectors: &mut [OrbitalProjector]) -> Result<()> {
    for p in projectors {
        let n = inner(&p.coefficients, &p.coefficients).re.sqrt();
        if n == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "projector on atom {} has zero norm",
                p.atom
            )));
        }
        if (n - 1.0).abs() > 1e-10 {
            log::warn!(
                "projector (atom {}, l {}, m {}) had norm {n:.6}; normalised",
                p.atom,
                p.l,
                p.m
            );
            p.coefficients.iter_mut().for_each(|c| *c /= n);
        }
    }
    Ok(())
}

/// Replaces the set by its symmetric orthonormalisation `P S^{-1/2}`, so
/// the squared overlaps of a normalised state sum to at most one.
pub fn lowdin_orthonormalize(projectors: &mut [OrbitalProjector]) -> Result<()> {
    let n = projectors.len();
    if n == 0 {
        return Ok(());
    }
    let s = DMatrix::from_fn(n, n, |i, j| {
        inner(&projectors[i].coefficients, &projectors[j].coefficients)
    });
    let eig = s.symmetric_eigen();
    let min = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min < 1e-10 {
        return Err(Error::SingularPoint(format!(
            "projector overlap matrix is singular (smallest eigenvalue {min:e})"
        )));
    }
    let u = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| Complex64::new(x.powf(-0.5), 0.0)));
    let t = u * d * u.adjoint();
    let old: Vec<Vec<Complex64>> = projectors.iter().map(|p| p.coefficients.clone()).collect();
    for (j, p) in projectors.iter_mut().enumerate() {
        for (g, c) in p.coefficients.iter_mut().enumerate() {
            *c = (0..n).map(|i| old[i][g] * t[(i, j)]).sum();
        }
    }
    Ok(())
}

/// `|⟨p|ψ⟩|²` for every projector.
pub fn projection_weights(projectors: &[OrbitalProjector], psi: &[Complex64]) -> Vec<f64> {
    projectors
        .iter()
        .map(|p| inner(&p.coefficients, psi).norm_sqr())
        .collect()
}

/// One projected curve: an atom and an angular momentum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PdosChannel {
    pub atom: usize,
    pub species: String,
    pub l: u32,
}

impl PdosChannel {
    pub fn name(&self) -> String {
        format!(
            "{}{}-{}",
            self.species,
            self.atom + 1,
            L_LETTERS[self.l as usize]
        )
    }
}

/// Projected densities of states in eV relative to the Fermi level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pdos {
    pub energies: Vec<f64>,
    pub channels: Vec<PdosChannel>,
    pub curves: Vec<Vec<f64>>,
}

impl Pdos {
    /// Curves summed over channels of one species and angular momentum.
    pub fn by_species(&self, species: &str, l: u32) -> Vec<f64> {
        let mut out = vec![0.0; self.energies.len()];
        for (c, curve) in self.channels.iter().zip(&self.curves) {
            if c.species == species && c.l == l {
                out.iter_mut().zip(curve).for_each(|(a, b)| *a += b);
            }
        }
        out
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("# E(eV)");
        for c in &self.channels {
            let _ = write!(s, "\t{}", c.name());
        }
        s.push('\n');
        for (i, e) in self.energies.iter().enumerate() {
            let _ = write!(s, "{e:.6}");
            for curve in &self.curves {
                let _ = write!(s, "\t{:.10e}", curve[i]);
            }
            s.push('\n');
        }
        s
    }
}

/// Atom- and l-resolved DOS of a solution using Löwdin-orthonormalised
/// Gaussian orbitals of radial width `width` (Bohr). `sigma` and `energies`
/// are in eV relative to the Fermi level.
pub fn pdos(
    cell: &Cell,
    solution: &KsSolution,
    width: f64,
    sigma: f64,
    energies: &[f64],
) -> Result<Pdos> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "DOS broadening must be > 0, got {sigma}"
        )));
    }
    let mut channels: Vec<PdosChannel> = Vec::new();
    for (atom, species) in cell.species().iter().enumerate() {
        for l in 0..=L_MAX {
            channels.push(PdosChannel {
                atom,
                species: species.clone(),
                l,
            });
        }
    }
    let index = |atom: usize, l: u32| atom * (L_MAX as usize + 1) + l as usize;
    let mut curves = vec![vec![0.0; energies.len()]; channels.len()];
    for k in &solution.kpoints {
        let mut proj = atomic_projectors(cell, &k.basis, width)?;
        lowdin_orthonormalize(&mut proj)?;
        for (eps, psi) in k.eigenvalues.iter().zip(&k.vectors) {
            let e0 = (eps - solution.fermi_level) * HARTREE_EV;
            let w = projection_weights(&proj, psi);
            let mut per_channel = vec![0.0; channels.len()];
            for (p, x) in proj.iter().zip(&w) {
                per_channel[index(p.atom, p.l)] += x;
            }
            for (c, &pw) in per_channel.iter().enumerate() {
                let scale = SPIN_DEGENERACY * k.weight * pw;
                for (v, &e) in curves[c].iter_mut().zip(energies) {
                    *v += scale * gaussian(e - e0, sigma);
                }
            }
        }
    }
    Ok(Pdos {
        energies: energies.to_vec(),
        channels,
        curves,
    })
}
