use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use super::Pseudopotential;
use crate::linalg;
use crate::pwbasis::PlaneWaveBasis;
use crate::special::{real_ylm, RadialInterpolator};
use crate::structure::Cell;
use crate::units::ANGSTROM_BOHR;
use crate::{Error, Result};

const FORM_FACTOR_STEP: f64 = 0.005;

/// `Σ_p D_p |β_p⟩⟨β_p|ψ⟩` for projector vectors expanded on the basis of `ψ`.
pub fn kb_apply(
    projectors: &[Vec<Complex64>],
    couplings: &[f64],
    psi: &[Complex64],
) -> Result<Vec<Complex64>> {
    if projectors.len() != couplings.len() {
        return Err(Error::DimensionMismatch {
            expected: projectors.len(),
            found: couplings.len(),
        });
    }
    let mut out = vec![Complex64::default(); psi.len()];
    for (p, &d) in projectors.iter().zip(couplings) {
        if p.len() != psi.len() {
            return Err(Error::DimensionMismatch {
                expected: psi.len(),
                found: p.len(),
            });
        }
        let overlap: Complex64 = p.iter().zip(psi).map(|(a, b)| a.conj() * b).sum();
        let s = overlap * d;
        for (o, a) in out.iter_mut().zip(p) {
            *o += a * s;
        }
    }
    Ok(out)
}

/// Radial projector transforms tabulated once per pseudopotential set.
#[derive(Debug, Clone)]
pub struct ProjectorTables {
    tables: BTreeMap<String, Vec<RadialInterpolator>>,
}

impl ProjectorTables {
    pub fn new(pseudos: &BTreeMap<String, Pseudopotential>, q_max: f64) -> Self {
        let tables = pseudos
            .iter()
            .map(|(name, ps)| {
                let t = (0..ps.projectors.len())
                    .map(|i| {
                        RadialInterpolator::new(
                            |q| ps.projector_form_factor(i, q),
                            q_max,
                            FORM_FACTOR_STEP,
                        )
                    })
                    .collect();
                (name.clone(), t)
            })
            .collect();
        ProjectorTables { tables }
    }
}

/// Separable nonlocal operator at one k-point: projector vectors on the
/// basis and their couplings.
#[derive(Debug, Clone, Default)]
pub struct NonlocalProjectors {
    pub vectors: Vec<Vec<Complex64>>,
    pub couplings: Vec<f64>,
}

impl NonlocalProjectors {
    /// Builds `P(k+G) = (4π/√Ω)(-i)^l f_l(q) Y_lm(q̂) e^{-iq·τ}` for every
    /// atom, channel and `m`.
    pub fn build(
        cell: &Cell,
        pseudos: &BTreeMap<String, Pseudopotential>,
        tables: &ProjectorTables,
        basis: &PlaneWaveBasis,
    ) -> Result<Self> {
        let omega = cell.volume_bohr3();
        let pref = 4.0 * PI / omega.sqrt();
        let q_norm: Vec<f64> = basis.kpg.iter().map(linalg::norm).collect();
        let mut vectors = Vec::new();
        let mut couplings = Vec::new();
        for (species, tau) in cell.species().iter().zip(cell.positions()) {
            let ps = pseudos.get(species).ok_or_else(|| {
                Error::Config(format!("no pseudopotential for species {species}"))
            })?;
            let table = &tables.tables[species];
            let tau = tau.map(|x| x * ANGSTROM_BOHR);
            let phase: Vec<Complex64> = basis
                .kpg
                .iter()
                .map(|q| Complex64::from_polar(1.0, -linalg::dot(q, &tau)))
                .collect();
            for (pi, p) in ps.projectors.iter().enumerate() {
                let radial: Vec<f64> = q_norm.iter().map(|&q| table[pi].eval(q)).collect();
                let il = Complex64::new(0.0, -1.0).powu(p.l);
                for m in -(p.l as i32)..=p.l as i32 {
                    let v = basis
                        .kpg
                        .iter()
                        .enumerate()
                        .map(|(g, q)| phase[g] * il * (pref * radial[g] * real_ylm(p.l, m, q)))
                        .collect();
                    vectors.push(v);
                    couplings.push(p.coupling);
                }
            }
        }
        Ok(NonlocalProjectors { vectors, couplings })
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn apply(&self, psi: &[Complex64]) -> Result<Vec<Complex64>> {
        kb_apply(&self.vectors, &self.couplings, psi)
    }

    /// Adds `V_NL` to a dense row-major Hamiltonian of dimension `n`.
    pub fn add_to_dense(&self, n: usize, h: &mut [Complex64]) {
        for (p, &d) in self.vectors.iter().zip(&self.couplings) {
            for i in 0..n {
                let pi = p[i] * d;
                for j in 0..n {
                    h[i * n + j] += pi * p[j].conj();
                }
            }
        }
    }
}
