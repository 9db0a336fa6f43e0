//! Kohn-Sham self-consistency: Hamiltonian, eigensolvers, occupations,
//! mixing, energies and the SCF driver.

mod eigensolver;
pub mod ewald;
mod hamiltonian;
mod smearing;
mod system;

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use eigensolver::{diagonalize, diagonalize_dense, lobpcg, DiagOptions, Eigenpairs};
pub use ewald::{auto_eta, ewald_energy, ewald_energy_with_eta};
pub use hamiltonian::{apply_hamiltonian, Hamiltonian};
pub use smearing::{
    find_fermi, mp_occupation, Smearing, SmearingKind, FERMI_TOLERANCE, SPIN_DEGENERACY,
};
pub use system::{ExternalPotential, Interactions, System};

use crate::kgrid::KMesh;
use crate::linalg::{self, Vec3};
use crate::pseudo::{grimme_d2, NonlocalProjectors, ProjectorTables};
use crate::pwbasis::{
    build_basis_on_grid, fft_grid, scatter_backward, species_structure_factor_bohr, DensityGrid,
    FftGrid, PlaneWaveBasis, SpectralGrid,
};
use crate::special::RadialInterpolator;
use crate::units::ry_to_ha;
use crate::xc::{evaluate_xc, hartree_on};
use crate::{Error, Result};

/// Largest tolerated disagreement between the two total-energy routes.
pub const ENERGY_ROUTE_TOLERANCE: f64 = 1e-6;
/// Width (Bohr) of the Gaussian charge placed on each atom at the start.
pub const INITIAL_GAUSSIAN_WIDTH: f64 = 1.0;

const FORM_FACTOR_STEP: f64 = 0.005;

/// Numerical settings of an SCF run. Energies in Ry as in input decks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScfOptions {
    pub ecut_wfc: f64,
    /// Density cutoff; `None` means four times `ecut_wfc`.
    pub ecut_rho: Option<f64>,
    pub kmesh: KMesh,
    pub smearing: SmearingKind,
    /// Smearing width in Ry.
    pub degauss: f64,
    pub mixing_beta: f64,
    /// Energy convergence threshold in Ry.
    pub conv_thr: f64,
    /// Largest `∫|n_out - n_in|` (electrons) accepted at convergence.
    pub density_tol: f64,
    pub max_iter: usize,
    /// Bands per k-point; `None` picks enough for smearing.
    pub n_bands: Option<usize>,
    pub diag: DiagOptions,
    /// Consecutive energy rises that abort the run.
    pub divergence_window: usize,
}

impl Default for ScfOptions {
    fn default() -> Self {
        ScfOptions {
            ecut_wfc: 30.0,
            ecut_rho: None,
            kmesh: KMesh::gamma(),
            smearing: SmearingKind::MethfesselPaxton,
            degauss: 0.0005,
            mixing_beta: 0.7,
            conv_thr: 1e-8,
            density_tol: 1e-6,
            max_iter: 100,
            n_bands: None,
            diag: DiagOptions::default(),
            divergence_window: 10,
        }
    }
}

impl ScfOptions {
    pub fn ecut_rho(&self) -> f64 {
        self.ecut_rho.unwrap_or(4.0 * self.ecut_wfc)
    }

    /// Smearing with its width converted to Hartree.
    pub fn smearing(&self) -> Smearing {
        Smearing {
            kind: self.smearing,
            width: ry_to_ha(self.degauss),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ecut_wfc > 0.0) || !(self.ecut_rho() >= self.ecut_wfc) {
            return Err(Error::InvalidParameter(format!(
                "cutoffs must satisfy 0 < ecut_wfc <= ecut_rho (got {}, {})",
                self.ecut_wfc,
                self.ecut_rho()
            )));
        }
        if !(self.mixing_beta > 0.0 && self.mixing_beta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "mixing_beta must be in (0, 1], got {}",
                self.mixing_beta
            )));
        }
        if !(self.degauss > 0.0) || !(self.conv_thr > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "degauss, conv_thr and max_iter must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Solution at one k-point.
#[derive(Debug, Clone, PartialEq)]
pub struct KPointSolution {
    /// Fractional k.
    pub k: Vec3,
    pub weight: f64,
    pub basis: PlaneWaveBasis,
    /// Ascending, Hartree.
    pub eigenvalues: Vec<f64>,
    pub vectors: Vec<Vec<Complex64>>,
    /// Including the spin factor.
    pub occupations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KsSolution {
    pub kpoints: Vec<KPointSolution>,
    /// Hartree.
    pub fermi_level: f64,
}

impl KsSolution {
    pub fn eigenvalues(&self) -> Vec<Vec<f64>> {
        self.kpoints.iter().map(|k| k.eigenvalues.clone()).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.kpoints.iter().map(|k| k.weight).collect()
    }

    pub fn electron_count(&self) -> f64 {
        self.kpoints
            .iter()
            .map(|k| k.weight * k.occupations.iter().sum::<f64>())
            .sum()
    }
}

/// Total-energy terms in Hartree.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyComponents {
    pub kinetic: f64,
    pub local: f64,
    pub hartree: f64,
    pub xc: f64,
    pub nonlocal: f64,
    pub ewald: f64,
    pub dispersion: f64,
}

impl EnergyComponents {
    pub fn total(&self) -> f64 {
        self.kinetic
            + self.local
            + self.hartree
            + self.xc
            + self.nonlocal
            + self.ewald
            + self.dispersion
    }
}

/// One line of the iteration log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Hartree.
    pub total_energy: f64,
    /// `|E_i - E_{i-1}|` in Hartree, `None` on the first step.
    pub delta_energy: Option<f64>,
    pub clamped_fraction: f64,
    /// `∫|n_out - n_in|` in electrons.
    pub density_residual: f64,
    /// Band-energy route to the total (Hartree).
    pub band_route_energy: f64,
    /// Smearing term `-σS` (Hartree), not part of the total.
    pub smearing_correction: f64,
    pub fermi_level: f64,
}

/// Header of the tab-separated iteration log.
pub const ITERATION_LOG_HEADER: &str =
    "iteration\ttotal_energy_ha\tdelta_e_ha\tclamped_fraction\tdensity_residual\tsmearing_correction_ha";

impl IterationRecord {
    pub fn tsv(&self) -> String {
        let de = self
            .delta_energy
            .map_or_else(|| "nan".to_string(), |d| format!("{d:.6e}"));
        format!(
            "{}\t{:.12}\t{}\t{:.6e}\t{:.6e}\t{:.6e}",
            self.iteration,
            self.total_energy,
            de,
            self.clamped_fraction,
            self.density_residual,
            self.smearing_correction
        )
    }
}

#[derive(Debug, Clone)]
pub struct ScfResult {
    pub converged: bool,
    pub iterations: usize,
    /// Hartree.
    pub total_energy: f64,
    pub components: EnergyComponents,
    pub energy_history: Vec<f64>,
    pub final_density: DensityGrid,
    pub solution: KsSolution,
    pub log: Vec<IterationRecord>,
}

impl ScfResult {
    /// The iteration log as tab-separated text with a header line.
    pub fn log_tsv(&self) -> String {
        let mut s = String::from(ITERATION_LOG_HEADER);
        s.push('\n');
        for r in &self.log {
            let _ = writeln!(s, "{}", r.tsv());
        }
        s
    }
}

/// `β n_out + (1-β) n_in`.
pub fn mix_density(n_in: &DensityGrid, n_out: &DensityGrid, beta: f64) -> Result<DensityGrid> {
    if !n_in.same_grid(n_out) || n_in.len() != n_out.len() {
        return Err(Error::InvalidParameter(
            "mixing densities on different grids".into(),
        ));
    }
    let values = n_in
        .values
        .iter()
        .zip(&n_out.values)
        .map(|(a, b)| beta * b + (1.0 - beta) * a)
        .collect();
    Ok(DensityGrid {
        dims: n_in.dims,
        values,
        cell: n_in.cell.clone(),
    })
}

/// Superposition of normalised Gaussians carrying the ionic charges,
/// scaled to the electron count; uniform when the cell holds no charge.
pub fn initial_density(system: &System, dims: [usize; 3]) -> DensityGrid {
    let cell = &system.cell;
    let charges = system.ionic_charges();
    let ions: f64 = charges.iter().sum();
    if cell.n_atoms() == 0 || !(ions > 0.0) {
        return DensityGrid::uniform(cell, dims, system.n_electrons);
    }
    let mut values = vec![0.0; dims[0] * dims[1] * dims[2]];
    let w = INITIAL_GAUSSIAN_WIDTH;
    let norm = (2.0 * PI * w * w).powf(-1.5);
    for (frac, &q) in cell.fractional_positions().iter().zip(&charges) {
        let well = ExternalPotential::GaussianWell {
            depth: -q * norm,
            width: w,
            center: *frac,
        };
        for (v, x) in values.iter_mut().zip(well.sample(cell, dims)) {
            *v += x;
        }
    }
    let mut grid = DensityGrid {
        dims,
        values,
        cell: cell.clone(),
    };
    let total = grid.integrate();
    if total > 0.0 {
        let s = system.n_electrons / total;
        grid.values.iter_mut().for_each(|v| *v *= s);
    }
    grid
}

/// Hartree and exchange-correlation parts of the potential for a density.
#[derive(Debug, Clone)]
pub struct PotentialTerms {
    pub v_hxc: Vec<f64>,
    pub hartree: f64,
    pub xc: f64,
    pub clamped_fraction: f64,
}

/// Grid, local potential and projector tables shared by all k-points.
#[derive(Debug, Clone)]
pub struct KsContext {
    pub grid: SpectralGrid,
    pub ecut_wfc: f64,
    /// Local pseudopotential plus model potentials (Hartree).
    pub v_local: Vec<f64>,
    tables: Option<ProjectorTables>,
}

impl KsContext {
    pub fn new(system: &System, ecut_wfc: f64, dims: [usize; 3]) -> Result<Self> {
        system.check()?;
        let cell = &system.cell;
        let grid = SpectralGrid::new(cell, dims);
        let mut v_local = vec![0.0; grid.len()];
        if system.interactions.local && cell.n_atoms() > 0 {
            let gmax = grid.g2.iter().cloned().fold(0.0, f64::max).sqrt() + 0.1;
            let mut coeff = vec![Complex64::default(); grid.len()];
            for species in cell.unique_species() {
                let ps = &system.pseudos[&species];
                let table = RadialInterpolator::new(
                    |q| ps.short_range_form_factor(q),
                    gmax,
                    FORM_FACTOR_STEP,
                );
                for (i, c) in coeff.iter_mut().enumerate() {
                    if grid.nyquist[i] {
                        continue;
                    }
                    let q2 = grid.g2[i];
                    let q = q2.sqrt();
                    let mut ff = table.eval(q);
                    if q2 > 1e-12 {
                        ff -= 4.0 * PI * ps.z_valence / q2;
                    }
                    *c += species_structure_factor_bohr(cell, &species, &grid.g[i])
                        * (ff / grid.omega);
                }
            }
            let (v, imag) = grid.synthesize(&coeff);
            if imag > 1e-8 {
                log::warn!("local potential has imaginary part {imag:.2e}");
            }
            v_local = v;
        }
        for ext in &system.external {
            for (v, x) in v_local.iter_mut().zip(ext.sample(cell, dims)) {
                *v += x;
            }
        }
        let tables = if system.interactions.nonlocal
            && system.pseudos.values().any(|p| !p.projectors.is_empty())
        {
            let b = cell.reciprocal_bohr();
            let kreach = linalg::norm(&b[0]) + linalg::norm(&b[1]) + linalg::norm(&b[2]);
            Some(ProjectorTables::new(
                &system.pseudos,
                ecut_wfc.sqrt() + kreach,
            ))
        } else {
            None
        };
        Ok(KsContext {
            grid,
            ecut_wfc,
            v_local,
            tables,
        })
    }

    pub fn fft(&self) -> &FftGrid {
        &self.grid.fft
    }

    /// Basis and projectors at fractional `k`.
    pub fn setup_k(
        &self,
        system: &System,
        k: Vec3,
    ) -> Result<(PlaneWaveBasis, NonlocalProjectors)> {
        let basis = build_basis_on_grid(&system.cell, k, self.ecut_wfc, self.grid.dims())?;
        let nl = match &self.tables {
            Some(t) => NonlocalProjectors::build(&system.cell, &system.pseudos, t, &basis)?,
            None => NonlocalProjectors::default(),
        };
        Ok((basis, nl))
    }

    pub fn potential(&self, system: &System, density: &[f64]) -> Result<PotentialTerms> {
        let mut v_hxc = vec![0.0; self.grid.len()];
        let mut hartree = 0.0;
        let mut xc = 0.0;
        let mut clamped_fraction = 0.0;
        if system.interactions.hartree {
            let h = hartree_on(&self.grid, density);
            v_hxc
                .iter_mut()
                .zip(&h.potential)
                .for_each(|(a, b)| *a += b);
            hartree = h.energy;
        }
        if let Some(f) = system.interactions.xc {
            let x = evaluate_xc(f, &self.grid, density)?;
            v_hxc
                .iter_mut()
                .zip(&x.potential)
                .for_each(|(a, b)| *a += b);
            xc = x.total;
            clamped_fraction = x.clamped_fraction();
        }
        Ok(PotentialTerms {
            v_hxc,
            hartree,
            xc,
            clamped_fraction,
        })
    }

    /// `v_local + v_hxc`.
    pub fn effective(&self, terms: &PotentialTerms) -> Vec<f64> {
        self.v_local
            .iter()
            .zip(&terms.v_hxc)
            .map(|(a, b)| a + b)
            .collect()
    }
}

/// Bands per k-point used when none are requested: enough empty states for
/// smearing.
pub fn default_bands(n_electrons: f64) -> usize {
    let half = n_electrons / 2.0;
    (1.2 * half).ceil().max((half + 4.0).ceil()) as usize
}

/// Ion-ion and dispersion energies, fixed during the SCF.
fn ionic_energies(system: &System) -> Result<(f64, f64)> {
    let ewald = if system.interactions.ewald {
        ewald_energy(&system.cell, &system.ionic_charges(), true)?
    } else {
        0.0
    };
    let disp = if system.interactions.dispersion {
        grimme_d2(&system.cell, &system.d2, system.d2_cutoff)?
    } else {
        0.0
    };
    Ok((ewald, disp))
}

/// `Σ_n f_n |u_n(r)|²` for one k-point.
fn band_density(
    basis: &PlaneWaveBasis,
    fft: &FftGrid,
    vectors: &[Vec<Complex64>],
    occ: &[f64],
) -> Vec<f64> {
    let mut rho = vec![0.0; fft.len()];
    let mut work = vec![Complex64::default(); fft.len()];
    for (v, &f) in vectors.iter().zip(occ) {
        if f == 0.0 {
            continue;
        }
        scatter_backward(basis, fft, v, &mut work);
        for (r, u) in rho.iter_mut().zip(&work) {
            *r += f * u.norm_sqr();
        }
    }
    rho
}

/// Electron density of a solution, summed over k in a fixed order.
pub fn density_of(
    solution: &KsSolution,
    ctx: &KsContext,
    cell: &crate::structure::Cell,
) -> DensityGrid {
    let fft = ctx.fft();
    let parts: Vec<Vec<f64>> = solution
        .kpoints
        .par_iter()
        .map(|k| band_density(&k.basis, fft, &k.vectors, &k.occupations))
        .collect();
    let mut values = vec![0.0; fft.len()];
    for (k, p) in solution.kpoints.iter().zip(&parts) {
        let s = k.weight / ctx.grid.omega;
        values.iter_mut().zip(p).for_each(|(a, b)| *a += s * b);
    }
    DensityGrid {
        dims: ctx.grid.dims(),
        values,
        cell: cell.clone(),
    }
}

/// Diagonalises every k-point of `kmesh` in the potential `v_eff`.
fn solve_kpoints(
    ctx: &KsContext,
    setups: &[(PlaneWaveBasis, NonlocalProjectors)],
    v_eff: &[f64],
    n_bands: usize,
    diag: &DiagOptions,
    guesses: Option<&[Vec<Vec<Complex64>>]>,
) -> Result<Vec<Eigenpairs>> {
    setups
        .par_iter()
        .enumerate()
        .map(|(i, (basis, nl))| {
            let h = Hamiltonian::new(basis, ctx.fft(), v_eff, nl)?;
            let guess = guesses.map(|g| g[i].as_slice());
            diagonalize(&h, n_bands.min(basis.len()), diag, guess)
        })
        .collect()
}

/// Eigenpairs at arbitrary k-points in the potential generated by a fixed
/// density.
pub fn non_self_consistent(
    system: &System,
    density: &DensityGrid,
    ecut_wfc: f64,
    kpoints: &[Vec3],
    n_bands: usize,
    diag: &DiagOptions,
) -> Result<Vec<(PlaneWaveBasis, Eigenpairs)>> {
    let ctx = KsContext::new(system, ecut_wfc, density.dims)?;
    let terms = ctx.potential(system, &density.values)?;
    let v_eff = ctx.effective(&terms);
    let setups: Vec<_> = kpoints
        .iter()
        .map(|&k| ctx.setup_k(system, k))
        .collect::<Result<_>>()?;
    let eig = solve_kpoints(&ctx, &setups, &v_eff, n_bands, diag, None)?;
    Ok(setups.into_iter().map(|s| s.0).zip(eig).collect())
}

/// Runs the SCF cycle from the Gaussian superposition density.
pub fn scf_loop(system: &System, options: &ScfOptions) -> Result<ScfResult> {
    scf_from(system, options, None)
}

/// Runs the SCF cycle from `initial` when given.
pub fn scf_from(
    system: &System,
    options: &ScfOptions,
    initial: Option<&DensityGrid>,
) -> Result<ScfResult> {
    options.validate()?;
    system.check()?;
    let dims = match initial {
        Some(d) => d.dims,
        None => fft_grid(&system.cell, options.ecut_rho()),
    };
    let ctx = KsContext::new(system, options.ecut_wfc, dims)?;
    let smearing = options.smearing();
    let (ewald, dispersion) = ionic_energies(system)?;
    let setups: Vec<_> = options
        .kmesh
        .points
        .iter()
        .map(|&k| ctx.setup_k(system, k))
        .collect::<Result<_>>()?;
    let weights = options.kmesh.weights.clone();
    let n_bands = options
        .n_bands
        .unwrap_or_else(|| default_bands(system.n_electrons));
    let dv = ctx.grid.dv();
    let conv_thr = ry_to_ha(options.conv_thr);

    let mut n_in = match initial {
        Some(d) => {
            if d.cell.lattice() != system.cell.lattice() {
                return Err(Error::InvalidParameter(
                    "initial density belongs to another cell".into(),
                ));
            }
            d.clone()
        }
        None => initial_density(system, dims),
    };
    let mut guesses: Option<Vec<Vec<Vec<Complex64>>>> = None;
    let mut history: Vec<f64> = Vec::new();
    let mut log_lines: Vec<IterationRecord> = Vec::new();
    let mut rises = 0;

    for iteration in 1..=options.max_iter {
        let terms = ctx.potential(system, &n_in.values)?;
        let v_eff = ctx.effective(&terms);
        let eig = solve_kpoints(
            &ctx,
            &setups,
            &v_eff,
            n_bands,
            &options.diag,
            guesses.as_deref(),
        )?;
        let eigenvalues: Vec<Vec<f64>> = eig.iter().map(|e| e.values.clone()).collect();
        let mu = find_fermi(&eigenvalues, &weights, system.n_electrons, &smearing)?;
        let occupations = smearing.occupations(&eigenvalues, mu);
        let correction = smearing.entropy_term(&eigenvalues, &weights, mu);

        let kpoints: Vec<KPointSolution> = setups
            .iter()
            .zip(eig)
            .zip(occupations)
            .zip(&weights)
            .map(|((((basis, _), e), occ), &w)| KPointSolution {
                k: basis.k,
                weight: w,
                basis: basis.clone(),
                eigenvalues: e.values,
                vectors: e.vectors,
                occupations: occ,
            })
            .collect();
        let solution = KsSolution {
            kpoints,
            fermi_level: mu,
        };
        let n_out = density_of(&solution, &ctx, &system.cell);

        // direct route
        let mut kinetic = 0.0;
        let mut nonlocal = 0.0;
        let mut band_sum = 0.0;
        for (kp, (_, nl)) in solution.kpoints.iter().zip(&setups) {
            for ((v, &f), &e) in kp.vectors.iter().zip(&kp.occupations).zip(&kp.eigenvalues) {
                if f == 0.0 {
                    continue;
                }
                let t: f64 = v
                    .iter()
                    .zip(&kp.basis.kinetic)
                    .map(|(c, t)| c.norm_sqr() * t)
                    .sum();
                kinetic += kp.weight * f * t;
                band_sum += kp.weight * f * e;
                if !nl.is_empty() {
                    let vn = nl.apply(v)?;
                    let x: Complex64 = v.iter().zip(&vn).map(|(a, b)| a.conj() * b).sum();
                    nonlocal += kp.weight * f * x.re;
                }
            }
        }
        let out_terms = ctx.potential(system, &n_out.values)?;
        let local: f64 = ctx
            .v_local
            .iter()
            .zip(&n_out.values)
            .map(|(v, n)| v * n)
            .sum::<f64>()
            * dv;
        let components = EnergyComponents {
            kinetic,
            local,
            hartree: out_terms.hartree,
            xc: out_terms.xc,
            nonlocal,
            ewald,
            dispersion,
        };
        let total = components.total();
        let double_counting: f64 = terms
            .v_hxc
            .iter()
            .zip(&n_out.values)
            .map(|(v, n)| v * n)
            .sum::<f64>()
            * dv;
        let band_route =
            band_sum - double_counting + out_terms.hartree + out_terms.xc + ewald + dispersion;
        if (band_route - total).abs() > ENERGY_ROUTE_TOLERANCE {
            return Err(Error::EnergyConsistency(band_route - total));
        }

        let residual: f64 = n_out
            .values
            .iter()
            .zip(&n_in.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * dv;
        let delta = history.last().map(|e| (total - e).abs());
        if let Some(&prev) = history.last() {
            if total > prev {
                rises += 1;
            } else {
                rises = 0;
            }
        }
        history.push(total);
        let record = IterationRecord {
            iteration,
            total_energy: total,
            delta_energy: delta,
            clamped_fraction: terms.clamped_fraction,
            density_residual: residual,
            band_route_energy: band_route,
            smearing_correction: correction,
            fermi_level: mu,
        };
        log::info!("{}", record.tsv());
        log_lines.push(record);

        let converged = delta.is_some_and(|d| d < conv_thr) && residual < options.density_tol;
        if converged || iteration == options.max_iter {
            return Ok(ScfResult {
                converged,
                iterations: iteration,
                total_energy: total,
                components,
                energy_history: history,
                final_density: n_out,
                solution,
                log: log_lines,
            });
        }
        if rises >= options.divergence_window {
            return Err(Error::ScfDiverging(rises));
        }
        guesses = Some(solution.kpoints.into_iter().map(|k| k.vectors).collect());
        n_in = mix_density(&n_in, &n_out, options.mixing_beta)?;
    }
    unreachable!("max_iter >= 1 returns inside the loop")
}
