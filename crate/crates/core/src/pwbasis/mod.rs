//! Plane-wave basis sets, FFT grids and the dual-space representation.
//!
//! Conventions: a Bloch state is `ψ(r) = Ω^{-1/2} Σ_G c_G e^{i(k+G)·r}` with
//! `Σ|c_G|² = 1`. [`to_realspace`] returns the periodic part sampled on the
//! grid *without* the `Ω^{-1/2}` factor, `u(r_j) = Σ_G c_G e^{iG·r_j}`, and
//! [`to_reciprocal`] inverts it with `c_G = N⁻¹ Σ_j u(r_j) e^{-iG·r_j}`.
//! Parseval then reads `Σ_j |u(r_j)|² = N Σ_G |c_G|²`.

mod cube;
mod fft;
mod spectral;

pub use cube::{read_cube, write_cube, CubeData};
pub use fft::{good_fft_size, FftGrid};
pub use spectral::SpectralGrid;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Vec3};
use crate::structure::Cell;
use crate::units::ANGSTROM_BOHR;

/// Plane waves with `½|k+G|² ≤ ecut_wfc/2` (Hartree) at one k-point.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneWaveBasis {
    /// Fractional k.
    pub k: Vec3,
    /// Cartesian k in Bohr⁻¹.
    pub k_cart: Vec3,
    pub miller: Vec<[i32; 3]>,
    /// Cartesian `k+G` in Bohr⁻¹.
    pub kpg: Vec<Vec3>,
    /// `½|k+G|²` in Hartree.
    pub kinetic: Vec<f64>,
    /// Wavefunction cutoff in Ry.
    pub ecut_wfc: f64,
    pub fft_dims: [usize; 3],
    grid_index: Vec<usize>,
}

fn max_miller(cell: &Cell, gmax: f64) -> [i32; 3] {
    let a = cell.lattice_bohr();
    [0, 1, 2]
        .map(|i| (gmax * linalg::norm(&a[i]) / (2.0 * std::f64::consts::PI) + 1e-9).floor() as i32)
}

/// FFT dimensions able to hold every G with `|G|² ≤ ecut_rho` (Ry) without
/// aliasing, rounded up to 2,3,5-smooth sizes.
pub fn fft_grid(cell: &Cell, ecut_rho: f64) -> [usize; 3] {
    let m = max_miller(cell, ecut_rho.max(0.0).sqrt());
    m.map(|mi| good_fft_size(2 * mi as usize + 1))
}

/// Returns `false` (and logs a warning) when `ecut_rho < 4 ecut_wfc`, where the
/// density grid can alias products of wavefunctions.
pub fn check_cutoff_ratio(ecut_wfc: f64, ecut_rho: f64) -> bool {
    if ecut_rho < 4.0 * ecut_wfc {
        log::warn!(
            "ecutrho = {ecut_rho} Ry is below 4 x ecutwfc = {} Ry; the density will alias",
            4.0 * ecut_wfc
        );
        false
    } else {
        true
    }
}

/// Basis at fractional `k` with cutoff `ecut_wfc` (Ry) on the default grid
/// for `ecut_rho = 4 ecut_wfc`.
pub fn build_basis(cell: &Cell, k: Vec3, ecut_wfc: f64) -> Result<PlaneWaveBasis> {
    let dims = fft_grid(cell, 4.0 * ecut_wfc);
    build_basis_on_grid(cell, k, ecut_wfc, dims)
}

/// Basis on an explicit FFT grid. Ordering is by kinetic energy, ties broken
/// by the lexicographic Miller triple.
pub fn build_basis_on_grid(
    cell: &Cell,
    k: Vec3,
    ecut_wfc: f64,
    fft_dims: [usize; 3],
) -> Result<PlaneWaveBasis> {
    if !(ecut_wfc > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ecut_wfc must be > 0, got {ecut_wfc}"
        )));
    }
    let b = cell.reciprocal_bohr();
    let k_cart = linalg::row_times(&k, &b);
    let kmax = ecut_wfc.sqrt() + linalg::norm(&k_cart);
    let m = max_miller(cell, kmax);
    let limit = 0.5 * ecut_wfc; // Hartree

    let mut entries: Vec<(f64, [i32; 3], Vec3)> = Vec::new();
    for m0 in -m[0] - 1..=m[0] + 1 {
        for m1 in -m[1] - 1..=m[1] + 1 {
            for m2 in -m[2] - 1..=m[2] + 1 {
                let mf = [m0 as f64, m1 as f64, m2 as f64];
                let q = linalg::add(&k_cart, &linalg::row_times(&mf, &b));
                let t = 0.5 * linalg::dot(&q, &q);
                if t <= limit {
                    entries.push((t, [m0, m1, m2], q));
                }
            }
        }
    }
    entries.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

    for (i, &n) in fft_dims.iter().enumerate() {
        let need = entries
            .iter()
            .map(|e| e.1[i].unsigned_abs())
            .max()
            .unwrap_or(0) as usize;
        if n < 2 * need + 1 {
            return Err(Error::InvalidParameter(format!(
                "FFT dimension {n} on axis {i} cannot hold Miller index {need}"
            )));
        }
    }
    let grid = FftGrid::new(fft_dims);
    let grid_index = entries.iter().map(|e| grid.miller_index(e.1)).collect();
    Ok(PlaneWaveBasis {
        k,
        k_cart,
        miller: entries.iter().map(|e| e.1).collect(),
        kpg: entries.iter().map(|e| e.2).collect(),
        kinetic: entries.iter().map(|e| e.0).collect(),
        ecut_wfc,
        fft_dims,
        grid_index,
    })
}

impl PlaneWaveBasis {
    pub fn len(&self) -> usize {
        self.miller.len()
    }

    pub fn is_empty(&self) -> bool {
        self.miller.is_empty()
    }

    /// Flat FFT-grid index of each basis vector.
    pub fn grid_index(&self) -> &[usize] {
        &self.grid_index
    }

    /// The same plane waves in a different order: entry `i` of the result is
    /// entry `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> PlaneWaveBasis {
        assert_eq!(perm.len(), self.len());
        PlaneWaveBasis {
            k: self.k,
            k_cart: self.k_cart,
            miller: perm.iter().map(|&i| self.miller[i]).collect(),
            kpg: perm.iter().map(|&i| self.kpg[i]).collect(),
            kinetic: perm.iter().map(|&i| self.kinetic[i]).collect(),
            ecut_wfc: self.ecut_wfc,
            fft_dims: self.fft_dims,
            grid_index: perm.iter().map(|&i| self.grid_index[i]).collect(),
        }
    }

    fn check(&self, grid: &FftGrid, n: usize) -> Result<()> {
        if grid.dims() != self.fft_dims {
            return Err(Error::InvalidParameter(format!(
                "grid {:?} does not match basis grid {:?}",
                grid.dims(),
                self.fft_dims
            )));
        }
        if n != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: n,
            });
        }
        Ok(())
    }
}

/// Periodic part `u(r_j) = Σ_G c_G e^{iG·r_j}` on the grid.
pub fn to_realspace(
    basis: &PlaneWaveBasis,
    grid: &FftGrid,
    coefficients: &[Complex64],
) -> Result<Vec<Complex64>> {
    basis.check(grid, coefficients.len())?;
    let mut data = vec![Complex64::default(); grid.len()];
    scatter_backward(basis, grid, coefficients, &mut data);
    Ok(data)
}

/// Coefficients `c_G = N⁻¹ Σ_j u(r_j) e^{-iG·r_j}` for the basis vectors.
pub fn to_reciprocal(
    basis: &PlaneWaveBasis,
    grid: &FftGrid,
    field: &[Complex64],
) -> Result<Vec<Complex64>> {
    if field.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: field.len(),
        });
    }
    basis.check(grid, basis.len())?;
    let mut data = field.to_vec();
    Ok(forward_gather(basis, grid, &mut data))
}

pub(crate) fn scatter_backward(
    basis: &PlaneWaveBasis,
    grid: &FftGrid,
    coefficients: &[Complex64],
    data: &mut [Complex64],
) {
    data.iter_mut().for_each(|x| *x = Complex64::default());
    for (&idx, &c) in basis.grid_index.iter().zip(coefficients) {
        data[idx] = c;
    }
    grid.backward(data);
}

pub(crate) fn forward_gather(
    basis: &PlaneWaveBasis,
    grid: &FftGrid,
    data: &mut [Complex64],
) -> Vec<Complex64> {
    grid.forward(data);
    let s = 1.0 / grid.len() as f64;
    basis.grid_index.iter().map(|&i| data[i] * s).collect()
}

/// `S(G) = Σ_atoms e^{-iG·τ}` with `G` in Å⁻¹ and positions in Å.
pub fn structure_factor(cell: &Cell, g: Vec3) -> Complex64 {
    cell.positions()
        .iter()
        .map(|tau| Complex64::from_polar(1.0, -linalg::dot(&g, tau)))
        .sum()
}

/// Structure factor restricted to the atoms of one species, G in Bohr⁻¹.
pub(crate) fn species_structure_factor_bohr(cell: &Cell, species: &str, g: &Vec3) -> Complex64 {
    cell.species()
        .iter()
        .zip(cell.positions())
        .filter(|(s, _)| s.as_str() == species)
        .map(|(_, tau)| {
            let t = tau.map(|x| x * ANGSTROM_BOHR);
            Complex64::from_polar(1.0, -linalg::dot(g, &t))
        })
        .sum()
}

/// A real scalar field (electrons/Bohr³ for densities) on an FFT grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub dims: [usize; 3],
    pub values: Vec<f64>,
    pub cell: Cell,
}

impl DensityGrid {
    pub fn zeros(cell: &Cell, dims: [usize; 3]) -> Self {
        DensityGrid {
            dims,
            values: vec![0.0; dims[0] * dims[1] * dims[2]],
            cell: cell.clone(),
        }
    }

    pub fn uniform(cell: &Cell, dims: [usize; 3], electrons: f64) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        DensityGrid {
            dims,
            values: vec![electrons / cell.volume_bohr3(); n],
            cell: cell.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Volume element Ω/N in Bohr³.
    pub fn dv(&self) -> f64 {
        self.cell.volume_bohr3() / self.values.len() as f64
    }

    /// `∫ n d³r` over the cell.
    pub fn integrate(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dv()
    }

    pub fn same_grid(&self, other: &DensityGrid) -> bool {
        self.dims == other.dims && self.cell.lattice() == other.cell.lattice()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::{build_heterobilayer, build_hexagonal_cell, Layer, StackingPattern};
    use crate::units::BOHR_ANGSTROM;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn cubic_bohr(a_bohr: f64) -> Cell {
        Cell::cubic(a_bohr * BOHR_ANGSTROM).unwrap()
    }

    /// Brute-force count of integer triples with |G|²/2 ≤ limit for a cubic
    /// cell with |b| = 1.
    fn brute_count(limit_ha: f64) -> usize {
        let mut n = 0;
        for i in -5i32..=5 {
            for j in -5i32..=5 {
                for k in -5i32..=5 {
                    if 0.5 * ((i * i + j * j + k * k) as f64) <= limit_ha {
                        n += 1;
                    }
                }
            }
        }
        n
    }

    #[test]
    fn cutoff_floor_keeps_only_g0() {
        let cell = build_hexagonal_cell(3.89, 20.0).unwrap();
        let b = build_basis(&cell, [0.0; 3], 1e-3).unwrap();
        assert_eq!(b.miller, vec![[0, 0, 0]]);
    }

    #[test]
    fn cubic_enumeration() {
        let cell = cubic_bohr(2.0 * PI);
        // 1.5 Ry = 0.75 Ha: {0, ±x, ±y, ±z}
        let b = build_basis(&cell, [0.0; 3], 1.5).unwrap();
        assert_eq!(b.len(), brute_count(0.75));
        assert_eq!(b.len(), 7);
        let b = build_basis(&cell, [0.0; 3], 4.5).unwrap();
        assert_eq!(b.len(), brute_count(2.25));
        assert_eq!(b.len(), 33);
    }

    #[test]
    fn basis_size_monotone_and_sorted() {
        let cell = build_hexagonal_cell(3.89, 10.0).unwrap();
        let mut last = 0;
        for e in [2.0, 4.0, 6.0, 8.0, 12.0] {
            let b = build_basis(&cell, [0.1, 0.2, 0.0], e).unwrap();
            assert!(b.len() >= last);
            assert!(b.kinetic.windows(2).all(|w| w[0] <= w[1]));
            assert!(b.kinetic.iter().all(|&t| t <= 0.5 * e));
            last = b.len();
        }
    }

    #[test]
    fn time_reversal_of_index_set() {
        let cell = build_hexagonal_cell(3.89, 10.0).unwrap();
        let k = [0.2, 0.1, 0.0];
        let plus = build_basis(&cell, k, 6.0).unwrap();
        let minus = build_basis(&cell, k.map(|x| -x), 6.0).unwrap();
        assert_eq!(plus.len(), minus.len());
        let mut a: Vec<_> = plus.miller.iter().map(|m| m.map(|x| -x)).collect();
        let mut b = minus.miller.clone();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn deck_grid_and_ratio() {
        let cell = build_hexagonal_cell(3.89, 20.0).unwrap();
        let dims = fft_grid(&cell, 120.0);
        // max Miller: sqrt(120) |a_i| / 2π, a = 7.351 Bohr, c = 37.79 Bohr
        assert_eq!(dims, [25, 25, 135]);
        assert!(check_cutoff_ratio(30.0, 120.0));
        assert!(!check_cutoff_ratio(30.0, 100.0));
        let bigger = fft_grid(&cell, 240.0);
        assert!((0..3).all(|i| bigger[i] >= dims[i]));
    }

    #[test]
    fn dc_mode_is_constant() {
        let cell = build_hexagonal_cell(3.89, 8.0).unwrap();
        let b = build_basis(&cell, [0.0; 3], 4.0).unwrap();
        let grid = FftGrid::new(b.fft_dims);
        let mut c = vec![Complex64::default(); b.len()];
        c[0] = Complex64::new(0.3, -0.4);
        let f = to_realspace(&b, &grid, &c).unwrap();
        assert!(f.iter().all(|z| (z - c[0]).norm() < 1e-14));
    }

    #[test]
    fn round_trip_against_direct_sum() {
        let cell = cubic_bohr(2.0 * PI);
        let b = build_basis_on_grid(&cell, [0.0; 3], 1.5, [4, 4, 4]).unwrap();
        let grid = FftGrid::new([4, 4, 4]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let c: Vec<Complex64> = (0..b.len())
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let field = to_realspace(&b, &grid, &c).unwrap();
        // direct synthesis on the 4x4x4 grid
        for flat in 0..grid.len() {
            let r = grid.unflat(flat);
            let direct: Complex64 = b
                .miller
                .iter()
                .zip(&c)
                .map(|(m, cg)| {
                    let ph =
                        2.0 * PI * (0..3).map(|a| m[a] as f64 * r[a] as f64 / 4.0).sum::<f64>();
                    cg * Complex64::from_polar(1.0, ph)
                })
                .sum();
            assert!((direct - field[flat]).norm() < 1e-12);
        }
        let back = to_reciprocal(&b, &grid, &field).unwrap();
        for (x, y) in back.iter().zip(&c) {
            assert!((x - y).norm() < 1e-12 * y.norm().max(1.0));
        }
    }

    #[test]
    fn dimension_mismatch() {
        let cell = cubic_bohr(2.0 * PI);
        let b = build_basis(&cell, [0.0; 3], 1.5).unwrap();
        let grid = FftGrid::new(b.fft_dims);
        assert!(to_realspace(&b, &grid, &[Complex64::default(); 3]).is_err());
        assert!(to_reciprocal(&b, &grid, &[Complex64::default(); 3]).is_err());
    }

    #[test]
    fn structure_factor_cases() {
        let ge = Layer::honeycomb(3.89, ["Ge", "Ge"], 0.38).unwrap();
        let gap = Layer::honeycomb(3.89, ["Ga", "P"], 0.38).unwrap();
        let cell = build_heterobilayer(&ge, &gap, StackingPattern::I, 3.70, 20.0).unwrap();
        assert!((structure_factor(&cell, [0.0; 3]) - Complex64::new(4.0, 0.0)).norm() < 1e-15);

        let mut single = Cell::cubic(3.0).unwrap();
        single.push_atom("H", [0.0; 3]).unwrap();
        assert!((structure_factor(&single, [0.7, -1.3, 2.1]) - 1.0).norm() < 1e-15);

        // Independent sum over the four deck positions.
        let deck = [
            [0.0, 0.0, 0.0],
            [0.0, 2.245892547, 0.38],
            [0.0, 0.0, 3.70],
            [0.0, 2.245892547, 4.08],
        ];
        let g: [f64; 3] = [0.41, -0.93, 0.27];
        let (mut re, mut im) = (0.0, 0.0);
        for p in deck {
            let ph = g[0] * p[0] + g[1] * p[1] + g[2] * p[2];
            re += ph.cos();
            im -= ph.sin();
        }
        let s = structure_factor(&cell, g);
        assert!((s.re - re).abs() < 1e-8 && (s.im - im).abs() < 1e-8);
    }

    #[test]
    fn density_grid_integrates() {
        let cell = build_hexagonal_cell(3.89, 10.0).unwrap();
        let d = DensityGrid::uniform(&cell, [6, 6, 12], 8.0);
        assert!((d.integrate() - 8.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn parseval(seed in 0u64..1000) {
            let cell = build_hexagonal_cell(3.0, 6.0).unwrap();
            let b = build_basis(&cell, [0.25, -0.25, 0.0], 5.0).unwrap();
            let grid = FftGrid::new(b.fft_dims);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let c: Vec<Complex64> = (0..b.len())
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let f = to_realspace(&b, &grid, &c).unwrap();
            let lhs: f64 = f.iter().map(|z| z.norm_sqr()).sum();
            let rhs: f64 = c.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.len() as f64;
            prop_assert!((lhs - rhs).abs() < 1e-10 * rhs);
            let back = to_reciprocal(&b, &grid, &f).unwrap();
            for (x, y) in back.iter().zip(&c) {
                prop_assert!((x - y).norm() < 1e-12);
            }
        }
    }
}
