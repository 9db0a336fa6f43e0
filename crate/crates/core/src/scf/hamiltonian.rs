use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::pseudo::NonlocalProjectors;
use crate::pwbasis::{forward_gather, scatter_backward, FftGrid, PlaneWaveBasis};
use crate::{Error, Result};

/// Kohn-Sham operator at one k-point: kinetic diagonal, local potential
/// applied on the FFT grid and the separable nonlocal part.
#[derive(Debug, Clone, Copy)]
pub struct Hamiltonian<'a> {
    pub basis: &'a PlaneWaveBasis,
    pub fft: &'a FftGrid,
    pub v_eff: &'a [f64],
    pub nonlocal: &'a NonlocalProjectors,
}

impl<'a> Hamiltonian<'a> {
    pub fn new(
        basis: &'a PlaneWaveBasis,
        fft: &'a FftGrid,
        v_eff: &'a [f64],
        nonlocal: &'a NonlocalProjectors,
    ) -> Result<Self> {
        if fft.dims() != basis.fft_dims {
            return Err(Error::InvalidParameter(format!(
                "grid {:?} does not match basis grid {:?}",
                fft.dims(),
                basis.fft_dims
            )));
        }
        if v_eff.len() != fft.len() {
            return Err(Error::DimensionMismatch {
                expected: fft.len(),
                found: v_eff.len(),
            });
        }
        if let Some(p) = nonlocal.vectors.iter().find(|p| p.len() != basis.len()) {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: p.len(),
            });
        }
        Ok(Hamiltonian {
            basis,
            fft,
            v_eff,
            nonlocal,
        })
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Constant potential value when `v_eff` is uniform and there are no
    /// projectors, in which case plane waves are exact eigenvectors.
    pub fn free_shift(&self) -> Option<f64> {
        if !self.nonlocal.is_empty() {
            return None;
        }
        let v0 = self.v_eff.first().copied().unwrap_or(0.0);
        self.v_eff.iter().all(|&v| v == v0).then_some(v0)
    }

    pub fn apply(&self, psi: &[Complex64]) -> Result<Vec<Complex64>> {
        if psi.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: psi.len(),
            });
        }
        let mut out: Vec<Complex64> = if self.free_shift() == Some(0.0) {
            vec![Complex64::default(); psi.len()]
        } else {
            let mut data = vec![Complex64::default(); self.fft.len()];
            scatter_backward(self.basis, self.fft, psi, &mut data);
            for (d, &v) in data.iter_mut().zip(self.v_eff) {
                *d *= v;
            }
            forward_gather(self.basis, self.fft, &mut data)
        };
        for ((o, &c), &t) in out.iter_mut().zip(psi).zip(&self.basis.kinetic) {
            *o += c * t;
        }
        if !self.nonlocal.is_empty() {
            for (o, x) in out.iter_mut().zip(self.nonlocal.apply(psi)?) {
                *o += x;
            }
        }
        Ok(out)
    }

    /// Explicit matrix `H_{GG'}`. The local part uses the grid coefficients
    /// of `v_eff` at `G-G'` folded onto the grid, which is exactly the
    /// convolution performed by [`Self::apply`].
    pub fn dense(&self) -> DMatrix<Complex64> {
        let n = self.len();
        let vg = self.fft.coefficients_of_real(self.v_eff);
        let mut h = vec![Complex64::default(); n * n];
        for i in 0..n {
            let mi = self.basis.miller[i];
            for j in 0..n {
                let mj = self.basis.miller[j];
                let d = [mi[0] - mj[0], mi[1] - mj[1], mi[2] - mj[2]];
                h[i * n + j] = vg[self.fft.miller_index(d)];
            }
            h[i * n + i] += self.basis.kinetic[i];
        }
        self.nonlocal.add_to_dense(n, &mut h);
        DMatrix::from_row_slice(n, n, &h)
    }
}

/// `Hψ` for coefficients `psi` on `basis`.
pub fn apply_hamiltonian(
    basis: &PlaneWaveBasis,
    fft: &FftGrid,
    v_eff: &[f64],
    nonlocal: &NonlocalProjectors,
    psi: &[Complex64],
) -> Result<Vec<Complex64>> {
    Hamiltonian::new(basis, fft, v_eff, nonlocal)?.apply(psi)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::pseudo::{ProjectorTables, Pseudopotential};
    use crate::pwbasis::{build_basis_on_grid, fft_grid};
    use crate::structure::{build_hexagonal_cell, Cell};
    use rand::{Rng, SeedableRng};
    use std::collections::BTreeMap;

    pub(crate) fn random_vec(rng: &mut impl Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    }

    fn random_potential(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-0.5..0.5)).collect()
    }

    fn pseudo_set() -> BTreeMap<String, Pseudopotential> {
        let ga = Pseudopotential::erf_screened("Ga", 3.0, 1.0)
            .unwrap()
            .with_gaussian_projector(0, 0.55, 0.8)
            .unwrap()
            .with_gaussian_projector(1, 0.5, -0.3)
            .unwrap();
        BTreeMap::from([("Ga".to_string(), ga)])
    }

    #[test]
    fn free_particle_is_diagonal() {
        let cell = build_hexagonal_cell(3.89, 20.0).unwrap();
        let dims = fft_grid(&cell, 8.0);
        let basis = build_basis_on_grid(&cell, [0.1, 0.2, 0.0], 2.0, dims).unwrap();
        let fft = FftGrid::new(dims);
        let v = vec![0.0; fft.len()];
        let nl = NonlocalProjectors::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let psi = random_vec(&mut rng, basis.len());
        let h = apply_hamiltonian(&basis, &fft, &v, &nl, &psi).unwrap();
        for i in 0..basis.len() {
            assert!((h[i] - psi[i] * basis.kinetic[i]).norm() < 1e-15);
        }
        assert!(apply_hamiltonian(&basis, &fft, &v, &nl, &psi[1..]).is_err());
    }

    #[test]
    fn tiny_basis_matches_column_oracle() {
        let mut cell = Cell::cubic(2.0).unwrap();
        cell.push_atom_with("Ga", [0.3, 0.2, 0.1], 3.0, None)
            .unwrap();
        let ps = pseudo_set();
        let dims = [8, 8, 8];
        let basis = build_basis_on_grid(&cell, [0.1, 0.0, 0.0], 4.5, dims).unwrap();
        assert!(basis.len() <= 8, "{}", basis.len());
        let fft = FftGrid::new(dims);
        let tables = ProjectorTables::new(&ps, 20.0);
        let nl = NonlocalProjectors::build(&cell, &ps, &tables, &basis).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let v = random_potential(&mut rng, fft.len());
        let h = Hamiltonian::new(&basis, &fft, &v, &nl).unwrap();
        let n = basis.len();
        // oracle: columns from H applied to unit vectors
        let mut cols = Vec::new();
        for j in 0..n {
            let mut e = vec![Complex64::default(); n];
            e[j] = Complex64::new(1.0, 0.0);
            cols.push(h.apply(&e).unwrap());
        }
        let dense = h.dense();
        let psi = random_vec(&mut rng, n);
        let hpsi = h.apply(&psi).unwrap();
        for i in 0..n {
            let oracle: Complex64 = (0..n).map(|j| cols[j][i] * psi[j]).sum();
            assert!((hpsi[i] - oracle).norm() < 1e-12);
            for j in 0..n {
                assert!((dense[(i, j)] - cols[j][i]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn hermitian_with_random_potential() {
        let mut cell = build_hexagonal_cell(3.89, 10.0).unwrap();
        cell.push_atom_with("Ga", [0.0, 0.0, 1.0], 3.0, None)
            .unwrap();
        cell.push_atom_with("Ga", [0.0, 2.245892547, 1.4], 3.0, None)
            .unwrap();
        let ps = pseudo_set();
        let dims = fft_grid(&cell, 24.0);
        let basis = build_basis_on_grid(&cell, [0.3, 0.1, 0.0], 6.0, dims).unwrap();
        let fft = FftGrid::new(dims);
        let tables = ProjectorTables::new(&ps, 10.0);
        let nl = NonlocalProjectors::build(&cell, &ps, &tables, &basis).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let v = random_potential(&mut rng, fft.len());
        let h = Hamiltonian::new(&basis, &fft, &v, &nl).unwrap();
        for _ in 0..5 {
            let phi = random_vec(&mut rng, basis.len());
            let psi = random_vec(&mut rng, basis.len());
            let a = dot(&phi, &h.apply(&psi).unwrap());
            let b = dot(&h.apply(&phi).unwrap(), &psi);
            assert!((a - b).norm() < 1e-10 * a.norm().max(1.0));
        }
        // linearity
        let x = random_vec(&mut rng, basis.len());
        let y = random_vec(&mut rng, basis.len());
        let s = Complex64::new(0.3, -1.2);
        let lhs = h
            .apply(&x.iter().zip(&y).map(|(a, b)| a + s * b).collect::<Vec<_>>())
            .unwrap();
        let hx = h.apply(&x).unwrap();
        let hy = h.apply(&y).unwrap();
        for i in 0..basis.len() {
            assert!((lhs[i] - hx[i] - s * hy[i]).norm() < 1e-11);
        }
    }
}
