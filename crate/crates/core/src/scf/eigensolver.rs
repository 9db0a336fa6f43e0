use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::hamiltonian::Hamiltonian;
use crate::{Error, Result};

/// Lowest eigenpairs of one k-point Hamiltonian, values ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagOptions {
    /// Basis sizes up to this use dense diagonalisation.
    pub dense_threshold: usize,
    /// Residual norm `‖Hψ-εψ‖` required from the iterative solver.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for DiagOptions {
    fn default() -> Self {
        DiagOptions {
            dense_threshold: 2000,
            tolerance: 1e-8,
            max_iterations: 300,
        }
    }
}

/// Lowest `n_bands` eigenpairs. Exact plane waves when the operator is
/// free, dense below the threshold, LOBPCG above it with a dense fallback.
pub fn diagonalize(
    h: &Hamiltonian,
    n_bands: usize,
    options: &DiagOptions,
    guess: Option<&[Vec<Complex64>]>,
) -> Result<Eigenpairs> {
    let n = h.len();
    if n_bands == 0 || n_bands > n {
        return Err(Error::InvalidParameter(format!(
            "n_bands = {n_bands} must be in 1..={n} (basis size)"
        )));
    }
    if let Some(v0) = h.free_shift() {
        // the basis is already sorted by kinetic energy
        let vectors = (0..n_bands)
            .map(|i| {
                let mut e = vec![Complex64::default(); n];
                e[i] = Complex64::new(1.0, 0.0);
                e
            })
            .collect();
        return Ok(Eigenpairs {
            values: h.basis.kinetic[..n_bands].iter().map(|t| t + v0).collect(),
            vectors,
        });
    }
    if n <= options.dense_threshold {
        return diagonalize_dense(h, n_bands);
    }
    match lobpcg(h, n_bands, options, guess) {
        Ok(e) => Ok(e),
        Err(Error::NotConverged(it)) => {
            log::warn!("iterative eigensolver stalled after {it} iterations; using dense diagonalisation (n = {n})");
            diagonalize_dense(h, n_bands)
        }
        Err(e) => Err(e),
    }
}

/// Full diagonalisation of the explicit matrix.
pub fn diagonalize_dense(h: &Hamiltonian, n_bands: usize) -> Result<Eigenpairs> {
    let mut m = h.dense();
    hermitize(&mut m);
    let (values, vecs) = hermitian_eigen(m);
    let n_bands = n_bands.min(values.len());
    Ok(Eigenpairs {
        values: values[..n_bands].to_vec(),
        vectors: (0..n_bands)
            .map(|j| vecs.column(j).iter().copied().collect())
            .collect(),
    })
}

fn hermitize(m: &mut DMatrix<Complex64>) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in i + 1..n {
            let a = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = a;
            m[(j, i)] = a.conj();
        }
    }
}

/// Eigenvalues ascending with matching eigenvector columns.
fn hermitian_eigen(m: DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = eig.eigenvectors.select_columns(&order);
    (values, vecs)
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthonormalises `candidates` against `fixed` (already orthonormal) and
/// each other with two Gram-Schmidt passes, dropping dependent vectors.
fn orthonormalize_against(
    fixed: &[Vec<Complex64>],
    candidates: Vec<Vec<Complex64>>,
) -> Vec<Vec<Complex64>> {
    let mut out: Vec<Vec<Complex64>> = Vec::new();
    for mut v in candidates {
        let n0 = norm(&v);
        if n0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in fixed.iter().chain(out.iter()) {
                let c = inner(q, &v);
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= c * y;
                }
            }
        }
        let n1 = norm(&v);
        if n1 > 1e-8 * n0 {
            v.iter_mut().for_each(|x| *x /= n1);
            out.push(v);
        }
    }
    out
}

/// Teter-Payne-Allan preconditioner for a residual of a band with kinetic
/// energy `ekin`.
fn precondition(kinetic: &[f64], ekin: f64, r: &[Complex64]) -> Vec<Complex64> {
    let ekin = ekin.max(1e-3);
    r.iter()
        .zip(kinetic)
        .map(|(&x, &t)| {
            let y = t / ekin;
            let p = 27.0 + 18.0 * y + 12.0 * y * y + 8.0 * y * y * y;
            x * (p / (p + 16.0 * y.powi(4)))
        })
        .collect()
}

/// Block LOBPCG for the lowest `n_bands` eigenpairs.
pub fn lobpcg(
    h: &Hamiltonian,
    n_bands: usize,
    options: &DiagOptions,
    guess: Option<&[Vec<Complex64>]>,
) -> Result<Eigenpairs> {
    let n = h.len();
    let m = (n_bands + (n_bands / 5).max(2)).min(n);
    let kinetic = &h.basis.kinetic;

    let mut start: Vec<Vec<Complex64>> = guess
        .map(|g| g.iter().filter(|v| v.len() == n).take(m).cloned().collect())
        .unwrap_or_default();
    let mut next = 0;
    while start.len() < m {
        // lowest-kinetic plane waves with a deterministic admixture
        let mut e: Vec<Complex64> = (0..n)
            .map(|j| {
                let t = (1.3 * next as f64 + 7.1 * j as f64).sin();
                Complex64::new(1e-2 * t, 1e-2 * (0.7 * t + j as f64).cos()) / (1.0 + kinetic[j])
            })
            .collect();
        e[next % n] += 1.0;
        start.push(e);
        next += 1;
    }
    let mut x = orthonormalize_against(&[], start);
    while x.len() < m {
        let extra: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new(((j * 31 + x.len() * 17) as f64).sin(), 0.0))
            .collect();
        let mut more = orthonormalize_against(&x, vec![extra]);
        if more.is_empty() {
            return Err(Error::InvalidParameter(
                "could not build a starting block".into(),
            ));
        }
        x.append(&mut more);
    }
    let mut hx: Vec<Vec<Complex64>> = x.iter().map(|v| h.apply(v)).collect::<Result<_>>()?;
    let (mut lambda, c) = rayleigh_ritz(&x, &hx, m);
    x = combine(&x, &c, 0);
    hx = combine(&hx, &c, 0);
    let mut p: Vec<Vec<Complex64>> = Vec::new();

    for _ in 0..options.max_iterations {
        let residuals: Vec<Vec<Complex64>> = (0..m)
            .map(|i| {
                hx[i]
                    .iter()
                    .zip(&x[i])
                    .map(|(a, b)| a - b * lambda[i])
                    .collect()
            })
            .collect();
        let rnorm: Vec<f64> = residuals.iter().map(|r| norm(r)).collect();
        if rnorm[..n_bands].iter().all(|&r| r < options.tolerance) {
            return Ok(Eigenpairs {
                values: lambda[..n_bands].to_vec(),
                vectors: x.into_iter().take(n_bands).collect(),
            });
        }
        let w: Vec<Vec<Complex64>> = (0..m)
            .filter(|&i| rnorm[i] >= 0.1 * options.tolerance)
            .map(|i| {
                let ekin: f64 = x[i]
                    .iter()
                    .zip(kinetic)
                    .map(|(c, t)| c.norm_sqr() * t)
                    .sum();
                precondition(kinetic, ekin, &residuals[i])
            })
            .collect();
        let mut cand = w;
        cand.extend(p.iter().cloned());
        let extra = orthonormalize_against(&x, cand);
        let hextra: Vec<Vec<Complex64>> =
            extra.iter().map(|v| h.apply(v)).collect::<Result<_>>()?;
        let mut s = x.clone();
        s.extend(extra.iter().cloned());
        let mut hs = hx.clone();
        hs.extend(hextra);
        let (vals, c) = rayleigh_ritz(&s, &hs, m);
        lambda = vals;
        x = combine(&s, &c, 0);
        hx = combine(&hs, &c, 0);
        p = combine(&s, &c, m);
    }
    Err(Error::NotConverged(options.max_iterations))
}

/// Ritz values and coefficient matrix (columns = lowest `m` Ritz vectors)
/// of an orthonormal set `s` with images `hs`.
fn rayleigh_ritz(
    s: &[Vec<Complex64>],
    hs: &[Vec<Complex64>],
    m: usize,
) -> (Vec<f64>, DMatrix<Complex64>) {
    let k = s.len();
    let mut a = DMatrix::<Complex64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            a[(i, j)] = inner(&s[i], &hs[j]);
        }
    }
    hermitize(&mut a);
    let (vals, vecs) = hermitian_eigen(a);
    (vals[..m].to_vec(), vecs.columns(0, m).into_owned())
}

/// `Σ_j v_j C_{jk}` over rows `j ≥ skip` of `c`.
fn combine(v: &[Vec<Complex64>], c: &DMatrix<Complex64>, skip: usize) -> Vec<Vec<Complex64>> {
    let n = v.first().map_or(0, |x| x.len());
    (0..c.ncols())
        .map(|col| {
            let mut out = vec![Complex64::default(); n];
            for (j, vj) in v.iter().enumerate().skip(skip) {
                let coef = c[(j, col)];
                if coef == Complex64::default() {
                    continue;
                }
                for (o, &x) in out.iter_mut().zip(vj) {
                    *o += coef * x;
                }
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseudo::NonlocalProjectors;
    use crate::pwbasis::{build_basis_on_grid, fft_grid, FftGrid};
    use crate::structure::{build_hexagonal_cell, Cell};
    use crate::units::BOHR_ANGSTROM;

    fn check_pairs(h: &Hamiltonian, e: &Eigenpairs, tol: f64) {
        for w in e.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
        for (i, v) in e.vectors.iter().enumerate() {
            let hv = h.apply(v).unwrap();
            let r: f64 = hv
                .iter()
                .zip(v)
                .map(|(a, b)| (a - b * e.values[i]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(r < tol, "band {i} residual {r}");
            for (j, u) in e.vectors.iter().enumerate() {
                let g = inner(u, v);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).norm() < 1e-10);
            }
        }
    }

    /// Slab cell with a potential varying along z only.
    fn cosine_setup(dims: [usize; 3], amplitude: f64) -> Vec<f64> {
        let fft = FftGrid::new(dims);
        (0..fft.len())
            .map(|idx| {
                let i = fft.unflat(idx);
                let z = i[2] as f64 / dims[2] as f64;
                amplitude * (2.0 * std::f64::consts::PI * z).cos()
                    + 0.3 * amplitude * (4.0 * std::f64::consts::PI * z).sin()
            })
            .collect()
    }

    #[test]
    fn free_electrons_are_exact() {
        let cell = build_hexagonal_cell(3.89, 20.0).unwrap();
        let dims = fft_grid(&cell, 20.0);
        let basis = build_basis_on_grid(&cell, [1.0 / 3.0, 1.0 / 3.0, 0.0], 5.0, dims).unwrap();
        let fft = FftGrid::new(dims);
        let v = vec![0.0; fft.len()];
        let nl = NonlocalProjectors::default();
        let h = Hamiltonian::new(&basis, &fft, &v, &nl).unwrap();
        let e = diagonalize(&h, 12, &DiagOptions::default(), None).unwrap();
        let mut want = basis.kinetic.clone();
        want.sort_by(f64::total_cmp);
        for (a, b) in e.values.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        // the K point of a hexagonal lattice has threefold degenerate shells
        assert!((e.values[0] - e.values[2]).abs() < 1e-10);
    }

    #[test]
    fn cosine_slab_dense_versus_iterative() {
        let cell = build_hexagonal_cell(2.5, 8.0 * BOHR_ANGSTROM * 1.5).unwrap();
        let dims = fft_grid(&cell, 40.0);
        let basis = build_basis_on_grid(&cell, [0.1, 0.05, 0.0], 10.0, dims).unwrap();
        let fft = FftGrid::new(dims);
        let v = cosine_setup(dims, 0.4);
        let nl = NonlocalProjectors::default();
        let h = Hamiltonian::new(&basis, &fft, &v, &nl).unwrap();
        let dense = diagonalize_dense(&h, 10).unwrap();
        check_pairs(&h, &dense, 1e-9);
        let opts = DiagOptions {
            dense_threshold: 0,
            ..DiagOptions::default()
        };
        let it = diagonalize(&h, 10, &opts, None).unwrap();
        check_pairs(&h, &it, 1e-8);
        for (a, b) in dense.values.iter().zip(&it.values) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn permuted_basis_keeps_eigenvalues() {
        let cell = build_hexagonal_cell(2.5, 6.0).unwrap();
        let dims = fft_grid(&cell, 32.0);
        let basis = build_basis_on_grid(&cell, [0.2, 0.1, 0.0], 8.0, dims).unwrap();
        let fft = FftGrid::new(dims);
        let v = cosine_setup(dims, 0.7);
        let nl = NonlocalProjectors::default();
        let h = Hamiltonian::new(&basis, &fft, &v, &nl).unwrap();
        let a = diagonalize_dense(&h, 8).unwrap();
        let perm: Vec<usize> = (0..basis.len()).rev().collect();
        let pb = basis.permuted(&perm);
        let hp = Hamiltonian::new(&pb, &fft, &v, &nl).unwrap();
        let b = diagonalize_dense(&hp, 8).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_band_count() {
        let cell = Cell::cubic(2.0).unwrap();
        let dims = [8, 8, 8];
        let basis = build_basis_on_grid(&cell, [0.0; 3], 4.0, dims).unwrap();
        let fft = FftGrid::new(dims);
        let v = vec![0.1; fft.len()];
        let nl = NonlocalProjectors::default();
        let h = Hamiltonian::new(&basis, &fft, &v, &nl).unwrap();
        assert!(diagonalize(&h, basis.len() + 1, &DiagOptions::default(), None).is_err());
    }
}
