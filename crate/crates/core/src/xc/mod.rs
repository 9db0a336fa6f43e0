//! Exchange-correlation functionals on the density grid and the Hartree
//! potential.

pub mod constants;
mod functionals;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use functionals::{
    lda_exchange, pbe_correlation, pbe_correlation_sigma, pbe_enhancement, pbe_exchange,
    pbe_exchange_sigma, pw92_rs, pz_correlation, pz_correlation_rs, reduced_gradient,
    wigner_seitz_radius, GgaPoint, VACUUM_DENSITY,
};

use crate::pwbasis::{DensityGrid, SpectralGrid};
use crate::{Error, Result};

/// Largest tolerated fraction of grid points with negative density.
pub const MAX_CLAMPED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Functional {
    /// Slater exchange with Perdew-Zunger correlation.
    Pz,
    /// PBE generalised-gradient functional.
    Pbe,
}

impl FromStr for Functional {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pz" | "lda" => Ok(Functional::Pz),
            "pbe" => Ok(Functional::Pbe),
            other => Err(Error::Config(format!(
                "unsupported functional {other:?} (accepted: pz, pbe)"
            ))),
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Functional::Pz => "pz",
            Functional::Pbe => "pbe",
        })
    }
}

/// Exchange-correlation energy and potential on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct XcResult {
    /// ε_xc per electron (Hartree).
    pub energy_density: Vec<f64>,
    /// v_xc (Hartree).
    pub potential: Vec<f64>,
    /// E_xc of the cell (Hartree).
    pub total: f64,
    /// Grid points whose negative density was clamped to zero.
    pub clamped: usize,
}

impl XcResult {
    pub fn clamped_fraction(&self) -> f64 {
        self.clamped as f64 / self.potential.len().max(1) as f64
    }
}

/// Evaluates a functional on density values (electrons/Bohr³) sampled on
/// `grid`. Negative densities are clamped to zero and counted; more than
/// 1% clamped is an error.
pub fn evaluate_xc(
    functional: Functional,
    grid: &SpectralGrid,
    density: &[f64],
) -> Result<XcResult> {
    if density.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: density.len(),
        });
    }
    let clamped = density.iter().filter(|&&n| n < 0.0).count();
    let fraction = clamped as f64 / density.len().max(1) as f64;
    if fraction > MAX_CLAMPED_FRACTION {
        return Err(Error::ExcessiveClamping { fraction });
    }
    if clamped > 0 {
        log::debug!("clamped {clamped} negative density values");
    }
    let n: Vec<f64> = density.iter().map(|&x| x.max(0.0)).collect();
    let dv = grid.dv();
    let (eps, potential) = match functional {
        Functional::Pz => {
            let mut eps = Vec::with_capacity(n.len());
            let mut v = Vec::with_capacity(n.len());
            for &x in &n {
                let (ex, vx) = lda_exchange(x);
                let (ec, vc) = pz_correlation(x);
                eps.push(ex + ec);
                v.push(vx + vc);
            }
            (eps, v)
        }
        Functional::Pbe => {
            let grad = grid.gradient(&n);
            let mut eps = vec![0.0; n.len()];
            let mut v = vec![0.0; n.len()];
            let mut h = [vec![0.0; n.len()], vec![0.0; n.len()], vec![0.0; n.len()]];
            for i in 0..n.len() {
                let g = [grad[0][i], grad[1][i], grad[2][i]];
                let sigma = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
                let p = pbe_exchange_sigma(n[i], sigma) + pbe_correlation_sigma(n[i], sigma);
                eps[i] = p.eps;
                v[i] = p.de_dn;
                for a in 0..3 {
                    h[a][i] = p.de_dsigma * g[a];
                }
            }
            // v = ∂e/∂n - 2 ∇·(∂e/∂σ ∇n)
            let div = grid.divergence(&h);
            for (vi, d) in v.iter_mut().zip(div) {
                *vi -= 2.0 * d;
            }
            (eps, v)
        }
    };
    let total = n.iter().zip(&eps).map(|(a, b)| a * b).sum::<f64>() * dv;
    Ok(XcResult {
        energy_density: eps,
        potential,
        total,
        clamped,
    })
}

/// Hartree potential and energy.
#[derive(Debug, Clone, PartialEq)]
pub struct HartreeResult {
    pub potential: Vec<f64>,
    pub energy: f64,
    /// Largest imaginary part met when synthesising the potential.
    pub max_imaginary: f64,
}

/// `V_H(G) = 4π n(G)/G²` with `V_H(0) = 0`; `E_H = ½∫ n V_H`.
pub fn hartree_on(grid: &SpectralGrid, density: &[f64]) -> HartreeResult {
    let c = grid.coefficients(density);
    let mut energy = 0.0;
    let vg: Vec<Complex64> = c
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            if grid.g2[i] < 1e-12 || grid.nyquist[i] {
                Complex64::default()
            } else {
                let k = 4.0 * PI / grid.g2[i];
                energy += k * n.norm_sqr();
                n * k
            }
        })
        .collect();
    let (potential, max_imaginary) = grid.synthesize(&vg);
    HartreeResult {
        potential,
        energy: 0.5 * grid.omega * energy,
        max_imaginary,
    }
}

/// Hartree term of a density grid.
pub fn hartree(density: &DensityGrid) -> HartreeResult {
    let grid = SpectralGrid::new(&density.cell, density.dims);
    hartree_on(&grid, &density.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::{build_hexagonal_cell, Cell};
    use rand::{Rng, SeedableRng};

    /// A smooth positive random density built from a few low Fourier modes.
    fn smooth_density(grid: &SpectralGrid, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let dims = grid.dims();
        let modes: Vec<([i32; 3], f64, f64)> = (0..6)
            .map(|_| {
                (
                    [
                        rng.random_range(-2..=2),
                        rng.random_range(-2..=2),
                        rng.random_range(-2..=2),
                    ],
                    rng.random_range(0.0..0.015),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        (0..grid.len())
            .map(|idx| {
                let i = grid.fft.unflat(idx);
                let mut v = 0.1;
                for (m, amp, ph) in &modes {
                    let x: f64 = (0..3)
                        .map(|k| m[k] as f64 * i[k] as f64 / dims[k] as f64)
                        .sum();
                    v += amp * (2.0 * PI * x + ph).cos();
                }
                v
            })
            .collect()
    }

    #[test]
    fn zero_density_is_zero() {
        let cell = Cell::cubic(3.0).unwrap();
        let grid = SpectralGrid::new(&cell, [6, 6, 6]);
        for f in [Functional::Pz, Functional::Pbe] {
            let r = evaluate_xc(f, &grid, &vec![0.0; grid.len()]).unwrap();
            assert_eq!(r.total, 0.0);
            assert!(r.potential.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn functional_names() {
        assert_eq!("PBE".parse::<Functional>().unwrap(), Functional::Pbe);
        assert_eq!("pz".parse::<Functional>().unwrap(), Functional::Pz);
        assert!("hse".parse::<Functional>().is_err());
    }

    #[test]
    fn total_is_weighted_sum() {
        let cell = build_hexagonal_cell(3.89, 6.0).unwrap();
        let grid = SpectralGrid::new(&cell, [9, 9, 15]);
        let n = smooth_density(&grid, 1);
        for f in [Functional::Pz, Functional::Pbe] {
            let r = evaluate_xc(f, &grid, &n).unwrap();
            let sum: f64 = n
                .iter()
                .zip(&r.energy_density)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                * grid.dv();
            assert!((sum - r.total).abs() < 1e-10 * r.total.abs());
        }
    }

    #[test]
    fn potential_is_the_discrete_functional_derivative() {
        let cell = build_hexagonal_cell(3.89, 6.0).unwrap();
        let grid = SpectralGrid::new(&cell, [10, 10, 16]);
        let n = smooth_density(&grid, 2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for f in [Functional::Pz, Functional::Pbe] {
            let r = evaluate_xc(f, &grid, &n).unwrap();
            for _ in 0..20 {
                let j = rng.random_range(0..grid.len());
                let h = 1e-6 * n[j];
                let mut up = n.clone();
                up[j] += h;
                let mut dn = n.clone();
                dn[j] -= h;
                let eu = evaluate_xc(f, &grid, &up).unwrap().total;
                let ed = evaluate_xc(f, &grid, &dn).unwrap().total;
                let fd = (eu - ed) / (2.0 * h * grid.dv());
                assert!(
                    (fd - r.potential[j]).abs() < 1e-5 * r.potential[j].abs(),
                    "{f}: {fd} vs {}",
                    r.potential[j]
                );
            }
        }
    }

    #[test]
    fn translation_invariant() {
        let cell = build_hexagonal_cell(3.89, 6.0).unwrap();
        let grid = SpectralGrid::new(&cell, [9, 9, 15]);
        let n = smooth_density(&grid, 4);
        let dims = grid.dims();
        let rolled: Vec<f64> = (0..grid.len())
            .map(|idx| {
                let i = grid.fft.unflat(idx);
                n[grid
                    .fft
                    .flat([(i[0] + 1) % dims[0], i[1], (i[2] + 2) % dims[2]])]
            })
            .collect();
        for f in [Functional::Pz, Functional::Pbe] {
            let a = evaluate_xc(f, &grid, &n).unwrap().total;
            let b = evaluate_xc(f, &grid, &rolled).unwrap().total;
            assert!((a - b).abs() < 1e-12 * a.abs());
        }
    }

    #[test]
    fn clamping_is_counted_and_limited() {
        let cell = Cell::cubic(3.0).unwrap();
        let grid = SpectralGrid::new(&cell, [10, 10, 10]);
        let mut n = vec![0.05; grid.len()];
        n[3] = -1e-4;
        let r = evaluate_xc(Functional::Pz, &grid, &n).unwrap();
        assert_eq!(r.clamped, 1);
        for v in n.iter_mut().take(20) {
            *v = -1e-4;
        }
        assert!(matches!(
            evaluate_xc(Functional::Pbe, &grid, &n),
            Err(Error::ExcessiveClamping { .. })
        ));
    }

    #[test]
    fn hartree_of_uniform_and_single_mode() {
        let cell = build_hexagonal_cell(3.89, 8.0).unwrap();
        let dims = [9, 9, 18];
        let uniform = DensityGrid::uniform(&cell, dims, 8.0);
        let h = hartree(&uniform);
        assert!(h.energy.abs() < 1e-14);
        assert!(h.potential.iter().all(|v| v.abs() < 1e-12));

        let grid = SpectralGrid::new(&cell, dims);
        let (n0, amp) = (0.02, 0.005);
        let m = [1, -2, 1];
        let g0 = crate::linalg::row_times(&m.map(|x| x as f64), &cell.reciprocal_bohr());
        let g0sq = crate::linalg::dot(&g0, &g0);
        let values: Vec<f64> = (0..grid.len())
            .map(|idx| {
                let i = grid.fft.unflat(idx);
                let x: f64 = (0..3)
                    .map(|k| m[k] as f64 * i[k] as f64 / dims[k] as f64)
                    .sum();
                n0 + amp * (2.0 * PI * x).cos()
            })
            .collect();
        let h = hartree_on(&grid, &values);
        let expect = grid.omega * amp * amp * PI / g0sq;
        assert!((h.energy - expect).abs() < 1e-12 * expect);
        assert!(h.max_imaginary < 1e-12);
    }
}
