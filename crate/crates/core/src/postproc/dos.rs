use std::f64::consts::PI;

use crate::scf::{KsSolution, SPIN_DEGENERACY};
use crate::units::HARTREE_EV;
use crate::{Error, Result};

/// Broadening (eV) of density-of-states curves.
pub const DEFAULT_DOS_SIGMA: f64 = 0.05;

/// Normalised Gaussian of width `sigma`.
pub fn gaussian(x: f64, sigma: f64) -> f64 {
    (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt())
}

/// Evenly spaced energies from `min` to `max` inclusive.
pub fn energy_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max >= min) {
        return Err(Error::InvalidParameter(format!(
            "energy grid needs step > 0 and max >= min (got {min}, {max}, {step})"
        )));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| min + i as f64 * step).collect())
}

/// `Σ_k w_k Σ_n 2 g(E - ε_nk)` on `energies`. Eigenvalues and energies share
/// one unit, as does `sigma`.
pub fn dos(
    eigenvalues: &[Vec<f64>],
    weights: &[f64],
    sigma: f64,
    energies: &[f64],
) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "DOS broadening must be > 0, got {sigma}"
        )));
    }
    if eigenvalues.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: eigenvalues.len(),
            found: weights.len(),
        });
    }
    Ok(energies
        .iter()
        .map(|&e| {
            eigenvalues
                .iter()
                .zip(weights)
                .map(|(eps, &w)| w * eps.iter().map(|&x| gaussian(e - x, sigma)).sum::<f64>())
                .sum::<f64>()
                * SPIN_DEGENERACY
        })
        .collect())
}

/// DOS of a Kohn-Sham solution with energies in eV relative to its Fermi level.
pub fn dos_of_solution(solution: &KsSolution, sigma: f64, energies: &[f64]) -> Result<Vec<f64>> {
    let shifted: Vec<Vec<f64>> = solution
        .kpoints
        .iter()
        .map(|k| {
            k.eigenvalues
                .iter()
                .map(|e| (e - solution.fermi_level) * HARTREE_EV)
                .collect()
        })
        .collect();
    dos(&shifted, &solution.weights(), sigma, energies)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::trapezoid;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn single_level_is_one_gaussian() {
        let e = energy_grid(-1.0, 1.0, 0.01).unwrap();
        let d = dos(&[vec![0.2]], &[1.0], 0.05, &e).unwrap();
        for (x, y) in e.iter().zip(&d) {
            assert!((y - 2.0 * gaussian(x - 0.2, 0.05)).abs() < 1e-14);
        }
    }

    #[test]
    fn integral_is_twice_the_band_count() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let nk = rng.random_range(1..6);
            let nb = rng.random_range(1..8);
            let raw: Vec<f64> = (0..nk).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let eigs: Vec<Vec<f64>> = (0..nk)
                .map(|_| {
                    let mut v: Vec<f64> = (0..nb).map(|_| rng.random_range(-3.0..3.0)).collect();
                    v.sort_by(f64::total_cmp);
                    v
                })
                .collect();
            let e = energy_grid(-4.0, 4.0, 0.005).unwrap();
            let d = dos(&eigs, &w, 0.05, &e).unwrap();
            let integral = trapezoid(&e, &d);
            assert!(
                (integral / (2.0 * nb as f64) - 1.0).abs() < 1e-6,
                "{integral}"
            );
        }
    }

    #[test]
    fn symmetric_spectrum_gives_symmetric_dos() {
        let e = energy_grid(-2.0, 2.0, 0.01).unwrap();
        let d = dos(&[vec![-0.7, -0.1, 0.1, 0.7]], &[1.0], 0.05, &e).unwrap();
        let n = d.len();
        for i in 0..n {
            assert!((d[i] - d[n - 1 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_width() {
        assert!(dos(&[vec![0.0]], &[1.0], 0.0, &[0.0]).is_err());
        assert!(energy_grid(1.0, 0.0, 0.1).is_err());
    }

    proptest! {
        #[test]
        fn permutation_and_zero_weight_invariance(
            levels in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 2..5),
            rot in 0usize..5,
        ) {
            let nk = levels.len();
            let w = vec![1.0 / nk as f64; nk];
            let e = energy_grid(-3.0, 3.0, 0.05).unwrap();
            let base = dos(&levels, &w, 0.05, &e).unwrap();
            let mut l2 = levels.clone();
            let mut w2 = w.clone();
            l2.rotate_left(rot % nk);
            w2.rotate_left(rot % nk);
            l2.push(vec![0.3, 0.4, 0.5]);
            w2.push(0.0);
            let other = dos(&l2, &w2, 0.05, &e).unwrap();
            for (a, b) in base.iter().zip(&other) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
