//! Ion-ion energy by Ewald summation.

use std::f64::consts::PI;

use libm::erfc;

use crate::linalg::{self, Mat3, Vec3};
use crate::structure::Cell;
use crate::{Error, Result};

// erfc(6.5) and exp(-46) are both below 1e-19
const REAL_SPACE_RANGE: f64 = 6.5;
const RECIPROCAL_RANGE: f64 = 13.6;

/// Splitting parameter (Bohr⁻¹) balancing the real and reciprocal sums.
pub fn auto_eta(cell: &Cell) -> f64 {
    let n = cell.n_atoms().max(1) as f64;
    1.733 * (n / cell.volume_bohr3()).cbrt()
}

/// Ewald energy (Hartree) of point charges at the atom positions of `cell`.
/// A non-neutral set needs `background = true`, which adds the uniform
/// compensating charge.
pub fn ewald_energy(cell: &Cell, charges: &[f64], background: bool) -> Result<f64> {
    ewald_energy_with_eta(cell, charges, background, auto_eta(cell))
}

pub fn ewald_energy_with_eta(
    cell: &Cell,
    charges: &[f64],
    background: bool,
    eta: f64,
) -> Result<f64> {
    if charges.len() != cell.n_atoms() {
        return Err(Error::DimensionMismatch {
            expected: cell.n_atoms(),
            found: charges.len(),
        });
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Ewald eta must be > 0, got {eta}"
        )));
    }
    let total: f64 = charges.iter().sum();
    if total.abs() > 1e-10 && !background {
        return Err(Error::ChargedCell(total));
    }
    if charges.is_empty() {
        return Ok(0.0);
    }
    let a = cell.lattice_bohr();
    let b = cell.reciprocal_bohr();
    let tau = cell.positions_bohr();
    let omega = cell.volume_bohr3();

    let real = real_space(&a, &b, &tau, charges, eta);
    let recip = reciprocal_space(&a, &b, &tau, charges, eta, omega);
    let self_term = -eta / PI.sqrt() * charges.iter().map(|q| q * q).sum::<f64>();
    let bg = -PI * total * total / (2.0 * omega * eta * eta);
    Ok(real + recip + self_term + bg)
}

/// Image counts reaching distance `r` from any point of the cell.
fn image_range(b: &Mat3, r: f64) -> [i64; 3] {
    [0, 1, 2].map(|i| (r * linalg::norm(&b[i]) / (2.0 * PI)).ceil() as i64 + 1)
}

fn real_space(a: &Mat3, b: &Mat3, tau: &[Vec3], q: &[f64], eta: f64) -> f64 {
    let rc = REAL_SPACE_RANGE / eta;
    let n = image_range(b, rc);
    let mut sum = 0.0;
    for i in 0..tau.len() {
        for j in 0..tau.len() {
            let d = linalg::sub(&tau[i], &tau[j]);
            let mut pair = 0.0;
            for n0 in -n[0]..=n[0] {
                for n1 in -n[1]..=n[1] {
                    for n2 in -n[2]..=n[2] {
                        let l = linalg::row_times(&[n0 as f64, n1 as f64, n2 as f64], a);
                        let r = linalg::norm(&linalg::add(&d, &l));
                        if r > 1e-12 && r < rc {
                            pair += erfc(eta * r) / r;
                        }
                    }
                }
            }
            sum += q[i] * q[j] * pair;
        }
    }
    0.5 * sum
}

fn reciprocal_space(a: &Mat3, b: &Mat3, tau: &[Vec3], q: &[f64], eta: f64, omega: f64) -> f64 {
    let gc = RECIPROCAL_RANGE * eta;
    let m = [0, 1, 2].map(|i| (gc * linalg::norm(&a[i]) / (2.0 * PI)).ceil() as i64);
    let mut sum = 0.0;
    for m0 in -m[0]..=m[0] {
        for m1 in -m[1]..=m[1] {
            for m2 in -m[2]..=m[2] {
                if m0 == 0 && m1 == 0 && m2 == 0 {
                    continue;
                }
                let g = linalg::row_times(&[m0 as f64, m1 as f64, m2 as f64], b);
                let g2 = linalg::dot(&g, &g);
                if g2 > gc * gc {
                    continue;
                }
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &qi) in tau.iter().zip(q) {
                    let ph = linalg::dot(&g, t);
                    re += qi * ph.cos();
                    im += qi * ph.sin();
                }
                sum += (-g2 / (4.0 * eta * eta)).exp() / g2 * (re * re + im * im);
            }
        }
    }
    2.0 * PI / omega * sum
}
