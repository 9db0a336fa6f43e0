use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Electrons per spatial orbital.
pub const SPIN_DEGENERACY: f64 = 2.0;
/// Target accuracy of the electron count at the Fermi level.
pub const FERMI_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmearingKind {
    /// First-order Methfessel-Paxton.
    MethfesselPaxton,
    Gaussian,
    FermiDirac,
}

impl FromStr for SmearingKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m-p" | "mp" | "methfessel-paxton" => Ok(SmearingKind::MethfesselPaxton),
            "gaussian" | "gauss" => Ok(SmearingKind::Gaussian),
            "f-d" | "fd" | "fermi-dirac" => Ok(SmearingKind::FermiDirac),
            other => Err(Error::Config(format!("unknown smearing {other:?}"))),
        }
    }
}

impl fmt::Display for SmearingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SmearingKind::MethfesselPaxton => "m-p",
            SmearingKind::Gaussian => "gaussian",
            SmearingKind::FermiDirac => "f-d",
        })
    }
}

/// First-order Methfessel-Paxton occupation of `x = (ε-μ)/σ`:
/// `½ erfc(x) - x e^{-x²} / (2√π)`.
pub fn mp_occupation(x: f64) -> f64 {
    0.5 * erfc(x) - x * (-x * x).exp() / (2.0 * PI.sqrt())
}

impl SmearingKind {
    /// Occupation per spin orbital, between 0 and 1 up to the slight
    /// overshoot of Methfessel-Paxton.
    pub fn occupation(self, x: f64) -> f64 {
        match self {
            SmearingKind::MethfesselPaxton => mp_occupation(x),
            SmearingKind::Gaussian => 0.5 * erfc(x),
            SmearingKind::FermiDirac => {
                if x > 0.0 {
                    let e = (-x).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + x.exp())
                }
            }
        }
    }

    /// Per-orbital entropy-like term `s(x)` with `-TS = -σ Σ w g s(x)`.
    pub fn entropy(self, x: f64) -> f64 {
        match self {
            SmearingKind::MethfesselPaxton => {
                (1.0 - 2.0 * x * x) * (-x * x).exp() / (4.0 * PI.sqrt())
            }
            SmearingKind::Gaussian => (-x * x).exp() / (2.0 * PI.sqrt()),
            SmearingKind::FermiDirac => {
                let f = self.occupation(x);
                let mut s = 0.0;
                if f > 0.0 {
                    s -= f * f.ln();
                }
                if f < 1.0 {
                    s -= (1.0 - f) * (1.0 - f).ln();
                }
                s
            }
        }
    }
}

/// Smearing kind and width (Hartree).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Smearing {
    pub kind: SmearingKind,
    pub width: f64,
}

impl Smearing {
    fn count(&self, eigenvalues: &[Vec<f64>], weights: &[f64], mu: f64) -> f64 {
        eigenvalues
            .iter()
            .zip(weights)
            .map(|(eps, w)| {
                w * eps
                    .iter()
                    .map(|e| SPIN_DEGENERACY * self.kind.occupation((e - mu) / self.width))
                    .sum::<f64>()
            })
            .sum()
    }

    /// Occupations including the spin factor.
    pub fn occupations(&self, eigenvalues: &[Vec<f64>], mu: f64) -> Vec<Vec<f64>> {
        eigenvalues
            .iter()
            .map(|eps| {
                eps.iter()
                    .map(|e| SPIN_DEGENERACY * self.kind.occupation((e - mu) / self.width))
                    .collect()
            })
            .collect()
    }

    /// Smearing contribution `-σ S` (Hartree), reported separately.
    pub fn entropy_term(&self, eigenvalues: &[Vec<f64>], weights: &[f64], mu: f64) -> f64 {
        -self.width
            * eigenvalues
                .iter()
                .zip(weights)
                .map(|(eps, w)| {
                    w * eps
                        .iter()
                        .map(|e| SPIN_DEGENERACY * self.kind.entropy((e - mu) / self.width))
                        .sum::<f64>()
                })
                .sum::<f64>()
    }
}

/// Fermi level by bisection so that `Σ_k w_k Σ_n 2 f((ε-μ)/σ)` equals
/// `n_electrons` to 1e-10.
pub fn find_fermi(
    eigenvalues: &[Vec<f64>],
    weights: &[f64],
    n_electrons: f64,
    smearing: &Smearing,
) -> Result<f64> {
    if !(smearing.width > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "smearing width must be > 0, got {}",
            smearing.width
        )));
    }
    let bands = eigenvalues.iter().map(|e| e.len()).min().unwrap_or(0);
    let capacity: f64 = weights.iter().sum::<f64>() * SPIN_DEGENERACY * bands as f64;
    if bands == 0 || capacity < n_electrons - FERMI_TOLERANCE {
        return Err(Error::InsufficientBands {
            bands,
            electrons: n_electrons,
        });
    }
    let lo_e = eigenvalues
        .iter()
        .flatten()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let hi_e = eigenvalues
        .iter()
        .flatten()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let pad = 12.0 * smearing.width;
    let (mut lo, mut hi) = (lo_e - pad, hi_e + pad);
    if smearing.count(eigenvalues, weights, hi) < n_electrons - FERMI_TOLERANCE
        || smearing.count(eigenvalues, weights, lo) > n_electrons + FERMI_TOLERANCE
    {
        return Err(Error::InsufficientBands {
            bands,
            electrons: n_electrons,
        });
    }
    let mut mu = 0.5 * (lo + hi);
    for _ in 0..400 {
        mu = 0.5 * (lo + hi);
        let n = smearing.count(eigenvalues, weights, mu);
        if (n - n_electrons).abs() < FERMI_TOLERANCE {
            return Ok(mu);
        }
        if n < n_electrons {
            lo = mu;
        } else {
            hi = mu;
        }
        if hi - lo <= f64::EPSILON * mu.abs().max(1.0) {
            break;
        }
    }
    Ok(mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn mp_examples() {
        assert_eq!(mp_occupation(0.0), 0.5);
        assert!((mp_occupation(-40.0) - 1.0).abs() < 1e-15);
        assert!(mp_occupation(40.0).abs() < 1e-15);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x: f64 = rng.random_range(-6.0..6.0);
            assert!((mp_occupation(x) + mp_occupation(-x) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn smearing_names() {
        assert_eq!(
            "m-p".parse::<SmearingKind>().unwrap(),
            SmearingKind::MethfesselPaxton
        );
        assert_eq!(
            "gaussian".parse::<SmearingKind>().unwrap(),
            SmearingKind::Gaussian
        );
        assert_eq!(
            "f-d".parse::<SmearingKind>().unwrap(),
            SmearingKind::FermiDirac
        );
        assert!("cold".parse::<SmearingKind>().is_err());
    }

    #[test]
    fn insulating_two_level() {
        let s = Smearing {
            kind: SmearingKind::MethfesselPaxton,
            width: 0.00025,
        };
        let eig = vec![vec![-1.0, 1.0]];
        let mu = find_fermi(&eig, &[1.0], 2.0, &s).unwrap();
        assert!(mu.abs() < 1e-12);
        let occ = s.occupations(&eig, mu);
        assert!((occ[0][0] - 2.0).abs() < 1e-12 && occ[0][1].abs() < 1e-12);
    }

    #[test]
    fn symmetric_ladder_half_filled() {
        for kind in [
            SmearingKind::MethfesselPaxton,
            SmearingKind::Gaussian,
            SmearingKind::FermiDirac,
        ] {
            let s = Smearing { kind, width: 0.05 };
            let eig = vec![(0..10).map(|i| 0.3 + 0.1 * i as f64).collect::<Vec<_>>()];
            let mu = find_fermi(&eig, &[1.0], 10.0, &s).unwrap();
            assert!((mu - 0.75).abs() < 1e-9, "{kind}: {mu}");
        }
    }

    #[test]
    fn random_spectra_meet_the_count() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for trial in 0..30 {
            let nk = 1 + trial % 5;
            let eig: Vec<Vec<f64>> = (0..nk)
                .map(|_| {
                    let mut v: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
                    v.sort_by(f64::total_cmp);
                    v
                })
                .collect();
            let w = vec![1.0 / nk as f64; nk];
            let ne = rng.random_range(1.0..14.0);
            let s = Smearing {
                kind: SmearingKind::Gaussian,
                width: 0.02,
            };
            let mu = find_fermi(&eig, &w, ne, &s).unwrap();
            // independent re-summation
            let mut total = 0.0;
            for (k, eps) in eig.iter().enumerate() {
                for e in eps {
                    total += w[k] * 2.0 * 0.5 * erfc((e - mu) / 0.02);
                }
            }
            assert!((total - ne).abs() < 1e-10, "{total} vs {ne}");
        }
    }

    #[test]
    fn too_few_bands() {
        let s = Smearing {
            kind: SmearingKind::Gaussian,
            width: 0.01,
        };
        assert!(matches!(
            find_fermi(&[vec![0.0, 1.0]], &[1.0], 5.0, &s),
            Err(Error::InsufficientBands { .. })
        ));
    }
}
