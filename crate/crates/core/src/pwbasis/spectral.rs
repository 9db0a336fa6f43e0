use num_complex::Complex64;

use super::FftGrid;
use crate::linalg::Vec3;
use crate::structure::Cell;

/// An FFT grid bound to a cell, with the Cartesian G vector (Bohr⁻¹) of
/// every grid point. Components on the Nyquist planes of even axes have no
/// partner of opposite sign; spectral derivatives and the Coulomb kernel
/// zero them so that real fields stay real.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    pub fft: FftGrid,
    pub g: Vec<Vec3>,
    pub g2: Vec<f64>,
    pub nyquist: Vec<bool>,
    pub omega: f64,
}

impl SpectralGrid {
    pub fn new(cell: &Cell, dims: [usize; 3]) -> Self {
        let fft = FftGrid::new(dims);
        let (g, nyquist) = fft.g_vectors(&cell.reciprocal_bohr());
        let g2 = g
            .iter()
            .map(|v| v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
            .collect();
        SpectralGrid {
            fft,
            g,
            g2,
            nyquist,
            omega: cell.volume_bohr3(),
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.fft.dims()
    }

    pub fn len(&self) -> usize {
        self.fft.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fft.is_empty()
    }

    /// Volume element in Bohr³.
    pub fn dv(&self) -> f64 {
        self.omega / self.len() as f64
    }

    /// Fourier coefficients `f(G) = N⁻¹ Σ_r f(r) e^{-iG·r}`.
    pub fn coefficients(&self, field: &[f64]) -> Vec<Complex64> {
        self.fft.coefficients_of_real(field)
    }

    /// Real part of `Σ_G f(G) e^{iG·r}`, returning also the largest
    /// imaginary magnitude encountered.
    pub fn synthesize(&self, coefficients: &[Complex64]) -> (Vec<f64>, f64) {
        let mut data = coefficients.to_vec();
        self.fft.backward(&mut data);
        let imag = data.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        (data.iter().map(|c| c.re).collect(), imag)
    }

    /// Spectral gradient `∂_a f` for a = x, y, z.
    pub fn gradient(&self, field: &[f64]) -> [Vec<f64>; 3] {
        let c = self.coefficients(field);
        [0, 1, 2].map(|a| {
            let d: Vec<Complex64> = c
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    if self.nyquist[i] {
                        Complex64::default()
                    } else {
                        v * Complex64::new(0.0, self.g[i][a])
                    }
                })
                .collect();
            self.synthesize(&d).0
        })
    }

    /// Spectral divergence `Σ_a ∂_a h_a`.
    pub fn divergence(&self, h: &[Vec<f64>; 3]) -> Vec<f64> {
        let mut acc = vec![Complex64::default(); self.len()];
        for (a, ha) in h.iter().enumerate() {
            let c = self.coefficients(ha);
            for (i, v) in c.into_iter().enumerate() {
                if !self.nyquist[i] {
                    acc[i] += v * Complex64::new(0.0, self.g[i][a]);
                }
            }
        }
        self.synthesize(&acc).0
    }
}
