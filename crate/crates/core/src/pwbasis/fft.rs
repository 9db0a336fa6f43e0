use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::linalg::{Mat3, Vec3};

/// A 3D FFT grid. Data are stored with the third index fastest:
/// `flat = i2 + n2 * (i1 + n1 * i0)`.
///
/// `forward` computes `F(G) = Σ_r f(r) e^{-iG·r}` and `backward`
/// `f(r) = Σ_G F(G) e^{+iG·r}`; neither is normalised.
#[derive(Clone)]
pub struct FftGrid {
    dims: [usize; 3],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl fmt::Debug for FftGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FftGrid").field("dims", &self.dims).finish()
    }
}

impl PartialEq for FftGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims
    }
}

impl FftGrid {
    pub fn new(dims: [usize; 3]) -> Self {
        assert!(
            dims.iter().all(|&n| n > 0),
            "FFT dimensions must be positive"
        );
        let mut planner = FftPlanner::new();
        let forward = dims.map(|n| planner.plan_fft_forward(n));
        let inverse = dims.map(|n| planner.plan_fft_inverse(n));
        FftGrid {
            dims,
            forward,
            inverse,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn flat(&self, i: [usize; 3]) -> usize {
        i[2] + self.dims[2] * (i[1] + self.dims[1] * i[0])
    }

    #[inline]
    pub fn unflat(&self, flat: usize) -> [usize; 3] {
        let i2 = flat % self.dims[2];
        let r = flat / self.dims[2];
        [r / self.dims[1], r % self.dims[1], i2]
    }

    /// Flat index holding the Fourier component with the given Miller indices.
    #[inline]
    pub fn miller_index(&self, m: [i32; 3]) -> usize {
        let w = |m: i32, n: usize| m.rem_euclid(n as i32) as usize;
        self.flat([
            w(m[0], self.dims[0]),
            w(m[1], self.dims[1]),
            w(m[2], self.dims[2]),
        ])
    }

    /// Signed Miller index of a grid position, with a flag for the Nyquist
    /// plane of an even axis.
    #[inline]
    pub fn miller_of(&self, i: [usize; 3]) -> ([i32; 3], bool) {
        let mut m = [0i32; 3];
        let mut nyquist = false;
        for a in 0..3 {
            let n = self.dims[a];
            let v = i[a] as i32;
            m[a] = if i[a] > n / 2 { v - n as i32 } else { v };
            if n.is_multiple_of(2) && i[a] == n / 2 {
                nyquist = true;
            }
        }
        (m, nyquist)
    }

    /// Cartesian G vectors of every grid point (Bohr⁻¹) and Nyquist flags.
    pub fn g_vectors(&self, reciprocal: &Mat3) -> (Vec<Vec3>, Vec<bool>) {
        let mut g = Vec::with_capacity(self.len());
        let mut nyq = Vec::with_capacity(self.len());
        for flat in 0..self.len() {
            let (m, n) = self.miller_of(self.unflat(flat));
            let mf = m.map(|x| x as f64);
            g.push(crate::linalg::row_times(&mf, reciprocal));
            nyq.push(n);
        }
        (g, nyq)
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    pub fn backward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    fn transform(&self, data: &mut [Complex64], forward: bool) {
        assert_eq!(data.len(), self.len(), "grid size mismatch");
        let plans = if forward {
            &self.forward
        } else {
            &self.inverse
        };
        let [n0, n1, n2] = self.dims;

        // axis 2 is contiguous
        if n2 > 1 {
            plans[2].process(data);
        }

        // axis 1: lines of stride n2 inside each i0 slab
        if n1 > 1 {
            let mut lines = vec![Complex64::default(); self.len()];
            for i0 in 0..n0 {
                for i2 in 0..n2 {
                    let line = (i0 * n2 + i2) * n1;
                    for i1 in 0..n1 {
                        lines[line + i1] = data[i2 + n2 * (i1 + n1 * i0)];
                    }
                }
            }
            plans[1].process(&mut lines);
            for i0 in 0..n0 {
                for i2 in 0..n2 {
                    let line = (i0 * n2 + i2) * n1;
                    for i1 in 0..n1 {
                        data[i2 + n2 * (i1 + n1 * i0)] = lines[line + i1];
                    }
                }
            }
        }

        // axis 0: stride n1*n2
        if n0 > 1 {
            let plane = n1 * n2;
            let mut lines = vec![Complex64::default(); self.len()];
            for p in 0..plane {
                for i0 in 0..n0 {
                    lines[p * n0 + i0] = data[p + plane * i0];
                }
            }
            plans[0].process(&mut lines);
            for p in 0..plane {
                for i0 in 0..n0 {
                    data[p + plane * i0] = lines[p * n0 + i0];
                }
            }
        }
    }

    /// Forward transform of a real field normalised to Fourier coefficients,
    /// `F(G) = (1/N) Σ_r f(r) e^{-iG·r}`.
    pub fn coefficients_of_real(&self, field: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = field.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward(&mut data);
        let s = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|c| *c *= s);
        data
    }

    /// Real part of the synthesis `Σ_G F(G) e^{iG·r}`.
    pub fn real_field_of(&self, coefficients: &[Complex64]) -> Vec<f64> {
        let mut data = coefficients.to_vec();
        self.backward(&mut data);
        data.iter().map(|c| c.re).collect()
    }
}

/// Smallest integer ≥ n whose only prime factors are 2, 3 and 5.
pub fn good_fft_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    #[test]
    fn smooth_sizes() {
        assert_eq!(good_fft_size(1), 1);
        assert_eq!(good_fft_size(7), 8);
        assert_eq!(good_fft_size(11), 12);
        assert_eq!(good_fft_size(35), 36);
        assert_eq!(good_fft_size(133), 135);
    }

    #[test]
    fn matches_direct_dft() {
        let grid = FftGrid::new([4, 3, 5]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let data: Vec<Complex64> = (0..grid.len())
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let mut fast = data.clone();
        grid.forward(&mut fast);
        let [n0, n1, n2] = grid.dims();
        for g in 0..grid.len() {
            let gi = grid.unflat(g);
            let mut acc = Complex64::default();
            for r in 0..grid.len() {
                let ri = grid.unflat(r);
                let ph = -2.0
                    * PI
                    * (gi[0] as f64 * ri[0] as f64 / n0 as f64
                        + gi[1] as f64 * ri[1] as f64 / n1 as f64
                        + gi[2] as f64 * ri[2] as f64 / n2 as f64);
                acc += data[r] * Complex64::from_polar(1.0, ph);
            }
            assert!((acc - fast[g]).norm() < 1e-12);
        }
        let mut back = fast;
        grid.backward(&mut back);
        for (a, b) in back.iter().zip(&data) {
            assert!((a / grid.len() as f64 - b).norm() < 1e-14);
        }
    }
}
