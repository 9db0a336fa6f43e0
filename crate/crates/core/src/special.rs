//! Radial-transform helpers: spherical Bessel functions, real spherical
//! harmonics and trapezoidal quadrature on non-uniform meshes.

use std::f64::consts::PI;

use crate::linalg::Vec3;

/// Spherical Bessel function of the first kind `j_l(x)`.
pub fn spherical_bessel(l: u32, x: f64) -> f64 {
    let x = x.abs();
    if x < 1.0 {
        // x^l Σ_k (-x²/2)^k / (k! (2l+2k+1)!!)
        let mut dfact = 1.0;
        for n in (1..=2 * l + 1).step_by(2) {
            dfact *= n as f64;
        }
        let mut term = x.powi(l as i32) / dfact;
        let mut sum = term;
        let y = -0.5 * x * x;
        for k in 1..20u32 {
            term *= y / (k as f64 * (2 * l + 2 * k + 1) as f64);
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        return sum;
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    if l == 0 {
        return j0;
    }
    let j1 = s / (x * x) - c / x;
    if l == 1 {
        return j1;
    }
    // upward recurrence is stable for x > l, which holds for l ≤ 3 once x ≥ 1
    // to the accuracy needed here
    let (mut jm, mut j) = (j0, j1);
    for n in 1..l {
        let next = (2 * n + 1) as f64 / x * j - jm;
        jm = j;
        j = next;
    }
    j
}

/// Real spherical harmonic `Y_lm` of a direction (need not be normalised).
/// A zero vector is treated as the z direction. Supports `l ≤ 2`.
pub fn real_ylm(l: u32, m: i32, dir: &Vec3) -> f64 {
    let r = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    let (x, y, z) = if r < 1e-14 {
        (0.0, 0.0, 1.0)
    } else {
        (dir[0] / r, dir[1] / r, dir[2] / r)
    };
    match (l, m) {
        (0, 0) => 0.5 / PI.sqrt(),
        (1, -1) => (3.0 / (4.0 * PI)).sqrt() * y,
        (1, 0) => (3.0 / (4.0 * PI)).sqrt() * z,
        (1, 1) => (3.0 / (4.0 * PI)).sqrt() * x,
        (2, -2) => 0.5 * (15.0 / PI).sqrt() * x * y,
        (2, -1) => 0.5 * (15.0 / PI).sqrt() * y * z,
        (2, 0) => 0.25 * (5.0 / PI).sqrt() * (3.0 * z * z - 1.0),
        (2, 1) => 0.5 * (15.0 / PI).sqrt() * x * z,
        (2, 2) => 0.25 * (15.0 / PI).sqrt() * (x * x - y * y),
        _ => panic!("real_ylm: unsupported (l, m) = ({l}, {m})"),
    }
}

/// Trapezoidal rule for samples `f` on the mesh `x`.
pub fn trapezoid(x: &[f64], f: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), f.len());
    x.windows(2)
        .zip(f.windows(2))
        .map(|(xs, fs)| 0.5 * (xs[1] - xs[0]) * (fs[0] + fs[1]))
        .sum()
}

/// Trapezoidal integral of `f` from `x[0]` to `upper`, interpolating the
/// final partial interval linearly.
pub fn trapezoid_to(x: &[f64], f: &[f64], upper: f64) -> f64 {
    let mut sum = 0.0;
    for i in 1..x.len() {
        if x[i] <= upper {
            sum += 0.5 * (x[i] - x[i - 1]) * (f[i] + f[i - 1]);
        } else {
            if x[i - 1] < upper {
                let t = (upper - x[i - 1]) / (x[i] - x[i - 1]);
                let fu = f[i - 1] + t * (f[i] - f[i - 1]);
                sum += 0.5 * (upper - x[i - 1]) * (f[i - 1] + fu);
            }
            break;
        }
    }
    sum
}

/// Logarithmic radial mesh `r_i = r_min (r_max/r_min)^{i/(n-1)}`.
pub fn log_mesh(r_min: f64, r_max: f64, n: usize) -> Vec<f64> {
    let h = (r_max / r_min).ln() / (n - 1) as f64;
    (0..n).map(|i| r_min * (h * i as f64).exp()).collect()
}

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// A radial function tabulated on a uniform grid `0, dq, 2dq, …` and
/// evaluated by four-point Lagrange interpolation.
#[derive(Debug, Clone)]
pub struct RadialInterpolator {
    dq: f64,
    values: Vec<f64>,
}

impl RadialInterpolator {
    pub fn new(f: impl Fn(f64) -> f64, q_max: f64, dq: f64) -> Self {
        let n = (q_max / dq).ceil() as usize + 4;
        RadialInterpolator {
            dq,
            values: (0..n).map(|i| f(i as f64 * dq)).collect(),
        }
    }

    pub fn q_max(&self) -> f64 {
        (self.values.len() - 3) as f64 * self.dq
    }

    pub fn eval(&self, q: f64) -> f64 {
        let x = q / self.dq;
        let n = self.values.len();
        assert!(x <= (n - 3) as f64, "q = {q} beyond the tabulated range");
        let i = (x.floor() as usize).clamp(1, n - 3);
        let t = x - i as f64;
        let [a, b, c, d] = [
            self.values[i - 1],
            self.values[i],
            self.values[i + 1],
            self.values[i + 2],
        ];
        // Lagrange weights for nodes -1, 0, 1, 2
        -a * t * (t - 1.0) * (t - 2.0) / 6.0 + b * (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
            - c * (t + 1.0) * t * (t - 2.0) / 2.0
            + d * (t + 1.0) * t * (t - 1.0) / 6.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form(l: u32, x: f64) -> f64 {
        let (s, c) = x.sin_cos();
        match l {
            0 => s / x,
            1 => s / (x * x) - c / x,
            2 => (3.0 / (x * x) - 1.0) * s / x - 3.0 * c / (x * x),
            3 => (15.0 / x.powi(3) - 6.0 / x) * s / x - (15.0 / (x * x) - 1.0) * c / x,
            _ => unreachable!(),
        }
    }

    #[test]
    fn bessel_matches_closed_forms() {
        for l in 0..=3 {
            for &x in &[0.3, 0.999, 1.0, 1.7, 4.2, 11.0, 25.3] {
                let a = spherical_bessel(l, x);
                let b = closed_form(l, x);
                assert!((a - b).abs() < 1e-12, "l={l} x={x}: {a} vs {b}");
            }
        }
        assert_eq!(spherical_bessel(0, 0.0), 1.0);
        assert_eq!(spherical_bessel(2, 0.0), 0.0);
    }

    #[test]
    fn harmonics_are_orthonormal() {
        // Lebedev-free check: dense product grid in (θ, φ)
        let (nt, np) = (200, 400);
        let lm: Vec<(u32, i32)> = (0..=2u32)
            .flat_map(|l| (-(l as i32)..=l as i32).map(move |m| (l, m)))
            .collect();
        let mut gram = vec![0.0; lm.len() * lm.len()];
        for it in 0..nt {
            // Gauss-Chebyshev-like midpoint in cos θ
            let u = -1.0 + (it as f64 + 0.5) * 2.0 / nt as f64;
            let st = (1.0 - u * u).sqrt();
            for ip in 0..np {
                let phi = 2.0 * PI * ip as f64 / np as f64;
                let d = [st * phi.cos(), st * phi.sin(), u];
                let w = 2.0 / nt as f64 * 2.0 * PI / np as f64;
                for (a, &(la, ma)) in lm.iter().enumerate() {
                    for (b, &(lb, mb)) in lm.iter().enumerate() {
                        gram[a * lm.len() + b] += w * real_ylm(la, ma, &d) * real_ylm(lb, mb, &d);
                    }
                }
            }
        }
        for a in 0..lm.len() {
            for b in 0..lm.len() {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((gram[a * lm.len() + b] - expect).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn interpolator_is_accurate_for_smooth_functions() {
        let f = |q: f64| (-q * q / 3.0).exp() * (1.0 + q);
        let t = RadialInterpolator::new(f, 12.0, 0.01);
        for i in 0..1000 {
            let q = i as f64 * 0.01193;
            assert!((t.eval(q) - f(q)).abs() < 1e-9);
        }
    }

    #[test]
    fn trapezoid_partial_interval() {
        let x: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let f: Vec<f64> = x.iter().map(|&v| 2.0 * v).collect();
        assert!((trapezoid(&x, &f) - 1.0).abs() < 1e-14);
        assert!((trapezoid_to(&x, &f, 0.55) - 0.3025).abs() < 1e-14);
    }
}
