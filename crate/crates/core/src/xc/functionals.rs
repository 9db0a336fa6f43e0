//! Pointwise spin-unpolarised functionals. Energies are per electron,
//! potentials are derivatives of the energy density `e = n ε`.

use std::f64::consts::PI;

use super::constants::*;

/// Densities below this are treated as vacuum by the gradient functionals.
pub const VACUUM_DENSITY: f64 = 1e-12;

/// Wigner-Seitz radius of a uniform density.
#[inline]
pub fn wigner_seitz_radius(n: f64) -> f64 {
    (3.0 / (4.0 * PI * n)).cbrt()
}

/// Slater exchange `(ε_x, v_x)`; non-positive densities give zeros.
pub fn lda_exchange(n: f64) -> (f64, f64) {
    if n <= 0.0 {
        return (0.0, 0.0);
    }
    let eps = -0.75 * (3.0 / PI).cbrt() * n.cbrt();
    (eps, 4.0 / 3.0 * eps)
}

/// Perdew-Zunger correlation `(ε_c, v_c)`.
pub fn pz_correlation(n: f64) -> (f64, f64) {
    if n <= 0.0 {
        return (0.0, 0.0);
    }
    pz_correlation_rs(wigner_seitz_radius(n))
}

/// Perdew-Zunger correlation as a function of `rs`.
pub fn pz_correlation_rs(rs: f64) -> (f64, f64) {
    if rs >= 1.0 {
        let sq = rs.sqrt();
        let den = 1.0 + PZ_BETA1 * sq + PZ_BETA2 * rs;
        let eps = PZ_GAMMA / den;
        let v = eps * (1.0 + 7.0 / 6.0 * PZ_BETA1 * sq + 4.0 / 3.0 * PZ_BETA2 * rs) / den;
        (eps, v)
    } else {
        let l = rs.ln();
        let eps = PZ_A * l + PZ_B + PZ_C * rs * l + PZ_D * rs;
        let v = PZ_A * l
            + (PZ_B - PZ_A / 3.0)
            + 2.0 / 3.0 * PZ_C * rs * l
            + (2.0 * PZ_D - PZ_C) * rs / 3.0;
        (eps, v)
    }
}

/// PW92 correlation energy per electron and its `rs` derivative.
pub fn pw92_rs(rs: f64) -> (f64, f64) {
    let sq = rs.sqrt();
    let q = 2.0
        * PW92_A
        * (PW92_BETA1 * sq + PW92_BETA2 * rs + PW92_BETA3 * rs * sq + PW92_BETA4 * rs * rs);
    let dq = 2.0
        * PW92_A
        * (0.5 * PW92_BETA1 / sq + PW92_BETA2 + 1.5 * PW92_BETA3 * sq + 2.0 * PW92_BETA4 * rs);
    let log = (1.0 + 1.0 / q).ln();
    let eps = -2.0 * PW92_A * (1.0 + PW92_ALPHA1 * rs) * log;
    let deps = -2.0 * PW92_A * PW92_ALPHA1 * log
        + 2.0 * PW92_A * (1.0 + PW92_ALPHA1 * rs) * dq / (q * (q + 1.0));
    (eps, deps)
}

/// Gradient-corrected energy per electron and the partial derivatives of
/// `e = n ε` with respect to `n` and `σ = |∇n|²`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GgaPoint {
    pub eps: f64,
    pub de_dn: f64,
    pub de_dsigma: f64,
}

impl std::ops::Add for GgaPoint {
    type Output = GgaPoint;
    fn add(self, o: GgaPoint) -> GgaPoint {
        GgaPoint {
            eps: self.eps + o.eps,
            de_dn: self.de_dn + o.de_dn,
            de_dsigma: self.de_dsigma + o.de_dsigma,
        }
    }
}

/// PBE exchange enhancement factor.
pub fn pbe_enhancement(s: f64) -> f64 {
    1.0 + PBE_KAPPA - PBE_KAPPA / (1.0 + PBE_MU * s * s / PBE_KAPPA)
}

/// Reduced gradient `s = |∇n| / (2 (3π²)^{1/3} n^{4/3})`.
pub fn reduced_gradient(n: f64, grad: f64) -> f64 {
    grad / (2.0 * (3.0 * PI * PI).cbrt() * n.powf(4.0 / 3.0))
}

/// PBE exchange at density `n` and gradient magnitude `grad`.
pub fn pbe_exchange(n: f64, grad: f64) -> GgaPoint {
    pbe_exchange_sigma(n, grad * grad)
}

pub fn pbe_exchange_sigma(n: f64, sigma: f64) -> GgaPoint {
    if n < VACUUM_DENSITY {
        return GgaPoint::default();
    }
    let ax = -0.75 * (3.0 / PI).cbrt();
    let n13 = n.cbrt();
    let n43 = n * n13;
    // s² = σ · c / n^{8/3}
    let c = 1.0 / (4.0 * (3.0 * PI * PI).powf(2.0 / 3.0));
    let s2 = sigma * c / (n43 * n43);
    let den = 1.0 + PBE_MU * s2 / PBE_KAPPA;
    let f = 1.0 + PBE_KAPPA - PBE_KAPPA / den;
    let df = PBE_MU / (den * den); // dF/d(s²)
    let e = ax * n43 * f;
    GgaPoint {
        eps: e / n,
        de_dn: 4.0 / 3.0 * ax * n13 * f + ax * n43 * df * (-8.0 / 3.0 * s2 / n),
        de_dsigma: ax * n43 * df * c / (n43 * n43),
    }
}

/// PBE correlation at density `n` and gradient magnitude `grad`.
pub fn pbe_correlation(n: f64, grad: f64) -> GgaPoint {
    pbe_correlation_sigma(n, grad * grad)
}

pub fn pbe_correlation_sigma(n: f64, sigma: f64) -> GgaPoint {
    if n < VACUUM_DENSITY {
        return GgaPoint::default();
    }
    let rs = wigner_seitz_radius(n);
    let drs_dn = -rs / (3.0 * n);
    let (ec, dec_drs) = pw92_rs(rs);

    // t² = σ π / (16 k_F n²) with k_F = (3π² n)^{1/3}
    let kf = (3.0 * PI * PI * n).cbrt();
    let dt2_dsigma = PI / (16.0 * kf * n * n);
    let t2 = sigma * dt2_dsigma;
    let dt2_dn = -7.0 / 3.0 * t2 / n;

    let bg = PBE_BETA / PBE_GAMMA;
    let expo = (-ec / PBE_GAMMA).exp();
    let a = bg / (expo - 1.0);
    let da_dec = a * a * expo / PBE_BETA;

    let y = a * t2;
    let pden = 1.0 + y + y * y;
    let p = (1.0 + y) / pden;
    let dp_dy = -y * (2.0 + y) / (pden * pden);
    let x = 1.0 + bg * t2 * p;
    let h = PBE_GAMMA * x.ln();
    let dh_da = PBE_BETA * t2 * t2 * dp_dy / x;
    let dh_dt2 = PBE_BETA * (p + t2 * a * dp_dy) / x;

    let dec_dn = dec_drs * drs_dn;
    let dh_dn = dh_da * da_dec * dec_dn + dh_dt2 * dt2_dn;
    GgaPoint {
        eps: ec + h,
        de_dn: ec + h + n * (dec_dn + dh_dn),
        de_dsigma: n * dh_dt2 * dt2_dsigma,
    }
}
