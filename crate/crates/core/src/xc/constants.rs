//! Functional parameters, to published precision.
//!
//! Perdew-Zunger: J. P. Perdew and A. Zunger, Phys. Rev. B 23, 5048 (1981).
//! PW92: J. P. Perdew and Y. Wang, Phys. Rev. B 45, 13244 (1992).
//! PBE: J. P. Perdew, K. Burke and M. Ernzerhof, Phys. Rev. Lett. 77, 3865 (1996).

use std::f64::consts::{LN_2, PI};

// Perdew-Zunger correlation, unpolarised
pub const PZ_GAMMA: f64 = -0.1423;
pub const PZ_BETA1: f64 = 1.0529;
pub const PZ_BETA2: f64 = 0.3334;
pub const PZ_A: f64 = 0.0311;
pub const PZ_B: f64 = -0.048;
pub const PZ_C: f64 = 0.0020;
pub const PZ_D: f64 = -0.0116;

// PW92 correlation, unpolarised
pub const PW92_A: f64 = 0.0310907;
pub const PW92_ALPHA1: f64 = 0.21370;
pub const PW92_BETA1: f64 = 7.5957;
pub const PW92_BETA2: f64 = 3.5876;
pub const PW92_BETA3: f64 = 1.6382;
pub const PW92_BETA4: f64 = 0.49294;

// PBE
pub const PBE_KAPPA: f64 = 0.804;
pub const PBE_MU: f64 = 0.2195149727645171;
pub const PBE_BETA: f64 = 0.066725;
pub const PBE_GAMMA: f64 = (1.0 - LN_2) / (PI * PI);
