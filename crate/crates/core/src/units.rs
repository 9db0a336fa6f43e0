//! Unit conversions. Everything inside the engine runs in Hartree atomic
//! units (Bohr, Hartree); decks and reports use Å, Ry and eV.

/// Bohr radius in Å (CODATA 2018).
pub const BOHR_ANGSTROM: f64 = 0.529177210903;
/// Å to Bohr.
pub const ANGSTROM_BOHR: f64 = 1.0 / BOHR_ANGSTROM;
/// Hartree in eV (CODATA 2018).
pub const HARTREE_EV: f64 = 27.211386245988;
/// Rydberg in Hartree.
pub const RY_HARTREE: f64 = 0.5;
/// Hartree in meV.
pub const HARTREE_MEV: f64 = HARTREE_EV * 1000.0;
/// Hartree per particle expressed in J/mol.
pub const HARTREE_J_PER_MOL: f64 = 2_625_499.639_479_9;
/// One nanometre in Bohr.
pub const NM_BOHR: f64 = 10.0 * ANGSTROM_BOHR;

#[inline]
pub fn ry_to_ha(e: f64) -> f64 {
    e * RY_HARTREE
}

#[inline]
pub fn ha_to_ry(e: f64) -> f64 {
    e / RY_HARTREE
}

#[inline]
pub fn ang_to_bohr(x: f64) -> f64 {
    x * ANGSTROM_BOHR
}

#[inline]
pub fn bohr_to_ang(x: f64) -> f64 {
    x * BOHR_ANGSTROM
}

/// Converts a dispersion coefficient from J·nm⁶·mol⁻¹ to Hartree·Bohr⁶.
#[inline]
pub fn c6_jnm6mol_to_au(c6: f64) -> f64 {
    c6 * NM_BOHR.powi(6) / HARTREE_J_PER_MOL
}
