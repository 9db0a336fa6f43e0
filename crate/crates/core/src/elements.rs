//! Periodic-table lookups.

const SYMBOLS: [&str; 94] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu",
];

/// Atomic number of an element symbol (case-sensitive, e.g. "Ge").
pub fn atomic_number(symbol: &str) -> Option<u32> {
    SYMBOLS
        .iter()
        .position(|s| *s == symbol)
        .map(|i| i as u32 + 1)
}

pub fn is_known(symbol: &str) -> bool {
    atomic_number(symbol).is_some()
}

/// Valence electron counts used when no pseudopotential file supplies one.
/// These are configuration defaults for the group-IV/III/V elements of the
/// heterobilayer workflows, not values read from a table.
pub fn default_valence(symbol: &str) -> Option<f64> {
    match symbol {
        "Ge" | "Si" | "C" | "Sn" => Some(4.0),
        "Ga" | "Al" | "B" | "In" => Some(3.0),
        "P" | "N" | "As" | "Sb" => Some(5.0),
        "H" => Some(1.0),
        _ => None,
    }
}
