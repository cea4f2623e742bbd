//! Periodic table lookups and the pinned valence model.

const SYMBOLS: [&str; 119] = [
    "*", "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S",
    "Cl", "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge",
    "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
    "In", "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd",
    "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg",
    "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm",
    "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn",
    "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
];

pub const H: u8 = 1;
pub const B: u8 = 5;
pub const C: u8 = 6;
pub const N: u8 = 7;
pub const O: u8 = 8;
pub const F: u8 = 9;
pub const P: u8 = 15;
pub const S: u8 = 16;
pub const CL: u8 = 17;
pub const BR: u8 = 35;
pub const I: u8 = 53;

/// Symbol for an atomic number in `1..=118`.
pub fn symbol(z: u8) -> &'static str {
    SYMBOLS.get(z as usize).copied().unwrap_or("?")
}

/// Atomic number for a capitalised symbol such as `"Cl"`.
pub fn from_symbol(sym: &str) -> Option<u8> {
    SYMBOLS
        .iter()
        .skip(1)
        .position(|s| *s == sym)
        .map(|i| (i + 1) as u8)
}

/// Elements allowed outside brackets.
pub fn is_organic_subset(z: u8) -> bool {
    matches!(z, B | C | N | O | P | S | F | CL | BR | I)
}

/// Elements that may be written in lowercase aromatic form.
pub fn can_be_aromatic(z: u8) -> bool {
    matches!(z, B | C | N | O | P | S) || z == 33 || z == 34 || z == 52
}

/// Standard valences in increasing order for the organic subset.
pub fn valences(z: u8) -> &'static [u8] {
    match z {
        B => &[3],
        C => &[4],
        N => &[3],
        O => &[2],
        P => &[3, 5],
        S => &[2, 4, 6],
        F | CL | BR | I => &[1],
        _ => &[],
    }
}

pub fn is_halogen(z: u8) -> bool {
    matches!(z, F | CL | BR | I) || z == 85 || z == 117
}

pub fn is_noble_gas(z: u8) -> bool {
    matches!(z, 2 | 10 | 18 | 36 | 54 | 86 | 118)
}

/// Every element except H, C, N, O, P, S, Se, halogens, noble gases, B,
/// Si, Te and As.
pub fn is_metal(z: u8) -> bool {
    !(z == 0
        || matches!(z, H | B | C | N | O | P | S | 14 | 33 | 34 | 52)
        || is_halogen(z)
        || is_noble_gas(z))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbols_round_trip() {
        for z in 1..=118u8 {
            assert_eq!(from_symbol(symbol(z)), Some(z));
        }
        assert_eq!(from_symbol("Xx"), None);
    }

    #[test]
    fn metal_list() {
        for s in ["Pd", "Na", "Li", "Fe", "Cu", "Al", "Zn", "Mg", "Cs"] {
            assert!(is_metal(from_symbol(s).unwrap()), "{s}");
        }
        for s in ["H", "C", "N", "O", "P", "S", "Se", "F", "Cl", "Br", "I", "He", "Ar", "B", "Si", "Te", "As"] {
            assert!(!is_metal(from_symbol(s).unwrap()), "{s}");
        }
    }
}
