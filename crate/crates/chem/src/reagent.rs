//! Reagent classes and ordering.

use crate::canon::canonical_form;
use crate::element;
use crate::mol::MolGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReagentType {
    /// Metals, metal or phosphorus ring complexes, metal halides.
    TypeI,
    /// Other organic molecules.
    TypeII,
    /// Everything else.
    TypeIII,
}

pub fn classify_reagent(mol: &MolGraph) -> ReagentType {
    let atoms = mol.atoms();
    let is_metal = |z: u8| element::is_metal(z);
    let any_metal = atoms.iter().any(|a| is_metal(a.element));
    let free_metal = !atoms.is_empty() && atoms.iter().all(|a| is_metal(a.element));
    let ring_complex =
        mol.has_ring() && (any_metal || mol.contains_element(element::P));
    let metal_halide = any_metal
        && atoms.iter().any(|a| element::is_halogen(a.element))
        && atoms
            .iter()
            .all(|a| is_metal(a.element) || element::is_halogen(a.element));
    if free_metal || ring_complex || metal_halide {
        ReagentType::TypeI
    } else if mol.contains_element(element::C) {
        ReagentType::TypeII
    } else {
        ReagentType::TypeIII
    }
}

/// Sort by type, then canonical SMILES length, then canonical SMILES.
/// Returns the canonical strings in order.
pub fn order_reagents(mols: &[MolGraph]) -> Vec<String> {
    let mut keyed: Vec<(ReagentType, usize, String)> = mols
        .iter()
        .map(|m| {
            let s = canonical_form(m);
            (classify_reagent(m), s.len(), s)
        })
        .collect();
    keyed.sort();
    keyed.into_iter().map(|(_, _, s)| s).collect()
}
