//! Atom alignment between reactants and products, and reaction centers.

use std::collections::HashMap;

use crate::error::{ChemError, Result};
use crate::mol::MolGraph;

/// Reaction-center membership on both sides of an aligned reaction.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RcSet {
    /// One flag per reactant atom (length n).
    pub reactant: Vec<bool>,
    /// One flag per product atom (length m).
    pub product: Vec<bool>,
}

impl RcSet {
    pub fn len(&self) -> usize {
        self.reactant.iter().chain(&self.product).filter(|&&x| x).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn reactant_indices(&self) -> Vec<usize> {
        (0..self.reactant.len()).filter(|&i| self.reactant[i]).collect()
    }

    pub fn product_indices(&self) -> Vec<usize> {
        (0..self.product.len()).filter(|&i| self.product[i]).collect()
    }

    /// Every atom on both sides.
    pub fn all(n: usize, m: usize) -> Self {
        RcSet {
            reactant: vec![true; n],
            product: vec![true; m],
        }
    }
}

/// Reactant and product graphs reindexed so reactant atom `i` and product
/// atom `i` carry the same map number for `i < m`. Reactant atoms `m..n`
/// are the leaving group.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignedReaction {
    pub reactant: MolGraph,
    pub product: MolGraph,
    pub rc: RcSet,
    /// Reagent or condition molecules attached to the reaction.
    pub condition_mols: Vec<MolGraph>,
    pub condition_text: Option<String>,
}

impl AlignedReaction {
    /// Number of mapped pairs `m`.
    pub fn pair_count(&self) -> usize {
        self.product.num_atoms()
    }

    pub fn leaving_set(&self) -> std::ops::Range<usize> {
        self.pair_count()..self.reactant.num_atoms()
    }

    /// Relabel atoms: reactant atom `k` of the result is reactant atom
    /// `reactant_order[k]`, likewise for products. Reaction centers are
    /// recomputed.
    pub fn permute(&self, reactant_order: &[usize], product_order: &[usize]) -> Result<Self> {
        let reactant = self.reactant.permuted(reactant_order)?;
        let product = self.product.permuted(product_order)?;
        let rc = detect_reaction_centers(&reactant, &product);
        Ok(AlignedReaction {
            reactant,
            product,
            rc,
            condition_mols: self.condition_mols.clone(),
            condition_text: self.condition_text.clone(),
        })
    }
}

/// Reindex reactants and products into aligned form and detect reaction
/// centers.
pub fn align_atoms(reactants: &[MolGraph], products: &[MolGraph]) -> Result<AlignedReaction> {
    let r = MolGraph::merge(reactants)?;
    let p = MolGraph::merge(products)?;

    let mut r_by_map: HashMap<u32, usize> = HashMap::new();
    for (i, a) in r.atoms().iter().enumerate() {
        if let Some(m) = a.map_num {
            if r_by_map.insert(m, i).is_some() {
                return Err(ChemError::DuplicateMap(m));
            }
        }
    }
    let mut order = Vec::with_capacity(r.num_atoms());
    let mut used = vec![false; r.num_atoms()];
    for (j, a) in p.atoms().iter().enumerate() {
        let m = a.map_num.ok_or_else(|| ChemError::UnmappedProductAtom {
            index: j,
            symbol: a.symbol().to_string(),
        })?;
        let i = *r_by_map.get(&m).ok_or(ChemError::MissingReactantMap(m))?;
        order.push(i);
        used[i] = true;
    }
    order.extend((0..r.num_atoms()).filter(|&i| !used[i]));
    let reactant = r.permuted(&order)?;
    let identity: Vec<usize> = (0..p.num_atoms()).collect();
    let product = p.permuted(&identity)?;
    let rc = detect_reaction_centers(&reactant, &product);
    Ok(AlignedReaction {
        reactant,
        product,
        rc,
        condition_mols: Vec::new(),
        condition_text: None,
    })
}

/// Reaction centers of an aligned pair of graphs.
///
/// A mapped atom is a trigger when it ends a bond that is formed, broken or
/// changes order (bonds to leaving atoms count as broken), or when its
/// hydrogen count changes. Triggers and their one-hop neighbours in either
/// graph are centers on both sides; every leaving atom is a center.
pub fn detect_reaction_centers(reactant: &MolGraph, product: &MolGraph) -> RcSet {
    let n = reactant.num_atoms();
    let m = product.num_atoms();
    let mut trigger = vec![false; n];

    for bond in reactant.bonds() {
        let changed = if bond.a < m && bond.b < m {
            product.bond_between(bond.a, bond.b).map(|b| b.order) != Some(bond.order)
        } else {
            true
        };
        if changed {
            trigger[bond.a] = true;
            trigger[bond.b] = true;
        }
    }
    for bond in product.bonds() {
        if reactant.bond_between(bond.a, bond.b).is_none() {
            trigger[bond.a] = true;
            trigger[bond.b] = true;
        }
    }
    for i in 0..m {
        if reactant.total_h()[i] != product.total_h()[i] {
            trigger[i] = true;
        }
    }

    let mut center = vec![false; n];
    for i in 0..n {
        if !trigger[i] {
            continue;
        }
        center[i] = true;
        for &(j, _) in reactant.neighbors(i) {
            center[j] = true;
        }
        if i < m {
            for &(j, _) in product.neighbors(i) {
                center[j] = true;
            }
        }
    }
    for c in center.iter_mut().skip(m) {
        *c = true;
    }
    RcSet {
        product: center[..m].to_vec(),
        reactant: center,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;

    fn p(s: &str) -> MolGraph {
        parse_smiles(s).unwrap()
    }

    #[test]
    fn identity_reaction() {
        let a = align_atoms(&[p("[CH3:1][OH:2]")], &[p("[CH3:1][OH:2]")]).unwrap();
        assert_eq!(a.pair_count(), 2);
        assert!(a.leaving_set().is_empty());
        assert!(a.rc.is_empty());
    }

    #[test]
    fn unmapped_product_atom() {
        let err = align_atoms(&[p("[CH3:1]Br")], &[p("[CH3:1]O")]).unwrap_err();
        assert!(matches!(err, ChemError::UnmappedProductAtom { index: 1, .. }));
    }

    #[test]
    fn bromide_leaves() {
        let a = align_atoms(&[p("[CH3:1][Br:2]")], &[p("[CH4:1]")]).unwrap();
        assert_eq!(a.pair_count(), 1);
        assert_eq!(a.leaving_set(), 1..2);
        assert_eq!(a.reactant.atom(1).element, 35);
    }

    #[test]
    fn substitution_centers() {
        let a = align_atoms(
            &[p("[CH3:1][Br:2]"), p("[OH2:3]")],
            &[p("[CH3:1][OH:3]")],
        )
        .unwrap();
        assert_eq!(a.rc.product, vec![true, true]);
        assert_eq!(a.rc.reactant, vec![true, true, true]);
    }

    #[test]
    fn nitro_reduction_marks_nitrogen_oxygens_and_ring_neighbor() {
        let a = align_atoms(
            &[p("[cH:1]1[cH:2][cH:3][cH:4][cH:5][c:6]1[N+:7](=O)[O-]")],
            &[p("[cH:1]1[cH:2][cH:3][cH:4][cH:5][c:6]1[NH2:7]")],
        )
        .unwrap();
        // N7 (bond change and H change), both O (leaving), C6 (neighbor).
        assert!(a.rc.product[6] && a.rc.product[5]);
        assert!(a.rc.reactant[7] && a.rc.reactant[8]);
        assert!(!a.rc.product[2]);
    }

    #[test]
    fn duplicate_maps_across_fragments() {
        let err = align_atoms(&[p("[CH3:1]O"), p("[CH3:1]N")], &[p("[CH3:1]")]).unwrap_err();
        assert_eq!(err, ChemError::DuplicateMap(1));
    }

    #[test]
    fn alignment_is_idempotent() {
        let a = align_atoms(
            &[p("[CH3:1][C:2](=[O:3])Cl"), p("[NH3:4]")],
            &[p("[NH2:4][C:2]([CH3:1])=[O:3]")],
        )
        .unwrap();
        let b = align_atoms(std::slice::from_ref(&a.reactant), std::slice::from_ref(&a.product)).unwrap();
        assert_eq!(a, b);
    }
}
