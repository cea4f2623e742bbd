//! Key-based reaction-center oracle shared by test targets.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chem::synth::generate;
use chem::{align_atoms, parse_reaction, BondOrder, MolGraph};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Atom key: map number, or a unique negative id for unmapped atoms.
type Key = i64;

struct Side {
    keys: Vec<Key>,
    bonds: BTreeSet<(Key, Key, BondOrder)>,
    h: BTreeMap<Key, u8>,
    adj: BTreeMap<Key, BTreeSet<Key>>,
}

fn side(mols: &[MolGraph], next_unmapped: &mut Key) -> Side {
    let mut s = Side {
        keys: Vec::new(),
        bonds: BTreeSet::new(),
        h: BTreeMap::new(),
        adj: BTreeMap::new(),
    };
    for mol in mols {
        let keys: Vec<Key> = mol
            .atoms()
            .iter()
            .map(|a| match a.map_num {
                Some(m) => m as Key,
                None => {
                    *next_unmapped -= 1;
                    *next_unmapped
                }
            })
            .collect();
        for (i, &k) in keys.iter().enumerate() {
            s.h.insert(k, mol.total_h()[i]);
            s.adj.entry(k).or_default();
        }
        for b in mol.bonds() {
            let (x, y) = (keys[b.a].min(keys[b.b]), keys[b.a].max(keys[b.b]));
            s.bonds.insert((x, y, b.order));
            s.adj.get_mut(&x).unwrap().insert(y);
            s.adj.get_mut(&y).unwrap().insert(x);
        }
        s.keys.extend(keys);
    }
    s
}

/// Centers as (mapped keys, leaving-atom count).
pub fn oracle(reactants: &[MolGraph], products: &[MolGraph]) -> (BTreeSet<Key>, usize) {
    let mut next = 0;
    let r = side(reactants, &mut next);
    let p = side(products, &mut next);
    let product_keys: BTreeSet<Key> = p.keys.iter().copied().collect();
    let leaving: BTreeSet<Key> = r.keys.iter().copied().filter(|k| !product_keys.contains(k)).collect();

    let mut trigger = BTreeSet::new();
    for (x, y, _) in r.bonds.symmetric_difference(&p.bonds) {
        trigger.insert(*x);
        trigger.insert(*y);
    }
    for k in &product_keys {
        if r.h[k] != p.h[k] {
            trigger.insert(*k);
        }
    }
    let mut centers = trigger.clone();
    for t in &trigger {
        for graph in [&r.adj, &p.adj] {
            if let Some(nb) = graph.get(t) {
                centers.extend(nb.iter().copied());
            }
        }
    }
    let mapped = centers.into_iter().filter(|k| product_keys.contains(k)).collect();
    (mapped, leaving.len())
}

pub fn corpus() -> Vec<String> {
    let mut v: Vec<String> = generate(240, 2024).into_iter().map(|r| r.reaction).collect();
    v.extend(
        [
            "[CH3:1][Br:2].[OH2:3]>>[CH3:1][OH:3]",
            "[CH3:1][OH:2]>>[CH3:1][OH:2]",
            "[CH3:1][Br:2]>>[CH4:1]",
            "[cH:1]1[cH:2][cH:3][cH:4][cH:5][c:6]1[N+:7](=O)[O-]>>[cH:1]1[cH:2][cH:3][cH:4][cH:5][c:6]1[NH2:7]",
            "[CH2:1]=[CH:2][CH:3]=[CH2:4].[CH2:5]=[CH2:6]>>[CH2:1]1[CH:2]=[CH:3][CH2:4][CH2:5][CH2:6]1",
            "[CH3:1][C:2](=[O:3])[CH3:4]>>[CH3:1][CH:2]([OH:3])[CH3:4]",
            "[Na+].[CH3:1][O-:2].[CH3:3]I>>[CH3:1][O:2][CH3:3]",
        ]
        .map(String::from),
    );
    v
}

fn permute_fragment(mol: &MolGraph, rng: &mut ChaCha8Rng) -> MolGraph {
    let mut order: Vec<usize> = (0..mol.num_atoms()).collect();
    order.shuffle(rng);
    mol.permuted(&order).unwrap()
}

/// Compare `align_atoms` with the oracle on every corpus reaction, as
/// written and with atoms shuffled inside each fragment. Returns the number
/// of agreeing checks or the first disagreement.
pub fn check_corpus(seed: u64) -> Result<usize, String> {
    let corpus = corpus();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for text in &corpus {
        let rxn = parse_reaction(text).map_err(|e| format!("{text}: {e}"))?;
        for permute in [false, true] {
            let (rs, ps): (Vec<_>, Vec<_>) = if permute {
                (
                    rxn.reactants.iter().map(|m| permute_fragment(m, &mut rng)).collect(),
                    rxn.products.iter().map(|m| permute_fragment(m, &mut rng)).collect(),
                )
            } else {
                (rxn.reactants.clone(), rxn.products.clone())
            };
            let a = align_atoms(&rs, &ps).map_err(|e| format!("{text}: {e}"))?;
            let (expect, leaving) = oracle(&rs, &ps);
            let m = a.pair_count();
            let got_p: BTreeSet<Key> = (0..m)
                .filter(|&i| a.rc.product[i])
                .map(|i| a.product.atom(i).map_num.unwrap() as Key)
                .collect();
            let got_r: BTreeSet<Key> = (0..m)
                .filter(|&i| a.rc.reactant[i])
                .map(|i| a.reactant.atom(i).map_num.unwrap() as Key)
                .collect();
            if got_p != expect || got_r != expect {
                return Err(format!("{text}: centers {got_r:?}/{got_p:?}, oracle {expect:?}"));
            }
            if a.leaving_set().len() != leaving || !a.rc.reactant[m..].iter().all(|&x| x) {
                return Err(format!("{text}: leaving group disagrees"));
            }
            checked += 1;
        }
    }
    Ok(checked)
}
