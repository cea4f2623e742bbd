use std::collections::BTreeMap;

use chem::synth::generate;
use chem::{
    align_atoms, canonical_form, classify_reagent, ddg_to_ratio, parse_reaction, parse_smiles,
    ratio_to_ddg, tokenize_smiles, MolGraph,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn corpus() -> Vec<String> {
    include_str!("data/smiles.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

fn shuffled(mol: &MolGraph, seed: u64) -> MolGraph {
    let mut order: Vec<usize> = (0..mol.num_atoms()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    mol.permuted(&order).unwrap()
}

#[test]
fn corpus_parses() {
    for s in corpus() {
        parse_smiles(&s).unwrap_or_else(|e| panic!("{s}: {e}"));
    }
}

#[test]
fn canonical_round_trip() {
    for s in corpus() {
        let mol = parse_smiles(&s).unwrap();
        let c = canonical_form(&mol);
        let again = parse_smiles(&c).unwrap_or_else(|e| panic!("{s} -> {c}: {e}"));
        assert_eq!(again.num_atoms(), mol.num_atoms(), "{s} -> {c}");
        assert_eq!(again.num_bonds(), mol.num_bonds(), "{s} -> {c}");
        assert_eq!(again.total_h(), shuffled_h(&mol, &again), "{s} -> {c}");
        assert_eq!(canonical_form(&again), c, "{s}");
    }
}

/// Hydrogen counts of `mol` reordered to match `other` by sorted multiset.
fn shuffled_h(mol: &MolGraph, other: &MolGraph) -> Vec<u8> {
    let mut a = mol.total_h().to_vec();
    let mut b = other.total_h().to_vec();
    a.sort_unstable();
    b.sort_unstable();
    assert_eq!(a, b);
    other.total_h().to_vec()
}

#[test]
fn equivalent_spellings_agree() {
    let pairs = [
        ("OCC", "CCO"),
        ("c1ccccc1C", "Cc1ccccc1"),
        ("[CH3][CH2][OH]", "CCO"),
        ("C(=O)O", "OC=O"),
        ("N1CCCC1", "C1CCNC1"),
    ];
    for (a, b) in pairs {
        assert_eq!(
            canonical_form(&parse_smiles(a).unwrap()),
            canonical_form(&parse_smiles(b).unwrap()),
            "{a} vs {b}"
        );
    }
}

#[test]
fn tokenizer_round_trip_on_corpus() {
    let mut texts = corpus();
    for r in generate(120, 5) {
        texts.push(r.reaction.clone());
        texts.extend(r.conditions.iter().flatten().cloned());
    }
    for t in &texts {
        let toks = tokenize_smiles(t).unwrap_or_else(|e| panic!("{t}: {e}"));
        assert_eq!(toks.concat(), *t);
    }
    assert!(tokenize_smiles("CC!O").is_err());
}

#[test]
fn conjugation_and_rings() {
    let butadiene = parse_smiles("C=CC=C").unwrap();
    let central = butadiene.bond_between(1, 2).unwrap();
    assert!(central.conjugated);
    assert!(!central.in_ring);
    let benzene = parse_smiles("c1ccccc1").unwrap();
    assert!(benzene.bonds().iter().all(|b| b.in_ring && b.conjugated));
    let ethanol = parse_smiles("CCO").unwrap();
    assert!(ethanol.bonds().iter().all(|b| !b.in_ring && !b.conjugated));
    assert_eq!(benzene.total_h(), &[1; 6]);
}

#[test]
fn reagents_always_classified() {
    for s in corpus() {
        let m = parse_smiles(&s).unwrap();
        assert_eq!(classify_reagent(&m), classify_reagent(&shuffled(&m, 3)), "{s}");
    }
}

fn map_flags(mol: &MolGraph, flags: &[bool]) -> BTreeMap<u32, bool> {
    (0..flags.len())
        .map(|i| (mol.atom(i).map_num.unwrap(), flags[i]))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_form_ignores_atom_order(idx in 0usize..66, seed in any::<u64>()) {
        let corpus = corpus();
        let s = &corpus[idx % corpus.len()];
        let mol = parse_smiles(s).unwrap();
        prop_assert_eq!(canonical_form(&shuffled(&mol, seed)), canonical_form(&mol));
    }

    #[test]
    fn synthetic_molecules_canonicalize_stably(idx in 0usize..48, seed in any::<u64>()) {
        let r = &generate(48, 77)[idx];
        let rxn = parse_reaction(&r.reaction).unwrap();
        for mol in rxn.reactants.iter().chain(&rxn.products) {
            let plain = mol.without_maps();
            let c = canonical_form(&plain);
            prop_assert_eq!(canonical_form(&shuffled(&plain, seed)), c.clone());
            prop_assert_eq!(canonical_form(&parse_smiles(&c).unwrap()), c);
        }
    }

    #[test]
    fn alignment_ignores_input_order(idx in 0usize..48, seed in any::<u64>()) {
        let r = &generate(48, 31)[idx];
        let rxn = parse_reaction(&r.reaction).unwrap();
        let a = align_atoms(&rxn.reactants, &rxn.products).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rs: Vec<MolGraph> = rxn.reactants.iter().enumerate()
            .map(|(k, m)| shuffled(m, seed ^ k as u64)).collect();
        rs.shuffle(&mut rng);
        let ps: Vec<MolGraph> = rxn.products.iter().map(|m| shuffled(m, seed.rotate_left(7))).collect();
        let b = align_atoms(&rs, &ps).unwrap();
        let m = a.pair_count();
        prop_assert_eq!(b.pair_count(), m);
        prop_assert_eq!(b.leaving_set().len(), a.leaving_set().len());
        prop_assert_eq!(map_flags(&b.product, &b.rc.product), map_flags(&a.product, &a.rc.product));
        prop_assert_eq!(
            map_flags(&b.reactant, &b.rc.reactant[..m]),
            map_flags(&a.reactant, &a.rc.reactant[..m])
        );
        prop_assert_eq!(canonical_form(&b.reactant), canonical_form(&a.reactant));
        prop_assert_eq!(canonical_form(&b.product), canonical_form(&a.product));
    }

    #[test]
    fn ratio_round_trip(ratio in 1e-3f64..1e3, t in 200.0f64..400.0) {
        let back = ddg_to_ratio(ratio_to_ddg(ratio, t).unwrap(), t).unwrap();
        prop_assert!((back - ratio).abs() / ratio < 1e-12);
    }
}
