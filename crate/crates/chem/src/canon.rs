//! Canonical SMILES.
//!
//! Atoms are ranked by iterative Morgan-style refinement of
//! `(element, charge, degree, H count, aromatic, isotope)`. Remaining ties
//! are broken by trying every member of the first tied class and keeping the
//! lexicographically smallest output, which makes the result independent of
//! input atom order. Stereo and map numbers are not part of the canonical
//! form.

use crate::element;
use crate::mol::{hydrogen_count, Atom, BondOrder, MolGraph};

/// Upper bound on completed tie-break branches per component. Beyond it only
/// the first candidate of each tied class is explored.
const LEAF_BUDGET: usize = 256;

/// Canonical text for a molecule; fragments are sorted and joined by `.`.
pub fn canonical_form(mol: &MolGraph) -> String {
    render(mol, false)
}

/// Deterministic SMILES that keeps map numbers on mapped atoms.
pub fn write_mapped(mol: &MolGraph) -> String {
    render(mol, true)
}

fn render(mol: &MolGraph, maps: bool) -> String {
    let mut parts: Vec<String> = mol
        .components()
        .iter()
        .map(|atoms| {
            let sub = mol
                .subgraph(atoms)
                .expect("induced subgraph of a valid graph is valid");
            canonical_component(&sub, maps)
        })
        .collect();
    parts.sort();
    parts.join(".")
}

fn canonical_component(mol: &MolGraph, maps: bool) -> String {
    let n = mol.num_atoms();
    let keys: Vec<_> = (0..n)
        .map(|i| {
            let a = mol.atom(i);
            (
                a.element,
                a.charge,
                mol.degree(i),
                mol.total_h()[i],
                a.aromatic,
                a.isotope.unwrap_or(0),
                if maps { a.map_num.unwrap_or(0) } else { 0 },
            )
        })
        .collect();
    let ranks = dense_ranks(&keys);
    let mut best: Option<String> = None;
    let mut leaves = 0;
    search(mol, ranks, maps, &mut best, &mut leaves);
    best.unwrap_or_default()
}

fn dense_ranks<K: Ord>(keys: &[K]) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0u32; keys.len()];
    let mut r = 0;
    for w in 0..idx.len() {
        if w > 0 && keys[idx[w]] != keys[idx[w - 1]] {
            r += 1;
        }
        ranks[idx[w]] = r;
    }
    ranks
}

fn class_count(ranks: &[u32]) -> usize {
    ranks.iter().max().map_or(0, |&m| m as usize + 1)
}

/// Refine ranks by neighbourhood until the partition stops splitting.
pub(crate) fn refine(mol: &MolGraph, ranks: Vec<u32>) -> Vec<u32> {
    let mut ranks = dense_ranks(&ranks);
    loop {
        let before = class_count(&ranks);
        let keys: Vec<(u32, Vec<(u32, usize)>)> = (0..mol.num_atoms())
            .map(|i| {
                let mut nb: Vec<(u32, usize)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(j, k)| (ranks[j], mol.bonds()[k].order.index()))
                    .collect();
                nb.sort_unstable();
                (ranks[i], nb)
            })
            .collect();
        ranks = dense_ranks(&keys);
        if class_count(&ranks) == before {
            return ranks;
        }
    }
}

fn search(mol: &MolGraph, ranks: Vec<u32>, maps: bool, best: &mut Option<String>, leaves: &mut usize) {
    let ranks = refine(mol, ranks);
    let n = ranks.len();
    if class_count(&ranks) == n {
        let s = emit(mol, &ranks, maps);
        if best.as_ref().is_none_or(|b| s < *b) {
            *best = Some(s);
        }
        *leaves += 1;
        return;
    }
    let mut counts = vec![0usize; n];
    for &r in &ranks {
        counts[r as usize] += 1;
    }
    let tied = counts.iter().position(|&c| c > 1).expect("a tied class exists") as u32;
    let candidates: Vec<usize> = (0..n).filter(|&i| ranks[i] == tied).collect();
    for (k, &a) in candidates.iter().enumerate() {
        if k > 0 && *leaves >= LEAF_BUDGET {
            break;
        }
        let split: Vec<u32> = ranks
            .iter()
            .enumerate()
            .map(|(i, &r)| 2 * r + u32::from(i != a || r != tied))
            .collect();
        search(mol, split, maps, best, leaves);
    }
}

/// Write one connected component given a total order of its atoms.
pub(crate) fn emit(mol: &MolGraph, ranks: &[u32], maps: bool) -> String {
    let n = mol.num_atoms();
    if n == 0 {
        return String::new();
    }
    let sorted_nb = |u: usize| {
        let mut nb = mol.neighbors(u).to_vec();
        nb.sort_by_key(|&(v, _)| ranks[v]);
        nb
    };
    let start = (0..n).min_by_key(|&i| ranks[i]).expect("non-empty");

    // Pass 1: spanning tree and ring bonds.
    let mut visit_order = vec![usize::MAX; n];
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut ring_at: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut ring_seen = vec![false; mol.num_bonds()];
    let mut counter = 0;
    let mut stack: Vec<(usize, usize, Vec<(usize, usize)>, usize)> = Vec::new();
    visit_order[start] = counter;
    counter += 1;
    stack.push((start, usize::MAX, sorted_nb(start), 0));
    while let Some((u, via, nb, pos)) = stack.last_mut() {
        if *pos == nb.len() {
            stack.pop();
            continue;
        }
        let (v, k) = nb[*pos];
        *pos += 1;
        let (u, via) = (*u, *via);
        if k == via {
            continue;
        }
        if visit_order[v] != usize::MAX {
            if !ring_seen[k] {
                ring_seen[k] = true;
                ring_at[u].push((v, k));
                ring_at[v].push((u, k));
            }
        } else {
            visit_order[v] = counter;
            counter += 1;
            children[u].push((v, k));
            stack.push((v, k, sorted_nb(v), 0));
        }
    }

    // Pass 2: text.
    let mut out = String::new();
    let mut digit_of = vec![0u32; mol.num_bonds()];
    let mut in_use: Vec<bool> = vec![false; 100];
    write_atom(mol, start, maps, &visit_order, &children, &ring_at, &mut digit_of, &mut in_use, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn write_atom(
    mol: &MolGraph,
    u: usize,
    maps: bool,
    order: &[usize],
    children: &[Vec<(usize, usize)>],
    ring_at: &[Vec<(usize, usize)>],
    digit_of: &mut [u32],
    in_use: &mut [bool],
    out: &mut String,
) {
    // Iterative emission: each frame is (atom, next child index).
    enum Step {
        Enter(usize),
        Child(usize, usize),
        Close,
    }
    let mut work = vec![Step::Enter(u)];
    while let Some(step) = work.pop() {
        match step {
            Step::Enter(u) => {
                out.push_str(&atom_token(mol, u, maps));
                let mut closing = Vec::new();
                let mut rings = ring_at[u].clone();
                rings.sort_by_key(|&(v, _)| order[v]);
                for &(v, k) in &rings {
                    if order[v] < order[u] {
                        push_digit(out, digit_of[k]);
                        closing.push(digit_of[k]);
                    }
                }
                for &(v, k) in &rings {
                    if order[v] > order[u] {
                        let d = (1..100).find(|&d| !in_use[d]).expect("fewer than 99 open rings") as u32;
                        in_use[d as usize] = true;
                        digit_of[k] = d;
                        out.push_str(bond_symbol(mol, u, v, k));
                        push_digit(out, d);
                    }
                }
                for d in closing {
                    in_use[d as usize] = false;
                }
                if !children[u].is_empty() {
                    work.push(Step::Child(u, 0));
                }
            }
            Step::Child(u, i) => {
                let kids = &children[u];
                let (v, k) = kids[i];
                let last = i + 1 == kids.len();
                if !last {
                    work.push(Step::Child(u, i + 1));
                    work.push(Step::Close);
                    out.push('(');
                }
                out.push_str(bond_symbol(mol, u, v, k));
                work.push(Step::Enter(v));
            }
            Step::Close => out.push(')'),
        }
    }
}

fn push_digit(out: &mut String, d: u32) {
    if d < 10 {
        out.push(char::from(b'0' + d as u8));
    } else {
        out.push_str(&format!("%{d:02}"));
    }
}

fn bond_symbol(mol: &MolGraph, u: usize, v: usize, k: usize) -> &'static str {
    let both_aromatic = mol.atom(u).aromatic && mol.atom(v).aromatic;
    match mol.bonds()[k].order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic if both_aromatic => "",
        BondOrder::Aromatic => ":",
    }
}

fn atom_token(mol: &MolGraph, i: usize, maps: bool) -> String {
    let a = mol.atom(i);
    let h = mol.total_h()[i];
    let sym = if a.aromatic {
        a.symbol().to_ascii_lowercase()
    } else {
        a.symbol().to_string()
    };
    let bond_sum: u8 = mol
        .neighbors(i)
        .iter()
        .map(|&(_, k)| mol.bonds()[k].order.valence())
        .sum();
    let implicit = Atom {
        explicit_h: None,
        ..a.clone()
    };
    let organic = element::is_organic_subset(a.element)
        && a.charge == 0
        && a.isotope.is_none()
        && !(maps && a.map_num.is_some())
        && (!a.aromatic || matches!(a.element, 5..=8 | 15 | 16))
        && hydrogen_count(&implicit, bond_sum) == h;
    if organic {
        return sym;
    }
    let mut s = String::from("[");
    if let Some(iso) = a.isotope {
        s.push_str(&iso.to_string());
    }
    s.push_str(&sym);
    match h {
        0 => {}
        1 => s.push('H'),
        _ => s.push_str(&format!("H{h}")),
    }
    match a.charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        c if c > 0 => s.push_str(&format!("+{c}")),
        c => s.push_str(&format!("-{}", -c)),
    }
    if maps {
        if let Some(m) = a.map_num {
            s.push_str(&format!(":{m}"));
        }
    }
    s.push(']');
    s
}
