//! Molecular graph types, hydrogen counting, ring and conjugation flags.

use std::collections::HashSet;

use crate::element;
use crate::error::{ChemError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Chirality {
    #[default]
    None,
    Anticlockwise,
    Clockwise,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    /// Atomic number, 1..=118.
    pub element: u8,
    pub charge: i8,
    /// Hydrogen count written inside brackets. `None` for organic-subset
    /// atoms, whose hydrogens are implicit.
    pub explicit_h: Option<u8>,
    pub map_num: Option<u32>,
    pub aromatic: bool,
    pub isotope: Option<u16>,
    pub chirality: Chirality,
}

impl Atom {
    pub fn new(element: u8) -> Self {
        Atom {
            element,
            charge: 0,
            explicit_h: None,
            map_num: None,
            aromatic: false,
            isotope: None,
            chirality: Chirality::None,
        }
    }

    pub fn symbol(&self) -> &'static str {
        element::symbol(self.element)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to an atom's bond-order sum; aromatic counts 1.
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn is_multiple(self) -> bool {
        !matches!(self, BondOrder::Single)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum BondStereo {
    #[default]
    None,
    Up,
    Down,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub stereo: BondStereo,
    pub in_ring: bool,
    pub conjugated: bool,
}

impl Bond {
    pub fn new(a: usize, b: usize, order: BondOrder) -> Self {
        Bond {
            a,
            b,
            order,
            stereo: BondStereo::None,
            in_ring: false,
            conjugated: false,
        }
    }

    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// An undirected simple graph of atoms and bonds with derived hydrogen
/// counts and ring/conjugation flags. Construct through [`MolGraph::new`],
/// which validates and derives everything.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    total_h: Vec<u8>,
    /// `adj[i]` lists `(neighbor, bond index)`.
    adj: Vec<Vec<(usize, usize)>>,
}

impl MolGraph {
    pub fn new(atoms: Vec<Atom>, mut bonds: Vec<Bond>) -> Result<Self> {
        let n = atoms.len();
        let mut adj = vec![Vec::new(); n];
        let mut seen = HashSet::new();
        for (k, bond) in bonds.iter().enumerate() {
            if bond.a >= n || bond.b >= n || bond.a == bond.b {
                return Err(ChemError::Graph(format!(
                    "bond {k} has endpoints ({}, {}) for {n} atoms",
                    bond.a, bond.b
                )));
            }
            if !seen.insert((bond.a.min(bond.b), bond.a.max(bond.b))) {
                return Err(ChemError::Graph(format!(
                    "duplicate bond between atoms {} and {}",
                    bond.a, bond.b
                )));
            }
            adj[bond.a].push((bond.b, k));
            adj[bond.b].push((bond.a, k));
        }
        let mut maps = HashSet::new();
        for atom in &atoms {
            if atom.element == 0 || atom.element > 118 {
                return Err(ChemError::Graph(format!("invalid element {}", atom.element)));
            }
            if let Some(m) = atom.map_num {
                if !maps.insert(m) {
                    return Err(ChemError::DuplicateMap(m));
                }
            }
        }

        let bridges = find_bridges(n, &bonds, &adj);
        for (k, bond) in bonds.iter_mut().enumerate() {
            bond.in_ring = !bridges[k];
        }
        for (i, atom) in atoms.iter().enumerate() {
            if atom.aromatic && !adj[i].iter().any(|&(_, k)| bonds[k].in_ring) {
                return Err(ChemError::Graph(format!(
                    "aromatic atom {i} ({}) is not in a ring",
                    atom.symbol()
                )));
            }
        }
        let has_multiple: Vec<bool> = (0..n)
            .map(|i| adj[i].iter().any(|&(_, k)| bonds[k].order.is_multiple()))
            .collect();
        for bond in bonds.iter_mut() {
            bond.conjugated = bond.order == BondOrder::Aromatic
                || (has_multiple[bond.a] && has_multiple[bond.b]);
        }

        let total_h = (0..n)
            .map(|i| {
                let sum: u8 = adj[i].iter().map(|&(_, k)| bonds[k].order.valence()).sum();
                hydrogen_count(&atoms[i], sum)
            })
            .collect();
        Ok(MolGraph {
            atoms,
            bonds,
            total_h,
            adj,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn num_bonds(&self) -> usize {
        self.bonds.len()
    }

    /// Explicit plus implicit hydrogens per atom.
    pub fn total_h(&self) -> &[u8] {
        &self.total_h
    }

    /// `(neighbor, bond index)` pairs of atom `i`.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adj[a]
            .iter()
            .find(|&&(j, _)| j == b)
            .map(|&(_, k)| &self.bonds[k])
    }

    /// Whether the atom lies on at least one ring.
    pub fn atom_in_ring(&self, i: usize) -> bool {
        self.adj[i].iter().any(|&(_, k)| self.bonds[k].in_ring)
    }

    pub fn has_ring(&self) -> bool {
        self.bonds.iter().any(|b| b.in_ring)
    }

    /// Connected components, each as ascending atom indices, ordered by their
    /// smallest atom.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![start];
            comp[start] = id;
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adj[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = id;
                        members.push(v);
                        stack.push(v);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Disjoint union, preserving atom order fragment by fragment.
    pub fn merge(parts: &[MolGraph]) -> Result<MolGraph> {
        let mut atoms = Vec::new();
        let mut bonds = Vec::new();
        for part in parts {
            let off = atoms.len();
            atoms.extend(part.atoms.iter().cloned());
            bonds.extend(part.bonds.iter().map(|b| Bond {
                a: b.a + off,
                b: b.b + off,
                ..b.clone()
            }));
        }
        MolGraph::new(atoms, bonds)
    }

    /// Reorder atoms so new atom `k` is old atom `order[k]`. Bonds are
    /// normalised to `a < b` and sorted.
    pub fn permuted(&self, order: &[usize]) -> Result<MolGraph> {
        let n = self.atoms.len();
        let mut inv = vec![usize::MAX; n];
        for (k, &old) in order.iter().enumerate() {
            if old >= n || inv[old] != usize::MAX {
                return Err(ChemError::Graph("order is not a permutation".into()));
            }
            inv[old] = k;
        }
        if order.len() != n {
            return Err(ChemError::Graph("order is not a permutation".into()));
        }
        let atoms = order.iter().map(|&i| self.atoms[i].clone()).collect();
        let mut bonds: Vec<Bond> = self
            .bonds
            .iter()
            .map(|b| {
                let (x, y) = (inv[b.a], inv[b.b]);
                Bond {
                    a: x.min(y),
                    b: x.max(y),
                    ..b.clone()
                }
            })
            .collect();
        bonds.sort_by_key(|b| (b.a, b.b));
        MolGraph::new(atoms, bonds)
    }

    /// Copy with all map numbers removed.
    pub fn without_maps(&self) -> MolGraph {
        let mut g = self.clone();
        for a in &mut g.atoms {
            a.map_num = None;
        }
        g
    }

    /// Sub-graph induced by `atoms` (in the given order).
    pub fn subgraph(&self, atoms: &[usize]) -> Result<MolGraph> {
        let mut inv = vec![usize::MAX; self.atoms.len()];
        for (k, &i) in atoms.iter().enumerate() {
            inv[i] = k;
        }
        let picked = atoms.iter().map(|&i| self.atoms[i].clone()).collect();
        let bonds = self
            .bonds
            .iter()
            .filter(|b| inv[b.a] != usize::MAX && inv[b.b] != usize::MAX)
            .map(|b| Bond {
                a: inv[b.a],
                b: inv[b.b],
                ..b.clone()
            })
            .collect();
        MolGraph::new(picked, bonds)
    }

    pub fn contains_element(&self, z: u8) -> bool {
        self.atoms.iter().any(|a| a.element == z)
    }
}

/// Hydrogens for an atom given its bond-order sum (aromatic bonds count 1).
///
/// Bracket atoms carry exactly their written count. Organic-subset atoms
/// take the smallest standard valence that accommodates the bonds; aromatic
/// atoms add one for the delocalised bond and use only their lowest valence.
pub fn hydrogen_count(atom: &Atom, bond_sum: u8) -> u8 {
    if let Some(h) = atom.explicit_h {
        return h;
    }
    let vals = element::valences(atom.element);
    if atom.aromatic {
        let used = bond_sum + 1;
        return vals.first().map_or(0, |&v| v.saturating_sub(used));
    }
    vals.iter()
        .find(|&&v| v >= bond_sum)
        .map_or(0, |&v| v - bond_sum)
}

/// Tarjan bridge finding; `true` marks a bridge.
fn find_bridges(n: usize, bonds: &[Bond], adj: &[Vec<(usize, usize)>]) -> Vec<bool> {
    let mut bridge = vec![false; bonds.len()];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut time = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (vertex, bond used to enter, next adjacency position)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = time;
        low[root] = time;
        time += 1;
        while let Some(&mut (u, via, ref mut pos)) = stack.last_mut() {
            if *pos < adj[u].len() {
                let (v, k) = adj[u][*pos];
                *pos += 1;
                if k == via {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = time;
                    low[v] = time;
                    time += 1;
                    stack.push((v, k, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        bridge[via] = true;
                    }
                }
            }
        }
    }
    bridge
}

/// Sizes of the nine atom descriptor tables.
pub const ATOM_DESCRIPTOR_SIZES: [usize; 9] = [119, 11, 9, 9, 2, 2, 2, 3, 1];
/// Sizes of the three bond descriptor tables.
pub const BOND_DESCRIPTOR_SIZES: [usize; 3] = [4, 3, 2];

fn bounded(what: &'static str, value: i64, offset: i64, size: usize) -> Result<usize> {
    let idx = value + offset;
    if idx < 0 || idx as usize >= size {
        return Err(ChemError::Descriptor { what, value, size });
    }
    Ok(idx as usize)
}

impl MolGraph {
    /// Element, formal charge, degree, total H, aromatic, in-ring, isotope
    /// flag, charge sign, radical placeholder.
    pub fn atom_descriptors(&self, i: usize) -> Result<[usize; 9]> {
        let a = &self.atoms[i];
        let s = &ATOM_DESCRIPTOR_SIZES;
        Ok([
            bounded("element", a.element as i64, 0, s[0])?,
            bounded("formal charge", a.charge as i64, 5, s[1])?,
            bounded("degree", self.degree(i) as i64, 0, s[2])?,
            bounded("total H", self.total_h[i] as i64, 0, s[3])?,
            a.aromatic as usize,
            self.atom_in_ring(i) as usize,
            a.isotope.is_some() as usize,
            (a.charge.signum() + 1) as usize,
            0,
        ])
    }

    /// Bond order, stereo, conjugated.
    pub fn bond_descriptors(&self, k: usize) -> [usize; 3] {
        let b = &self.bonds[k];
        [b.order.index(), b.stereo as usize, b.conjugated as usize]
    }
}
