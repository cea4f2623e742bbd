//! Descriptor indices and initial node/edge embeddings.

use std::sync::Arc;

use chem::{AlignedReaction, MolGraph, ATOM_DESCRIPTOR_SIZES, BOND_DESCRIPTOR_SIZES};
use ndiff::{ParamId, ParamStore, Tape, Var};

use crate::error::Result;
use crate::nn::Init;

/// A molecular graph lowered to index arrays. Each bond `k` yields directed
/// edges `2k` (`a -> b`) and `2k + 1` (`b -> a`).
#[derive(Clone, Debug, PartialEq)]
pub struct GraphInput {
    pub n: usize,
    /// Row-major `n x 9`.
    pub atom_idx: Vec<usize>,
    /// Row-major `bonds x 3`.
    pub bond_idx: Vec<usize>,
    pub src: Arc<[usize]>,
    pub dst: Arc<[usize]>,
    pub edge_bond: Arc<[usize]>,
}

impl GraphInput {
    pub fn new(mol: &MolGraph) -> Result<Self> {
        let mut atom_idx = Vec::with_capacity(mol.num_atoms() * 9);
        for i in 0..mol.num_atoms() {
            atom_idx.extend(mol.atom_descriptors(i)?);
        }
        let mut bond_idx = Vec::with_capacity(mol.num_bonds() * 3);
        let (mut src, mut dst, mut edge_bond) = (Vec::new(), Vec::new(), Vec::new());
        for (k, b) in mol.bonds().iter().enumerate() {
            bond_idx.extend(mol.bond_descriptors(k));
            src.extend([b.a, b.b]);
            dst.extend([b.b, b.a]);
            edge_bond.extend([k, k]);
        }
        Ok(GraphInput {
            n: mol.num_atoms(),
            atom_idx,
            bond_idx,
            src: src.into(),
            dst: dst.into(),
            edge_bond: edge_bond.into(),
        })
    }

    pub fn num_edges(&self) -> usize {
        self.src.len()
    }
}

/// Everything the model reads from one aligned reaction.
#[derive(Clone, Debug, PartialEq)]
pub struct ReactionInput {
    pub reactant: GraphInput,
    pub product: GraphInput,
    /// Mapped pairs; reactant rows `m..` are the leaving group.
    pub m: usize,
    /// Reaction-center flags over `[reactant atoms | product atoms]`.
    pub rc: Vec<bool>,
    pub conditions: Vec<GraphInput>,
}

impl ReactionInput {
    pub fn new(rxn: &AlignedReaction) -> Result<Self> {
        let mut rc = rxn.rc.reactant.clone();
        rc.extend(&rxn.rc.product);
        Ok(ReactionInput {
            reactant: GraphInput::new(&rxn.reactant)?,
            product: GraphInput::new(&rxn.product)?,
            m: rxn.pair_count(),
            rc,
            conditions: rxn.condition_mols.iter().map(GraphInput::new).collect::<Result<_>>()?,
        })
    }

    pub fn num_atoms(&self) -> usize {
        self.reactant.n + self.product.n
    }
}

/// One learnable table per descriptor; a row's feature is the sum of its
/// descriptor embeddings.
#[derive(Clone, Debug)]
pub struct Embeddings {
    pub atom: Vec<ParamId>,
    pub bond: Vec<ParamId>,
}

impl Embeddings {
    pub fn new(init: &mut Init, name: &str, d: usize) -> Result<Self> {
        let atom = ATOM_DESCRIPTOR_SIZES
            .iter()
            .enumerate()
            .map(|(k, &size)| init.xavier(&format!("{name}.atom{k}"), size, d))
            .collect::<Result<_>>()?;
        let bond = BOND_DESCRIPTOR_SIZES
            .iter()
            .enumerate()
            .map(|(k, &size)| init.xavier(&format!("{name}.bond{k}"), size, d))
            .collect::<Result<_>>()?;
        Ok(Embeddings { atom, bond })
    }

    pub fn param_count(d: usize) -> usize {
        (ATOM_DESCRIPTOR_SIZES.iter().sum::<usize>() + BOND_DESCRIPTOR_SIZES.iter().sum::<usize>()) * d
    }

    pub fn nodes<'t>(&self, t: &'t Tape, s: &ParamStore, g: &GraphInput) -> Result<Var<'t>> {
        let tables: Vec<Var> = self.atom.iter().map(|&id| t.param(s, id)).collect();
        Ok(t.embedding_lookup_sum(&tables, &g.atom_idx)?)
    }

    /// One row per bond.
    pub fn bonds<'t>(&self, t: &'t Tape, s: &ParamStore, g: &GraphInput) -> Result<Var<'t>> {
        let tables: Vec<Var> = self.bond.iter().map(|&id| t.param(s, id)).collect();
        Ok(t.embedding_lookup_sum(&tables, &g.bond_idx)?)
    }

    /// Initial node features and directed edge features.
    pub fn init_features<'t>(&self, t: &'t Tape, s: &ParamStore, g: &GraphInput) -> Result<(Var<'t>, Var<'t>)> {
        let h = self.nodes(t, s, g)?;
        let e = self.bonds(t, s, g)?.gather_rows(g.edge_bond.clone())?;
        Ok((h, e))
    }
}
