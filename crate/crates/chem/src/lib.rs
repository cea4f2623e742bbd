//! Molecules and reactions: SMILES parsing, canonical forms, tokenization,
//! atom alignment, reaction centers and reagent rules.

mod align;
mod canon;
pub mod element;
mod error;
mod mol;
mod reaction;
mod reagent;
mod selectivity;
mod smiles;
pub mod synth;
mod tokenize;

pub use align::{align_atoms, detect_reaction_centers, AlignedReaction, RcSet};
pub use canon::{canonical_form, write_mapped};
pub use error::{ChemError, Result};
pub use mol::{
    hydrogen_count, Atom, Bond, BondOrder, BondStereo, Chirality, MolGraph,
    ATOM_DESCRIPTOR_SIZES, BOND_DESCRIPTOR_SIZES,
};
pub use reaction::{parse_reaction, Reaction};
pub use reagent::{classify_reagent, order_reagents, ReagentType};
pub use selectivity::{
    ddg_to_ratio, ratio_to_ddg, SelectivityTarget, DEFAULT_TEMPERATURE, GAS_CONSTANT,
};
pub use smiles::parse_smiles;
pub use tokenize::tokenize_smiles;
