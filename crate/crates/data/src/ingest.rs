//! CSV ingestion. Rows that fail to parse or align are quarantined with a
//! reason instead of aborting the load.
//!
//! Column schemas (header names, any order, extra columns ignored):
//!
//! | schema      | required                                                      | optional             |
//! |-------------|---------------------------------------------------------------|----------------------|
//! | condition   | `mapped_rxn,catalyst1,solvent1,solvent2,reagent1,reagent2`    | `split`, `dataset`   |
//! | generation  | `mapped_rxn`                                                  | `split`, `dataset`   |
//! | yield       | `mapped_rxn,conditions,yield`                                 | `split`, `dataset`   |
//! | selectivity | `mapped_rxn,conditions` and one of `ddg`, `ratio`             | `temperature`, `split`, `dataset` |
//!
//! `conditions` holds '.'-separated SMILES of condition molecules.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use chem::{
    align_atoms, canonical_form, order_reagents, parse_reaction, parse_smiles, AlignedReaction,
    ChemError, MolGraph, SelectivityTarget, DEFAULT_TEMPERATURE,
};
use serde::Serialize;

use crate::error::{DataError, Result};
use crate::metrics::Combo;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Schema {
    Condition,
    Generation,
    Yield,
    Selectivity,
}

impl Schema {
    pub fn parse(name: &str) -> Option<Schema> {
        match name {
            "condition" => Some(Schema::Condition),
            "generation" => Some(Schema::Generation),
            "yield" => Some(Schema::Yield),
            "selectivity" => Some(Schema::Selectivity),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Schema::Condition => "condition",
            Schema::Generation => "generation",
            Schema::Yield => "yield",
            Schema::Selectivity => "selectivity",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    /// Catalyst, solvent 1, solvent 2, reagent 1, reagent 2.
    Slots([Option<String>; 5]),
    /// Ordered reagent molecules.
    Reagents(Vec<String>),
    /// Percent yield.
    Yield(f64),
    Selectivity(SelectivityTarget),
}

impl Target {
    /// Metric form. Reagent clusters are split into their fragments so
    /// that generated text, which carries no grouping, compares equal.
    pub fn combo(&self) -> Option<Combo> {
        match self {
            Target::Slots(s) => Some(Combo::Slots(s.clone())),
            Target::Reagents(r) => Some(Combo::Reagents(
                r.iter().flat_map(|m| m.split('.')).map(String::from).collect(),
            )),
            _ => None,
        }
    }

    /// Regression value: yield, or ddG in kcal/mol.
    pub fn value(&self) -> Option<f64> {
        match self {
            Target::Yield(y) => Some(*y),
            Target::Selectivity(s) => Some(s.ddg),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DatasetRow {
    /// 1-based data line (header excluded).
    pub line: usize,
    pub reaction: String,
    pub aligned: AlignedReaction,
    pub target: Target,
    pub split: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuarantineEntry {
    pub line: usize,
    pub reason: String,
    pub detail: String,
    pub raw: String,
}

#[derive(Clone, Debug, Default)]
pub struct Ingested {
    pub rows: Vec<DatasetRow>,
    pub quarantine: Vec<QuarantineEntry>,
}

impl Ingested {
    pub fn total(&self) -> usize {
        self.rows.len() + self.quarantine.len()
    }
}

pub fn ingest(path: &Path, schema: Schema) -> Result<Ingested> {
    ingest_reader(std::fs::File::open(path)?, schema)
}

pub fn ingest_reader<R: Read>(reader: R, schema: Schema) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| DataError::MissingColumn(name.to_string()));

    let rxn_col = need("mapped_rxn")?;
    let split_col = col("split");
    let slot_cols = match schema {
        Schema::Condition => Some(
            ["catalyst1", "solvent1", "solvent2", "reagent1", "reagent2"]
                .map(&need)
                .into_iter()
                .collect::<Result<Vec<_>>>()?,
        ),
        _ => None,
    };
    let cond_col = match schema {
        Schema::Yield | Schema::Selectivity => Some(need("conditions")?),
        _ => None,
    };
    let value_col = match schema {
        Schema::Yield => Some(("yield", need("yield")?)),
        Schema::Selectivity => match (col("ddg"), col("ratio")) {
            (Some(c), _) => Some(("ddg", c)),
            (None, Some(c)) => Some(("ratio", c)),
            (None, None) => return Err(DataError::MissingColumn("ddg or ratio".into())),
        },
        _ => None,
    };
    let temp_col = col("temperature");

    let mut out = Ingested::default();
    for (k, record) in rdr.records().enumerate() {
        let line = k + 1;
        let record = record?;
        let raw = record.iter().collect::<Vec<_>>().join(",");
        let field = |c: usize| record.get(c).unwrap_or("");
        let quarantine = |reason: &str, detail: String| QuarantineEntry {
            line,
            reason: reason.to_string(),
            detail,
            raw: raw.clone(),
        };

        let text = field(rxn_col).to_string();
        let aligned = match schema {
            Schema::Generation => relabel_and_align(&text),
            _ => parse_reaction(&text).and_then(|r| align_atoms(&r.reactants, &r.products).map(|a| (a, Vec::new()))),
        };
        let (mut aligned, reagents) = match aligned {
            Ok(x) => x,
            Err(e) => {
                out.quarantine.push(quarantine(chem_reason(&e), e.to_string()));
                continue;
            }
        };

        if let Some(c) = cond_col {
            match parse_conditions(field(c)) {
                Ok(mols) => {
                    aligned.condition_text = Some(field(c).to_string());
                    aligned.condition_mols = mols;
                }
                Err(e) => {
                    out.quarantine.push(quarantine("condition parse", e.to_string()));
                    continue;
                }
            }
        }

        let target = match schema {
            Schema::Condition => {
                let cols = slot_cols.as_ref().expect("condition schema has slot columns");
                Target::Slots(std::array::from_fn(|i| normalize_molecule(field(cols[i]))))
            }
            Schema::Generation => Target::Reagents(reagents),
            Schema::Yield | Schema::Selectivity => {
                let (kind, c) = value_col.expect("regression schema has a value column");
                let value = match field(c).parse::<f64>() {
                    Ok(v) if v.is_finite() => v,
                    _ => {
                        out.quarantine.push(quarantine("bad target", format!("{kind} = {:?}", field(c))));
                        continue;
                    }
                };
                if schema == Schema::Yield {
                    Target::Yield(value)
                } else {
                    let t = match temp_col.map(field).filter(|s| !s.is_empty()) {
                        Some(s) => match s.parse::<f64>() {
                            Ok(t) => t,
                            Err(_) => {
                                out.quarantine.push(quarantine("bad target", format!("temperature = {s:?}")));
                                continue;
                            }
                        },
                        None => DEFAULT_TEMPERATURE,
                    };
                    let sel = if kind == "ddg" {
                        SelectivityTarget::from_ddg(value, t)
                    } else {
                        SelectivityTarget::from_ratio(value, t)
                    };
                    match sel {
                        Ok(s) => Target::Selectivity(s),
                        Err(e) => {
                            out.quarantine.push(quarantine("bad target", e.to_string()));
                            continue;
                        }
                    }
                }
            }
        };

        out.rows.push(DatasetRow {
            line,
            reaction: text,
            aligned,
            target,
            split: split_col.map(|c| field(c).to_string()).filter(|s| !s.is_empty()),
        });
    }
    Ok(out)
}

fn chem_reason(e: &ChemError) -> &'static str {
    match e {
        ChemError::DuplicateMap(_) => "duplicate map",
        ChemError::UnmappedProductAtom { .. } => "unmapped product atom",
        ChemError::MissingReactantMap(_) => "missing reactant map",
        ChemError::Smiles { .. } | ChemError::Reaction(_) | ChemError::Graph(_) => "parse error",
        _ => "invalid reaction",
    }
}

fn parse_conditions(text: &str) -> chem::Result<Vec<MolGraph>> {
    text.split('.')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_smiles)
        .collect()
}

/// Reactant fragments sharing a map number with the products stay
/// reactants; the other fragments join the reagent list.
fn relabel_and_align(text: &str) -> chem::Result<(AlignedReaction, Vec<String>)> {
    let rxn = parse_reaction(text)?;
    let product_maps: HashSet<u32> = rxn
        .products
        .iter()
        .flat_map(|p| p.atoms().iter().filter_map(|a| a.map_num))
        .collect();
    let (reactants, mut reagents): (Vec<MolGraph>, Vec<MolGraph>) = rxn
        .reactants
        .into_iter()
        .partition(|m| m.atoms().iter().any(|a| a.map_num.is_some_and(|n| product_maps.contains(&n))));
    if reactants.is_empty() {
        return Err(ChemError::Reaction("no reactant shares atoms with the products".into()));
    }
    reagents.extend(rxn.reagents);
    let plain: Vec<MolGraph> = reagents.iter().map(MolGraph::without_maps).collect();
    let aligned = align_atoms(&reactants, &rxn.products)?;
    Ok((aligned, order_reagents(&plain)))
}

/// Align a single reaction typed by a user, following the ingest rules for
/// `schema`. For the regression schemas the middle `>..>` segment supplies
/// the condition molecules.
pub fn align_query(text: &str, schema: Schema) -> chem::Result<AlignedReaction> {
    if schema == Schema::Generation {
        return relabel_and_align(text).map(|(a, _)| a);
    }
    let rxn = parse_reaction(text)?;
    let mut aligned = align_atoms(&rxn.reactants, &rxn.products)?;
    if matches!(schema, Schema::Yield | Schema::Selectivity) {
        let body = text.split_whitespace().next().unwrap_or("");
        aligned.condition_text = body.split('>').nth(1).filter(|s| !s.is_empty()).map(String::from);
        aligned.condition_mols = rxn.reagents;
    }
    Ok(aligned)
}

/// Canonical SMILES of a condition entry; unparseable names are kept
/// verbatim, blanks become `None`.
pub fn normalize_molecule(text: &str) -> Option<String> {
    let t = text.trim();
    if t.is_empty() {
        return None;
    }
    Some(match parse_smiles(t) {
        Ok(m) => canonical_form(&m.without_maps()),
        Err(_) => t.to_string(),
    })
}

/// Map-free canonical `reactants>>products`, used to group rows that record
/// the same reaction.
pub fn reaction_key(a: &AlignedReaction) -> String {
    format!(
        "{}>>{}",
        canonical_form(&a.reactant.without_maps()),
        canonical_form(&a.product.without_maps())
    )
}

pub fn write_quarantine<W: Write>(mut w: W, entries: &[QuarantineEntry]) -> Result<()> {
    for e in entries {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn query_conditions_come_from_middle_segment() {
        let a = align_query("[CH3:1][Br:2].[OH2:3]>CCO.O>[CH3:1][OH:3]", Schema::Yield).unwrap();
        assert_eq!(a.condition_mols.len(), 2);
        assert_eq!(a.condition_text.as_deref(), Some("CCO.O"));
        let g = align_query("[CH3:1][Br:2].[OH2:3].CCO>>[CH3:1][OH:3]", Schema::Generation).unwrap();
        assert_eq!(g.reactant.num_atoms(), 3);
        let c = align_query("[CH3:1][Br:2].[OH2:3]>CCO>[CH3:1][OH:3]", Schema::Condition).unwrap();
        assert!(c.condition_mols.is_empty());
    }

    #[test]
    fn well_formed_rows() {
        let csv = "mapped_rxn,catalyst1,solvent1,solvent2,reagent1,reagent2,dataset\n\
            [CH3:1][Br:2].[OH2:3]>>[CH3:1][OH:3],,O,,,,t\n\
            [CH3:1][OH:2]>>[CH3:1][OH:2],[Pd],CO,OC,,,t\n\
            [CH3:1][C:2](=[O:3])Cl.[NH3:4]>>[NH2:4][C:2]([CH3:1])=[O:3],,ClCCl,,CCN(CC)CC,,t\n";
        let got = ingest_reader(csv.as_bytes(), Schema::Condition).unwrap();
        assert_eq!(got.rows.len(), 3);
        assert!(got.quarantine.is_empty());
        match &got.rows[1].target {
            Target::Slots(s) => {
                assert_eq!(s[0].as_deref(), Some("[Pd]"));
                assert_eq!(s[1], s[2]);
                assert_eq!(s[3], None);
            }
            t => panic!("{t:?}"),
        }
    }

    #[test]
    fn duplicate_maps_are_quarantined() {
        let csv = "mapped_rxn,yield,conditions\n\
            [CH3:1]O.[CH3:1]N>>[CH3:1]O,50,CCO\n\
            [CH3:1][OH:2]>>[CH3:1][OH:2],abc,\n\
            [CH3:1][OH:2]>>[CH3:1][OH:2],12.5,CCO.O\n";
        let got = ingest_reader(csv.as_bytes(), Schema::Yield).unwrap();
        assert_eq!(got.total(), 3);
        assert_eq!(got.quarantine[0].reason, "duplicate map");
        assert_eq!(got.quarantine[1].reason, "bad target");
        assert_eq!(got.rows[0].aligned.condition_mols.len(), 2);
        assert_eq!(got.rows[0].target.value(), Some(12.5));
        let mut buf = Vec::new();
        write_quarantine(&mut buf, &got.quarantine).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"reason\":\"duplicate map\""));
    }

    #[test]
    fn generation_relabels_unmapped_molecules() {
        let csv = "mapped_rxn\n\
            [CH3:1][Br:2].[OH2:3].[Na+].[OH-].C1CCOC1>>[CH3:1][OH:3] |f:2.3|\n";
        let got = ingest_reader(csv.as_bytes(), Schema::Generation).unwrap();
        assert!(got.quarantine.is_empty(), "{:?}", got.quarantine);
        let row = &got.rows[0];
        assert_eq!(row.aligned.reactant.num_atoms(), 3);
        assert_eq!(row.target, Target::Reagents(vec!["C1CCOC1".into(), "[Na+].[OH-]".into()]));
    }

    #[test]
    fn selectivity_from_ratio() {
        let csv = "mapped_rxn,conditions,ratio,temperature\n\
            [CH3:1][OH:2]>>[CH3:1][OH:2],,2.718281828459045,298.15\n\
            [CH3:1][OH:2]>>[CH3:1][OH:2],,-1,298.15\n";
        let got = ingest_reader(csv.as_bytes(), Schema::Selectivity).unwrap();
        assert_eq!(got.rows.len(), 1);
        let ddg = got.rows[0].target.value().unwrap();
        assert!((ddg - 0.5924848726).abs() < 1e-8);
        assert_eq!(got.quarantine[0].reason, "bad target");
    }

    #[test]
    fn missing_column_is_an_error() {
        assert!(matches!(
            ingest_reader("mapped_rxn\nC>>C\n".as_bytes(), Schema::Yield),
            Err(DataError::MissingColumn(_))
        ));
    }
}
