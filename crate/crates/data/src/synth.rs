//! Synthetic corpora in the ingest CSV layouts.

use std::io::Write;

use chem::synth::{generate, SynthReaction};

use crate::error::Result;
use crate::ingest::{ingest_reader, DatasetRow, Schema};

/// Selectivity stand-in derived from the synthetic yield, in kcal/mol.
pub fn synthetic_ddg(r: &SynthReaction) -> f64 {
    (r.yield_pct - 50.0) / 20.0
}

pub fn write_csv<W: Write>(w: W, reactions: &[SynthReaction], schema: Schema) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let header: &[&str] = match schema {
        Schema::Condition => &["mapped_rxn", "catalyst1", "solvent1", "solvent2", "reagent1", "reagent2"],
        Schema::Generation => &["mapped_rxn"],
        Schema::Yield => &["mapped_rxn", "conditions", "yield"],
        Schema::Selectivity => &["mapped_rxn", "conditions", "ddg"],
    };
    out.write_record(header)?;
    for r in reactions {
        let present: Vec<&str> = r.conditions.iter().flatten().map(String::as_str).collect();
        let record: Vec<String> = match schema {
            Schema::Condition => std::iter::once(r.reaction.clone())
                .chain(r.conditions.iter().map(|c| c.clone().unwrap_or_default()))
                .collect(),
            Schema::Generation => {
                let (lhs, rhs) = r.reaction.split_once(">>").expect("synthetic reactions use '>>'");
                vec![format!("{lhs}>{}>{rhs}", present.join("."))]
            }
            Schema::Yield => vec![r.reaction.clone(), present.join("."), format!("{}", r.yield_pct)],
            Schema::Selectivity => vec![r.reaction.clone(), present.join("."), format!("{}", synthetic_ddg(r))],
        };
        out.write_record(&record)?;
    }
    out.flush()?;
    Ok(())
}

/// `count` synthetic rows ingested under `schema`.
pub fn synthetic_rows(schema: Schema, count: usize, seed: u64) -> Result<Vec<DatasetRow>> {
    let mut buf = Vec::new();
    write_csv(&mut buf, &generate(count, seed), schema)?;
    Ok(ingest_reader(buf.as_slice(), schema)?.rows)
}
