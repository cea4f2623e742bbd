//! Reaction SMILES `reactants>reagents>products`.

use crate::error::{ChemError, Result};
use crate::mol::MolGraph;
use crate::smiles::parse_smiles;

#[derive(Clone, Debug, PartialEq)]
pub struct Reaction {
    pub reactants: Vec<MolGraph>,
    pub reagents: Vec<MolGraph>,
    pub products: Vec<MolGraph>,
}

/// Parse `A>B>C`, optionally followed by a ` |f:i.j,...|` fragment-grouping
/// extension. Grouped fragments (ion clusters) become one graph placed at
/// the position of the group's first member.
pub fn parse_reaction(text: &str) -> Result<Reaction> {
    let text = text.trim();
    let (body, ext) = match text.split_once(char::is_whitespace) {
        Some((b, e)) => (b, Some(e.trim())),
        None => (text, None),
    };
    let segments: Vec<&str> = body.split('>').collect();
    if segments.len() != 3 {
        return Err(ChemError::Reaction(format!(
            "expected exactly two '>' separators, found {}",
            segments.len() - 1
        )));
    }
    if segments[0].is_empty() {
        return Err(ChemError::Reaction("empty reactant segment".into()));
    }
    if segments[2].is_empty() {
        return Err(ChemError::Reaction("empty product segment".into()));
    }

    let mut frags: Vec<(usize, &str)> = Vec::new();
    for (s, seg) in segments.iter().enumerate() {
        if !seg.is_empty() {
            frags.extend(seg.split('.').map(|f| (s, f)));
        }
    }
    let groups = match ext {
        Some(e) => fragment_groups(e, frags.len())?,
        None => Vec::new(),
    };
    let mut group_of: Vec<Option<usize>> = vec![None; frags.len()];
    for (g, members) in groups.iter().enumerate() {
        let seg = frags[members[0]].0;
        for &m in members {
            if frags[m].0 != seg {
                return Err(ChemError::Reaction(format!(
                    "fragment group {members:?} spans reaction segments"
                )));
            }
            group_of[m] = Some(g);
        }
    }

    let mut out = [Vec::new(), Vec::new(), Vec::new()];
    for (i, &(seg, smi)) in frags.iter().enumerate() {
        match group_of[i] {
            Some(g) if groups[g][0] != i => continue,
            Some(g) => {
                let parts = groups[g]
                    .iter()
                    .map(|&m| parse_smiles(frags[m].1))
                    .collect::<Result<Vec<_>>>()?;
                out[seg].push(MolGraph::merge(&parts)?);
            }
            None => out[seg].push(parse_smiles(smi)?),
        }
    }
    let [reactants, reagents, products] = out;
    Ok(Reaction {
        reactants,
        reagents,
        products,
    })
}

fn fragment_groups(ext: &str, count: usize) -> Result<Vec<Vec<usize>>> {
    let inner = ext
        .strip_prefix('|')
        .and_then(|s| s.strip_suffix('|'))
        .ok_or_else(|| ChemError::Reaction(format!("malformed extension {ext:?}")))?;
    let mut groups = Vec::new();
    let mut in_f = false;
    for field in inner.split(',').filter(|f| !f.is_empty()) {
        // Groups continue across ',' until another `key:` field starts.
        let group = if let Some(rest) = field.strip_prefix("f:") {
            in_f = true;
            rest
        } else if field.contains(':') {
            in_f = false;
            continue;
        } else if in_f {
            field
        } else {
            continue;
        };
        let mut members = group
            .split('.')
            .map(|x| {
                x.parse::<usize>()
                    .ok()
                    .filter(|&i| i < count)
                    .ok_or_else(|| ChemError::Reaction(format!("bad fragment index {x:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        members.sort_unstable();
        groups.push(members);
    }
    Ok(groups)
}
