//! Output vocabularies for condition sequences.

use std::collections::HashMap;

use chem::tokenize_smiles;
use ralign_data::{normalize_molecule, Combo, Target};
use serde::{Deserialize, Serialize};

use crate::error::{RalignError, Result};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const NONE: usize = 3;
pub const UNK: usize = 4;
pub const SPECIALS: [&str; 5] = ["<pad>", "<bos>", "<eos>", "<none>", "<unk>"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Specials first, then tokens by descending frequency, ties in
    /// lexical order.
    pub fn build<I, S>(items: I) -> Vocab
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for it in items {
            let s = it.as_ref();
            if !SPECIALS.contains(&s) {
                *counts.entry(s.to_string()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let tokens = SPECIALS
            .iter()
            .map(|s| s.to_string())
            .chain(ranked.into_iter().map(|(t, _)| t))
            .collect::<Vec<_>>();
        Vocab::from(tokens)
    }

    pub fn check(&self) -> Result<()> {
        if self.tokens.len() < SPECIALS.len() || self.tokens[..SPECIALS.len()] != SPECIALS {
            return Err(RalignError::Checkpoint("vocabulary lacks the special tokens".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map(String::as_str).unwrap_or(SPECIALS[UNK])
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Surface tokens of a sequence target, end token excluded.
pub fn target_tokens(target: &Target) -> Result<Vec<String>> {
    match target {
        Target::Slots(slots) => Ok(slots
            .iter()
            .map(|s| s.clone().unwrap_or_else(|| SPECIALS[NONE].to_string()))
            .collect()),
        Target::Reagents(r) => {
            if r.is_empty() {
                return Ok(Vec::new());
            }
            Ok(tokenize_smiles(&r.join("."))?)
        }
        _ => Err(RalignError::Config("scalar target has no token form".into())),
    }
}

/// Token ids ending with the end token.
pub fn encode_target(vocab: &Vocab, target: &Target) -> Result<Vec<usize>> {
    let mut ids: Vec<usize> = target_tokens(target)?.iter().map(|t| vocab.id(t)).collect();
    ids.push(EOS);
    Ok(ids)
}

/// Interpret generated ids (no begin token) as a condition combination.
pub fn decode_combo(vocab: &Vocab, ids: &[usize], slots: bool) -> Combo {
    let body: Vec<usize> = ids.iter().copied().take_while(|&i| i != EOS).collect();
    if slots {
        Combo::Slots(std::array::from_fn(|k| match body.get(k) {
            Some(&id) if id >= SPECIALS.len() => Some(vocab.token(id).to_string()),
            _ => None,
        }))
    } else {
        let text: String = body
            .iter()
            .filter(|&&i| i >= SPECIALS.len())
            .map(|&i| vocab.token(i))
            .collect();
        Combo::Reagents(text.split('.').filter_map(normalize_molecule).collect())
    }
}
