//! Regex SMILES tokenizer.

use std::sync::OnceLock;

use regex::Regex;

use crate::error::{ChemError, Result};

const PATTERN: &str =
    r"(\[[^\]]+\]|Br?|Cl?|N|O|S|P|F|I|b|c|n|o|s|p|\(|\)|\.|=|#|-|\+|\\|/|:|~|@|\?|>|\*|\$|%[0-9]{2}|[0-9])";

fn regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(PATTERN).expect("tokenizer pattern compiles"))
}

/// Split SMILES into atom, bond, branch and ring-closure tokens. The tokens
/// concatenate back to the input; any character the pattern cannot cover is
/// an error.
pub fn tokenize_smiles(text: &str) -> Result<Vec<String>> {
    let mut tokens = Vec::new();
    let mut cursor = 0;
    for m in regex().find_iter(text) {
        if m.start() != cursor {
            return Err(ChemError::Token {
                pos: cursor,
                residual: text[cursor..m.start()].to_string(),
            });
        }
        tokens.push(m.as_str().to_string());
        cursor = m.end();
    }
    if cursor != text.len() {
        return Err(ChemError::Token {
            pos: cursor,
            residual: text[cursor..].to_string(),
        });
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn palladium_chloride() {
        assert_eq!(tokenize_smiles("Cl[Pd]Cl").unwrap(), vec!["Cl", "[Pd]", "Cl"]);
    }

    #[test]
    fn benzene_has_eight_tokens() {
        assert_eq!(tokenize_smiles("c1ccccc1").unwrap().len(), 8);
    }

    #[test]
    fn percent_ring_numbers() {
        assert_eq!(tokenize_smiles("C%12CC%12").unwrap(), vec!["C", "%12", "C", "C", "%12"]);
    }

    #[test]
    fn residual_is_reported() {
        assert_eq!(
            tokenize_smiles("CCX").unwrap_err(),
            ChemError::Token {
                pos: 2,
                residual: "X".into()
            }
        );
        assert!(tokenize_smiles("C C").is_err());
    }
}
