use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DataError, Result};
use crate::ingest::DatasetRow;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn parse(tag: &str) -> Option<Split> {
        match tag.trim().to_ascii_lowercase().as_str() {
            "train" => Some(Split::Train),
            "valid" | "val" | "validation" | "dev" => Some(Split::Valid),
            "test" => Some(Split::Test),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SplitSpec {
    /// Seeded random split in the given proportions.
    Ratio { train: f64, valid: f64, test: f64, seed: u64 },
    /// Use each row's `split` column.
    Column,
    /// One tag per row, in row order.
    Tags(Vec<Split>),
}

pub fn make_splits(rows: &[DatasetRow], spec: &SplitSpec) -> Result<Vec<Split>> {
    match spec {
        SplitSpec::Ratio { train, valid, test, seed } => ratio_split(rows.len(), *train, *valid, *test, *seed),
        SplitSpec::Column => rows
            .iter()
            .map(|r| {
                r.split
                    .as_deref()
                    .and_then(Split::parse)
                    .ok_or_else(|| match &r.split {
                        Some(tag) => DataError::Split(format!("line {}: unknown split tag {tag:?}", r.line)),
                        None => DataError::Split(format!("line {}: no split column value", r.line)),
                    })
            })
            .collect(),
        SplitSpec::Tags(tags) => {
            if tags.len() != rows.len() {
                return Err(DataError::Split(format!("{} tags for {} rows", tags.len(), rows.len())));
            }
            Ok(tags.clone())
        }
    }
}

fn ratio_split(n: usize, train: f64, valid: f64, test: f64, seed: u64) -> Result<Vec<Split>> {
    let total = train + valid + test;
    if [train, valid, test].iter().any(|&x| !(x >= 0.0)) || total <= 0.0 {
        return Err(DataError::Split(format!("bad ratio {train}:{valid}:{test}")));
    }
    let n_test = (n as f64 * test / total).round() as usize;
    let n_valid = ((n as f64 * valid / total).round() as usize).min(n - n_test);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![Split::Train; n];
    for &i in &order[..n_test] {
        out[i] = Split::Test;
    }
    for &i in &order[n_test..n_test + n_valid] {
        out[i] = Split::Valid;
    }
    Ok(out)
}

/// A split file holds one tag (`train`, `valid`, `test`) per line.
pub fn read_split_file(path: &Path) -> Result<Vec<Split>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| Split::parse(l).ok_or_else(|| DataError::Split(format!("line {}: {l:?}", i + 1))))
        .collect()
}
