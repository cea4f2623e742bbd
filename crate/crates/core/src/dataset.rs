//! Locating datasets and partitioning rows by a split description.

use std::path::{Path, PathBuf};

use ralign_data::{ingest, make_splits, read_split_file, DatasetRow, Ingested, Split, SplitSpec};

use crate::config::TrainConfig;
use crate::error::{RalignError, Result};

pub const DATA_ROOT_ENV: &str = "RALIGN_DATA_ROOT";

pub fn data_root() -> Option<PathBuf> {
    std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from)
}

/// Absolute paths are used as given; relative ones are joined to `root`.
pub fn resolve(path: &str, root: Option<&Path>) -> PathBuf {
    let p = Path::new(path);
    match root {
        Some(r) if p.is_relative() => r.join(p),
        _ => p.to_path_buf(),
    }
}

/// `random:train:valid:test[:seed]`, `column`, or `file:<path>`.
/// Random splits without an explicit seed use `seed`.
pub fn parse_split(text: &str, seed: u64, root: Option<&Path>) -> Result<SplitSpec> {
    let bad = || RalignError::Config(format!("bad split {text:?}"));
    if text == "column" {
        return Ok(SplitSpec::Column);
    }
    if let Some(path) = text.strip_prefix("file:") {
        return Ok(SplitSpec::Tags(read_split_file(&resolve(path, root))?));
    }
    let parts: Vec<&str> = text.strip_prefix("random:").ok_or_else(bad)?.split(':').collect();
    if !(3..=4).contains(&parts.len()) {
        return Err(bad());
    }
    let f = |s: &str| s.parse::<f64>().map_err(|_| bad());
    Ok(SplitSpec::Ratio {
        train: f(parts[0])?,
        valid: f(parts[1])?,
        test: f(parts[2])?,
        seed: match parts.get(3) {
            Some(s) => s.parse().map_err(|_| bad())?,
            None => seed,
        },
    })
}

#[derive(Clone, Debug, Default)]
pub struct Partition {
    pub train: Vec<DatasetRow>,
    pub valid: Vec<DatasetRow>,
    pub test: Vec<DatasetRow>,
}

impl Partition {
    pub fn get(&self, split: Split) -> &[DatasetRow] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }
}

pub fn partition(rows: Vec<DatasetRow>, spec: &SplitSpec) -> Result<Partition> {
    let tags = make_splits(&rows, spec)?;
    let mut out = Partition::default();
    for (row, tag) in rows.into_iter().zip(tags) {
        match tag {
            Split::Train => out.train.push(row),
            Split::Valid => out.valid.push(row),
            Split::Test => out.test.push(row),
        }
    }
    Ok(out)
}

/// Ingest the configured dataset with the task's schema.
pub fn load(cfg: &TrainConfig, root: Option<&Path>) -> Result<Ingested> {
    let path = cfg
        .data
        .as_deref()
        .ok_or_else(|| RalignError::Config("no dataset configured (set data=...)".into()))?;
    let path = resolve(path, root);
    if !path.exists() {
        return Err(RalignError::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("dataset not found: {}", path.display()),
        )));
    }
    Ok(ingest(&path, cfg.task.schema())?)
}

/// Load and split the configured dataset.
pub fn load_partition(cfg: &TrainConfig, root: Option<&Path>) -> Result<(Partition, Ingested)> {
    let mut ing = load(cfg, root)?;
    let spec = parse_split(&cfg.split, cfg.seed, root)?;
    let rows = std::mem::take(&mut ing.rows);
    Ok((partition(rows, &spec)?, ing))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_strings() {
        assert!(matches!(parse_split("column", 0, None).unwrap(), SplitSpec::Column));
        match parse_split("random:0.8:0.1:0.1", 7, None).unwrap() {
            SplitSpec::Ratio { train, seed, .. } => assert_eq!((train, seed), (0.8, 7)),
            other => panic!("{other:?}"),
        }
        match parse_split("random:0.8:0.1:0.1:3", 7, None).unwrap() {
            SplitSpec::Ratio { seed, .. } => assert_eq!(seed, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse_split("random:0.8", 0, None).is_err());
        assert!(parse_split("halves", 0, None).is_err());
    }

    #[test]
    fn relative_paths_join_root() {
        assert_eq!(resolve("a.csv", Some(Path::new("/d"))), PathBuf::from("/d/a.csv"));
        assert_eq!(resolve("/x/a.csv", Some(Path::new("/d"))), PathBuf::from("/x/a.csv"));
    }
}
