//! Training configuration as a plain `key = value` file.
//!
//! ```text
//! # comments start with '#'
//! preset = yield_bh
//! epochs = 40
//! data = buchwald_hartwig.csv
//! ```
//!
//! `preset` (or `task`) must come first; later keys override its defaults.

use serde::{Deserialize, Serialize};

use crate::error::{RalignError, Result};
use ralign_data::Schema;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    ConditionPredict,
    ConditionGenerate,
    Yield,
    Selectivity,
}

impl Task {
    pub fn parse(s: &str) -> Option<Task> {
        match s {
            "condition_predict" => Some(Task::ConditionPredict),
            "condition_generate" => Some(Task::ConditionGenerate),
            "yield" => Some(Task::Yield),
            "selectivity" => Some(Task::Selectivity),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::ConditionPredict => "condition_predict",
            Task::ConditionGenerate => "condition_generate",
            Task::Yield => "yield",
            Task::Selectivity => "selectivity",
        }
    }

    /// Sequence output (conditions) rather than a scalar.
    pub fn is_sequence(self) -> bool {
        matches!(self, Task::ConditionPredict | Task::ConditionGenerate)
    }

    pub fn schema(self) -> Schema {
        match self {
            Task::ConditionPredict => Schema::Condition,
            Task::ConditionGenerate => Schema::Generation,
            Task::Yield => Schema::Yield,
            Task::Selectivity => Schema::Selectivity,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: Task,
    pub hidden: usize,
    /// Encoder blocks.
    pub layers: usize,
    /// Sequence decoder layers (unused by scalar tasks).
    pub dec_layers: usize,
    pub heads: usize,
    pub dropout: f64,
    /// Peak learning rate.
    pub lr: f64,
    pub warmup_epochs: usize,
    /// Per-epoch decay after warmup.
    pub gamma: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub clip_norm: f64,
    /// Condition-encoder layers (scalar tasks).
    pub cond_layers: usize,
    /// Maximum generated tokens, end token included.
    pub max_len: usize,
    pub beam: usize,
    pub no_fusion: bool,
    pub vanilla_xattn: bool,
    /// Dataset CSV, relative to the data root when not absolute.
    pub data: Option<String>,
    /// `random:train:valid:test`, `column`, or `file:<path>`.
    pub split: String,
}

impl TrainConfig {
    /// Named defaults. Epoch counts are not published; the values here are
    /// working guesses.
    pub fn preset(name: &str) -> Option<TrainConfig> {
        let base = TrainConfig {
            task: Task::Yield,
            hidden: 128,
            layers: 3,
            dec_layers: 0,
            heads: 8,
            dropout: 0.1,
            lr: 1e-4,
            warmup_epochs: 2,
            gamma: 0.99,
            batch_size: 16,
            epochs: 100,
            seed: 0,
            clip_norm: 5.0,
            cond_layers: 3,
            max_len: 6,
            beam: 10,
            no_fusion: false,
            vanilla_xattn: false,
            data: None,
            split: "random:0.7:0.1:0.2".into(),
        };
        let seq = TrainConfig {
            hidden: 512,
            layers: 6,
            dec_layers: 6,
            lr: 1.25e-4,
            batch_size: 32,
            epochs: 50,
            split: "column".into(),
            ..base.clone()
        };
        Some(match name {
            "condition_predict" | "condition" => TrainConfig {
                task: Task::ConditionPredict,
                ..seq
            },
            "condition_generate" | "generation" => TrainConfig {
                task: Task::ConditionGenerate,
                max_len: 160,
                ..seq
            },
            "yield" | "yield_bh" => base,
            "selectivity" | "selectivity_ch" => TrainConfig {
                task: Task::Selectivity,
                layers: 5,
                dropout: 0.0,
                lr: 5e-4,
                ..base
            },
            "selectivity_thiol" => TrainConfig {
                task: Task::Selectivity,
                dropout: 0.0,
                lr: 5e-5,
                ..base
            },
            _ => return None,
        })
    }

    pub fn parse(text: &str) -> Result<TrainConfig> {
        let mut cfg: Option<TrainConfig> = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| RalignError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            match (&mut cfg, key) {
                (None, "preset" | "task") => {
                    cfg = Some(
                        TrainConfig::preset(value)
                            .ok_or_else(|| RalignError::Config(format!("unknown {key} {value:?}")))?,
                    );
                }
                (None, _) => {
                    return Err(RalignError::Config(format!("line {}: `preset` or `task` must come first", lineno + 1)))
                }
                (Some(c), _) => c.set(key, value)?,
            }
        }
        let cfg = cfg.ok_or_else(|| RalignError::Config("missing `preset` or `task`".into()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| RalignError::Config(format!("{key}: cannot parse {v:?}")))
        }
        match key {
            "task" => {
                self.task = Task::parse(value).ok_or_else(|| RalignError::Config(format!("unknown task {value:?}")))?
            }
            "hidden" => self.hidden = num(key, value)?,
            "layers" => self.layers = num(key, value)?,
            "dec_layers" => self.dec_layers = num(key, value)?,
            "heads" => self.heads = num(key, value)?,
            "dropout" => self.dropout = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "warmup_epochs" => self.warmup_epochs = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "clip_norm" => self.clip_norm = num(key, value)?,
            "cond_layers" => self.cond_layers = num(key, value)?,
            "max_len" => self.max_len = num(key, value)?,
            "beam" => self.beam = num(key, value)?,
            "no_fusion" => self.no_fusion = num(key, value)?,
            "vanilla_xattn" => self.vanilla_xattn = num(key, value)?,
            "data" => self.data = Some(value.to_string()),
            "split" => self.split = value.to_string(),
            _ => return Err(RalignError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(RalignError::Config(msg));
        if self.hidden == 0 || self.layers == 0 || self.heads == 0 || self.batch_size == 0 {
            return bad("hidden, layers, heads and batch_size must be positive".into());
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return bad(format!("heads {} must divide hidden {}", self.heads, self.hidden));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.lr > 0.0) || !(self.gamma > 0.0) || !(self.clip_norm > 0.0) {
            return bad("lr, gamma and clip_norm must be positive".into());
        }
        if self.task.is_sequence() && (self.dec_layers == 0 || self.max_len == 0 || self.beam == 0) {
            return bad("sequence tasks need dec_layers, max_len and beam > 0".into());
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("task = {}\n", self.task.name());
        let mut kv = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        kv("hidden", self.hidden.to_string());
        kv("layers", self.layers.to_string());
        kv("dec_layers", self.dec_layers.to_string());
        kv("heads", self.heads.to_string());
        kv("dropout", self.dropout.to_string());
        kv("lr", self.lr.to_string());
        kv("warmup_epochs", self.warmup_epochs.to_string());
        kv("gamma", self.gamma.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("epochs", self.epochs.to_string());
        kv("seed", self.seed.to_string());
        kv("clip_norm", self.clip_norm.to_string());
        kv("cond_layers", self.cond_layers.to_string());
        kv("max_len", self.max_len.to_string());
        kv("beam", self.beam.to_string());
        kv("no_fusion", self.no_fusion.to_string());
        kv("vanilla_xattn", self.vanilla_xattn.to_string());
        if let Some(d) = &self.data {
            kv("data", d.clone());
        }
        kv("split", self.split.clone());
        s
    }
}
