//! Inference over dataset rows and scoring.

use std::collections::HashMap;

use ralign_data::{reaction_key, regression_metrics, Combo, DatasetRow, RegressionMetrics, TopkReport};
use serde::Serialize;

use crate::config::Task;
use crate::error::{RalignError, Result};
use crate::features::ReactionInput;
use crate::model::{Head, Model};
use crate::vocab::decode_combo;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EvalReport {
    Topk(TopkReport),
    Regression(RegressionMetrics),
}

/// Model output for one row.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Prediction {
    Ranked(Vec<RankedCombo>),
    Value(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankedCombo {
    pub molecules: Vec<Option<String>>,
    pub score: f64,
}

fn combo_molecules(c: &Combo) -> Vec<Option<String>> {
    match c {
        Combo::Slots(s) => s.to_vec(),
        Combo::Reagents(r) => r.iter().cloned().map(Some).collect(),
    }
}

/// Top-`k` combinations in rank order.
pub fn predict_combos(model: &Model, row: &DatasetRow, k: usize) -> Result<Vec<(Combo, f64)>> {
    let vocab = model
        .vocab
        .as_ref()
        .ok_or_else(|| RalignError::Config("model has no vocabulary".into()))?;
    let x = ReactionInput::new(&row.aligned)?;
    let slots = model.cfg.task == Task::ConditionPredict;
    Ok(model
        .predict_sequences(&x, k)?
        .into_iter()
        .map(|h| (decode_combo(vocab, &h.tokens, slots), h.score()))
        .collect())
}

pub fn predict_row(model: &Model, row: &DatasetRow, k: usize) -> Result<Prediction> {
    match model.head {
        Head::Seq(_) => Ok(Prediction::Ranked(
            predict_combos(model, row, k)?
                .iter()
                .map(|(c, s)| RankedCombo {
                    molecules: combo_molecules(c),
                    score: *s,
                })
                .collect(),
        )),
        Head::Pooled(_) => Ok(Prediction::Value(model.predict_value(&ReactionInput::new(&row.aligned)?)?)),
    }
}

/// Reference combinations per row: every recorded combination of rows
/// sharing the row's canonical reaction.
pub fn grouped_references(rows: &[DatasetRow]) -> Vec<Vec<Combo>> {
    let keys: Vec<String> = rows.iter().map(|r| reaction_key(&r.aligned)).collect();
    let mut groups: HashMap<&str, Vec<Combo>> = HashMap::new();
    for (r, k) in rows.iter().zip(&keys) {
        if let Some(c) = r.target.combo() {
            let g = groups.entry(k.as_str()).or_default();
            if !g.contains(&c) {
                g.push(c);
            }
        }
    }
    keys.iter().map(|k| groups.get(k.as_str()).cloned().unwrap_or_default()).collect()
}

pub fn evaluate(model: &Model, rows: &[DatasetRow], ks: &[usize]) -> Result<EvalReport> {
    match model.head {
        Head::Seq(_) => {
            let kmax = ks.iter().copied().max().unwrap_or(1);
            let preds = rows
                .iter()
                .map(|r| Ok(predict_combos(model, r, kmax)?.into_iter().map(|(c, _)| c).collect()))
                .collect::<Result<Vec<Vec<Combo>>>>()?;
            let refs = grouped_references(rows);
            Ok(EvalReport::Topk(TopkReport::compute(&preds, &refs, ks)?))
        }
        Head::Pooled(_) => {
            let mut preds = Vec::with_capacity(rows.len());
            let mut targets = Vec::with_capacity(rows.len());
            for r in rows {
                let t = r
                    .target
                    .value()
                    .ok_or_else(|| RalignError::Config("row has no scalar target".into()))?;
                preds.push(model.predict_value(&ReactionInput::new(&r.aligned)?)?);
                targets.push(t);
            }
            Ok(EvalReport::Regression(regression_metrics(&preds, &targets)?))
        }
    }
}
