//! Optimisation loop.

use ndiff::{Adam, ParamGrads, Tape};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ralign_data::{DatasetRow, Target};
use serde::{Deserialize, Serialize};

use crate::config::{Task, TrainConfig};
use crate::error::{RalignError, Result};
use crate::features::ReactionInput;
use crate::model::{ExampleTarget, Model, Scaler};
use crate::nn::Ctx;
use crate::vocab::{encode_target, target_tokens, Vocab};

/// Linear warmup from 0 to `lr` over `warmup_epochs`, then
/// `lr * gamma^(whole epochs since warmup)`.
pub fn lr_schedule(step: usize, steps_per_epoch: usize, cfg: &TrainConfig) -> f64 {
    let epoch = step as f64 / steps_per_epoch.max(1) as f64;
    let warm = cfg.warmup_epochs as f64;
    if epoch < warm {
        cfg.lr * epoch / warm
    } else {
        cfg.lr * cfg.gamma.powi((epoch - warm).floor() as i32)
    }
}

#[derive(Clone, Debug)]
pub struct Example {
    pub input: ReactionInput,
    pub target: ExampleTarget,
}

fn check_target(task: Task, target: &Target) -> Result<()> {
    let ok = matches!(
        (task, target),
        (Task::ConditionPredict, Target::Slots(_))
            | (Task::ConditionGenerate, Target::Reagents(_))
            | (Task::Yield, Target::Yield(_))
            | (Task::Selectivity, Target::Selectivity(_))
    );
    if ok {
        Ok(())
    } else {
        Err(RalignError::Config(format!("row target does not fit task {}", task.name())))
    }
}

pub fn build_vocab(rows: &[DatasetRow]) -> Result<Vocab> {
    let mut tokens = Vec::new();
    for r in rows {
        tokens.extend(target_tokens(&r.target)?);
    }
    Ok(Vocab::build(tokens))
}

pub fn prepare(model: &Model, rows: &[DatasetRow]) -> Result<Vec<Example>> {
    rows.iter()
        .map(|r| {
            check_target(model.cfg.task, &r.target)?;
            let target = match (&model.vocab, r.target.value()) {
                (_, Some(v)) => ExampleTarget::Value(model.scaler.map_or(v, |s| s.scale(v))),
                (Some(vocab), None) => ExampleTarget::Tokens(encode_target(vocab, &r.target)?),
                (None, None) => return Err(RalignError::Config("sequence target without vocabulary".into())),
            };
            Ok(Example {
                input: ReactionInput::new(&r.aligned)?,
                target,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
    pub lr: f64,
    pub max_grad_norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

pub struct TrainOutcome {
    pub model: Model,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (1-based).
    pub best_epoch: usize,
}

/// Fresh model for `train`: vocabulary and target scaling come from the
/// training rows.
pub fn init_model(cfg: &TrainConfig, train: &[DatasetRow]) -> Result<Model> {
    let vocab = if cfg.task.is_sequence() {
        Some(build_vocab(train)?)
    } else {
        None
    };
    let mut model = Model::new(cfg, vocab)?;
    if !cfg.task.is_sequence() {
        let values: Vec<f64> = train.iter().filter_map(|r| r.target.value()).collect();
        model.scaler = Some(Scaler::fit(&values));
    }
    Ok(model)
}

pub fn train_task(train: &[DatasetRow], valid: &[DatasetRow], cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_task_with(train, valid, cfg, |_, _| Control::Continue)
}

/// Train with a per-epoch callback. With a validation set the parameters
/// of the lowest-validation-loss epoch are kept; otherwise the last
/// epoch's.
pub fn train_task_with<F>(train: &[DatasetRow], valid: &[DatasetRow], cfg: &TrainConfig, on_epoch: F) -> Result<TrainOutcome>
where
    F: FnMut(&Model, &EpochRecord) -> Control,
{
    let model = init_model(cfg, train)?;
    fit(model, train, valid, on_epoch)
}

/// Continue optimising an existing model.
pub fn fit<F>(mut model: Model, train: &[DatasetRow], valid: &[DatasetRow], mut on_epoch: F) -> Result<TrainOutcome>
where
    F: FnMut(&Model, &EpochRecord) -> Control,
{
    let cfg = model.cfg.clone();
    let train_ex = prepare(&model, train)?;
    let valid_ex = prepare(&model, valid)?;
    if train_ex.is_empty() {
        return Err(RalignError::Config("empty training set".into()));
    }

    // Batches of similar size: sort by atom count, then chunk.
    let mut order: Vec<usize> = (0..train_ex.len()).collect();
    order.sort_by_key(|&i| (train_ex[i].input.num_atoms(), i));
    let mut batches: Vec<Vec<usize>> = order.chunks(cfg.batch_size).map(<[usize]>::to_vec).collect();
    let steps_per_epoch = batches.len();

    let mut adam = Adam::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ndiff::ParamStore)> = None;
    let mut step = 0usize;

    for epoch in 1..=cfg.epochs {
        batches.shuffle(&mut rng);
        let mut total = 0.0;
        let mut max_norm: f64 = 0.0;
        let mut lr = 0.0;
        for batch in &batches {
            let mut grads = ParamGrads::new(&model.store);
            for &i in batch {
                let ctx = Ctx {
                    train: true,
                    dropout: cfg.dropout,
                    seed: cfg.seed,
                    step: step as u64,
                    sample: i as u64,
                };
                let t = Tape::new();
                let loss = model.loss(&t, &train_ex[i].input, &train_ex[i].target, &ctx)?;
                let value = loss.value().item();
                if !value.is_finite() {
                    return Err(RalignError::Diverged { epoch, step });
                }
                total += value;
                grads.accumulate(&t.backward(loss)?);
            }
            grads.scale(1.0 / batch.len() as f64);
            let norm = grads.clip_global_norm(cfg.clip_norm);
            if !norm.is_finite() {
                return Err(RalignError::Diverged { epoch, step });
            }
            max_norm = max_norm.max(norm);
            lr = lr_schedule(step, steps_per_epoch, &cfg);
            adam.step(&mut model.store, &grads, lr)?;
            step += 1;
        }
        let valid_loss = if valid_ex.is_empty() {
            None
        } else {
            Some(mean_loss(&model, &valid_ex)?)
        };
        let record = EpochRecord {
            epoch,
            train_loss: total / train_ex.len() as f64,
            valid_loss,
            lr,
            max_grad_norm: max_norm,
        };
        log::info!(
            "epoch {epoch}: train {:.5} valid {} lr {lr:.3e}",
            record.train_loss,
            valid_loss.map_or("-".into(), |v| format!("{v:.5}"))
        );
        if let Some(v) = valid_loss {
            if best.as_ref().is_none_or(|b| v < b.0) {
                best = Some((v, epoch, model.store.clone()));
            }
        }
        let control = on_epoch(&model, &record);
        history.push(record);
        if control == Control::Stop {
            break;
        }
    }
    let best_epoch = match best {
        Some((_, epoch, store)) => {
            model.store = store;
            epoch
        }
        None => history.len(),
    };
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
    })
}

pub fn mean_loss(model: &Model, examples: &[Example]) -> Result<f64> {
    let mut total = 0.0;
    for ex in examples {
        let t = Tape::new();
        total += model.loss(&t, &ex.input, &ex.target, &Ctx::eval())?.value().item();
    }
    Ok(total / examples.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_shape() {
        let cfg = TrainConfig::preset("yield").unwrap();
        let spe = 10;
        assert_eq!(lr_schedule(0, spe, &cfg), 0.0);
        assert_eq!(lr_schedule(2 * spe, spe, &cfg), cfg.lr);
        assert!((lr_schedule(3 * spe, spe, &cfg) - 0.99 * cfg.lr).abs() < 1e-18);
        assert!((lr_schedule(spe, spe, &cfg) - 0.5 * cfg.lr).abs() < 1e-18);
    }
}
