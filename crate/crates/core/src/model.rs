//! Task pipelines: encoder plus sequence decoder for condition tasks,
//! encoder plus condition encoder, adapter and pooled head for scalar tasks.

use std::sync::Arc;

use ndiff::{ParamStore, Tape, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::beam::{beam_search, log_softmax, Hypothesis, StepScorer};
use crate::config::TrainConfig;
use crate::decoder::{PooledHead, SeqDecoder};
use crate::encoder::{CondEncoder, Encoder, EncoderFlags};
use crate::error::{RalignError, Result};
use crate::features::ReactionInput;
use crate::nn::{Ctx, Init};
use crate::vocab::{Vocab, BOS, EOS};

#[derive(Clone, Debug)]
pub enum Head {
    Seq(SeqDecoder),
    Pooled(PooledHead),
}

/// Mean and standard deviation used to z-score regression targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: f64,
    pub std: f64,
}

impl Scaler {
    pub fn fit(values: &[f64]) -> Scaler {
        if values.is_empty() {
            return Scaler { mean: 0.0, std: 1.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        Scaler { mean, std }
    }

    pub fn scale(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn unscale(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExampleTarget {
    /// Token ids ending with the end token.
    Tokens(Vec<usize>),
    /// Standardised scalar.
    Value(f64),
}

#[derive(Clone, Debug)]
pub struct Model {
    pub cfg: TrainConfig,
    pub store: ParamStore,
    pub vocab: Option<Vocab>,
    pub scaler: Option<Scaler>,
    pub encoder: Encoder,
    pub cond: Option<CondEncoder>,
    pub head: Head,
}

/// Per-layer node features and cross-attention weights for inspection.
pub struct Trace {
    /// `(H_R, H_P)` after each encoder block.
    pub layers: Vec<(Arc<Tensor>, Arc<Tensor>)>,
    /// Cross-attention weights: per decoder layer (one entry for the pooled
    /// head), per head, `queries x (n + m)`.
    pub attention: Vec<Vec<Arc<Tensor>>>,
    /// Decoded token ids (sequence tasks) or the unscaled prediction.
    pub tokens: Vec<usize>,
    pub value: Option<f64>,
}

impl Model {
    pub fn new(cfg: &TrainConfig, vocab: Option<Vocab>) -> Result<Model> {
        cfg.validate()?;
        let d = cfg.hidden;
        let mut init = Init::new(cfg.seed);
        let scalar = !cfg.task.is_sequence();
        let flags = EncoderFlags {
            no_fusion: cfg.no_fusion,
            adapter: scalar,
        };
        let encoder = Encoder::new(&mut init, d, cfg.layers, cfg.heads, flags)?;
        let (cond, head) = if scalar {
            let cond = CondEncoder::new(&mut init, d, cfg.cond_layers)?;
            let head = PooledHead::new(&mut init, d, cfg.heads, cfg.vanilla_xattn)?;
            (Some(cond), Head::Pooled(head))
        } else {
            let v = vocab
                .as_ref()
                .ok_or_else(|| RalignError::Config("sequence task needs a vocabulary".into()))?;
            v.check()?;
            let dec = SeqDecoder::new(&mut init, d, cfg.dec_layers, cfg.heads, v.len(), cfg.vanilla_xattn)?;
            (None, Head::Seq(dec))
        };
        Ok(Model {
            cfg: cfg.clone(),
            store: init.finish(),
            vocab,
            scaler: None,
            encoder,
            cond,
            head,
        })
    }

    pub fn param_count(&self) -> usize {
        self.store.num_scalars()
    }

    fn ctx_dropout(&self, ctx: &Ctx) -> Ctx {
        Ctx {
            dropout: if ctx.train { self.cfg.dropout } else { 0.0 },
            ..*ctx
        }
    }

    /// Encoder output rows `[H_R; H_P]` and the per-layer features.
    pub fn encode<'t>(&self, t: &'t Tape, x: &ReactionInput, ctx: &Ctx) -> Result<(Var<'t>, Vec<(Var<'t>, Var<'t>)>)> {
        let ctx = self.ctx_dropout(ctx);
        let cond = match &self.cond {
            Some(c) => c.encode(t, &self.store, &x.conditions)?,
            None => None,
        };
        let enc = self.encoder.encode(t, &self.store, x, cond, &ctx)?;
        let (hr, hp) = enc.last();
        Ok((t.concat(&[hr, hp], 0)?, enc.layers))
    }

    pub fn loss<'t>(&self, t: &'t Tape, x: &ReactionInput, target: &ExampleTarget, ctx: &Ctx) -> Result<Var<'t>> {
        let (memory, _) = self.encode(t, x, ctx)?;
        let ctx = self.ctx_dropout(ctx);
        match (&self.head, target) {
            (Head::Seq(dec), ExampleTarget::Tokens(ids)) => {
                let mut input = vec![BOS];
                input.extend(&ids[..ids.len() - 1]);
                let out = dec.forward(t, &self.store, &input, memory, &x.rc, &ctx)?;
                let targets: Vec<Option<usize>> = ids.iter().map(|&i| Some(i)).collect();
                Ok(out.logits.cross_entropy(&targets)?)
            }
            (Head::Pooled(head), ExampleTarget::Value(v)) => {
                let pred = head.forward(t, &self.store, memory, &x.rc)?.value;
                Ok(pred.mse(t.constant(Tensor::scalar(*v)))?)
            }
            _ => Err(RalignError::Config("target kind does not match the task".into())),
        }
    }

    /// Standardised scalar prediction.
    pub fn predict_z(&self, x: &ReactionInput) -> Result<f64> {
        let Head::Pooled(head) = &self.head else {
            return Err(RalignError::Config("scalar prediction on a sequence model".into()));
        };
        let t = Tape::new();
        let (memory, _) = self.encode(&t, x, &Ctx::eval())?;
        Ok(head.forward(&t, &self.store, memory, &x.rc)?.value.value().item())
    }

    /// Prediction in target units.
    pub fn predict_value(&self, x: &ReactionInput) -> Result<f64> {
        let z = self.predict_z(x)?;
        Ok(self.scaler.map_or(z, |s| s.unscale(z)))
    }

    /// Ranked token sequences (without the begin token).
    pub fn predict_sequences(&self, x: &ReactionInput, k: usize) -> Result<Vec<Hypothesis>> {
        let scorer = self.scorer(x)?;
        beam_search(&scorer, EOS, self.cfg.beam.max(k), self.cfg.max_len, k)
    }

    pub fn scorer<'a>(&'a self, x: &'a ReactionInput) -> Result<ModelScorer<'a>> {
        let Head::Seq(dec) = &self.head else {
            return Err(RalignError::Config("sequence prediction on a scalar model".into()));
        };
        let t = Tape::new();
        let (memory, _) = self.encode(&t, x, &Ctx::eval())?;
        Ok(ModelScorer {
            model: self,
            dec,
            rc: &x.rc,
            memory: memory.value(),
        })
    }

    /// Run inference and keep intermediate features and attention weights.
    pub fn trace(&self, x: &ReactionInput) -> Result<Trace> {
        let t = Tape::new();
        let (memory, layers) = self.encode(&t, x, &Ctx::eval())?;
        let layers = layers.iter().map(|(r, p)| (r.value(), p.value())).collect();
        match &self.head {
            Head::Seq(dec) => {
                let best = self
                    .predict_sequences(x, 1)?
                    .into_iter()
                    .next()
                    .map(|h| h.tokens)
                    .unwrap_or_default();
                let mut input = vec![BOS];
                input.extend(best.iter().copied().filter(|&i| i != EOS));
                let out = dec.forward(&t, &self.store, &input, memory, &x.rc, &Ctx::eval())?;
                Ok(Trace {
                    layers,
                    attention: out.cross_weights,
                    tokens: best,
                    value: None,
                })
            }
            Head::Pooled(head) => {
                let out = head.forward(&t, &self.store, memory, &x.rc)?;
                let z = out.value.value().item();
                Ok(Trace {
                    layers,
                    attention: vec![out.weights],
                    tokens: Vec::new(),
                    value: Some(self.scaler.map_or(z, |s| s.unscale(z))),
                })
            }
        }
    }
}

/// Next-token scorer over a fixed encoded reaction.
pub struct ModelScorer<'a> {
    model: &'a Model,
    dec: &'a SeqDecoder,
    rc: &'a [bool],
    memory: Arc<Tensor>,
}

impl StepScorer for ModelScorer<'_> {
    fn log_probs(&self, prefix: &[usize]) -> Result<Vec<f64>> {
        let t = Tape::new();
        let memory = t.constant((*self.memory).clone());
        let mut input = vec![BOS];
        input.extend(prefix);
        let out = self
            .dec
            .forward(&t, &self.model.store, &input, memory, self.rc, &Ctx::eval())?;
        let logits = out.logits.value();
        Ok(log_softmax(logits.row_slice(input.len() - 1)))
    }
}
