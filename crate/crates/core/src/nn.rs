//! Parameterised layers shared by the encoder and decoders.

use std::sync::Arc;

use ndiff::{DropoutKey, ParamId, ParamStore, Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{RalignError, Result};

pub const LN_EPS: f64 = 1e-5;
pub const LEAKY_SLOPE: f64 = 0.2;

/// Deterministic parameter construction. Registration order fixes both
/// the random draws and the checkpoint layout.
pub struct Init {
    pub store: ParamStore,
    rng: ChaCha8Rng,
    sites: u64,
}

impl Init {
    pub fn new(seed: u64) -> Self {
        Init {
            store: ParamStore::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            sites: 0,
        }
    }

    pub fn xavier(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Result<ParamId> {
        let t = Tensor::xavier(fan_in, fan_out, &mut self.rng);
        Ok(self.store.add(name, t)?)
    }

    pub fn uniform(&mut self, name: &str, rows: usize, cols: usize, bound: f64) -> Result<ParamId> {
        let t = Tensor::uniform(rows, cols, bound, &mut self.rng);
        Ok(self.store.add(name, t)?)
    }

    pub fn filled(&mut self, name: &str, rows: usize, cols: usize, value: f64) -> Result<ParamId> {
        Ok(self.store.add(name, Tensor::filled(rows, cols, value))?)
    }

    /// A fresh dropout site id.
    pub fn site(&mut self) -> u64 {
        self.sites += 1;
        self.sites
    }

    pub fn finish(self) -> ParamStore {
        self.store
    }
}

/// Per-forward settings: train/eval mode and the dropout key fields.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ctx {
    pub train: bool,
    pub dropout: f64,
    pub seed: u64,
    pub step: u64,
    pub sample: u64,
}

impl Ctx {
    pub fn eval() -> Ctx {
        Ctx {
            train: false,
            dropout: 0.0,
            seed: 0,
            step: 0,
            sample: 0,
        }
    }

    pub fn drop<'t>(&self, x: Var<'t>, site: u64) -> Result<Var<'t>> {
        if !self.train || self.dropout == 0.0 {
            return Ok(x);
        }
        let key = DropoutKey {
            seed: self.seed,
            layer: site,
            step: self.step,
            sample: self.sample,
        };
        Ok(x.dropout(self.dropout, true, key)?)
    }
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
}

impl Linear {
    pub fn new(init: &mut Init, name: &str, fan_in: usize, fan_out: usize, bias: bool) -> Result<Self> {
        let w = init.xavier(&format!("{name}.w"), fan_in, fan_out)?;
        let b = if bias {
            Some(init.filled(&format!("{name}.b"), 1, fan_out, 0.0)?)
        } else {
            None
        };
        Ok(Linear { w, b })
    }

    pub fn forward<'t>(&self, t: &'t Tape, s: &ParamStore, x: Var<'t>) -> Result<Var<'t>> {
        let y = x.matmul(t.param(s, self.w))?;
        match self.b {
            Some(b) => Ok(y.add_bias(t.param(s, b))?),
            None => Ok(y),
        }
    }
}

/// Linear, ReLU, Linear.
#[derive(Clone, Debug)]
pub struct Ffn {
    pub l1: Linear,
    pub l2: Linear,
}

impl Ffn {
    pub fn new(init: &mut Init, name: &str, fan_in: usize, hidden: usize, fan_out: usize) -> Result<Self> {
        Ok(Ffn {
            l1: Linear::new(init, &format!("{name}.l1"), fan_in, hidden, true)?,
            l2: Linear::new(init, &format!("{name}.l2"), hidden, fan_out, true)?,
        })
    }

    /// Scalar count of an `i -> h -> o` block.
    pub fn param_count(fan_in: usize, hidden: usize, fan_out: usize) -> usize {
        fan_in * hidden + hidden + hidden * fan_out + fan_out
    }

    pub fn forward<'t>(&self, t: &'t Tape, s: &ParamStore, x: Var<'t>) -> Result<Var<'t>> {
        let h = self.l1.forward(t, s, x)?.relu();
        self.l2.forward(t, s, h)
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn new(init: &mut Init, name: &str, d: usize) -> Result<Self> {
        Ok(LayerNorm {
            gain: init.filled(&format!("{name}.g"), 1, d, 1.0)?,
            bias: init.filled(&format!("{name}.b"), 1, d, 0.0)?,
        })
    }

    pub fn forward<'t>(&self, t: &'t Tape, s: &ParamStore, x: Var<'t>) -> Result<Var<'t>> {
        Ok(x.layer_norm(t.param(s, self.gain), t.param(s, self.bias), LN_EPS)?)
    }
}

/// Multi-head attention without biases: `[o_1 | ... | o_h] W_O` with
/// `o_i = softmax(Q W_Q^i (K W_K^i)^T / sqrt(d_k)) V W_V^i`.
#[derive(Clone, Debug)]
pub struct Mha {
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub wo: ParamId,
    pub heads: usize,
    pub d: usize,
}

/// Attention output plus the per-head weight matrices (queries x keys).
pub struct Attended<'t> {
    pub out: Var<'t>,
    pub weights: Vec<Arc<Tensor>>,
}

impl Mha {
    pub fn new(init: &mut Init, name: &str, d: usize, heads: usize) -> Result<Self> {
        if heads == 0 || !d.is_multiple_of(heads) {
            return Err(RalignError::Config(format!("{heads} heads do not divide width {d}")));
        }
        Ok(Mha {
            wq: init.xavier(&format!("{name}.wq"), d, d)?,
            wk: init.xavier(&format!("{name}.wk"), d, d)?,
            wv: init.xavier(&format!("{name}.wv"), d, d)?,
            wo: init.xavier(&format!("{name}.wo"), d, d)?,
            heads,
            d,
        })
    }

    pub fn param_count(d: usize) -> usize {
        4 * d * d
    }

    /// Heads `masked_from..` apply `mask` (row-major, queries x keys);
    /// earlier heads see every key.
    pub fn attend<'t>(
        &self,
        t: &'t Tape,
        s: &ParamStore,
        q: Var<'t>,
        kv: Var<'t>,
        mask: Option<&[bool]>,
        masked_from: usize,
    ) -> Result<Attended<'t>> {
        let dk = self.d / self.heads;
        let scale = 1.0 / (dk as f64).sqrt();
        let qp = q.matmul(t.param(s, self.wq))?;
        let kp = kv.matmul(t.param(s, self.wk))?;
        let vp = kv.matmul(t.param(s, self.wv))?;
        let mut outs = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = qp.slice(1, h * dk, dk)?;
            let kh = kp.slice(1, h * dk, dk)?;
            let vh = vp.slice(1, h * dk, dk)?;
            let logits = qh.matmul(kh.transpose()?)?.scale(scale);
            let alpha = match mask {
                Some(m) if h >= masked_from => logits.masked_softmax(1, m)?,
                _ => logits.softmax(1)?,
            };
            weights.push(alpha.value());
            outs.push(alpha.matmul(vh)?);
        }
        let out = t.concat(&outs, 1)?.matmul(t.param(s, self.wo))?;
        Ok(Attended { out, weights })
    }
}

/// Sinusoidal position table, `len x d`.
pub fn positional_encoding(len: usize, d: usize) -> Tensor {
    let mut data = vec![0.0; len * d];
    for pos in 0..len {
        for i in 0..d {
            let rate = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let angle = pos as f64 * rate;
            data[pos * d + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    Tensor::matrix(len, d, data).expect("shape matches data")
}
