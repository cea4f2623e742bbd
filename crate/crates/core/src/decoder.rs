//! Sequence decoder and pooled scalar head.

use std::sync::Arc;

use ndiff::{ParamId, ParamStore, Tape, Tensor, Var};

use crate::attention::rc_attention;
use crate::error::Result;
use crate::nn::{positional_encoding, Ctx, Ffn, Init, LayerNorm, Linear, Mha};

#[derive(Clone, Debug)]
pub struct DecoderLayer {
    pub self_attn: Mha,
    pub ln1: LayerNorm,
    pub cross: Mha,
    pub ln2: LayerNorm,
    pub ffn: Ffn,
    pub ln3: LayerNorm,
    site: u64,
}

/// Transformer decoder whose cross-attention is reaction-center aware.
#[derive(Clone, Debug)]
pub struct SeqDecoder {
    pub embed: ParamId,
    pub layers: Vec<DecoderLayer>,
    pub out: Linear,
    pub d: usize,
    pub vocab: usize,
    pub vanilla: bool,
}

pub struct DecoderOutput<'t> {
    /// `tokens x vocab`.
    pub logits: Var<'t>,
    /// Cross-attention weights per layer, per head (`tokens x memory`).
    pub cross_weights: Vec<Vec<Arc<Tensor>>>,
}

impl SeqDecoder {
    pub fn new(init: &mut Init, d: usize, layers: usize, heads: usize, vocab: usize, vanilla: bool) -> Result<Self> {
        let embed = init.xavier("dec.embed", vocab, d)?;
        let layers = (0..layers)
            .map(|k| {
                let name = format!("dec.layer{k}");
                let site = init.site();
                init.site();
                init.site();
                Ok(DecoderLayer {
                    self_attn: Mha::new(init, &format!("{name}.self"), d, heads)?,
                    ln1: LayerNorm::new(init, &format!("{name}.ln1"), d)?,
                    cross: Mha::new(init, &format!("{name}.cross"), d, heads)?,
                    ln2: LayerNorm::new(init, &format!("{name}.ln2"), d)?,
                    ffn: Ffn::new(init, &format!("{name}.ffn"), d, 2 * d, d)?,
                    ln3: LayerNorm::new(init, &format!("{name}.ln3"), d)?,
                    site,
                })
            })
            .collect::<Result<_>>()?;
        let out = Linear::new(init, "dec.out", d, vocab, true)?;
        Ok(SeqDecoder {
            embed,
            layers,
            out,
            d,
            vocab,
            vanilla,
        })
    }

    /// Teacher-forced logits for `tokens` (starting with the begin token).
    pub fn forward<'t>(
        &self,
        t: &'t Tape,
        s: &ParamStore,
        tokens: &[usize],
        memory: Var<'t>,
        rc: &[bool],
        ctx: &Ctx,
    ) -> Result<DecoderOutput<'t>> {
        let len = tokens.len();
        let pe = t.constant(positional_encoding(len, self.d));
        let mut x = t.param(s, self.embed).gather_rows(tokens.to_vec())?.add(pe)?;
        let causal: Vec<bool> = (0..len).flat_map(|i| (0..len).map(move |j| j <= i)).collect();
        let mut cross_weights = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let sa = layer.self_attn.attend(t, s, x, x, Some(&causal), 0)?.out;
            x = layer.ln1.forward(t, s, x.add(ctx.drop(sa, layer.site)?)?)?;
            let ca = rc_attention(&layer.cross, t, s, x, memory, rc, self.vanilla)?;
            cross_weights.push(ca.weights);
            x = layer.ln2.forward(t, s, x.add(ctx.drop(ca.out, layer.site + 1)?)?)?;
            let ff = layer.ffn.forward(t, s, x)?;
            x = layer.ln3.forward(t, s, x.add(ctx.drop(ff, layer.site + 2)?)?)?;
        }
        Ok(DecoderOutput {
            logits: self.out.forward(t, s, x)?,
            cross_weights,
        })
    }
}

/// A learnable query attends over the encoded reaction; a feed-forward
/// network maps the result to one scalar.
#[derive(Clone, Debug)]
pub struct PooledHead {
    pub query: ParamId,
    pub attn: Mha,
    pub ffn: Ffn,
    pub vanilla: bool,
}

pub struct PooledOutput<'t> {
    /// `1 x 1`.
    pub value: Var<'t>,
    pub weights: Vec<Arc<Tensor>>,
}

impl PooledHead {
    pub fn new(init: &mut Init, d: usize, heads: usize, vanilla: bool) -> Result<Self> {
        Ok(PooledHead {
            query: init.xavier("head.query", 1, d)?,
            attn: Mha::new(init, "head.attn", d, heads)?,
            ffn: Ffn::new(init, "head.ffn", d, d, 1)?,
            vanilla,
        })
    }

    pub fn forward<'t>(&self, t: &'t Tape, s: &ParamStore, memory: Var<'t>, rc: &[bool]) -> Result<PooledOutput<'t>> {
        let q = t.param(s, self.query);
        let a = rc_attention(&self.attn, t, s, q, memory, rc, self.vanilla)?;
        Ok(PooledOutput {
            value: self.ffn.forward(t, s, a.out)?,
            weights: a.weights,
        })
    }
}
