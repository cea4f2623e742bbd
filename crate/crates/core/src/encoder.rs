//! Atom-aligned encoder, condition adapter and condition encoder.

use ndiff::{ParamId, ParamStore, Tape, Var};

use crate::error::{RalignError, Result};
use crate::features::{Embeddings, GraphInput, ReactionInput};
use crate::nn::{Ctx, Ffn, Init, LayerNorm, Mha, LEAKY_SLOPE};

/// Graph-attention message passing with edge features:
/// `c_uv = a . [h~_u | h~_v | e~_uv]`, `alpha` a LeakyReLU softmax over
/// `N(u) + {u}`, and `h'_u = sum_v alpha_uv (h~_u + e~_uv)`.
/// The self-loop edge `e~_uu` is a learned vector.
#[derive(Clone, Debug)]
pub struct MpnnLayer {
    pub ffn_n: Ffn,
    pub ffn_e: Ffn,
    /// `3d x 1`, split as `[a_u; a_v; a_e]`.
    pub a: ParamId,
    pub self_loop: ParamId,
    d: usize,
}

impl MpnnLayer {
    pub fn new(init: &mut Init, name: &str, d: usize) -> Result<Self> {
        Ok(MpnnLayer {
            ffn_n: Ffn::new(init, &format!("{name}.ffn_n"), d, d, d)?,
            ffn_e: Ffn::new(init, &format!("{name}.ffn_e"), d, d, d)?,
            a: init.xavier(&format!("{name}.a"), 3 * d, 1)?,
            self_loop: init.xavier(&format!("{name}.self_loop"), 1, d)?,
            d,
        })
    }

    pub fn param_count(d: usize) -> usize {
        2 * Ffn::param_count(d, d, d) + 3 * d + d
    }

    /// `h`: `n x d` nodes, `e`: directed edge features in `g`'s edge order.
    pub fn forward<'t>(
        &self,
        t: &'t Tape,
        s: &ParamStore,
        g: &GraphInput,
        h: Var<'t>,
        e: Var<'t>,
    ) -> Result<Var<'t>> {
        let (n, d) = (g.n, self.d);
        let a = t.param(s, self.a);
        let (a_u, a_v, a_e) = (a.slice(0, 0, d)?, a.slice(0, d, d)?, a.slice(0, 2 * d, d)?);
        let ht = self.ffn_n.forward(t, s, h)?;
        let loops = t.param(s, self.self_loop).gather_rows(vec![0; n])?;

        // Slots: every directed edge u -> v, then one self loop per node.
        let mut centers: Vec<usize> = g.src.to_vec();
        centers.extend(0..n);
        let mut others: Vec<usize> = g.dst.to_vec();
        others.extend(0..n);
        let e_all = if g.num_edges() > 0 {
            let et = self.ffn_e.forward(t, s, e)?;
            t.concat(&[et, loops], 0)?
        } else {
            loops
        };

        let score_u = ht.matmul(a_u)?.gather_rows(centers.clone())?;
        let score_v = ht.matmul(a_v)?.gather_rows(others)?;
        let logits = score_u.add(score_v)?.add(e_all.matmul(a_e)?)?;
        let alpha = logits.leaky_relu(LEAKY_SLOPE).segment_softmax(centers.clone(), n)?;
        let msgs = ht.gather_rows(centers.clone())?.add(e_all)?.scale_rows(alpha)?;
        Ok(msgs.segment_sum(centers, n)?)
    }
}

#[derive(Clone, Debug)]
pub enum Fusion {
    /// `FFN_1` over `[h_R | h_P]` of each mapped pair (`2d -> 2d -> 2d`).
    Shared(Ffn),
    /// Ablation: separate `d -> d -> d` networks per side, no exchange.
    Split { reactant: Ffn, product: Ffn },
}

#[derive(Clone, Debug)]
pub struct Adapter {
    pub reactant: Mha,
    pub product: Mha,
}

#[derive(Clone, Debug)]
pub struct EncoderBlock {
    pub mpnn_r: MpnnLayer,
    pub mpnn_p: MpnnLayer,
    pub ln_mpnn_r: LayerNorm,
    pub ln_mpnn_p: LayerNorm,
    pub fusion: Fusion,
    pub ffn2: Ffn,
    pub ln_fuse_r: LayerNorm,
    pub ln_fuse_p: LayerNorm,
    pub adapter: Option<Adapter>,
    pub ffn3: Ffn,
    pub ffn4: Ffn,
    site: u64,
}

/// Node and directed-edge features of both sides.
#[derive(Clone, Copy)]
pub struct EncoderState<'t> {
    pub hr: Var<'t>,
    pub hp: Var<'t>,
    pub er: Var<'t>,
    pub ep: Var<'t>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderFlags {
    pub no_fusion: bool,
    pub adapter: bool,
}

impl EncoderBlock {
    pub fn new(init: &mut Init, name: &str, d: usize, heads: usize, flags: EncoderFlags) -> Result<Self> {
        let fusion = if flags.no_fusion {
            Fusion::Split {
                reactant: Ffn::new(init, &format!("{name}.ffn1_r"), d, d, d)?,
                product: Ffn::new(init, &format!("{name}.ffn1_p"), d, d, d)?,
            }
        } else {
            Fusion::Shared(Ffn::new(init, &format!("{name}.ffn1"), 2 * d, 2 * d, 2 * d)?)
        };
        Ok(EncoderBlock {
            mpnn_r: MpnnLayer::new(init, &format!("{name}.mpnn_r"), d)?,
            mpnn_p: MpnnLayer::new(init, &format!("{name}.mpnn_p"), d)?,
            ln_mpnn_r: LayerNorm::new(init, &format!("{name}.ln_mpnn_r"), d)?,
            ln_mpnn_p: LayerNorm::new(init, &format!("{name}.ln_mpnn_p"), d)?,
            fusion,
            ffn2: Ffn::new(init, &format!("{name}.ffn2"), d, d, d)?,
            ln_fuse_r: LayerNorm::new(init, &format!("{name}.ln_fuse_r"), d)?,
            ln_fuse_p: LayerNorm::new(init, &format!("{name}.ln_fuse_p"), d)?,
            adapter: if flags.adapter {
                Some(Adapter {
                    reactant: Mha::new(init, &format!("{name}.attn_r"), d, heads)?,
                    product: Mha::new(init, &format!("{name}.attn_p"), d, heads)?,
                })
            } else {
                None
            },
            ffn3: Ffn::new(init, &format!("{name}.ffn3"), 2 * d, d, d)?,
            ffn4: Ffn::new(init, &format!("{name}.ffn4"), 2 * d, d, d)?,
            site: {
                let first = init.site();
                for _ in 0..5 {
                    init.site();
                }
                first
            },
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn forward<'t>(
        &self,
        t: &'t Tape,
        s: &ParamStore,
        x: &ReactionInput,
        state: EncoderState<'t>,
        cond: Option<Var<'t>>,
        ctx: &Ctx,
    ) -> Result<EncoderState<'t>> {
        let (n, m) = (x.reactant.n, x.m);
        let mr = self.mpnn_r.forward(t, s, &x.reactant, state.hr, state.er)?;
        let hr = self.ln_mpnn_r.forward(t, s, state.hr.add(ctx.drop(mr, self.site)?)?)?;
        let mp = self.mpnn_p.forward(t, s, &x.product, state.hp, state.ep)?;
        let hp = self.ln_mpnn_p.forward(t, s, state.hp.add(ctx.drop(mp, self.site + 1)?)?)?;

        let mapped = hr.slice(0, 0, m)?;
        let (dr, dp) = match &self.fusion {
            Fusion::Shared(ffn) => {
                let d = mapped.shape()[1];
                let fused = ffn.forward(t, s, t.concat(&[mapped, hp], 1)?)?;
                (fused.slice(1, 0, d)?, fused.slice(1, d, d)?)
            }
            Fusion::Split { reactant, product } => (reactant.forward(t, s, mapped)?, product.forward(t, s, hp)?),
        };
        let dr = if n > m {
            let leaving = self.ffn2.forward(t, s, hr.slice(0, m, n - m)?)?;
            t.concat(&[dr, leaving], 0)?
        } else {
            dr
        };
        let mut hr = self.ln_fuse_r.forward(t, s, hr.add(ctx.drop(dr, self.site + 2)?)?)?;
        let mut hp = self.ln_fuse_p.forward(t, s, hp.add(ctx.drop(dp, self.site + 3)?)?)?;

        if let (Some(ad), Some(c)) = (&self.adapter, cond) {
            hr = hr.add(ad.reactant.attend(t, s, hr, c, None, 0)?.out)?;
            hp = hp.add(ad.product.attend(t, s, hp, c, None, 0)?.out)?;
        }

        let er = edge_update(t, s, &self.ffn3, &x.reactant, hr, state.er, ctx, self.site + 4)?;
        let ep = edge_update(t, s, &self.ffn4, &x.product, hp, state.ep, ctx, self.site + 5)?;
        Ok(EncoderState { hr, hp, er, ep })
    }
}

/// `e_uv <- e_uv + FFN([h_u | h_v])` over directed edges.
#[allow(clippy::too_many_arguments)]
fn edge_update<'t>(
    t: &'t Tape,
    s: &ParamStore,
    ffn: &Ffn,
    g: &GraphInput,
    h: Var<'t>,
    e: Var<'t>,
    ctx: &Ctx,
    site: u64,
) -> Result<Var<'t>> {
    if g.num_edges() == 0 {
        return Ok(e);
    }
    let pair = t.concat(&[h.gather_rows(g.src.clone())?, h.gather_rows(g.dst.clone())?], 1)?;
    Ok(e.add(ctx.drop(ffn.forward(t, s, pair)?, site)?)?)
}

#[derive(Clone, Debug)]
pub struct Encoder {
    pub embed: Embeddings,
    pub blocks: Vec<EncoderBlock>,
    pub d: usize,
}

/// Node features after every block (`layers[k]` is the output of block
/// `k + 1`).
pub struct Encoded<'t> {
    pub layers: Vec<(Var<'t>, Var<'t>)>,
}

impl<'t> Encoded<'t> {
    pub fn last(&self) -> (Var<'t>, Var<'t>) {
        *self.layers.last().expect("at least one block")
    }
}

impl Encoder {
    pub fn new(init: &mut Init, d: usize, layers: usize, heads: usize, flags: EncoderFlags) -> Result<Self> {
        let embed = Embeddings::new(init, "enc.embed", d)?;
        let blocks = (0..layers)
            .map(|k| EncoderBlock::new(init, &format!("enc.block{k}"), d, heads, flags))
            .collect::<Result<_>>()?;
        Ok(Encoder { embed, blocks, d })
    }

    pub fn initial_state<'t>(&self, t: &'t Tape, s: &ParamStore, x: &ReactionInput) -> Result<EncoderState<'t>> {
        let (hr, er) = self.embed.init_features(t, s, &x.reactant)?;
        let (hp, ep) = self.embed.init_features(t, s, &x.product)?;
        Ok(EncoderState { hr, hp, er, ep })
    }

    pub fn encode<'t>(
        &self,
        t: &'t Tape,
        s: &ParamStore,
        x: &ReactionInput,
        cond: Option<Var<'t>>,
        ctx: &Ctx,
    ) -> Result<Encoded<'t>> {
        if let Some(c) = cond {
            if c.shape()[1] != self.d {
                return Err(RalignError::Config(format!("condition width {} != hidden {}", c.shape()[1], self.d)));
            }
        }
        let mut state = self.initial_state(t, s, x)?;
        let mut layers = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            state = block.forward(t, s, x, state, cond, ctx)?;
            layers.push((state.hr, state.hp));
        }
        Ok(Encoded { layers })
    }
}

/// GIN-style condition molecule encoder:
/// `h_v <- ReLU(MLP(sum_{u in N(v)+{v}} h_u + sum of incident edge
/// embeddings, self loop included))`, then the mean over atoms.
#[derive(Clone, Debug)]
pub struct CondEncoder {
    pub atom: Embeddings,
    pub layers: Vec<CondLayer>,
}

#[derive(Clone, Debug)]
pub struct CondLayer {
    pub bond: Vec<ParamId>,
    pub self_loop: ParamId,
    pub mlp: Ffn,
}

impl CondEncoder {
    pub fn new(init: &mut Init, d: usize, layers: usize) -> Result<Self> {
        let atom = Embeddings::new(init, "cond.embed", d)?;
        let layers = (0..layers)
            .map(|k| {
                let name = format!("cond.layer{k}");
                Ok(CondLayer {
                    bond: chem::BOND_DESCRIPTOR_SIZES
                        .iter()
                        .enumerate()
                        .map(|(j, &size)| init.xavier(&format!("{name}.bond{j}"), size, d))
                        .collect::<Result<_>>()?,
                    self_loop: init.xavier(&format!("{name}.self_loop"), 1, d)?,
                    mlp: Ffn::new(init, &format!("{name}.mlp"), d, 2 * d, d)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(CondEncoder { atom, layers })
    }

    /// Final node features of one molecule.
    pub fn nodes<'t>(&self, t: &'t Tape, s: &ParamStore, g: &GraphInput) -> Result<Var<'t>> {
        let mut h = self.atom.nodes(t, s, g)?;
        for layer in &self.layers {
            let mut x = h.add(t.param(s, layer.self_loop).gather_rows(vec![0; g.n])?)?;
            if g.num_edges() > 0 {
                let tables: Vec<Var> = layer.bond.iter().map(|&id| t.param(s, id)).collect();
                let bonds = t.embedding_lookup_sum(&tables, &g.bond_idx)?;
                let edges = bonds.gather_rows(g.edge_bond.clone())?.segment_sum(g.dst.clone(), g.n)?;
                let nbrs = h.gather_rows(g.src.clone())?.segment_sum(g.dst.clone(), g.n)?;
                x = x.add(nbrs)?.add(edges)?;
            }
            h = layer.mlp.forward(t, s, x)?.relu();
        }
        Ok(h)
    }

    /// `c x d` condition matrix, or `None` without condition molecules.
    pub fn encode<'t>(&self, t: &'t Tape, s: &ParamStore, mols: &[GraphInput]) -> Result<Option<Var<'t>>> {
        if mols.is_empty() {
            return Ok(None);
        }
        let rows = mols
            .iter()
            .map(|g| self.nodes(t, s, g)?.mean_rows().map_err(Into::into))
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(t.concat(&rows, 0)?))
    }
}
