//! Operator set. Forward kernels live on [`Var`]; the matching backward
//! kernels are dispatched from [`backward_op`].

use std::sync::Arc;

use crate::error::{shape_err, Result, TensorError};
use crate::tape::{accumulate, Node, NodeId, Tape, Var};
use crate::tensor::{gemm, Tensor};

pub(crate) enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Concat {
        parts: Vec<NodeId>,
        axis: usize,
    },
    Slice {
        src: NodeId,
        axis: usize,
        start: usize,
    },
    GatherRows {
        src: NodeId,
        idx: Arc<[usize]>,
    },
    EmbeddingSum {
        tables: Vec<NodeId>,
        idx: Arc<[usize]>,
    },
    Relu(NodeId),
    LeakyRelu(NodeId, f64),
    Softmax {
        src: NodeId,
        axis: usize,
    },
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Dropout {
        src: NodeId,
        mask: Vec<f64>,
    },
    SegmentSum {
        src: NodeId,
        ids: Arc<[usize]>,
    },
    SegmentSoftmax {
        src: NodeId,
        ids: Arc<[usize]>,
        segments: usize,
    },
    ScaleRows(NodeId, NodeId),
    SumAll(NodeId),
    MeanRows(NodeId),
    CrossEntropy {
        logits: NodeId,
        targets: Vec<Option<usize>>,
        probs: Vec<f64>,
        count: usize,
    },
    Mse(NodeId, NodeId),
}

impl Op {
    pub(crate) fn parents(&self) -> Vec<NodeId> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::AddBias(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::ScaleRows(a, b)
            | Op::Mse(a, b) => vec![*a, *b],
            Op::Transpose(a)
            | Op::Scale(a, _)
            | Op::Relu(a)
            | Op::LeakyRelu(a, _)
            | Op::SumAll(a)
            | Op::MeanRows(a) => vec![*a],
            Op::Concat { parts, .. } => parts.clone(),
            Op::EmbeddingSum { tables, .. } => tables.clone(),
            Op::Slice { src, .. }
            | Op::GatherRows { src, .. }
            | Op::Softmax { src, .. }
            | Op::Dropout { src, .. }
            | Op::SegmentSum { src, .. }
            | Op::SegmentSoftmax { src, .. } => vec![*src],
            Op::LayerNorm { x, gain, bias, .. } => vec![*x, *gain, *bias],
            Op::CrossEntropy { logits, .. } => vec![*logits],
        }
    }
}

/// Identifies one dropout application. Masks are a pure function of the key,
/// so replaying a step reproduces the same mask on any thread.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DropoutKey {
    pub seed: u64,
    pub layer: u64,
    pub step: u64,
    pub sample: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl DropoutKey {
    fn stream(&self) -> u64 {
        let mut h = splitmix64(self.seed);
        h = splitmix64(h ^ self.layer);
        h = splitmix64(h ^ self.step);
        splitmix64(h ^ self.sample)
    }

    /// Uniform value in `[0, 1)` for element `index` of this key's stream.
    pub fn uniform(&self, index: u64) -> f64 {
        let bits = splitmix64(self.stream() ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93));
        (bits >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Iterate over softmax lanes of an `r x c` matrix: `(offset, stride, len)`.
fn lanes(r: usize, c: usize, axis: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    let (count, stride, len, step) = if axis == 1 { (r, 1, c, c) } else { (c, c, r, 1) };
    (0..count).map(move |i| (i * step, stride, len))
}

impl<'t> Var<'t> {
    fn check_same_tape(&self, other: &Var<'t>) {
        debug_assert!(std::ptr::eq(self.tape, other.tape), "vars from different tapes");
    }

    pub fn matmul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.check_same_tape(&rhs);
        let (a, b) = (self.value(), rhs.value());
        let (m, k) = a.dims2("matmul")?;
        let (k2, n) = b.dims2("matmul")?;
        if k != k2 {
            return shape_err("matmul", format!("{m}x{k} @ {k2}x{n}"));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, a.data(), false, b.data(), false, &mut out, 0.0);
        Ok(self
            .tape
            .push(Tensor::matrix(m, n, out)?, Op::MatMul(self.id, rhs.id)))
    }

    pub fn transpose(self) -> Result<Var<'t>> {
        let a = self.value();
        a.dims2("transpose")?;
        Ok(self.tape.push(a.transposed(), Op::Transpose(self.id)))
    }

    /// Elementwise sum of equal shapes.
    pub fn add(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), rhs.value());
        if a.shape() != b.shape() {
            return shape_err("add", format!("{:?} + {:?}", a.shape(), b.shape()));
        }
        let mut out = (*a).clone();
        out.add_assign(&b);
        Ok(self.tape.push(out, Op::Add(self.id, rhs.id)))
    }

    /// `self (r x c) + bias (1 x c)` broadcast along rows.
    pub fn add_bias(self, bias: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), bias.value());
        let (r, c) = a.dims2("add_bias")?;
        if b.shape() != [1, c] {
            return shape_err("add_bias", format!("{r}x{c} + {:?}", b.shape()));
        }
        let mut out = (*a).clone();
        for row in out.data_mut().chunks_mut(c) {
            for (x, y) in row.iter_mut().zip(b.data()) {
                *x += y;
            }
        }
        Ok(self.tape.push(out, Op::AddBias(self.id, bias.id)))
    }

    pub fn sub(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), rhs.value());
        if a.shape() != b.shape() {
            return shape_err("sub", format!("{:?} - {:?}", a.shape(), b.shape()));
        }
        let data = a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
        Ok(self
            .tape
            .push(Tensor::new(a.shape().to_vec(), data)?, Op::Sub(self.id, rhs.id)))
    }

    /// Elementwise product of equal shapes.
    pub fn mul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), rhs.value());
        if a.shape() != b.shape() {
            return shape_err("mul", format!("{:?} * {:?}", a.shape(), b.shape()));
        }
        let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
        Ok(self
            .tape
            .push(Tensor::new(a.shape().to_vec(), data)?, Op::Mul(self.id, rhs.id)))
    }

    pub fn scale(self, s: f64) -> Var<'t> {
        let out = self.value().map(|x| x * s);
        self.tape.push(out, Op::Scale(self.id, s))
    }

    pub fn slice(self, axis: usize, start: usize, len: usize) -> Result<Var<'t>> {
        let a = self.value();
        let (r, c) = a.dims2("slice")?;
        let extent = if axis == 0 { r } else { c };
        if axis > 1 || start + len > extent {
            return shape_err(
                "slice",
                format!("axis {axis} range {start}..{} of {r}x{c}", start + len),
            );
        }
        let out = if axis == 0 {
            Tensor::matrix(len, c, a.data()[start * c..(start + len) * c].to_vec())?
        } else {
            let mut data = Vec::with_capacity(r * len);
            for i in 0..r {
                data.extend_from_slice(&a.data()[i * c + start..i * c + start + len]);
            }
            Tensor::matrix(r, len, data)?
        };
        Ok(self.tape.push(
            out,
            Op::Slice {
                src: self.id,
                axis,
                start,
            },
        ))
    }

    /// Rows `idx[k]` of `self` stacked into a `len(idx) x c` matrix.
    pub fn gather_rows(self, idx: impl Into<Arc<[usize]>>) -> Result<Var<'t>> {
        let idx: Arc<[usize]> = idx.into();
        let a = self.value();
        let (r, _) = a.dims2("gather_rows")?;
        if let Some(&bad) = idx.iter().find(|&&i| i >= r) {
            return Err(TensorError::Index {
                what: "gather_rows",
                index: bad,
                size: r,
            });
        }
        let out = a.select_rows(&idx);
        Ok(self.tape.push(out, Op::GatherRows { src: self.id, idx }))
    }

    pub fn relu(self) -> Var<'t> {
        let out = self.value().map(|x| if x > 0.0 { x } else { 0.0 });
        self.tape.push(out, Op::Relu(self.id))
    }

    pub fn leaky_relu(self, slope: f64) -> Var<'t> {
        let out = self.value().map(|x| if x > 0.0 { x } else { slope * x });
        self.tape.push(out, Op::LeakyRelu(self.id, slope))
    }

    pub fn softmax(self, axis: usize) -> Result<Var<'t>> {
        self.softmax_impl(axis, None)
    }

    /// Softmax where `mask[i] == false` positions receive exactly zero weight.
    pub fn masked_softmax(self, axis: usize, mask: &[bool]) -> Result<Var<'t>> {
        self.softmax_impl(axis, Some(mask))
    }

    fn softmax_impl(self, axis: usize, mask: Option<&[bool]>) -> Result<Var<'t>> {
        let a = self.value();
        let (r, c) = a.dims2("softmax")?;
        if axis > 1 {
            return shape_err("softmax", format!("axis {axis} on rank-2 tensor"));
        }
        if let Some(m) = mask {
            if m.len() != r * c {
                return shape_err("masked_softmax", format!("mask len {} vs {r}x{c}", m.len()));
            }
        }
        let x = a.data();
        let mut out = vec![0.0; r * c];
        for (lane, (off, stride, len)) in lanes(r, c, axis).enumerate() {
            let keep = |j: usize| mask.is_none_or(|m| m[off + j * stride]);
            let mut max = f64::NEG_INFINITY;
            for j in (0..len).filter(|&j| keep(j)) {
                max = max.max(x[off + j * stride]);
            }
            if max == f64::NEG_INFINITY && len > 0 {
                return Err(TensorError::FullyMasked { lane });
            }
            let mut total = 0.0;
            for j in (0..len).filter(|&j| keep(j)) {
                let e = (x[off + j * stride] - max).exp();
                out[off + j * stride] = e;
                total += e;
            }
            for j in (0..len).filter(|&j| keep(j)) {
                out[off + j * stride] /= total;
            }
        }
        Ok(self.tape.push(
            Tensor::matrix(r, c, out)?,
            Op::Softmax { src: self.id, axis },
        ))
    }

    /// Normalise each row to zero mean and unit variance, then apply
    /// `gain (1 x c)` and `bias (1 x c)`.
    pub fn layer_norm(self, gain: Var<'t>, bias: Var<'t>, eps: f64) -> Result<Var<'t>> {
        let a = self.value();
        let (r, c) = a.dims2("layer_norm")?;
        let (g, b) = (gain.value(), bias.value());
        if g.shape() != [1, c] || b.shape() != [1, c] {
            return shape_err(
                "layer_norm",
                format!("gain {:?} bias {:?} for width {c}", g.shape(), b.shape()),
            );
        }
        let mut xhat = vec![0.0; r * c];
        let mut inv_std = vec![0.0; r];
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &a.data()[i * c..(i + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / c as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std[i] = inv;
            for j in 0..c {
                let h = (row[j] - mean) * inv;
                xhat[i * c + j] = h;
                out[i * c + j] = h * g.data()[j] + b.data()[j];
            }
        }
        Ok(self.tape.push(
            Tensor::matrix(r, c, out)?,
            Op::LayerNorm {
                x: self.id,
                gain: gain.id,
                bias: bias.id,
                xhat,
                inv_std,
            },
        ))
    }

    /// Inverted dropout. Identity when not training or `p == 0`.
    pub fn dropout(self, p: f64, train: bool, key: DropoutKey) -> Result<Var<'t>> {
        if !(0.0..1.0).contains(&p) {
            return Err(TensorError::Invalid {
                op: "dropout",
                detail: format!("p = {p} outside [0, 1)"),
            });
        }
        if !train || p == 0.0 {
            return Ok(self);
        }
        let a = self.value();
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..a.len() as u64)
            .map(|i| if key.uniform(i) < p { 0.0 } else { keep })
            .collect();
        let data = a.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        Ok(self.tape.push(
            Tensor::new(a.shape().to_vec(), data)?,
            Op::Dropout { src: self.id, mask },
        ))
    }

    /// Sum rows of `self` into `segments` buckets: `out[ids[k]] += self[k]`.
    pub fn segment_sum(self, ids: impl Into<Arc<[usize]>>, segments: usize) -> Result<Var<'t>> {
        let ids: Arc<[usize]> = ids.into();
        let a = self.value();
        let (r, c) = a.dims2("segment_sum")?;
        check_ids("segment_sum", &ids, r, segments)?;
        let mut out = vec![0.0; segments * c];
        for (k, &s) in ids.iter().enumerate() {
            for j in 0..c {
                out[s * c + j] += a.data()[k * c + j];
            }
        }
        Ok(self.tape.push(
            Tensor::matrix(segments, c, out)?,
            Op::SegmentSum { src: self.id, ids },
        ))
    }

    /// Softmax over the rows sharing a segment id, independently per column.
    pub fn segment_softmax(
        self,
        ids: impl Into<Arc<[usize]>>,
        segments: usize,
    ) -> Result<Var<'t>> {
        let ids: Arc<[usize]> = ids.into();
        let a = self.value();
        let (r, c) = a.dims2("segment_softmax")?;
        check_ids("segment_softmax", &ids, r, segments)?;
        let x = a.data();
        let mut max = vec![f64::NEG_INFINITY; segments * c];
        for (k, &s) in ids.iter().enumerate() {
            for j in 0..c {
                max[s * c + j] = max[s * c + j].max(x[k * c + j]);
            }
        }
        let mut out = vec![0.0; r * c];
        let mut total = vec![0.0; segments * c];
        for (k, &s) in ids.iter().enumerate() {
            for j in 0..c {
                let e = (x[k * c + j] - max[s * c + j]).exp();
                out[k * c + j] = e;
                total[s * c + j] += e;
            }
        }
        for (k, &s) in ids.iter().enumerate() {
            for j in 0..c {
                out[k * c + j] /= total[s * c + j];
            }
        }
        Ok(self.tape.push(
            Tensor::matrix(r, c, out)?,
            Op::SegmentSoftmax {
                src: self.id,
                ids,
                segments,
            },
        ))
    }

    /// Multiply row `k` of `self (r x c)` by `weights[k]` where `weights` is `r x 1`.
    pub fn scale_rows(self, weights: Var<'t>) -> Result<Var<'t>> {
        let (a, w) = (self.value(), weights.value());
        let (r, c) = a.dims2("scale_rows")?;
        if w.shape() != [r, 1] {
            return shape_err("scale_rows", format!("{r}x{c} by {:?}", w.shape()));
        }
        let mut out = (*a).clone();
        for (row, &s) in out.data_mut().chunks_mut(c.max(1)).zip(w.data()) {
            for x in row {
                *x *= s;
            }
        }
        Ok(self.tape.push(out, Op::ScaleRows(self.id, weights.id)))
    }

    pub fn sum(self) -> Var<'t> {
        let s = self.value().sum();
        self.tape.push(Tensor::scalar(s), Op::SumAll(self.id))
    }

    /// Column means: `r x c -> 1 x c`.
    pub fn mean_rows(self) -> Result<Var<'t>> {
        let a = self.value();
        let (r, c) = a.dims2("mean_rows")?;
        if r == 0 {
            return shape_err("mean_rows", "no rows");
        }
        let mut out = vec![0.0; c];
        for row in a.data().chunks(c) {
            for (o, x) in out.iter_mut().zip(row) {
                *o += x;
            }
        }
        for o in &mut out {
            *o /= r as f64;
        }
        Ok(self.tape.push(Tensor::matrix(1, c, out)?, Op::MeanRows(self.id)))
    }

    /// Mean token cross-entropy of `self (n x V)` logits. `None` targets are
    /// ignored; with no counted targets the loss is zero.
    pub fn cross_entropy(self, targets: &[Option<usize>]) -> Result<Var<'t>> {
        let a = self.value();
        let (n, v) = a.dims2("cross_entropy")?;
        if targets.len() != n {
            return shape_err("cross_entropy", format!("{n} rows, {} targets", targets.len()));
        }
        let mut probs = vec![0.0; n * v];
        let mut loss = 0.0;
        let mut count = 0;
        for (i, t) in targets.iter().enumerate() {
            let row = a.row_slice(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = row.iter().map(|x| (x - max).exp()).sum();
            for j in 0..v {
                probs[i * v + j] = (row[j] - max).exp() / total;
            }
            if let Some(t) = *t {
                if t >= v {
                    return Err(TensorError::Index {
                        what: "cross_entropy target",
                        index: t,
                        size: v,
                    });
                }
                loss += -(row[t] - max - total.ln());
                count += 1;
            }
        }
        let value = if count == 0 { 0.0 } else { loss / count as f64 };
        Ok(self.tape.push(
            Tensor::scalar(value),
            Op::CrossEntropy {
                logits: self.id,
                targets: targets.to_vec(),
                probs,
                count,
            },
        ))
    }

    /// Mean squared error against a same-shaped target.
    pub fn mse(self, target: Var<'t>) -> Result<Var<'t>> {
        let (p, t) = (self.value(), target.value());
        if p.shape() != t.shape() || p.is_empty() {
            return shape_err("mse", format!("{:?} vs {:?}", p.shape(), t.shape()));
        }
        let value = p
            .data()
            .iter()
            .zip(t.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / p.len() as f64;
        Ok(self
            .tape
            .push(Tensor::scalar(value), Op::Mse(self.id, target.id)))
    }
}

fn check_ids(op: &'static str, ids: &[usize], rows: usize, segments: usize) -> Result<()> {
    if ids.len() != rows {
        return shape_err(op, format!("{} ids for {rows} rows", ids.len()));
    }
    if let Some(&bad) = ids.iter().find(|&&s| s >= segments) {
        return Err(TensorError::Index {
            what: op,
            index: bad,
            size: segments,
        });
    }
    Ok(())
}

impl Tape {
    /// Concatenate along `axis` (0 = rows, 1 = columns).
    pub fn concat<'t>(&'t self, parts: &[Var<'t>], axis: usize) -> Result<Var<'t>> {
        if parts.is_empty() || axis > 1 {
            return shape_err("concat", format!("{} parts along axis {axis}", parts.len()));
        }
        let vals: Vec<_> = parts.iter().map(|p| p.value()).collect();
        let dims: Vec<(usize, usize)> = vals
            .iter()
            .map(|v| v.dims2("concat"))
            .collect::<Result<_>>()?;
        let out = if axis == 0 {
            let c = dims[0].1;
            if dims.iter().any(|d| d.1 != c) {
                return shape_err("concat", format!("column mismatch {dims:?}"));
            }
            let rows = dims.iter().map(|d| d.0).sum();
            let data = vals.iter().flat_map(|v| v.data().iter().copied()).collect();
            Tensor::matrix(rows, c, data)?
        } else {
            let r = dims[0].0;
            if dims.iter().any(|d| d.0 != r) {
                return shape_err("concat", format!("row mismatch {dims:?}"));
            }
            let cols: usize = dims.iter().map(|d| d.1).sum();
            let mut data = Vec::with_capacity(r * cols);
            for i in 0..r {
                for v in &vals {
                    data.extend_from_slice(v.row_slice(i));
                }
            }
            Tensor::matrix(r, cols, data)?
        };
        Ok(self.push(
            out,
            Op::Concat {
                parts: parts.iter().map(|p| p.id).collect(),
                axis,
            },
        ))
    }

    /// Row `i` of the output is `sum_t tables[t][idx[i][t]]`; `idx` is given
    /// row-major as `rows x tables.len()`.
    pub fn embedding_lookup_sum<'t>(
        &'t self,
        tables: &[Var<'t>],
        idx: &[usize],
    ) -> Result<Var<'t>> {
        let t = tables.len();
        if t == 0 || !idx.len().is_multiple_of(t) {
            return shape_err("embedding_lookup_sum", format!("{} indices for {t} tables", idx.len()));
        }
        let vals: Vec<_> = tables.iter().map(|v| v.value()).collect();
        let d = vals[0].dims2("embedding_lookup_sum")?.1;
        for v in &vals {
            if v.dims2("embedding_lookup_sum")?.1 != d {
                return shape_err("embedding_lookup_sum", "tables differ in width");
            }
        }
        let rows = idx.len() / t;
        let mut out = vec![0.0; rows * d];
        for i in 0..rows {
            for (k, table) in vals.iter().enumerate() {
                let j = idx[i * t + k];
                if j >= table.rows() {
                    return Err(TensorError::Index {
                        what: "embedding table",
                        index: j,
                        size: table.rows(),
                    });
                }
                for (o, x) in out[i * d..(i + 1) * d].iter_mut().zip(table.row_slice(j)) {
                    *o += x;
                }
            }
        }
        Ok(self.push(
            Tensor::matrix(rows, d, out)?,
            Op::EmbeddingSum {
                tables: tables.iter().map(|v| v.id).collect(),
                idx: idx.into(),
            },
        ))
    }
}

fn needs(nodes: &[Node], id: NodeId) -> bool {
    nodes[id].requires_grad
}

pub(crate) fn backward_op(
    nodes: &[Node],
    id: NodeId,
    g: &Tensor,
    grads: &mut [Option<Tensor>],
) -> Result<()> {
    let out = &nodes[id].value;
    let val = |i: NodeId| &nodes[i].value;
    match &nodes[id].op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (av, bv) = (val(*a), val(*b));
            let (m, k) = (av.rows(), av.cols());
            let n = bv.cols();
            if needs(nodes, *a) {
                let mut da = vec![0.0; m * k];
                gemm(m, n, k, g.data(), false, bv.data(), true, &mut da, 0.0);
                accumulate(grads, *a, Tensor::matrix(m, k, da)?);
            }
            if needs(nodes, *b) {
                let mut db = vec![0.0; k * n];
                gemm(k, m, n, av.data(), true, g.data(), false, &mut db, 0.0);
                accumulate(grads, *b, Tensor::matrix(k, n, db)?);
            }
        }
        Op::Transpose(a) => accumulate(grads, *a, g.transposed()),
        Op::Add(a, b) => {
            if needs(nodes, *a) {
                accumulate(grads, *a, g.clone());
            }
            if needs(nodes, *b) {
                accumulate(grads, *b, g.clone());
            }
        }
        Op::AddBias(a, b) => {
            if needs(nodes, *a) {
                accumulate(grads, *a, g.clone());
            }
            if needs(nodes, *b) {
                let c = g.cols();
                let mut db = vec![0.0; c];
                for row in g.data().chunks(c) {
                    for (d, x) in db.iter_mut().zip(row) {
                        *d += x;
                    }
                }
                accumulate(grads, *b, Tensor::matrix(1, c, db)?);
            }
        }
        Op::Sub(a, b) => {
            if needs(nodes, *a) {
                accumulate(grads, *a, g.clone());
            }
            if needs(nodes, *b) {
                accumulate(grads, *b, g.map(|x| -x));
            }
        }
        Op::Mul(a, b) => {
            let (av, bv) = (val(*a), val(*b));
            if needs(nodes, *a) {
                let d = g.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
                accumulate(grads, *a, Tensor::new(g.shape().to_vec(), d)?);
            }
            if needs(nodes, *b) {
                let d = g.data().iter().zip(av.data()).map(|(x, y)| x * y).collect();
                accumulate(grads, *b, Tensor::new(g.shape().to_vec(), d)?);
            }
        }
        Op::Scale(a, s) => accumulate(grads, *a, g.map(|x| x * s)),
        Op::Concat { parts, axis } => {
            let mut offset = 0;
            for &p in parts {
                let pv = val(p);
                let (r, c) = (pv.rows(), pv.cols());
                let piece = if *axis == 0 {
                    let gc = g.cols();
                    Tensor::matrix(r, c, g.data()[offset * gc..(offset + r) * gc].to_vec())?
                } else {
                    let gc = g.cols();
                    let mut d = Vec::with_capacity(r * c);
                    for i in 0..r {
                        d.extend_from_slice(&g.data()[i * gc + offset..i * gc + offset + c]);
                    }
                    Tensor::matrix(r, c, d)?
                };
                offset += if *axis == 0 { r } else { c };
                if needs(nodes, p) {
                    accumulate(grads, p, piece);
                }
            }
        }
        Op::Slice { src, axis, start } => {
            let sv = val(*src);
            let (r, c) = (sv.rows(), sv.cols());
            let mut d = vec![0.0; r * c];
            if *axis == 0 {
                d[start * c..start * c + g.len()].copy_from_slice(g.data());
            } else {
                let len = g.cols();
                for i in 0..r {
                    d[i * c + start..i * c + start + len].copy_from_slice(g.row_slice(i));
                }
            }
            accumulate(grads, *src, Tensor::matrix(r, c, d)?);
        }
        Op::GatherRows { src, idx } => {
            let sv = val(*src);
            let c = sv.cols();
            let mut d = vec![0.0; sv.len()];
            for (k, &i) in idx.iter().enumerate() {
                for (o, x) in d[i * c..(i + 1) * c].iter_mut().zip(g.row_slice(k)) {
                    *o += x;
                }
            }
            accumulate(grads, *src, Tensor::new(sv.shape().to_vec(), d)?);
        }
        Op::EmbeddingSum { tables, idx } => {
            let t = tables.len();
            let d = g.cols();
            for (k, &tab) in tables.iter().enumerate() {
                if !needs(nodes, tab) {
                    continue;
                }
                let tv = val(tab);
                let mut dt = vec![0.0; tv.len()];
                for i in 0..g.rows() {
                    let j = idx[i * t + k];
                    for (o, x) in dt[j * d..(j + 1) * d].iter_mut().zip(g.row_slice(i)) {
                        *o += x;
                    }
                }
                accumulate(grads, tab, Tensor::new(tv.shape().to_vec(), dt)?);
            }
        }
        Op::Relu(a) => {
            let av = val(*a);
            let d = g
                .data()
                .iter()
                .zip(av.data())
                .map(|(gx, x)| if *x > 0.0 { *gx } else { 0.0 })
                .collect();
            accumulate(grads, *a, Tensor::new(g.shape().to_vec(), d)?);
        }
        Op::LeakyRelu(a, slope) => {
            let av = val(*a);
            let d = g
                .data()
                .iter()
                .zip(av.data())
                .map(|(gx, x)| if *x > 0.0 { *gx } else { gx * slope })
                .collect();
            accumulate(grads, *a, Tensor::new(g.shape().to_vec(), d)?);
        }
        Op::Softmax { src, axis } => {
            let (r, c) = (out.rows(), out.cols());
            let y = out.data();
            let mut d = vec![0.0; r * c];
            for (off, stride, len) in lanes(r, c, *axis) {
                let dot: f64 = (0..len)
                    .map(|j| g.data()[off + j * stride] * y[off + j * stride])
                    .sum();
                for j in 0..len {
                    let p = off + j * stride;
                    d[p] = y[p] * (g.data()[p] - dot);
                }
            }
            accumulate(grads, *src, Tensor::matrix(r, c, d)?);
        }
        Op::SegmentSoftmax { src, ids, segments } => {
            let c = out.cols();
            let y = out.data();
            let mut dot = vec![0.0; segments * c];
            for (k, &s) in ids.iter().enumerate() {
                for j in 0..c {
                    dot[s * c + j] += g.data()[k * c + j] * y[k * c + j];
                }
            }
            let mut d = vec![0.0; out.len()];
            for (k, &s) in ids.iter().enumerate() {
                for j in 0..c {
                    let p = k * c + j;
                    d[p] = y[p] * (g.data()[p] - dot[s * c + j]);
                }
            }
            accumulate(grads, *src, Tensor::new(out.shape().to_vec(), d)?);
        }
        Op::LayerNorm {
            x,
            gain,
            bias,
            xhat,
            inv_std,
        } => {
            let gv = val(*gain);
            let (r, c) = (out.rows(), out.cols());
            if needs(nodes, *x) {
                let mut dx = vec![0.0; r * c];
                for i in 0..r {
                    let mut sum_d = 0.0;
                    let mut sum_dx = 0.0;
                    for j in 0..c {
                        let dh = g.data()[i * c + j] * gv.data()[j];
                        sum_d += dh;
                        sum_dx += dh * xhat[i * c + j];
                    }
                    for j in 0..c {
                        let dh = g.data()[i * c + j] * gv.data()[j];
                        dx[i * c + j] = inv_std[i] / c as f64
                            * (c as f64 * dh - sum_d - xhat[i * c + j] * sum_dx);
                    }
                }
                accumulate(grads, *x, Tensor::matrix(r, c, dx)?);
            }
            if needs(nodes, *gain) {
                let mut dg = vec![0.0; c];
                for i in 0..r {
                    for j in 0..c {
                        dg[j] += g.data()[i * c + j] * xhat[i * c + j];
                    }
                }
                accumulate(grads, *gain, Tensor::matrix(1, c, dg)?);
            }
            if needs(nodes, *bias) {
                let mut db = vec![0.0; c];
                for row in g.data().chunks(c) {
                    for (o, v) in db.iter_mut().zip(row) {
                        *o += v;
                    }
                }
                accumulate(grads, *bias, Tensor::matrix(1, c, db)?);
            }
        }
        Op::Dropout { src, mask } => {
            let d = g.data().iter().zip(mask).map(|(x, m)| x * m).collect();
            accumulate(grads, *src, Tensor::new(g.shape().to_vec(), d)?);
        }
        Op::SegmentSum { src, ids } => {
            let c = g.cols();
            let mut d = Vec::with_capacity(ids.len() * c);
            for &s in ids.iter() {
                d.extend_from_slice(g.row_slice(s));
            }
            accumulate(grads, *src, Tensor::matrix(ids.len(), c, d)?);
        }
        Op::ScaleRows(a, w) => {
            let (av, wv) = (val(*a), val(*w));
            let c = av.cols();
            if needs(nodes, *a) {
                let mut d = g.clone();
                for (row, &s) in d.data_mut().chunks_mut(c.max(1)).zip(wv.data()) {
                    for x in row {
                        *x *= s;
                    }
                }
                accumulate(grads, *a, d);
            }
            if needs(nodes, *w) {
                let dw = (0..av.rows())
                    .map(|k| {
                        g.row_slice(k)
                            .iter()
                            .zip(av.row_slice(k))
                            .map(|(x, y)| x * y)
                            .sum()
                    })
                    .collect();
                accumulate(grads, *w, Tensor::matrix(av.rows(), 1, dw)?);
            }
        }
        Op::SumAll(a) => {
            let av = val(*a);
            accumulate(
                grads,
                *a,
                Tensor::new(av.shape().to_vec(), vec![g.item(); av.len()])?,
            );
        }
        Op::MeanRows(a) => {
            let av = val(*a);
            let r = av.rows();
            let mut d = Vec::with_capacity(av.len());
            for _ in 0..r {
                d.extend(g.data().iter().map(|x| x / r as f64));
            }
            accumulate(grads, *a, Tensor::new(av.shape().to_vec(), d)?);
        }
        Op::CrossEntropy {
            logits,
            targets,
            probs,
            count,
        } => {
            let lv = val(*logits);
            let v = lv.cols();
            let mut d = vec![0.0; lv.len()];
            if *count > 0 {
                let s = g.item() / *count as f64;
                for (i, t) in targets.iter().enumerate() {
                    if let Some(t) = t {
                        for j in 0..v {
                            d[i * v + j] = probs[i * v + j] * s;
                        }
                        d[i * v + t] -= s;
                    }
                }
            }
            accumulate(grads, *logits, Tensor::new(lv.shape().to_vec(), d)?);
        }
        Op::Mse(p, t) => {
            let (pv, tv) = (val(*p), val(*t));
            let s = 2.0 * g.item() / pv.len() as f64;
            let d: Vec<f64> = pv
                .data()
                .iter()
                .zip(tv.data())
                .map(|(a, b)| (a - b) * s)
                .collect();
            if needs(nodes, *t) {
                accumulate(
                    grads,
                    *t,
                    Tensor::new(pv.shape().to_vec(), d.iter().map(|x| -x).collect())?,
                );
            }
            if needs(nodes, *p) {
                accumulate(grads, *p, Tensor::new(pv.shape().to_vec(), d)?);
            }
        }
    }
    Ok(())
}
