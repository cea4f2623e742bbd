//! Tape-based reverse-mode differentiation.
//!
//! Every operation applied to a [`Var`] appends a node to its [`Tape`]. Node
//! ids are assigned in creation order, so a reverse sweep over ids is a
//! reverse topological order of the computation graph.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Result, TensorError};
use crate::ops::{backward_op, Op};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

pub(crate) type NodeId = usize;

pub(crate) struct Node {
    pub(crate) value: Arc<Tensor>,
    pub(crate) op: Op,
    pub(crate) requires_grad: bool,
    pub(crate) param: Option<ParamId>,
}

/// Records the operations of one forward pass.
///
/// A tape is single-threaded; independent tapes can be built concurrently
/// against the same read-only [`ParamStore`].
#[derive(Default)]
pub struct Tape {
    pub(crate) nodes: RefCell<Vec<Node>>,
    consumed: Cell<bool>,
    param_cache: RefCell<HashMap<ParamId, NodeId>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    pub(crate) tape: &'t Tape,
    pub(crate) id: NodeId,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var(#{} {:?})", self.id, self.value().shape())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A value that does not receive gradients.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push_leaf(Arc::new(value), false, None)
    }

    /// A differentiable leaf.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push_leaf(Arc::new(value), true, None)
    }

    /// Bring a stored parameter onto the tape. Repeated calls for the same
    /// id return the same node.
    pub fn param(&self, store: &ParamStore, id: ParamId) -> Var<'_> {
        if let Some(&node) = self.param_cache.borrow().get(&id) {
            return Var {
                tape: self,
                id: node,
            };
        }
        let v = self.push_leaf(store.get_arc(id), true, Some(id));
        self.param_cache.borrow_mut().insert(id, v.id);
        v
    }

    fn push_leaf(&self, value: Arc<Tensor>, requires_grad: bool, param: Option<ParamId>) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
            param,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    pub(crate) fn push(&self, value: Tensor, op: Op) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let requires_grad = op.parents().iter().any(|&p| nodes[p].requires_grad);
        nodes.push(Node {
            value: Arc::new(value),
            op,
            requires_grad,
            param: None,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    pub(crate) fn value_of(&self, id: NodeId) -> Arc<Tensor> {
        self.nodes.borrow()[id].value.clone()
    }

    /// Propagate gradients from a scalar output back to every leaf that
    /// requires them. A tape supports exactly one backward pass.
    pub fn backward(&self, output: Var<'_>) -> Result<Gradients> {
        if self.consumed.get() {
            return Err(TensorError::Consumed);
        }
        let nodes = self.nodes.borrow();
        let out_val = &nodes[output.id].value;
        if out_val.len() != 1 {
            return Err(TensorError::NonScalar(out_val.shape().to_vec()));
        }
        self.consumed.set(true);

        let mut grads: Vec<Option<Tensor>> = vec![None; output.id + 1];
        grads[output.id] = Some(Tensor::new(out_val.shape().to_vec(), vec![1.0])?);
        for id in (0..=output.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else {
                continue;
            };
            if !matches!(node.op, Op::Leaf) {
                backward_op(&nodes, id, &g, &mut grads)?;
            }
            grads[id] = Some(g);
        }
        for (slot, node) in grads.iter_mut().zip(nodes.iter()) {
            if !node.requires_grad {
                *slot = None;
            }
        }

        let params = nodes[..=output.id]
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.param.map(|p| (p, i)))
            .collect();
        Ok(Gradients { grads, params })
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Arc<Tensor> {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(ParamId, NodeId)>,
}

impl Gradients {
    /// Gradient with respect to a recorded value, if it influenced the output.
    pub fn wrt(&self, v: Var<'_>) -> Option<&Tensor> {
        self.grads.get(v.id).and_then(Option::as_ref)
    }

    /// Gradients of every parameter that took part in the forward pass.
    pub fn param_grads(&self) -> impl Iterator<Item = (ParamId, &Tensor)> + '_ {
        self.params
            .iter()
            .filter_map(|&(p, id)| self.grads[id].as_ref().map(|g| (p, g)))
    }
}

pub(crate) fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
    match &mut grads[id] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_derivative() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(3.0));
        let y = x.mul(x).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.wrt(x).unwrap().item(), 6.0);
    }

    #[test]
    fn second_backward_is_rejected() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(2.0));
        let y = x.scale(3.0);
        tape.backward(y).unwrap();
        assert_eq!(tape.backward(y).unwrap_err(), TensorError::Consumed);
    }

    #[test]
    fn non_scalar_output_is_rejected() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(2, 2));
        assert!(matches!(
            tape.backward(x),
            Err(TensorError::NonScalar(_))
        ));
    }

    #[test]
    fn constants_get_no_gradient() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(2.0));
        let c = tape.constant(Tensor::scalar(5.0));
        let y = x.mul(c).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.wrt(x).unwrap().item(), 5.0);
        assert!(g.wrt(c).is_none());
    }

    #[test]
    fn shared_subexpression_accumulates() {
        // f = (x + x) * x  -> f' = 4x
        let tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(1.5));
        let y = x.add(x).unwrap().mul(x).unwrap();
        let g = tape.backward(y).unwrap();
        assert!((g.wrt(x).unwrap().item() - 6.0).abs() < 1e-15);
    }
}
