use super::ops::{self, Op};
use super::params::{ParamId, ParamStore};
use super::Tensor;
use crate::error::{contract_err, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

pub(crate) struct Node {
    pub value: Tensor,
    pub op: Op,
    pub requires_grad: bool,
}

/// Append-only record of a forward computation.
///
/// Nodes are pushed in evaluation order, so every node's inputs precede it
/// and a single reverse sweep visits each node once. A tape supports one
/// `backward`; a second call is a contract violation.
#[derive(Default)]
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
    grads: Vec<Option<Vec<f32>>>,
    consumed: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Record an input value.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Record a copy of a stored parameter; its gradient flows back to the
    /// store through [`ParamStore::accumulate_grads`].
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let requires_grad = store.is_trainable(id);
        self.nodes.push(Node {
            value: store.value(id).clone(),
            op: Op::Param(id),
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last `backward` loss with respect to a leaf or
    /// parameter node. Intermediate gradients are released during the sweep.
    pub fn grad(&self, v: Var) -> Option<&[f32]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub(crate) fn push(&mut self, value: Tensor, op: Op) -> Var {
        let requires_grad = op.inputs().iter().any(|i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Reverse sweep from a scalar loss.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.consumed {
            return contract_err("backward already ran on this tape");
        }
        let loss_node = &self.nodes[loss.0];
        if loss_node.value.len() != 1 {
            return contract_err(format!(
                "backward needs a scalar loss, got shape {:?}",
                loss_node.value.shape()
            ));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Vec<f32>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                grads[i] = None;
                continue;
            }
            if matches!(node.op, Op::Leaf | Op::Param(_)) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let mut sink = GradSink {
                nodes: &self.nodes,
                grads: &mut grads,
            };
            ops::backward(&node.op, &node.value, &g, &mut sink);
        }
        self.grads = grads;
        Ok(())
    }

    /// `backward` followed by accumulation of parameter gradients into `store`.
    pub fn backward_into(&mut self, loss: Var, store: &mut ParamStore) -> Result<()> {
        self.backward(loss)?;
        store.accumulate_grads(self)
    }

    pub(crate) fn param_grads(&self) -> impl Iterator<Item = (ParamId, &[f32])> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.op {
                Op::Param(id) => self.grads.get(i)?.as_deref().map(|g| (id, g)),
                _ => None,
            })
    }
}

/// Write access to input gradients during the reverse sweep.
pub(crate) struct GradSink<'a> {
    nodes: &'a [Node],
    grads: &'a mut Vec<Option<Vec<f32>>>,
}

impl GradSink<'_> {
    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient buffer of `v`, zero-initialised on first use; `None` when `v`
    /// does not require a gradient.
    pub fn slot(&mut self, v: Var) -> Option<&mut [f32]> {
        let node = &self.nodes[v.0];
        if !node.requires_grad {
            return None;
        }
        let n = node.value.len();
        Some(self.grads[v.0].get_or_insert_with(|| vec![0.0; n]))
    }

    /// Value of `a` together with the gradient buffer of `b`.
    pub fn value_and_slot(&mut self, a: Var, b: Var) -> (&Tensor, Option<&mut [f32]>) {
        let node = &self.nodes[b.0];
        let value = &self.nodes[a.0].value;
        if !node.requires_grad {
            return (value, None);
        }
        let n = node.value.len();
        (
            value,
            Some(self.grads[b.0].get_or_insert_with(|| vec![0.0; n])),
        )
    }

    pub fn add(&mut self, v: Var, contribution: &[f32]) {
        if let Some(slot) = self.slot(v) {
            for (s, c) in slot.iter_mut().zip(contribution) {
                *s += c;
            }
        }
    }
}
