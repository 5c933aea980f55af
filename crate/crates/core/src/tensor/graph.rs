//! Reverse-mode differentiation over a build-order tape.
//!
//! Nodes are appended in evaluation order, so walking the tape backwards
//! is already a reverse topological order. Gradients of interior nodes are
//! dropped as soon as they have been propagated; leaf gradients survive
//! the pass and are what optimizers read.

use super::ops::{self, ActKind};
use super::{Scalar, Shape, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct NodeId(usize);

enum Op<T> {
    Leaf,
    Conv2d { input: NodeId, weights: NodeId, bias: NodeId, stride: usize, padding: usize },
    Linear { input: NodeId, weights: NodeId, bias: NodeId },
    Activation { input: NodeId, kind: ActKind<T> },
    AvgPool { input: NodeId, k: usize, stride: usize },
    Add { lhs: NodeId, rhs: NodeId },
    Scale { input: NodeId, factor: T },
    ConcatChannels { inputs: Vec<NodeId> },
    MseLoss { pred: NodeId, target: NodeId },
    BceLoss { pred: NodeId, labels: Vec<T> },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// A single forward trace; `backward` may be run once per trace.
pub struct Graph<T: Scalar> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new(), grads: Vec::new() }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> NodeId {
        self.nodes.push(Node { value, op, needs_grad });
        self.grads.push(None);
        NodeId(self.nodes.len() - 1)
    }

    /// Inserts an input tensor. Parameters pass `requires_grad = true`,
    /// data tensors `false`.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> NodeId {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn scalar_value(&self, id: NodeId) -> Result<T> {
        let t = self.value(id);
        if t.numel() != 1 {
            return Err(Error::Usage(format!("node holds {} not a scalar", t.shape())));
        }
        Ok(t.data()[0])
    }

    /// Gradient of a leaf after `backward`. `None` means the leaf does not
    /// influence the loss (its gradient is identically zero).
    pub fn grad(&self, id: NodeId) -> Option<&[T]> {
        self.grads[id.0].as_deref()
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    pub fn conv2d(
        &mut self,
        input: NodeId,
        weights: NodeId,
        bias: NodeId,
        stride: usize,
        padding: usize,
    ) -> Result<NodeId> {
        let bs = self.value(bias).shape();
        let ws = self.value(weights).shape();
        if bs.numel() != ws.n {
            return Err(Error::Dimension(format!(
                "conv bias {} does not match {} output channels",
                bs, ws.n
            )));
        }
        let value = ops::conv2d_raw(
            self.value(input),
            self.value(weights),
            self.value(bias).data(),
            stride,
            padding,
        )?;
        let needs = self.needs(input) || self.needs(weights) || self.needs(bias);
        Ok(self.push(value, Op::Conv2d { input, weights, bias, stride, padding }, needs))
    }

    pub fn linear(&mut self, input: NodeId, weights: NodeId, bias: NodeId) -> Result<NodeId> {
        let value = ops::linear_raw(self.value(input), self.value(weights), self.value(bias).data())?;
        let needs = self.needs(input) || self.needs(weights) || self.needs(bias);
        Ok(self.push(value, Op::Linear { input, weights, bias }, needs))
    }

    pub fn activation(&mut self, input: NodeId, kind: ActKind<T>) -> NodeId {
        let value = ops::activation(self.value(input), kind);
        let needs = self.needs(input);
        self.push(value, Op::Activation { input, kind }, needs)
    }

    pub fn avg_pool2d(&mut self, input: NodeId, k: usize, stride: usize) -> Result<NodeId> {
        let value = ops::avg_pool2d(self.value(input), k, stride)?;
        let needs = self.needs(input);
        Ok(self.push(value, Op::AvgPool { input, k, stride }, needs))
    }

    pub fn add(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        if self.value(lhs).shape() != self.value(rhs).shape() {
            return Err(Error::Dimension(format!(
                "add operands differ: {} vs {}",
                self.value(lhs).shape(),
                self.value(rhs).shape()
            )));
        }
        let mut value = self.value(lhs).clone();
        for (v, &r) in value.data_mut().iter_mut().zip(self.value(rhs).data()) {
            *v = *v + r;
        }
        let needs = self.needs(lhs) || self.needs(rhs);
        Ok(self.push(value, Op::Add { lhs, rhs }, needs))
    }

    pub fn scale(&mut self, input: NodeId, factor: T) -> NodeId {
        let mut value = self.value(input).clone();
        for v in value.data_mut() {
            *v = *v * factor;
        }
        let needs = self.needs(input);
        self.push(value, Op::Scale { input, factor }, needs)
    }

    /// Stacks tensors along the channel axis; batch and spatial dims must
    /// agree.
    pub fn concat_channels(&mut self, inputs: &[NodeId]) -> Result<NodeId> {
        if inputs.is_empty() {
            return Err(Error::Usage("concat of zero tensors".into()));
        }
        let first = self.value(inputs[0]).shape();
        let mut channels = 0;
        for &id in inputs {
            let s = self.value(id).shape();
            if (s.n, s.h, s.w) != (first.n, first.h, first.w) {
                return Err(Error::Dimension(format!(
                    "concat operands differ: {} vs {}",
                    first,
                    s
                )));
            }
            channels += s.c;
        }
        let out_shape = Shape::new(first.n, channels, first.h, first.w);
        let plane = first.h * first.w;
        let mut data = Vec::with_capacity(out_shape.numel());
        for n in 0..first.n {
            for &id in inputs {
                let t = self.value(id);
                let c = t.shape().c;
                data.extend_from_slice(&t.data()[n * c * plane..(n + 1) * c * plane]);
            }
        }
        let needs = inputs.iter().any(|&id| self.needs(id));
        let value = Tensor::new(out_shape, data)?;
        Ok(self.push(value, Op::ConcatChannels { inputs: inputs.to_vec() }, needs))
    }

    pub fn mse_loss(&mut self, pred: NodeId, target: NodeId) -> Result<NodeId> {
        let v = ops::mse_loss(self.value(pred), self.value(target))?;
        let needs = self.needs(pred) || self.needs(target);
        Ok(self.push(Tensor::scalar(v), Op::MseLoss { pred, target }, needs))
    }

    /// Mean binary cross entropy of a `(batch, 1, 1, 1)` prediction tensor
    /// against per-sample labels in {0, 1}.
    pub fn bce_loss(&mut self, pred: NodeId, labels: &[T]) -> Result<NodeId> {
        let v = ops::bce_loss(self.value(pred).data(), labels)?;
        let needs = self.needs(pred);
        Ok(self.push(Tensor::scalar(v), Op::BceLoss { pred, labels: labels.to_vec() }, needs))
    }

    fn accumulate(&mut self, id: NodeId, contribution: &[T]) {
        let numel = self.nodes[id.0].value.numel();
        let slot = &mut self.grads[id.0];
        let buf = slot.get_or_insert_with(|| vec![T::zero(); numel]);
        for (g, &c) in buf.iter_mut().zip(contribution) {
            *g = *g + c;
        }
    }

    /// Populates leaf gradients of every parameter the loss depends on.
    /// `root` must hold a scalar.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        if self.value(root).numel() != 1 {
            return Err(Error::Usage(format!(
                "backward requires a scalar root, got {}",
                self.value(root).shape()
            )));
        }
        for g in self.grads.iter_mut() {
            *g = None;
        }
        self.grads[root.0] = Some(vec![T::one()]);

        for idx in (0..=root.0).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            if matches!(self.nodes[idx].op, Op::Leaf) {
                continue; // leaf grads are results, keep them
            }
            let Some(g) = self.grads[idx].take() else { continue };
            // Split borrows: read node values immutably, write grads.
            match &self.nodes[idx].op {
                Op::Leaf => unreachable!(),
                &Op::Conv2d { input, weights, bias, stride, padding } => {
                    let gt = Tensor::new(self.nodes[idx].value.shape(), g)?;
                    let grads = ops::conv2d_backward(
                        &self.nodes[input.0].value,
                        &self.nodes[weights.0].value,
                        stride,
                        padding,
                        &gt,
                        self.needs(input),
                    );
                    if let Some(gi) = grads.input {
                        self.accumulate(input, gi.data());
                    }
                    if self.needs(weights) {
                        self.accumulate(weights, grads.weights.data());
                    }
                    if self.needs(bias) {
                        self.accumulate(bias, &grads.bias);
                    }
                }
                &Op::Linear { input, weights, bias } => {
                    let gt = Tensor::new(self.nodes[idx].value.shape(), g)?;
                    let grads = ops::linear_backward(
                        &self.nodes[input.0].value,
                        &self.nodes[weights.0].value,
                        &gt,
                        self.needs(input),
                    );
                    if let Some(gi) = grads.input {
                        self.accumulate(input, gi.data());
                    }
                    if self.needs(weights) {
                        self.accumulate(weights, grads.weights.data());
                    }
                    if self.needs(bias) {
                        self.accumulate(bias, &grads.bias);
                    }
                }
                &Op::Activation { input, kind } => {
                    if self.needs(input) {
                        let gi = ops::activation_backward(
                            &self.nodes[input.0].value,
                            &self.nodes[idx].value,
                            &g,
                            kind,
                        );
                        self.accumulate(input, &gi);
                    }
                }
                &Op::AvgPool { input, k, stride } => {
                    if self.needs(input) {
                        let gt = Tensor::new(self.nodes[idx].value.shape(), g)?;
                        let gi = ops::avg_pool2d_backward(
                            self.nodes[input.0].value.shape(),
                            k,
                            stride,
                            &gt,
                        );
                        self.accumulate(input, gi.data());
                    }
                }
                &Op::Add { lhs, rhs } => {
                    if self.needs(lhs) {
                        self.accumulate(lhs, &g);
                    }
                    if self.needs(rhs) {
                        self.accumulate(rhs, &g);
                    }
                }
                &Op::Scale { input, factor } => {
                    if self.needs(input) {
                        let gi: Vec<T> = g.iter().map(|&v| v * factor).collect();
                        self.accumulate(input, &gi);
                    }
                }
                Op::ConcatChannels { inputs } => {
                    let inputs = inputs.clone();
                    let out_shape = self.nodes[idx].value.shape();
                    let plane = out_shape.h * out_shape.w;
                    let mut c_off = 0;
                    for &id in &inputs {
                        let s = self.nodes[id.0].value.shape();
                        if self.needs(id) {
                            let mut gi = vec![T::zero(); s.numel()];
                            for n in 0..s.n {
                                let src = (n * out_shape.c + c_off) * plane;
                                let dst = n * s.c * plane;
                                gi[dst..dst + s.c * plane]
                                    .copy_from_slice(&g[src..src + s.c * plane]);
                            }
                            self.accumulate(id, &gi);
                        }
                        c_off += s.c;
                    }
                }
                &Op::MseLoss { pred, target } => {
                    let upstream = g[0];
                    if self.needs(pred) {
                        let gi = ops::mse_loss_backward(
                            &self.nodes[pred.0].value,
                            &self.nodes[target.0].value,
                            upstream,
                        );
                        self.accumulate(pred, &gi);
                    }
                    if self.needs(target) {
                        let gi = ops::mse_loss_backward(
                            &self.nodes[target.0].value,
                            &self.nodes[pred.0].value,
                            upstream,
                        );
                        self.accumulate(target, &gi);
                    }
                }
                Op::BceLoss { pred, labels } => {
                    let pred = *pred;
                    if self.needs(pred) {
                        let gi = ops::bce_loss_backward(
                            self.nodes[pred.0].value.data(),
                            labels,
                            g[0],
                        );
                        self.accumulate(pred, &gi);
                    }
                }
            }
        }
        Ok(())
    }
}
