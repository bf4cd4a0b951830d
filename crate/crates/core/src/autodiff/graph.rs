use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use super::ops::Op;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Index of a node inside a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum LeafKind {
    Input(String),
    Param(String),
    Const,
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    leaf: Option<LeafKind>,
    value: Tensor,
    requires_grad: bool,
}

/// Define-by-run computation graph.
///
/// Every builder method evaluates its node immediately, so node values are
/// available as soon as the node exists. Nodes are appended in evaluation
/// order, which is also a topological order. The recorded graph can be
/// re-evaluated with new leaf values through [`Graph::forward`].
#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    names: HashMap<String, NodeId>,
    outputs: BTreeMap<String, NodeId>,
}

/// Gradients of a scalar loss with respect to the graph's trainable leaves.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    by_node: HashMap<NodeId, Tensor>,
    by_name: BTreeMap<String, Tensor>,
}

impl Gradients {
    pub fn get(&self, node: NodeId) -> Option<&Tensor> {
        self.by_node.get(&node)
    }

    pub fn named(&self, name: &str) -> Option<&Tensor> {
        self.by_name.get(name)
    }

    /// Named gradients of parameter leaves, in name order.
    pub fn params(&self) -> &BTreeMap<String, Tensor> {
        &self.by_name
    }

    pub fn into_params(self) -> BTreeMap<String, Tensor> {
        self.by_name
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, node: NodeId) -> &Tensor {
        &self.nodes[node.0].value
    }

    pub fn shape(&self, node: NodeId) -> &[usize] {
        self.nodes[node.0].value.shape()
    }

    /// Looks up a named input or parameter leaf.
    pub fn leaf(&self, name: &str) -> Option<NodeId> {
        self.names.get(name).copied()
    }

    /// Named, non-trainable leaf that can be rebound by [`Graph::forward`].
    pub fn input(&mut self, name: &str, value: Tensor) -> NodeId {
        self.named_leaf(LeafKind::Input(name.to_string()), name, value)
    }

    /// Named trainable leaf; [`Graph::backward`] reports its gradient by name.
    pub fn param(&mut self, name: &str, value: Tensor) -> NodeId {
        self.named_leaf(LeafKind::Param(name.to_string()), name, value)
    }

    /// Anonymous constant (masks, fixed coefficients). Receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push_leaf(LeafKind::Const, value, false)
    }

    fn named_leaf(&mut self, kind: LeafKind, name: &str, value: Tensor) -> NodeId {
        let requires_grad = matches!(kind, LeafKind::Param(_));
        let id = self.push_leaf(kind, value, requires_grad);
        self.names.insert(name.to_string(), id);
        id
    }

    fn push_leaf(&mut self, kind: LeafKind, value: Tensor, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op: Op::Leaf,
            leaf: Some(kind),
            value,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Registers `node` under an output name returned by [`Graph::forward`].
    pub fn mark_output(&mut self, name: &str, node: NodeId) {
        self.outputs.insert(name.to_string(), node);
    }

    fn push(&mut self, op: Op) -> Result<NodeId> {
        let index = self.nodes.len();
        let inputs = op.inputs();
        let value = {
            let args: Vec<&Tensor> = inputs.iter().map(|i| &self.nodes[i.0].value).collect();
            op.eval(&args).map_err(|detail| Error::Shape {
                node: index,
                op: op.name(),
                detail,
            })?
        };
        let requires_grad = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            op,
            leaf: None,
            value,
            requires_grad,
        });
        Ok(NodeId(index))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Mul(a, b))
    }

    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        self.push(Op::AddBias(x, bias))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::MatMul(a, b))
    }

    pub fn batch_matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::BatchMatMul(a, b))
    }

    pub fn transpose(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::TransposeLast2(x))
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        self.push(Op::Reshape(x, shape.to_vec()))
    }

    /// Embedding lookup: rows of `table` selected by `ids`.
    pub fn gather(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        self.push(Op::Gather {
            table,
            ids: Arc::new(ids.to_vec()),
        })
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Softmax(x))
    }

    pub fn log_softmax(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::LogSoftmax(x))
    }

    pub fn log(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Log(x))
    }

    pub fn exp(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Exp(x))
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Sigmoid(x))
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Relu(x))
    }

    /// Concatenation along the last axis.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::invalid("concat of zero tensors"));
        }
        self.push(Op::Concat(parts.to_vec()))
    }

    /// Columns `start..start + len` of the last axis.
    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        self.push(Op::Slice { input: x, start, len })
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        self.push(Op::Scale(x, c))
    }

    pub fn add_scalar(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        self.push(Op::AddScalar(x, c))
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Sum(x))
    }

    /// `sum_k weights[k] * x[k]`; a zero weight masks the entry out.
    pub fn weighted_sum(&mut self, x: NodeId, weights: Vec<f64>) -> Result<NodeId> {
        self.push(Op::WeightedSum {
            input: x,
            weights: Arc::new(weights),
        })
    }

    /// Per-row negative log-likelihood with label smoothing; output `[rows, 1]`.
    pub fn nll(&mut self, logp: NodeId, targets: &[usize], smoothing: f64) -> Result<NodeId> {
        self.push(Op::Nll {
            logp,
            targets: Arc::new(targets.to_vec()),
            smoothing,
        })
    }

    /// Rebinds named leaves and re-evaluates every node in topological order.
    ///
    /// Returns the values of all nodes registered with [`Graph::mark_output`].
    pub fn forward<'a, I>(&mut self, bindings: I) -> Result<BTreeMap<String, Tensor>>
    where
        I: IntoIterator<Item = (&'a str, Tensor)>,
    {
        for (name, value) in bindings {
            let id = self
                .names
                .get(name)
                .copied()
                .ok_or_else(|| Error::UnboundInput(name.to_string()))?;
            self.nodes[id.0].value = value;
        }
        for index in 0..self.nodes.len() {
            if self.nodes[index].leaf.is_some() {
                continue;
            }
            let op = &self.nodes[index].op;
            let value = {
                let inputs = op.inputs();
                let args: Vec<&Tensor> = inputs.iter().map(|i| &self.nodes[i.0].value).collect();
                op.eval(&args).map_err(|detail| Error::Shape {
                    node: index,
                    op: op.name(),
                    detail,
                })?
            };
            self.nodes[index].value = value;
        }
        Ok(self
            .outputs
            .iter()
            .map(|(name, id)| (name.clone(), self.nodes[id.0].value.clone()))
            .collect())
    }

    /// First node holding a non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<NodeId> {
        self.nodes.iter().position(|n| !n.value.is_finite()).map(NodeId)
    }

    /// Reverse-mode sweep from a scalar `loss` node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let loss_value = &self.nodes[loss.0].value;
        if loss_value.numel() != 1 {
            return Err(Error::NonScalarLoss {
                node: loss.0,
                shape: loss_value.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for index in (0..=loss.0).rev() {
            let node = &self.nodes[index];
            if node.leaf.is_some() || !node.requires_grad {
                continue;
            }
            let Some(g) = grads[index].take() else {
                continue;
            };
            let inputs = node.op.inputs();
            let mut local: Vec<Option<Vec<f64>>> = Vec::with_capacity(inputs.len());
            for (k, id) in inputs.iter().enumerate() {
                let input = &self.nodes[id.0];
                if !input.requires_grad {
                    local.push(None);
                } else if inputs[..k].contains(id) {
                    local.push(Some(vec![0.0; input.value.numel()]));
                } else {
                    local.push(Some(grads[id.0].take().unwrap_or_else(|| vec![0.0; input.value.numel()])));
                }
            }
            {
                let args: Vec<&Tensor> = inputs.iter().map(|i| &self.nodes[i.0].value).collect();
                let mut slots: Vec<Option<&mut Vec<f64>>> = local.iter_mut().map(|s| s.as_mut()).collect();
                node.op.backward(&args, &node.value, &g, &mut slots);
            }
            for (id, buf) in inputs.iter().zip(local) {
                let Some(buf) = buf else { continue };
                match grads[id.0].as_mut() {
                    Some(existing) => existing.iter_mut().zip(&buf).for_each(|(d, v)| *d += v),
                    None => grads[id.0] = Some(buf),
                }
            }
        }

        let mut out = Gradients::default();
        for (index, node) in self.nodes.iter().enumerate().take(loss.0 + 1) {
            let Some(LeafKind::Param(name)) = &node.leaf else {
                continue;
            };
            let data = grads[index].take().unwrap_or_else(|| vec![0.0; node.value.numel()]);
            let tensor = Tensor::from_parts(node.value.shape().to_vec(), data);
            out.by_node.insert(NodeId(index), tensor.clone());
            out.by_name.insert(name.clone(), tensor);
        }
        // Params created after the loss node still get an explicit zero.
        for (index, node) in self.nodes.iter().enumerate().skip(loss.0 + 1) {
            if let Some(LeafKind::Param(name)) = &node.leaf {
                let tensor = Tensor::zeros(node.value.shape());
                out.by_node.insert(NodeId(index), tensor.clone());
                out.by_name.insert(name.clone(), tensor);
            }
        }
        Ok(out)
    }
}
