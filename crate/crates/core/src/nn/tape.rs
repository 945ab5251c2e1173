//! Reverse-mode differentiation over vector-valued nodes.
//!
//! A [`Tape`] records a forward pass: every node stores its value and the
//! operation that produced it. [`Tape::backward`] walks the nodes in reverse
//! and accumulates parameter gradients into [`Gradients`], keyed by the
//! [`ParamId`] each traced parameter was registered under. Parameters traced
//! without an id are treated as constants.

use super::layer::{Activation, DenseLayer};
use super::tensor::{dot, Tensor2};
use crate::error::{Error, Result};

/// Clamp applied to probabilities before taking logarithms.
pub const BCE_EPS: f64 = 1e-7;

/// Index of a parameter tensor in a [`Parameterized`](super::Parameterized) model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

/// Weight and bias ids for a traced dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseIds {
    pub weights: ParamId,
    pub bias: ParamId,
}

impl DenseIds {
    /// Ids `base` and `base + 1`.
    pub fn at(base: usize) -> Self {
        Self {
            weights: ParamId(base),
            bias: ParamId(base + 1),
        }
    }
}

enum Op<'a> {
    Leaf,
    Gather {
        param: Option<ParamId>,
        table_len: usize,
        row: usize,
    },
    Dense {
        layer: &'a DenseLayer,
        ids: Option<DenseIds>,
        input: NodeId,
        pre: Vec<f64>,
    },
    Concat(Vec<NodeId>),
    Mean(Vec<NodeId>),
    CosineDistance {
        a: NodeId,
        b: NodeId,
        degenerate: bool,
    },
    Sub(NodeId, NodeId),
    AddScalar(NodeId),
    Relu(NodeId),
    Bce {
        p: NodeId,
        y: f64,
        clamped: bool,
    },
    SquaredError {
        x: NodeId,
        target: Vec<f64>,
    },
}

struct Node<'a> {
    op: Op<'a>,
    value: Vec<f64>,
}

/// Parameter gradients keyed by [`ParamId`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    slots: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn new() -> Self {
        Self::default()
    }

    fn slot_mut(&mut self, id: ParamId, len: usize) -> &mut [f64] {
        if self.slots.len() <= id.0 {
            self.slots.resize(id.0 + 1, None);
        }
        self.slots[id.0].get_or_insert_with(|| vec![0.0; len])
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.slots.get(id.0).and_then(|s| s.as_deref())
    }

    /// Ids with a recorded gradient, ascending.
    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_some())
            .map(|(i, _)| ParamId(i))
    }

    /// `self += scale · other`
    pub fn accumulate(&mut self, other: &Gradients, scale: f64) {
        for id in other.ids() {
            let src = other.get(id).expect("listed id");
            let dst = self.slot_mut(id, src.len());
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.slots.iter_mut().flatten() {
            v.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.slots
            .iter()
            .flatten()
            .flat_map(|v| v.iter())
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Output of a backward pass.
pub struct Backward {
    pub grads: Gradients,
    adjoints: Vec<Vec<f64>>,
}

impl Backward {
    /// Gradient of the loss with respect to a node's value.
    pub fn node_grad(&self, node: NodeId) -> &[f64] {
        &self.adjoints[node.0]
    }
}

#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
    /// Branch taken at every non-differentiable point (relu sign, clamp, degenerate norm).
    kinks: Vec<bool>,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            kinks: Vec::new(),
        }
    }

    fn push(&mut self, op: Op<'a>, value: Vec<f64>) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, node: NodeId) -> &[f64] {
        &self.nodes[node.0].value
    }

    pub fn scalar(&self, node: NodeId) -> f64 {
        self.nodes[node.0].value[0]
    }

    pub fn kinks(&self) -> &[bool] {
        &self.kinks
    }

    /// Constant input.
    pub fn input(&mut self, value: Vec<f64>) -> NodeId {
        self.push(Op::Leaf, value)
    }

    /// Row `row` of an embedding table.
    pub fn gather(&mut self, table: &'a Tensor2, param: Option<ParamId>, row: usize) -> NodeId {
        let value = table.row(row).to_vec();
        self.push(
            Op::Gather {
                param,
                table_len: table.data().len(),
                row,
            },
            value,
        )
    }

    pub fn dense(
        &mut self,
        layer: &'a DenseLayer,
        ids: Option<DenseIds>,
        input: NodeId,
    ) -> Result<NodeId> {
        let pre = layer.pre_activation(self.value(input))?;
        let value: Vec<f64> = pre.iter().map(|&z| layer.activation.apply(z)).collect();
        if layer.activation == Activation::Relu {
            self.kinks.extend(pre.iter().map(|&z| z > 0.0));
        }
        Ok(self.push(
            Op::Dense {
                layer,
                ids,
                input,
                pre,
            },
            value,
        ))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let value = parts
            .iter()
            .flat_map(|&p| self.value(p).iter().copied())
            .collect();
        self.push(Op::Concat(parts.to_vec()), value)
    }

    pub fn mean(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = parts
            .first()
            .ok_or_else(|| Error::ShapeMismatch("mean of no nodes".into()))?;
        let dim = self.value(*first).len();
        let mut value = vec![0.0; dim];
        for &p in parts {
            let v = self.value(p);
            if v.len() != dim {
                return Err(Error::ShapeMismatch("mean over unequal lengths".into()));
            }
            value.iter_mut().zip(v).for_each(|(o, x)| *o += x);
        }
        let n = parts.len() as f64;
        value.iter_mut().for_each(|o| *o /= n);
        Ok(self.push(Op::Mean(parts.to_vec()), value))
    }

    /// `1 − cos(a, b)`; defined as 1 with zero gradient when either side is zero.
    pub fn cosine_distance(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.len() != vb.len() {
            return Err(Error::ShapeMismatch(format!(
                "cosine distance between {} and {}",
                va.len(),
                vb.len()
            )));
        }
        let (na, nb) = (dot(va, va).sqrt(), dot(vb, vb).sqrt());
        let degenerate = na == 0.0 || nb == 0.0;
        let d = if degenerate {
            1.0
        } else {
            1.0 - dot(va, vb) / (na * nb)
        };
        self.kinks.push(degenerate);
        Ok(self.push(Op::CosineDistance { a, b, degenerate }, vec![d]))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.len() != vb.len() {
            return Err(Error::ShapeMismatch("sub".into()));
        }
        let value = va.iter().zip(vb).map(|(x, y)| x - y).collect();
        Ok(self.push(Op::Sub(a, b), value))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let value = self.value(a).iter().map(|x| x + c).collect();
        self.push(Op::AddScalar(a), value)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = &self.nodes[a.0].value;
        self.kinks.extend(v.iter().map(|&z| z > 0.0));
        let value = v.iter().map(|z| z.max(0.0)).collect();
        self.push(Op::Relu(a), value)
    }

    /// Binary cross-entropy of scalar probability node `p` against `y ∈ {0, 1}`.
    pub fn bce(&mut self, p: NodeId, y: f64) -> NodeId {
        let raw = self.scalar(p);
        let c = raw.clamp(BCE_EPS, 1.0 - BCE_EPS);
        let clamped = c != raw;
        self.kinks.push(clamped);
        let loss = -(y * c.ln() + (1.0 - y) * (1.0 - c).ln());
        self.push(Op::Bce { p, y, clamped }, vec![loss])
    }

    /// `Σ (x − target)²`
    pub fn squared_error(&mut self, x: NodeId, target: Vec<f64>) -> Result<NodeId> {
        let v = self.value(x);
        if v.len() != target.len() {
            return Err(Error::ShapeMismatch("squared error".into()));
        }
        let loss = v.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(self.push(Op::SquaredError { x, target }, vec![loss]))
    }

    /// Gradients of scalar node `loss` with respect to every traced parameter and node.
    pub fn backward(&self, loss: NodeId) -> Result<Backward> {
        if self.nodes.is_empty() || loss.0 >= self.nodes.len() {
            return Err(Error::GraphNotRecorded);
        }
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::ShapeMismatch("loss node must be scalar".into()));
        }
        let mut adj: Vec<Vec<f64>> = self.nodes.iter().map(|n| vec![0.0; n.value.len()]).collect();
        let mut grads = Gradients::new();
        adj[loss.0][0] = 1.0;

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if adj[i].iter().all(|&g| g == 0.0) {
                continue;
            }
            let g = std::mem::take(&mut adj[i]);
            match &node.op {
                Op::Leaf => {}
                Op::Gather {
                    param,
                    table_len,
                    row,
                } => {
                    if let Some(id) = param {
                        let cols = g.len();
                        let slot = grads.slot_mut(*id, *table_len);
                        for (s, v) in slot[row * cols..(row + 1) * cols].iter_mut().zip(&g) {
                            *s += v;
                        }
                    }
                }
                Op::Dense {
                    layer,
                    ids,
                    input,
                    pre,
                } => {
                    let dz: Vec<f64> = g
                        .iter()
                        .zip(pre)
                        .zip(&node.value)
                        .map(|((g, &z), &y)| g * layer.activation.derivative(z, y))
                        .collect();
                    let x = &self.nodes[input.0].value;
                    let cols = layer.input_dim();
                    if let Some(ids) = ids {
                        let gw = grads.slot_mut(ids.weights, layer.weights.data().len());
                        for (r, &d) in dz.iter().enumerate() {
                            if d != 0.0 {
                                for (w, xv) in gw[r * cols..(r + 1) * cols].iter_mut().zip(x) {
                                    *w += d * xv;
                                }
                            }
                        }
                        let gb = grads.slot_mut(ids.bias, layer.bias.len());
                        gb.iter_mut().zip(&dz).for_each(|(b, d)| *b += d);
                    }
                    let dx = &mut adj[input.0];
                    for (r, &d) in dz.iter().enumerate() {
                        if d != 0.0 {
                            for (o, w) in dx.iter_mut().zip(layer.weights.row(r)) {
                                *o += d * w;
                            }
                        }
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.nodes[p.0].value.len();
                        adj[p.0].iter_mut().zip(&g[off..off + n]).for_each(|(a, v)| *a += v);
                        off += n;
                    }
                }
                Op::Mean(parts) => {
                    let inv = 1.0 / parts.len() as f64;
                    for p in parts {
                        adj[p.0].iter_mut().zip(&g).for_each(|(a, v)| *a += v * inv);
                    }
                }
                Op::CosineDistance { a, b, degenerate } => {
                    if !degenerate {
                        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                        let (na, nb) = (dot(va, va).sqrt(), dot(vb, vb).sqrt());
                        let cos = dot(va, vb) / (na * nb);
                        let up = g[0];
                        // d(1 - cos)/da = -(b/(|a||b|) - cos·a/|a|²)
                        for k in 0..va.len() {
                            adj[a.0][k] -= up * (vb[k] / (na * nb) - cos * va[k] / (na * na));
                            adj[b.0][k] -= up * (va[k] / (na * nb) - cos * vb[k] / (nb * nb));
                        }
                    }
                }
                Op::Sub(a, b) => {
                    adj[a.0].iter_mut().zip(&g).for_each(|(x, v)| *x += v);
                    adj[b.0].iter_mut().zip(&g).for_each(|(x, v)| *x -= v);
                }
                Op::AddScalar(a) => {
                    adj[a.0].iter_mut().zip(&g).for_each(|(x, v)| *x += v);
                }
                Op::Relu(a) => {
                    let v = &self.nodes[a.0].value;
                    for (k, x) in adj[a.0].iter_mut().enumerate() {
                        if v[k] > 0.0 {
                            *x += g[k];
                        }
                    }
                }
                Op::Bce { p, y, clamped } => {
                    if !clamped {
                        let c = self.nodes[p.0].value[0];
                        adj[p.0][0] += g[0] * (-(y / c) + (1.0 - y) / (1.0 - c));
                    }
                }
                Op::SquaredError { x, target } => {
                    let v = &self.nodes[x.0].value;
                    for (k, a) in adj[x.0].iter_mut().enumerate() {
                        *a += g[0] * 2.0 * (v[k] - target[k]);
                    }
                }
            }
            adj[i] = g;
        }
        Ok(Backward {
            grads,
            adjoints: adj,
        })
    }
}
