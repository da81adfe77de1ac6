//! Dense tensors with reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every operation executed on its tensors; calling
//! [`Tensor::backward`] on a scalar loss replays the recorded operations in
//! reverse and accumulates adjoints into every `requires_grad` leaf.
//!
//! Storage is a flat row-major buffer plus explicit shape metadata.
//! Broadcasting is limited to the cases the model needs (row-bias add,
//! attention-mask add); everything else is shape-strict.

mod backward;
pub mod gradcheck;
mod kernels;

use std::cell::RefCell;
use std::rc::Rc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Element type: f64 by default, f32 with the `f32` feature. Gradient
/// checks are only meaningful in the default f64 build.
#[cfg(not(feature = "f32"))]
pub type Elem = f64;
#[cfg(feature = "f32")]
pub type Elem = f32;

/// Additive mask value for disallowed attention positions. Large enough
/// that `exp` underflows to exactly zero after max-subtraction, finite so
/// no Inf ever enters a stored buffer.
pub const MASK_VALUE: Elem = -1.0e30;

/// Attention mask added to score tensors of shape `[batch*heads, q, k]`.
/// Entries are `0` (allowed) or [`MASK_VALUE`] (disallowed); rows may be
/// a single broadcast row (`q_rows == 1`) or one row per query position.
#[derive(Debug, Clone)]
pub struct AttnMask {
    pub batch: usize,
    pub q_rows: usize,
    pub keys: usize,
    data: Rc<Vec<Elem>>,
}

impl AttnMask {
    /// `allowed[b][q][k]` flattened row-major. Every query row must allow
    /// at least one key; fully masked rows cannot occur by construction
    /// upstream, so they are rejected here.
    pub fn new(batch: usize, q_rows: usize, keys: usize, allowed: &[bool]) -> Result<Self> {
        if allowed.len() != batch * q_rows * keys {
            return Err(Error::Contract(format!(
                "mask length {} does not match {batch}x{q_rows}x{keys}",
                allowed.len()
            )));
        }
        let mut data = vec![0.0 as Elem; allowed.len()];
        for (row_idx, row) in allowed.chunks(keys).enumerate() {
            if !row.iter().any(|&a| a) {
                return Err(Error::Contract(format!(
                    "attention mask row {row_idx} allows no positions"
                )));
            }
            for (slot, &a) in data[row_idx * keys..(row_idx + 1) * keys].iter_mut().zip(row) {
                if !a {
                    *slot = MASK_VALUE;
                }
            }
        }
        Ok(AttnMask { batch, q_rows, keys, data: Rc::new(data) })
    }

    fn value(&self, b: usize, q: usize, k: usize) -> Elem {
        let q = if self.q_rows == 1 { 0 } else { q };
        self.data[(b * self.q_rows + q) * self.keys + k]
    }
}

/// One recorded operation. Saved buffers needed by the adjoint rule are
/// stored inline in the variant.
#[derive(Debug, Clone)]
pub(crate) enum Op {
    Leaf,
    Matmul { a: usize, b: usize },
    Bmm { a: usize, b: usize },
    BmmT { a: usize, b: usize },
    Add { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Scale { x: usize, c: Elem },
    AddRowBias { x: usize, bias: usize },
    Relu { x: usize },
    Softmax { x: usize, axis: usize },
    LayerNorm { x: usize, gain: usize, bias: usize, mean_rstd: Vec<Elem> },
    Dropout { x: usize, multiplier: Vec<Elem> },
    EmbedLookup { table: usize, ids: Vec<u32> },
    SplitHeads { x: usize, batch: usize, heads: usize },
    MergeHeads { x: usize, batch: usize, heads: usize },
    AddMask { x: usize },
    Reshape { x: usize },
    Sum { x: usize },
    SmoothedCe { logits: usize, targets: Vec<u32>, non_pad: Vec<bool>, eps: Elem, pad_id: u32 },
}

pub(crate) struct Node {
    pub data: Vec<Elem>,
    pub shape: Vec<usize>,
    pub requires_grad: bool,
    pub grad: Option<Vec<Elem>>,
    pub op: Op,
}

/// Ordered record of executed operations; replaying adjoints visits them
/// in exact reverse execution order.
pub struct Graph {
    pub(crate) nodes: RefCell<Vec<Node>>,
}

impl Graph {
    pub fn new() -> Rc<Graph> {
        Rc::new(Graph { nodes: RefCell::new(Vec::new()) })
    }

    pub fn len(self: &Rc<Graph>) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(self: &Rc<Graph>) -> bool {
        self.len() == 0
    }

    /// Register a leaf tensor. `requires_grad` leaves receive gradients
    /// from [`Tensor::backward`].
    pub fn leaf(self: &Rc<Graph>, data: Vec<Elem>, shape: &[usize], requires_grad: bool) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if numel != data.len() || shape.iter().any(|&d| d == 0) {
            return Err(Error::Contract(format!(
                "leaf data length {} does not match shape {shape:?}",
                data.len()
            )));
        }
        Ok(self.push(Node {
            data,
            shape: shape.to_vec(),
            requires_grad,
            grad: None,
            op: Op::Leaf,
        }))
    }

    /// Non-differentiated leaf.
    pub fn constant(self: &Rc<Graph>, data: Vec<Elem>, shape: &[usize]) -> Result<Tensor> {
        self.leaf(data, shape, false)
    }

    pub fn scalar(self: &Rc<Graph>, v: Elem) -> Tensor {
        self.leaf(vec![v], &[1], false).expect("scalar leaf")
    }

    fn push(self: &Rc<Graph>, node: Node) -> Tensor {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Tensor { graph: Rc::clone(self), id: nodes.len() - 1 }
    }
}

/// Handle to a value stored in a [`Graph`]. Cloning is cheap and refers
/// to the same node.
#[derive(Clone)]
pub struct Tensor {
    graph: Rc<Graph>,
    id: usize,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

impl Tensor {
    pub fn shape(&self) -> Vec<usize> {
        self.graph.nodes.borrow()[self.id].shape.clone()
    }

    pub fn numel(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn data(&self) -> Vec<Elem> {
        self.graph.nodes.borrow()[self.id].data.clone()
    }

    /// Gradient accumulated by [`Tensor::backward`], if any.
    pub fn grad(&self) -> Option<Vec<Elem>> {
        self.graph.nodes.borrow()[self.id].grad.clone()
    }

    pub fn zero_grad(&self) {
        self.graph.nodes.borrow_mut()[self.id].grad = None;
    }

    /// Value of a scalar tensor.
    pub fn item(&self) -> Result<Elem> {
        let nodes = self.graph.nodes.borrow();
        let node = &nodes[self.id];
        if node.data.len() != 1 {
            return Err(Error::Contract(format!(
                "item() requires a scalar, got shape {:?}",
                node.shape
            )));
        }
        Ok(node.data[0])
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.nodes.borrow()[self.id].requires_grad
    }

    fn same_graph(&self, other: &Tensor, op: &'static str) -> Result<()> {
        if !Rc::ptr_eq(&self.graph, &other.graph) {
            return Err(Error::Contract(format!("{op}: operands belong to different graphs")));
        }
        Ok(())
    }

    fn unary(&self, data: Vec<Elem>, shape: Vec<usize>, op: Op) -> Tensor {
        let requires_grad = self.requires_grad();
        self.graph.push(Node { data, shape, requires_grad, grad: None, op })
    }

    fn binary(&self, other: &Tensor, data: Vec<Elem>, shape: Vec<usize>, op: Op) -> Tensor {
        let requires_grad = self.requires_grad() || other.requires_grad();
        self.graph.push(Node { data, shape, requires_grad, grad: None, op })
    }

    /// 2-D matrix product; adjoints dA = dC·Bᵀ and dB = Aᵀ·dC.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        self.same_graph(other, "matmul")?;
        let (ls, rs) = (self.shape(), other.shape());
        if ls.len() != 2 || rs.len() != 2 || ls[1] != rs[0] {
            return Err(Error::shape("matmul", &ls, &rs));
        }
        let (m, k, n) = (ls[0], ls[1], rs[1]);
        let data = {
            let nodes = self.graph.nodes.borrow();
            kernels::matmul_nn(&nodes[self.id].data, &nodes[other.id].data, m, k, n)
        };
        Ok(self.binary(other, data, vec![m, n], Op::Matmul { a: self.id, b: other.id }))
    }

    /// Batched matrix product over matching leading dimension:
    /// `[bs,m,k] · [bs,k,n] -> [bs,m,n]`.
    pub fn bmm(&self, other: &Tensor) -> Result<Tensor> {
        self.same_graph(other, "bmm")?;
        let (ls, rs) = (self.shape(), other.shape());
        if ls.len() != 3 || rs.len() != 3 || ls[0] != rs[0] || ls[2] != rs[1] {
            return Err(Error::shape("bmm", &ls, &rs));
        }
        let (bs, m, k, n) = (ls[0], ls[1], ls[2], rs[2]);
        let data = {
            let nodes = self.graph.nodes.borrow();
            kernels::bmm_nn(&nodes[self.id].data, &nodes[other.id].data, bs, m, k, n)
        };
        Ok(self.binary(other, data, vec![bs, m, n], Op::Bmm { a: self.id, b: other.id }))
    }

    /// Batched product against the transposed last two axes of `other`:
    /// `[bs,m,k] · [bs,n,k]ᵀ -> [bs,m,n]`. Used for attention scores.
    pub fn bmm_t(&self, other: &Tensor) -> Result<Tensor> {
        self.same_graph(other, "bmm_t")?;
        let (ls, rs) = (self.shape(), other.shape());
        if ls.len() != 3 || rs.len() != 3 || ls[0] != rs[0] || ls[2] != rs[2] {
            return Err(Error::shape("bmm_t", &ls, &rs));
        }
        let (bs, m, k, n) = (ls[0], ls[1], ls[2], rs[1]);
        let data = {
            let nodes = self.graph.nodes.borrow();
            kernels::bmm_nt(&nodes[self.id].data, &nodes[other.id].data, bs, m, k, n)
        };
        Ok(self.binary(other, data, vec![bs, m, n], Op::BmmT { a: self.id, b: other.id }))
    }

    /// Elementwise sum of same-shape tensors.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.same_graph(other, "add")?;
        let (ls, rs) = (self.shape(), other.shape());
        if ls != rs {
            return Err(Error::shape("add", &ls, &rs));
        }
        let data = {
            let nodes = self.graph.nodes.borrow();
            nodes[self.id]
                .data
                .iter()
                .zip(&nodes[other.id].data)
                .map(|(&x, &y)| x + y)
                .collect()
        };
        Ok(self.binary(other, data, ls, Op::Add { a: self.id, b: other.id }))
    }

    /// Elementwise product of same-shape tensors.
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.same_graph(other, "mul")?;
        let (ls, rs) = (self.shape(), other.shape());
        if ls != rs {
            return Err(Error::shape("mul", &ls, &rs));
        }
        let data = {
            let nodes = self.graph.nodes.borrow();
            nodes[self.id]
                .data
                .iter()
                .zip(&nodes[other.id].data)
                .map(|(&x, &y)| x * y)
                .collect()
        };
        Ok(self.binary(other, data, ls, Op::Mul { a: self.id, b: other.id }))
    }

    pub fn scale(&self, c: Elem) -> Tensor {
        let data = self.data().iter().map(|&x| x * c).collect();
        let shape = self.shape();
        self.unary(data, shape, Op::Scale { x: self.id, c })
    }

    /// Add a `[n]` bias vector to every row of a `[..., n]` tensor.
    pub fn add_row_bias(&self, bias: &Tensor) -> Result<Tensor> {
        self.same_graph(bias, "add_row_bias")?;
        let (xs, bs) = (self.shape(), bias.shape());
        let n = *xs.last().unwrap_or(&0);
        if bs.len() != 1 || bs[0] != n {
            return Err(Error::shape("add_row_bias", &xs, &bs));
        }
        let data = {
            let nodes = self.graph.nodes.borrow();
            let b = &nodes[bias.id].data;
            nodes[self.id]
                .data
                .iter()
                .enumerate()
                .map(|(i, &x)| x + b[i % n])
                .collect()
        };
        Ok(self.binary(bias, data, xs, Op::AddRowBias { x: self.id, bias: bias.id }))
    }

    pub fn relu(&self) -> Tensor {
        let data = self.data().iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
        let shape = self.shape();
        self.unary(data, shape, Op::Relu { x: self.id })
    }

    /// Numerically stabilized softmax along `axis`: shift by the lane max
    /// before exponentiating. Outputs are nonnegative and sum to 1 along
    /// the axis.
    pub fn softmax(&self, axis: usize) -> Result<Tensor> {
        let shape = self.shape();
        if axis >= shape.len() {
            return Err(Error::Contract(format!(
                "softmax axis {axis} out of range for shape {shape:?}"
            )));
        }
        let mut data = self.data();
        softmax_lanes_in_place(&mut data, &shape, axis);
        Ok(self.unary(data, shape, Op::Softmax { x: self.id, axis }))
    }

    /// Layer normalization over the last axis followed by elementwise
    /// affine gain and bias (both `[n]` where `n` is the last dimension).
    pub fn layer_norm(&self, gain: &Tensor, bias: &Tensor, eps: Elem) -> Result<Tensor> {
        self.same_graph(gain, "layer_norm")?;
        self.same_graph(bias, "layer_norm")?;
        if eps <= 0.0 {
            return Err(Error::Config(format!("layer_norm eps must be positive, got {eps}")));
        }
        let shape = self.shape();
        let n = *shape.last().unwrap_or(&0);
        if gain.shape() != [n] || bias.shape() != [n] {
            return Err(Error::shape("layer_norm", &shape, &gain.shape()));
        }
        let rows = self.numel() / n;
        let mut data = self.data();
        let mut mean_rstd = Vec::with_capacity(rows * 2);
        {
            let nodes = self.graph.nodes.borrow();
            let g = &nodes[gain.id].data;
            let b = &nodes[bias.id].data;
            for row in data.chunks_mut(n) {
                let mean = row.iter().sum::<Elem>() / n as Elem;
                let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<Elem>() / n as Elem;
                let rstd = 1.0 / (var + eps).sqrt();
                mean_rstd.push(mean);
                mean_rstd.push(rstd);
                for (slot, (&gv, &bv)) in row.iter_mut().zip(g.iter().zip(b)) {
                    *slot = (*slot - mean) * rstd * gv + bv;
                }
            }
        }
        let requires_grad = self.requires_grad() || gain.requires_grad() || bias.requires_grad();
        Ok(self.graph.push(Node {
            data,
            shape,
            requires_grad,
            grad: None,
            op: Op::LayerNorm { x: self.id, gain: gain.id, bias: bias.id, mean_rstd },
        }))
    }

    /// Inverted dropout: in training mode zeroes each element with
    /// probability `rate` and scales survivors by `1/(1-rate)`; in
    /// inference mode it is the identity.
    pub fn dropout(&self, rate: Elem, training: bool, rng: &mut ChaCha8Rng) -> Result<Tensor> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate must be in [0, 1), got {rate}")));
        }
        if !training || rate == 0.0 {
            return Ok(self.clone());
        }
        let keep_scale = 1.0 / (1.0 - rate);
        let multiplier: Vec<Elem> = (0..self.numel())
            .map(|_| if rng.gen::<f64>() < rate as f64 { 0.0 } else { keep_scale })
            .collect();
        let data = self
            .data()
            .iter()
            .zip(&multiplier)
            .map(|(&x, &m)| x * m)
            .collect();
        let shape = self.shape();
        Ok(self.unary(data, shape, Op::Dropout { x: self.id, multiplier }))
    }

    /// Gather rows of an embedding table: `table[V,d]` indexed by `ids`
    /// yields `[ids.len(), d]`. The adjoint scatter-adds into the table.
    pub fn embed_lookup(&self, ids: &[u32]) -> Result<Tensor> {
        let shape = self.shape();
        if shape.len() != 2 {
            return Err(Error::Contract(format!("embed_lookup table must be 2-D, got {shape:?}")));
        }
        let (v, d) = (shape[0], shape[1]);
        if let Some(&bad) = ids.iter().find(|&&i| i as usize >= v) {
            return Err(Error::Data(format!("token id {bad} out of range for table of {v} rows")));
        }
        let data = {
            let nodes = self.graph.nodes.borrow();
            let table = &nodes[self.id].data;
            let mut out = Vec::with_capacity(ids.len() * d);
            for &i in ids {
                out.extend_from_slice(&table[i as usize * d..(i as usize + 1) * d]);
            }
            out
        };
        Ok(self.unary(
            data,
            vec![ids.len(), d],
            Op::EmbedLookup { table: self.id, ids: ids.to_vec() },
        ))
    }

    /// Rearrange `[batch*seq, heads*hd] -> [batch*heads, seq, hd]`.
    pub fn split_heads(&self, batch: usize, heads: usize) -> Result<Tensor> {
        let shape = self.shape();
        if shape.len() != 2 || shape[0] % batch != 0 || shape[1] % heads != 0 {
            return Err(Error::Contract(format!(
                "split_heads: shape {shape:?} incompatible with batch {batch}, heads {heads}"
            )));
        }
        let seq = shape[0] / batch;
        let d = shape[1];
        let hd = d / heads;
        let src = self.data();
        let mut out = vec![0.0 as Elem; src.len()];
        for b in 0..batch {
            for h in 0..heads {
                for s in 0..seq {
                    let dst = (((b * heads + h) * seq) + s) * hd;
                    let from = (b * seq + s) * d + h * hd;
                    out[dst..dst + hd].copy_from_slice(&src[from..from + hd]);
                }
            }
        }
        Ok(self.unary(
            out,
            vec![batch * heads, seq, hd],
            Op::SplitHeads { x: self.id, batch, heads },
        ))
    }

    /// Inverse of [`Tensor::split_heads`]:
    /// `[batch*heads, seq, hd] -> [batch*seq, heads*hd]`.
    pub fn merge_heads(&self, batch: usize, heads: usize) -> Result<Tensor> {
        let shape = self.shape();
        if shape.len() != 3 || shape[0] != batch * heads {
            return Err(Error::Contract(format!(
                "merge_heads: shape {shape:?} incompatible with batch {batch}, heads {heads}"
            )));
        }
        let (seq, hd) = (shape[1], shape[2]);
        let d = heads * hd;
        let src = self.data();
        let mut out = vec![0.0 as Elem; src.len()];
        for b in 0..batch {
            for h in 0..heads {
                for s in 0..seq {
                    let from = (((b * heads + h) * seq) + s) * hd;
                    let dst = (b * seq + s) * d + h * hd;
                    out[dst..dst + hd].copy_from_slice(&src[from..from + hd]);
                }
            }
        }
        Ok(self.unary(
            out,
            vec![batch * seq, d],
            Op::MergeHeads { x: self.id, batch, heads },
        ))
    }

    /// Add an attention mask to scores of shape `[batch*heads, q, k]`,
    /// broadcasting over heads (and over query rows when the mask has a
    /// single row). The mask is constant: no gradient flows into it.
    pub fn add_mask(&self, mask: &AttnMask) -> Result<Tensor> {
        let shape = self.shape();
        if shape.len() != 3 || shape[0] % mask.batch != 0 {
            return Err(Error::Contract(format!(
                "add_mask: scores {shape:?} incompatible with mask batch {}",
                mask.batch
            )));
        }
        let heads = shape[0] / mask.batch;
        let (q, k) = (shape[1], shape[2]);
        if k != mask.keys || (mask.q_rows != 1 && mask.q_rows != q) {
            return Err(Error::Contract(format!(
                "add_mask: scores {shape:?} incompatible with mask {}x{}x{}",
                mask.batch, mask.q_rows, mask.keys
            )));
        }
        let mut data = self.data();
        for b in 0..mask.batch {
            for h in 0..heads {
                let base = ((b * heads + h) * q) * k;
                for qi in 0..q {
                    for ki in 0..k {
                        data[base + qi * k + ki] += mask.value(b, qi, ki);
                    }
                }
            }
        }
        Ok(self.unary(data, shape, Op::AddMask { x: self.id }))
    }

    /// Reinterpret the flat buffer under a new shape with equal element
    /// count (row-major, zero-copy semantics).
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if numel != self.numel() {
            return Err(Error::shape("reshape", &self.shape(), shape));
        }
        Ok(self.unary(self.data(), shape.to_vec(), Op::Reshape { x: self.id }))
    }

    /// Sum of all elements, as a scalar tensor.
    pub fn sum(&self) -> Tensor {
        let total = self.data().iter().sum();
        self.unary(vec![total], vec![1], Op::Sum { x: self.id })
    }

    /// Mean of all elements, as a scalar tensor.
    pub fn mean(&self) -> Tensor {
        let n = self.numel() as Elem;
        self.sum().scale(1.0 / n)
    }

    /// Label-smoothed cross-entropy over `[rows, V]` logits, averaged over
    /// rows where `non_pad` is true. The smoothed target puts `1-eps` on
    /// the true class, `eps/(V-2)` on every class other than the true
    /// class and PAD, and zero on PAD.
    pub fn smoothed_cross_entropy(
        &self,
        targets: &[u32],
        non_pad: &[bool],
        eps: Elem,
        pad_id: u32,
    ) -> Result<Tensor> {
        let shape = self.shape();
        if shape.len() != 2 {
            return Err(Error::Contract(format!("smoothed_cross_entropy expects 2-D logits, got {shape:?}")));
        }
        let (rows, v) = (shape[0], shape[1]);
        if targets.len() != rows || non_pad.len() != rows {
            return Err(Error::Contract(format!(
                "smoothed_cross_entropy: {rows} logit rows but {} targets / {} mask entries",
                targets.len(),
                non_pad.len()
            )));
        }
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::Config(format!("label smoothing must be in [0, 1), got {eps}")));
        }
        if eps > 0.0 && v < 3 {
            return Err(Error::Config(format!(
                "label smoothing needs at least 3 classes, got {v}"
            )));
        }
        if targets.iter().any(|&t| t as usize >= v) {
            return Err(Error::Contract("target id out of vocabulary range".into()));
        }
        let n_active = non_pad.iter().filter(|&&p| p).count();
        if n_active == 0 {
            return Err(Error::Contract("smoothed_cross_entropy: no non-pad positions".into()));
        }
        let smooth = if eps > 0.0 { eps / (v as Elem - 2.0) } else { 0.0 };
        let mut total = 0.0;
        {
            let nodes = self.graph.nodes.borrow();
            let logits = &nodes[self.id].data;
            for r in 0..rows {
                if !non_pad[r] {
                    continue;
                }
                let row = &logits[r * v..(r + 1) * v];
                let logp = log_softmax(row);
                let t = targets[r] as usize;
                let mut loss = -(1.0 - eps) * logp[t];
                if eps > 0.0 {
                    for (k, &lp) in logp.iter().enumerate() {
                        if k != t && k != pad_id as usize {
                            loss -= smooth * lp;
                        }
                    }
                }
                total += loss;
            }
        }
        let value = total / n_active as Elem;
        Ok(self.unary(
            vec![value],
            vec![1],
            Op::SmoothedCe {
                logits: self.id,
                targets: targets.to_vec(),
                non_pad: non_pad.to_vec(),
                eps,
                pad_id,
            },
        ))
    }

    /// Populate gradients of every `requires_grad` node reachable from
    /// this scalar. Repeated calls without [`Tensor::zero_grad`]
    /// accumulate.
    pub fn backward(&self) -> Result<()> {
        backward::run(&self.graph, self.id)
    }
}

/// Stabilized log-softmax of one lane.
pub fn log_softmax(row: &[Elem]) -> Vec<Elem> {
    let max = row.iter().cloned().fold(Elem::NEG_INFINITY, Elem::max);
    let lse = row.iter().map(|&x| (x - max).exp()).sum::<Elem>().ln() + max;
    row.iter().map(|&x| x - lse).collect()
}

fn softmax_lanes_in_place(data: &mut [Elem], shape: &[usize], axis: usize) {
    let lane = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut buf = vec![0.0 as Elem; lane];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * lane * inner + i;
            for (t, slot) in buf.iter_mut().enumerate() {
                *slot = data[base + t * inner];
            }
            let max = buf.iter().cloned().fold(Elem::NEG_INFINITY, Elem::max);
            let mut sum = 0.0;
            for slot in buf.iter_mut() {
                *slot = (*slot - max).exp();
                sum += *slot;
            }
            for (t, &e) in buf.iter().enumerate() {
                data[base + t * inner] = e / sum;
            }
        }
    }
}

pub(crate) fn softmax_backward_lanes(
    y: &[Elem],
    dy: &[Elem],
    shape: &[usize],
    axis: usize,
    dx: &mut [Elem],
) {
    let lane = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    for o in 0..outer {
        for i in 0..inner {
            let base = o * lane * inner + i;
            let mut dot = 0.0;
            for t in 0..lane {
                let idx = base + t * inner;
                dot += dy[idx] * y[idx];
            }
            for t in 0..lane {
                let idx = base + t * inner;
                dx[idx] += y[idx] * (dy[idx] - dot);
            }
        }
    }
}
