//! Encoder-decoder transformer.
//!
//! A stack of N identical encoder layers (multi-head self-attention +
//! position-wise feed-forward) and N decoder layers (masked
//! self-attention, attention over the encoder output, feed-forward).
//! Every sub-layer is wrapped as `LayerNorm(x + Dropout(Sublayer(x)))`
//! (post-norm residuals) and produces width-d output. Decoder inputs are
//! offset by one position and causally masked so position i only sees
//! known outputs before i.

pub mod checkpoint;
mod decode;
mod params;

use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use decode::{beam_decode, greedy_decode};
pub use params::{xavier_uniform, Param, ParamId, ParamStore};

use crate::data::{BOS_ID, EOS_ID, PAD_ID};
use crate::error::{Error, Result};
use crate::tensor::{AttnMask, Elem, Graph, Tensor};

/// Layer-norm stabilizer.
pub const LN_EPS: Elem = 1e-6;

/// One point in the architecture grid plus the training constants that
/// never vary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub num_layers: usize,
    pub ff_dim: usize,
    pub embed_dim: usize,
    pub num_heads: usize,
    pub dropout: f64,
    /// Padded target-token budget per batch, not a sentence count.
    pub batch_size: usize,
    pub label_smoothing: f64,
    pub warmup_steps: usize,
}

impl HyperParams {
    /// Global scale on the Noam schedule.
    pub const LR_SCALE: f64 = 0.001;
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.998;
    pub const ADAM_EPS: f64 = 1e-9;

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.num_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.ff_dim == 0 || self.embed_dim == 0 || self.num_heads == 0 {
            return Err(Error::Config("layer/dimension counts must be positive".into()));
        }
        if self.embed_dim % self.num_heads != 0 {
            return Err(Error::Config(format!(
                "embed_dim {} not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::Config(format!(
                "label smoothing must be in [0, 1), got {}",
                self.label_smoothing
            )));
        }
        if self.warmup_steps == 0 {
            return Err(Error::Config("warmup_steps must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// The best architecture found on the reference corpus; used as the
/// default configuration and the default search starting point.
impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            num_layers: 5,
            ff_dim: 256,
            embed_dim: 64,
            num_heads: 2,
            dropout: 0.3,
            batch_size: 4096,
            label_smoothing: 0.6,
            warmup_steps: 300,
        }
    }
}

/// Padded id matrices for one batch of sentence pairs.
///
/// `tgt_in` rows are `[BOS, w1..wT]` and `tgt_out` rows `[w1..wT, EOS]`
/// (offset-by-one); pad masks are `true` exactly at padding positions.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch {
    pub batch: usize,
    pub src_len: usize,
    pub tgt_len: usize,
    pub src_ids: Vec<u32>,
    pub tgt_in_ids: Vec<u32>,
    pub tgt_out_ids: Vec<u32>,
    pub src_pad_mask: Vec<bool>,
    pub tgt_pad_mask: Vec<bool>,
}

impl SequenceBatch {
    /// Assemble a batch from raw (unpadded) id rows.
    pub fn from_rows(src_rows: &[Vec<u32>], tgt_rows: &[Vec<u32>]) -> Result<Self> {
        if src_rows.len() != tgt_rows.len() || src_rows.is_empty() {
            return Err(Error::Contract(format!(
                "batch needs equal non-zero row counts, got {} and {}",
                src_rows.len(),
                tgt_rows.len()
            )));
        }
        if src_rows.iter().any(Vec::is_empty) || tgt_rows.iter().any(Vec::is_empty) {
            return Err(Error::Contract("empty sentence in batch".into()));
        }
        let batch = src_rows.len();
        let src_len = src_rows.iter().map(Vec::len).max().unwrap();
        // +1 for the BOS/EOS offset.
        let tgt_len = tgt_rows.iter().map(Vec::len).max().unwrap() + 1;

        let mut out = SequenceBatch {
            batch,
            src_len,
            tgt_len,
            src_ids: vec![PAD_ID; batch * src_len],
            tgt_in_ids: vec![PAD_ID; batch * tgt_len],
            tgt_out_ids: vec![PAD_ID; batch * tgt_len],
            src_pad_mask: vec![true; batch * src_len],
            tgt_pad_mask: vec![true; batch * tgt_len],
        };
        for (b, (src, tgt)) in src_rows.iter().zip(tgt_rows).enumerate() {
            for (s, &id) in src.iter().enumerate() {
                out.src_ids[b * src_len + s] = id;
                out.src_pad_mask[b * src_len + s] = false;
            }
            out.tgt_in_ids[b * tgt_len] = BOS_ID;
            out.tgt_pad_mask[b * tgt_len] = false;
            for (t, &id) in tgt.iter().enumerate() {
                out.tgt_in_ids[b * tgt_len + t + 1] = id;
                out.tgt_out_ids[b * tgt_len + t] = id;
                out.tgt_pad_mask[b * tgt_len + t + 1] = false;
            }
            out.tgt_out_ids[b * tgt_len + tgt.len()] = EOS_ID;
        }
        Ok(out)
    }

    /// Count of non-pad target positions (the loss denominator).
    pub fn target_tokens(&self) -> usize {
        self.tgt_pad_mask.iter().filter(|&&p| !p).count()
    }

    fn src_allowed(&self) -> Vec<bool> {
        self.src_pad_mask.iter().map(|&p| !p).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct LinearIds {
    w: ParamId,
    b: ParamId,
}

/// Attention projections carry no biases: a key bias is an exact no-op
/// under the row-wise softmax, and the classic formulation uses plain
/// weight matrices throughout.
#[derive(Debug, Clone, Copy)]
struct AttentionIds {
    q: ParamId,
    k: ParamId,
    v: ParamId,
    o: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct NormIds {
    gain: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct EncoderLayerIds {
    self_attn: AttentionIds,
    ln1: NormIds,
    ff1: LinearIds,
    ff2: LinearIds,
    ln2: NormIds,
}

#[derive(Debug, Clone, Copy)]
struct DecoderLayerIds {
    self_attn: AttentionIds,
    ln1: NormIds,
    cross_attn: AttentionIds,
    ln2: NormIds,
    ff1: LinearIds,
    ff2: LinearIds,
    ln3: NormIds,
}

/// Encoder-decoder transformer with named parameters.
pub struct TransformerModel {
    pub hp: HyperParams,
    pub src_vocab_size: usize,
    pub tgt_vocab_size: usize,
    store: ParamStore,
    src_embed: ParamId,
    tgt_embed: ParamId,
    enc: Vec<EncoderLayerIds>,
    dec: Vec<DecoderLayerIds>,
    out: LinearIds,
}

impl TransformerModel {
    /// Build a model with seeded Xavier-uniform weight init.
    pub fn new(hp: HyperParams, src_vocab_size: usize, tgt_vocab_size: usize, seed: u64) -> Result<Self> {
        hp.validate()?;
        if src_vocab_size < 4 || tgt_vocab_size < 4 {
            return Err(Error::Config("vocabulary must include the 4 reserved tokens".into()));
        }
        let d = hp.embed_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();

        let linear = |store: &mut ParamStore, rng: &mut ChaCha8Rng, name: String, rows: usize, cols: usize| {
            let w = store.push(format!("{name}.w"), xavier_uniform(rng, rows, cols), vec![rows, cols]);
            let b = store.push(format!("{name}.b"), vec![0.0; cols], vec![cols]);
            LinearIds { w, b }
        };
        let proj = |store: &mut ParamStore, rng: &mut ChaCha8Rng, name: String| {
            store.push(name, xavier_uniform(rng, d, d), vec![d, d])
        };
        let attention = |store: &mut ParamStore, rng: &mut ChaCha8Rng, name: String| AttentionIds {
            q: proj(store, rng, format!("{name}.q.w")),
            k: proj(store, rng, format!("{name}.k.w")),
            v: proj(store, rng, format!("{name}.v.w")),
            o: proj(store, rng, format!("{name}.o.w")),
        };
        let norm = |store: &mut ParamStore, name: String| NormIds {
            gain: store.push(format!("{name}.gain"), vec![1.0; d], vec![d]),
            bias: store.push(format!("{name}.bias"), vec![0.0; d], vec![d]),
        };

        let src_embed = store.push(
            "src_embed",
            xavier_uniform(&mut rng, src_vocab_size, d),
            vec![src_vocab_size, d],
        );
        let tgt_embed = store.push(
            "tgt_embed",
            xavier_uniform(&mut rng, tgt_vocab_size, d),
            vec![tgt_vocab_size, d],
        );

        let mut enc = Vec::with_capacity(hp.num_layers);
        for i in 0..hp.num_layers {
            let self_attn = attention(&mut store, &mut rng, format!("enc.{i}.self_attn"));
            let ln1 = norm(&mut store, format!("enc.{i}.ln1"));
            let ff1 = linear(&mut store, &mut rng, format!("enc.{i}.ffn.1"), d, hp.ff_dim);
            let ff2 = linear(&mut store, &mut rng, format!("enc.{i}.ffn.2"), hp.ff_dim, d);
            let ln2 = norm(&mut store, format!("enc.{i}.ln2"));
            enc.push(EncoderLayerIds { self_attn, ln1, ff1, ff2, ln2 });
        }
        let mut dec = Vec::with_capacity(hp.num_layers);
        for i in 0..hp.num_layers {
            let self_attn = attention(&mut store, &mut rng, format!("dec.{i}.self_attn"));
            let ln1 = norm(&mut store, format!("dec.{i}.ln1"));
            let cross_attn = attention(&mut store, &mut rng, format!("dec.{i}.cross_attn"));
            let ln2 = norm(&mut store, format!("dec.{i}.ln2"));
            let ff1 = linear(&mut store, &mut rng, format!("dec.{i}.ffn.1"), d, hp.ff_dim);
            let ff2 = linear(&mut store, &mut rng, format!("dec.{i}.ffn.2"), hp.ff_dim, d);
            let ln3 = norm(&mut store, format!("dec.{i}.ln3"));
            dec.push(DecoderLayerIds { self_attn, ln1, cross_attn, ln2, ff1, ff2, ln3 });
        }
        let out = linear(&mut store, &mut rng, "out_proj".to_string(), d, tgt_vocab_size);

        Ok(TransformerModel {
            hp,
            src_vocab_size,
            tgt_vocab_size,
            store,
            src_embed,
            tgt_embed,
            enc,
            dec,
            out,
        })
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Total trainable scalar count; a pure function of the architecture
    /// and the two vocabulary sizes.
    pub fn parameter_count(&self) -> usize {
        self.store.total_values()
    }

    /// Begin a forward pass: binds every parameter as a graph leaf.
    /// `trainable` leaves receive gradients; `training` enables dropout,
    /// drawing its masks from a stream seeded by `dropout_seed`.
    pub fn forward(&self, trainable: bool, training: bool, dropout_seed: u64) -> Forward<'_> {
        let graph = Graph::new();
        let bound = self
            .store
            .iter()
            .map(|p| {
                graph
                    .leaf(p.data.clone(), &p.shape, trainable)
                    .expect("parameter leaf")
            })
            .collect();
        Forward {
            model: self,
            graph,
            bound,
            training,
            rng: ChaCha8Rng::seed_from_u64(dropout_seed),
        }
    }
}

/// One forward pass over a bound parameter set.
pub struct Forward<'m> {
    model: &'m TransformerModel,
    graph: Rc<Graph>,
    bound: Vec<Tensor>,
    training: bool,
    rng: ChaCha8Rng,
}

impl<'m> Forward<'m> {
    pub fn graph(&self) -> &Rc<Graph> {
        &self.graph
    }

    pub fn model(&self) -> &'m TransformerModel {
        self.model
    }

    fn p(&self, id: ParamId) -> &Tensor {
        &self.bound[id.0]
    }

    fn dropout(&mut self, x: &Tensor) -> Result<Tensor> {
        x.dropout(self.model.hp.dropout as Elem, self.training, &mut self.rng)
    }

    fn linear(&self, x: &Tensor, ids: &LinearIds) -> Result<Tensor> {
        x.matmul(self.p(ids.w))?.add_row_bias(self.p(ids.b))
    }

    /// `h` parallel scaled dot-product attentions over projected q/k/v,
    /// concatenated and projected back to width d. Scores are divided by
    /// sqrt(d/h); masked positions receive the additive mask value
    /// before the softmax and end up with exactly zero weight.
    fn multi_head_attention(
        &mut self,
        attn: &AttentionIds,
        q_in: &Tensor,
        k_in: &Tensor,
        v_in: &Tensor,
        batch: usize,
        mask: Option<&AttnMask>,
    ) -> Result<Tensor> {
        let d = self.model.hp.embed_dim;
        let heads = self.model.hp.num_heads;
        if q_in.shape()[1] != d || k_in.shape()[1] != d || v_in.shape()[1] != d {
            return Err(Error::Contract(format!(
                "attention inputs must have width {d}, got {:?}/{:?}/{:?}",
                q_in.shape(),
                k_in.shape(),
                v_in.shape()
            )));
        }
        let q = q_in.matmul(self.p(attn.q))?.split_heads(batch, heads)?;
        let k = k_in.matmul(self.p(attn.k))?.split_heads(batch, heads)?;
        let v = v_in.matmul(self.p(attn.v))?.split_heads(batch, heads)?;

        let scale = 1.0 / (self.model.hp.head_dim() as Elem).sqrt();
        let mut scores = q.bmm_t(&k)?.scale(scale);
        if let Some(m) = mask {
            scores = scores.add_mask(m)?;
        }
        let weights = scores.softmax(2)?;
        let context = weights.bmm(&v)?.merge_heads(batch, heads)?;
        context.matmul(self.p(attn.o))
    }

    /// Post-norm residual wrapper: `LayerNorm(x + Dropout(sublayer(x)))`.
    fn sublayer_apply<F>(&mut self, x: &Tensor, ln: &NormIds, sublayer: F) -> Result<Tensor>
    where
        F: FnOnce(&mut Self, &Tensor) -> Result<Tensor>,
    {
        let inner = sublayer(self, x)?;
        if inner.shape() != x.shape() {
            return Err(Error::Contract(format!(
                "sublayer changed width: {:?} -> {:?}",
                x.shape(),
                inner.shape()
            )));
        }
        let dropped = self.dropout(&inner)?;
        x.add(&dropped)?
            .layer_norm(self.p(ln.gain), self.p(ln.bias), LN_EPS)
    }

    fn feed_forward(&mut self, x: &Tensor, ff1: &LinearIds, ff2: &LinearIds) -> Result<Tensor> {
        let hidden = self.linear(x, ff1)?.relu();
        self.linear(&hidden, ff2)
    }

    /// Embedding rows scaled by sqrt(d) plus sinusoidal positions, with
    /// dropout on the sum.
    fn embed(&mut self, table: ParamId, ids: &[u32], batch: usize, seq: usize) -> Result<Tensor> {
        let d = self.model.hp.embed_dim;
        let scaled = self
            .p(table)
            .embed_lookup(ids)?
            .scale((d as Elem).sqrt());
        let pe = positional_encoding(seq, d);
        let mut tiled = Vec::with_capacity(batch * seq * d);
        for _ in 0..batch {
            tiled.extend_from_slice(&pe);
        }
        let pe_t = self.graph.constant(tiled, &[batch * seq, d])?;
        let summed = scaled.add(&pe_t)?;
        self.dropout(&summed)
    }

    /// Run the encoder stack; returns memory of shape `[B, S, d]`.
    pub fn encode(&mut self, batch: &SequenceBatch) -> Result<Tensor> {
        if batch.src_ids.iter().any(|&i| i as usize >= self.model.src_vocab_size) {
            return Err(Error::Data("source id out of vocabulary range".into()));
        }
        let model = self.model;
        let (b, s, d) = (batch.batch, batch.src_len, model.hp.embed_dim);
        let mask = AttnMask::new(b, 1, s, &batch.src_allowed())?;
        let mut x = self.embed(model.src_embed, &batch.src_ids, b, s)?;
        for layer in &model.enc {
            x = self.sublayer_apply(&x, &layer.ln1, |f, x| {
                f.multi_head_attention(&layer.self_attn, x, x, x, b, Some(&mask))
            })?;
            x = self.sublayer_apply(&x, &layer.ln2, |f, x| {
                f.feed_forward(x, &layer.ff1, &layer.ff2)
            })?;
        }
        x.reshape(&[b, s, d])
    }

    /// Run the decoder stack over `memory` (the encoder output for the
    /// same batch); returns logits of shape `[B, T, V]`.
    pub fn decode(&mut self, batch: &SequenceBatch, memory: &Tensor) -> Result<Tensor> {
        let (b, t, s) = (batch.batch, batch.tgt_len, batch.src_len);
        let mem_shape = memory.shape();
        if mem_shape != [b, s, self.model.hp.embed_dim] {
            return Err(Error::Contract(format!(
                "memory shape {mem_shape:?} does not match batch {b}x{s}x{}",
                self.model.hp.embed_dim
            )));
        }
        if batch.tgt_in_ids.iter().any(|&i| i as usize >= self.model.tgt_vocab_size) {
            return Err(Error::Data("target id out of vocabulary range".into()));
        }

        // Causal mask: position i attends to non-pad positions <= i.
        let mut self_allowed = vec![false; b * t * t];
        for bi in 0..b {
            for qi in 0..t {
                for ki in 0..=qi {
                    self_allowed[(bi * t + qi) * t + ki] = !batch.tgt_pad_mask[bi * t + ki];
                }
            }
        }
        let self_mask = AttnMask::new(b, t, t, &self_allowed)?;
        let cross_mask = AttnMask::new(b, 1, s, &batch.src_allowed())?;

        let model = self.model;
        let mem2d = memory.reshape(&[b * s, model.hp.embed_dim])?;
        let mut x = self.embed(model.tgt_embed, &batch.tgt_in_ids, b, t)?;
        for layer in &model.dec {
            x = self.sublayer_apply(&x, &layer.ln1, |f, x| {
                f.multi_head_attention(&layer.self_attn, x, x, x, b, Some(&self_mask))
            })?;
            x = self.sublayer_apply(&x, &layer.ln2, |f, x| {
                f.multi_head_attention(&layer.cross_attn, x, &mem2d, &mem2d, b, Some(&cross_mask))
            })?;
            x = self.sublayer_apply(&x, &layer.ln3, |f, x| {
                f.feed_forward(x, &layer.ff1, &layer.ff2)
            })?;
        }
        let logits = self.linear(&x, &model.out)?;
        logits.reshape(&[b, t, model.tgt_vocab_size])
    }

    /// Encode + decode in one call.
    pub fn logits(&mut self, batch: &SequenceBatch) -> Result<Tensor> {
        let memory = self.encode(batch)?;
        self.decode(batch, &memory)
    }

    /// Label-smoothed cross-entropy of `logits` against the batch's
    /// shifted targets, averaged over non-pad positions.
    pub fn loss(&self, logits: &Tensor, batch: &SequenceBatch, eps: Elem) -> Result<Tensor> {
        let v = self.model.tgt_vocab_size;
        let rows = batch.batch * batch.tgt_len;
        let flat = logits.reshape(&[rows, v])?;
        let non_pad: Vec<bool> = batch.tgt_pad_mask.iter().map(|&p| !p).collect();
        flat.smoothed_cross_entropy(&batch.tgt_out_ids, &non_pad, eps, PAD_ID)
    }

    /// Per-parameter gradients in store order, after a backward pass.
    pub fn grads(&self) -> Result<Vec<Vec<Elem>>> {
        self.bound
            .iter()
            .enumerate()
            .map(|(i, t)| {
                t.grad().ok_or_else(|| {
                    Error::Contract(format!(
                        "missing gradient for parameter {:?}",
                        self.model.store.get(ParamId(i)).name
                    ))
                })
            })
            .collect()
    }
}

/// Fixed sinusoidal positional encoding for `seq` positions of width `d`.
pub fn positional_encoding(seq: usize, d: usize) -> Vec<Elem> {
    let mut pe = vec![0.0 as Elem; seq * d];
    for pos in 0..seq {
        for i in 0..d / 2 {
            let rate = (10000.0 as Elem).powf(2.0 * i as Elem / d as Elem);
            let angle = pos as Elem / rate;
            pe[pos * d + 2 * i] = angle.sin();
            pe[pos * d + 2 * i + 1] = angle.cos();
        }
        if d % 2 == 1 {
            let i = d / 2;
            let rate = (10000.0 as Elem).powf(2.0 * i as Elem / d as Elem);
            pe[pos * d + 2 * i] = (pos as Elem / rate).sin();
        }
    }
    pe
}

/// Closed-form parameter count for an architecture; kept separate from
/// the store so tests can cross-check construction.
pub fn parameter_count_formula(hp: &HyperParams, src_vocab: usize, tgt_vocab: usize) -> usize {
    let d = hp.embed_dim;
    let ff = hp.ff_dim;
    let attn = 4 * d * d;
    let norm = 2 * d;
    let ffn = d * ff + ff + ff * d + d;
    let enc_layer = attn + ffn + 2 * norm;
    let dec_layer = 2 * attn + ffn + 3 * norm;
    src_vocab * d
        + tgt_vocab * d
        + hp.num_layers * (enc_layer + dec_layer)
        + d * tgt_vocab
        + tgt_vocab
}

#[cfg(test)]
mod tests;
