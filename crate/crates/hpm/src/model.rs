//! Dual self-attention encoder producing pooled user preference vectors.
//!
//! Two parallel stacks encode the item-index view and the category-index
//! view of one interaction window. Each block is causal multi-head
//! self-attention followed by a position-wise feed-forward network with
//! dropout, a residual connection, and layer normalization. Windows are
//! left-padded, so the valid positions form a contiguous suffix; the
//! forward pass slices that suffix out and never touches padding rows,
//! which keeps padded slots inert by construction. Position embeddings
//! are indexed by absolute window slot so the most recent interaction
//! always sits at the same position row.
//!
//! The forward pass exists twice: on the tape for training and as plain
//! matrix arithmetic for evaluation, where no gradients are needed.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{SplitExample, PAD};
use crate::error::{Error, Result};
use crate::kge::EmbeddingTables;
use crate::numeric::{matmul, softmax_rows, Matrix, Mode, NodeId, Tape};
use crate::scel::{KernelNodes, KernelParams};

pub const MODEL_SCHEMA: &str = "hpm-model-v1";
pub const LAYER_NORM_EPS: f64 = 1e-8;

/// Which parts of the architecture a run exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    Full,
    NoScel,
    SingleStream,
    NoDcl,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::NoScel,
        Variant::SingleStream,
        Variant::NoDcl,
    ];

    pub fn parse(name: &str) -> Result<Variant> {
        match name {
            "full" => Ok(Variant::Full),
            "no-scel" => Ok(Variant::NoScel),
            "single-stream" => Ok(Variant::SingleStream),
            "no-dcl" => Ok(Variant::NoDcl),
            other => Err(Error::Config(format!(
                "unknown variant {other:?}, expected one of full, no-scel, single-stream, no-dcl"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoScel => "no-scel",
            Variant::SingleStream => "single-stream",
            Variant::NoDcl => "no-dcl",
        }
    }

    /// Target enhancement runs unless the variant disables it.
    pub fn scel_active(self) -> bool {
        self != Variant::NoScel
    }

    /// The contrastive loss contributes to the joint objective unless
    /// the variant zeroes its coefficient.
    pub fn dcl_active(self) -> bool {
        self != Variant::NoDcl
    }

    /// One shared stack over summed embeddings instead of two streams.
    pub fn single_stream(self) -> bool {
        self == Variant::SingleStream
    }
}

/// Weights of one encoder block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
    pub w_o: Matrix,
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
    pub gamma: Matrix,
    pub beta: Matrix,
}

const LAYER_TENSORS: [&str; 10] =
    ["w_q", "w_k", "w_v", "w_o", "w1", "b1", "w2", "b2", "gamma", "beta"];

impl LayerParams {
    fn init(d: usize, rng: &mut impl Rng) -> LayerParams {
        let bound = 1.0 / (d as f64).sqrt();
        let mut weight = || Matrix::uniform(d, d, -bound, bound, rng);
        let w_q = weight();
        let w_k = weight();
        let w_v = weight();
        let w_o = weight();
        let w1 = weight();
        let w2 = weight();
        LayerParams {
            w_q,
            w_k,
            w_v,
            w_o,
            w1,
            b1: Matrix::zeros(1, d),
            w2,
            b2: Matrix::zeros(1, d),
            gamma: Matrix::from_vec(1, d, vec![1.0; d]).expect("unit gain row"),
            beta: Matrix::zeros(1, d),
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        for (name, m, shape) in [
            ("w_q", &self.w_q, (d, d)),
            ("w_k", &self.w_k, (d, d)),
            ("w_v", &self.w_v, (d, d)),
            ("w_o", &self.w_o, (d, d)),
            ("w1", &self.w1, (d, d)),
            ("b1", &self.b1, (1, d)),
            ("w2", &self.w2, (d, d)),
            ("b2", &self.b2, (1, d)),
            ("gamma", &self.gamma, (1, d)),
            ("beta", &self.beta, (1, d)),
        ] {
            if m.shape() != shape {
                return Err(Error::Shape(format!(
                    "{name} has shape {:?}, expected {shape:?}",
                    m.shape()
                )));
            }
            if !m.is_finite() {
                return Err(Error::NonFinite(format!("layer tensor {name}")));
            }
        }
        Ok(())
    }

    fn tensors(&self) -> [&Matrix; 10] {
        [
            &self.w_q, &self.w_k, &self.w_v, &self.w_o, &self.w1, &self.b1, &self.w2,
            &self.b2, &self.gamma, &self.beta,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Matrix; 10] {
        [
            &mut self.w_q,
            &mut self.w_k,
            &mut self.w_v,
            &mut self.w_o,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.gamma,
            &mut self.beta,
        ]
    }
}

/// The full trainable state: embeddings, position table, both encoder
/// stacks, and the temporal kernel scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpmModel {
    pub schema: String,
    pub variant: Variant,
    pub heads: usize,
    pub dropout: f64,
    pub max_len: usize,
    pub tables: EmbeddingTables,
    pub position: Matrix,
    pub item_stack: Vec<LayerParams>,
    pub category_stack: Vec<LayerParams>,
    pub kernels: KernelParams,
}

impl HpmModel {
    pub fn init(
        variant: Variant,
        tables: EmbeddingTables,
        max_len: usize,
        heads: usize,
        layers: usize,
        dropout: f64,
        rng: &mut impl Rng,
    ) -> Result<HpmModel> {
        let d = tables.d();
        if heads == 0 || d % heads != 0 {
            return Err(Error::Config(format!(
                "embedding size {d} is not divisible into {heads} heads"
            )));
        }
        if layers == 0 {
            return Err(Error::Config("at least one encoder layer required".into()));
        }
        if max_len == 0 {
            return Err(Error::Config("window length must be positive".into()));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Config(format!(
                "dropout rate must lie in [0, 1), got {dropout}"
            )));
        }
        let bound = 1.0 / (d as f64).sqrt();
        let position = Matrix::uniform(max_len, d, -bound, bound, rng);
        let item_stack = (0..layers).map(|_| LayerParams::init(d, rng)).collect();
        let category_stack = (0..layers).map(|_| LayerParams::init(d, rng)).collect();
        Ok(HpmModel {
            schema: MODEL_SCHEMA.to_string(),
            variant,
            heads,
            dropout,
            max_len,
            tables,
            position,
            item_stack,
            category_stack,
            kernels: KernelParams::default(),
        })
    }

    pub fn d(&self) -> usize {
        self.tables.d()
    }

    pub fn layers(&self) -> usize {
        self.item_stack.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != MODEL_SCHEMA {
            return Err(Error::DataIntegrity(format!(
                "model schema {} does not match expected {MODEL_SCHEMA}",
                self.schema
            )));
        }
        self.tables.validate()?;
        self.kernels.validate()?;
        let d = self.d();
        if self.heads == 0 || d % self.heads != 0 {
            return Err(Error::Config(format!(
                "embedding size {d} is not divisible into {} heads",
                self.heads
            )));
        }
        if self.position.shape() != (self.max_len, d) {
            return Err(Error::Shape(format!(
                "position table has shape {:?}, expected ({}, {d})",
                self.position.shape(),
                self.max_len
            )));
        }
        if !self.position.is_finite() {
            return Err(Error::NonFinite("position table".into()));
        }
        if self.item_stack.is_empty() || self.item_stack.len() != self.category_stack.len() {
            return Err(Error::Shape(format!(
                "stacks must be non-empty and equally deep, got {} and {}",
                self.item_stack.len(),
                self.category_stack.len()
            )));
        }
        for layer in self.item_stack.iter().chain(&self.category_stack) {
            layer.validate(d)?;
        }
        Ok(())
    }

    /// Walks every trainable tensor in a fixed order under stable names.
    pub fn visit_params(&self, f: &mut impl FnMut(&str, &Matrix)) {
        f("tables.item", &self.tables.item);
        f("tables.category", &self.tables.category);
        f("tables.relation", &self.tables.relation);
        f("position", &self.position);
        for (stack_name, stack) in [
            ("item_stack", &self.item_stack),
            ("category_stack", &self.category_stack),
        ] {
            for (i, layer) in stack.iter().enumerate() {
                for (tensor, m) in LAYER_TENSORS.iter().zip(layer.tensors()) {
                    f(&format!("{stack_name}.layer{i}.{tensor}"), m);
                }
            }
        }
        f("kernels.rho", &self.kernels.rho);
    }

    /// Mutable mirror of [`visit_params`], same order and names.
    pub fn visit_params_mut(&mut self, f: &mut impl FnMut(&str, &mut Matrix)) {
        f("tables.item", &mut self.tables.item);
        f("tables.category", &mut self.tables.category);
        f("tables.relation", &mut self.tables.relation);
        f("position", &mut self.position);
        for (stack_name, stack) in [
            ("item_stack", &mut self.item_stack),
            ("category_stack", &mut self.category_stack),
        ] {
            for (i, layer) in stack.iter_mut().enumerate() {
                for (tensor, m) in LAYER_TENSORS.iter().zip(layer.tensors_mut()) {
                    f(&format!("{stack_name}.layer{i}.{tensor}"), m);
                }
            }
        }
        f("kernels.rho", &mut self.kernels.rho);
    }

    /// Registers every trainable tensor as a tape leaf.
    pub fn leaves(&self, tape: &mut Tape) -> Result<ModelLeaves> {
        let item_table = tape.param(self.tables.item.clone());
        let category_table = tape.param(self.tables.category.clone());
        let relation_table = tape.param(self.tables.relation.clone());
        let position = tape.param(self.position.clone());
        let register = |tape: &mut Tape, stack: &[LayerParams]| -> Vec<LayerLeaves> {
            stack
                .iter()
                .map(|layer| LayerLeaves {
                    w_q: tape.param(layer.w_q.clone()),
                    w_k: tape.param(layer.w_k.clone()),
                    w_v: tape.param(layer.w_v.clone()),
                    w_o: tape.param(layer.w_o.clone()),
                    w1: tape.param(layer.w1.clone()),
                    b1: tape.param(layer.b1.clone()),
                    w2: tape.param(layer.w2.clone()),
                    b2: tape.param(layer.b2.clone()),
                    gamma: tape.param(layer.gamma.clone()),
                    beta: tape.param(layer.beta.clone()),
                })
                .collect()
        };
        let item_stack = register(tape, &self.item_stack);
        let category_stack = register(tape, &self.category_stack);
        let kernels = self.kernels.leaves(tape)?;
        Ok(ModelLeaves {
            item_table,
            category_table,
            relation_table,
            position,
            item_stack,
            category_stack,
            kernels,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<HpmModel> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: HpmModel = serde_json::from_str(&text)?;
        model.validate()?;
        Ok(model)
    }
}

/// Tape node ids of one block's weights.
#[derive(Debug, Clone, Copy)]
pub struct LayerLeaves {
    pub w_q: NodeId,
    pub w_k: NodeId,
    pub w_v: NodeId,
    pub w_o: NodeId,
    pub w1: NodeId,
    pub b1: NodeId,
    pub w2: NodeId,
    pub b2: NodeId,
    pub gamma: NodeId,
    pub beta: NodeId,
}

impl LayerLeaves {
    fn nodes(&self) -> [NodeId; 10] {
        [
            self.w_q, self.w_k, self.w_v, self.w_o, self.w1, self.b1, self.w2, self.b2,
            self.gamma, self.beta,
        ]
    }
}

/// Tape node ids of the whole model, in the same order and under the
/// same names as [`HpmModel::visit_params`].
pub struct ModelLeaves {
    pub item_table: NodeId,
    pub category_table: NodeId,
    pub relation_table: NodeId,
    pub position: NodeId,
    pub item_stack: Vec<LayerLeaves>,
    pub category_stack: Vec<LayerLeaves>,
    pub kernels: KernelNodes,
}

impl ModelLeaves {
    pub fn visit(&self, f: &mut impl FnMut(&str, NodeId)) {
        f("tables.item", self.item_table);
        f("tables.category", self.category_table);
        f("tables.relation", self.relation_table);
        f("position", self.position);
        for (stack_name, stack) in [
            ("item_stack", &self.item_stack),
            ("category_stack", &self.category_stack),
        ] {
            for (i, layer) in stack.iter().enumerate() {
                for (tensor, id) in LAYER_TENSORS.iter().zip(layer.nodes()) {
                    f(&format!("{stack_name}.layer{i}.{tensor}"), id);
                }
            }
        }
        f("kernels.rho", self.kernels.rho);
    }
}

/// First valid index of a left-padded window. The mask must be false on
/// a (possibly empty) prefix and true afterwards.
pub fn suffix_start(valid: &[bool]) -> Result<usize> {
    let start = match valid.iter().position(|&v| v) {
        Some(k) => k,
        None => {
            return Err(Error::Contract(
                "window has no valid positions to encode".into(),
            ))
        }
    };
    if valid[start..].iter().any(|&v| !v) {
        return Err(Error::Contract(
            "window validity must form a contiguous suffix".into(),
        ));
    }
    Ok(start)
}

/// Embedded input streams for one window: table rows plus position rows
/// over the valid suffix.
#[derive(Debug)]
pub struct EmbeddedInputs {
    pub item: NodeId,
    pub category: NodeId,
    pub start: usize,
}

pub fn embed_inputs(
    tape: &mut Tape,
    leaves: &ModelLeaves,
    items: &[usize],
    cats: &[usize],
    valid: &[bool],
    single_stream: bool,
) -> Result<EmbeddedInputs> {
    if items.len() != cats.len() || items.len() != valid.len() {
        return Err(Error::Shape(format!(
            "window slices disagree: {} items, {} categories, {} mask entries",
            items.len(),
            cats.len(),
            valid.len()
        )));
    }
    let start = suffix_start(valid)?;
    let pos_ids: Vec<usize> = (start..items.len()).collect();
    let e_item = tape.gather(leaves.item_table, &items[start..])?;
    let e_cat = tape.gather(leaves.category_table, &cats[start..])?;
    let e_pos = tape.gather(leaves.position, &pos_ids)?;
    if single_stream {
        let summed = tape.add(e_item, e_cat)?;
        let x = tape.add(summed, e_pos)?;
        return Ok(EmbeddedInputs { item: x, category: x, start });
    }
    let item = tape.add(e_item, e_pos)?;
    let category = tape.add(e_cat, e_pos)?;
    Ok(EmbeddedInputs { item, category, start })
}

/// Attention output of one block plus the per-head attention matrices.
pub struct BlockOutput {
    pub out: NodeId,
    pub attention: Vec<NodeId>,
}

/// One causal encoder block: multi-head self-attention, feed-forward,
/// dropout, residual, layer norm.
pub fn attention_block(
    tape: &mut Tape,
    x: NodeId,
    layer: &LayerLeaves,
    heads: usize,
    dropout: f64,
    mode: Mode,
    rng: &mut impl Rng,
) -> Result<BlockOutput> {
    let (len, d) = tape.value(x).shape();
    if heads == 0 || d % heads != 0 {
        return Err(Error::Config(format!(
            "width {d} is not divisible into {heads} heads"
        )));
    }
    let dh = d / heads;
    let q = tape.matmul(x, layer.w_q)?;
    let k = tape.matmul(x, layer.w_k)?;
    let v = tape.matmul(x, layer.w_v)?;
    let mut causal = vec![false; len * len];
    for i in 0..len {
        for j in 0..=i {
            causal[i * len + j] = true;
        }
    }
    let mut head_outs = Vec::with_capacity(heads);
    let mut attention = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = tape.slice_cols(q, h * dh, (h + 1) * dh)?;
        let kh = tape.slice_cols(k, h * dh, (h + 1) * dh)?;
        let vh = tape.slice_cols(v, h * dh, (h + 1) * dh)?;
        let kt = tape.transpose(kh);
        let scores = tape.matmul(qh, kt)?;
        let scaled = tape.scale_const(scores, 1.0 / (dh as f64).sqrt());
        let attn = tape.masked_softmax_rows(scaled, &causal)?;
        head_outs.push(tape.matmul(attn, vh)?);
        attention.push(attn);
    }
    let concat = tape.concat_cols(&head_outs)?;
    let proj = tape.matmul(concat, layer.w_o)?;
    let a1 = tape.matmul(proj, layer.w1)?;
    let a1 = tape.add_row(a1, layer.b1)?;
    let a1 = tape.relu(a1);
    let a2 = tape.matmul(a1, layer.w2)?;
    let ffn = tape.add_row(a2, layer.b2)?;
    let dropped = tape.dropout(ffn, dropout, mode, rng)?;
    let resid = tape.add(x, dropped)?;
    let out = tape.layer_norm(resid, layer.gamma, layer.beta, LAYER_NORM_EPS)?;
    Ok(BlockOutput { out, attention })
}

/// Mean of the hidden states; callers slice away padding beforehand.
pub fn pool(tape: &mut Tape, hidden: NodeId) -> Result<NodeId> {
    let n = tape.value(hidden).rows();
    if n == 0 {
        return Err(Error::Contract("pool: no valid positions".into()));
    }
    let weights = tape.constant(Matrix::from_vec(1, n, vec![1.0 / n as f64; n])?);
    tape.matmul(weights, hidden)
}

/// Pooled preference vectors plus the per-position hidden states.
pub struct Forward {
    pub v_f: NodeId,
    pub c_f: NodeId,
    pub item_hidden: NodeId,
    pub cat_hidden: NodeId,
    pub start: usize,
}

impl HpmModel {
    /// Encodes one window given explicit id slices and validity mask.
    #[allow(clippy::too_many_arguments)]
    pub fn forward_dual(
        &self,
        tape: &mut Tape,
        leaves: &ModelLeaves,
        items: &[usize],
        cats: &[usize],
        valid: &[bool],
        mode: Mode,
        rng: &mut impl Rng,
    ) -> Result<Forward> {
        let emb = embed_inputs(tape, leaves, items, cats, valid, self.variant.single_stream())?;
        let mut item_hidden = emb.item;
        for layer in &leaves.item_stack {
            item_hidden =
                attention_block(tape, item_hidden, layer, self.heads, self.dropout, mode, rng)?
                    .out;
        }
        let v_f = pool(tape, item_hidden)?;
        if self.variant.single_stream() {
            return Ok(Forward {
                v_f,
                c_f: v_f,
                item_hidden,
                cat_hidden: item_hidden,
                start: emb.start,
            });
        }
        let mut cat_hidden = emb.category;
        for layer in &leaves.category_stack {
            cat_hidden =
                attention_block(tape, cat_hidden, layer, self.heads, self.dropout, mode, rng)?
                    .out;
        }
        let c_f = pool(tape, cat_hidden)?;
        Ok(Forward { v_f, c_f, item_hidden, cat_hidden, start: emb.start })
    }

    /// Encodes a split example, deriving validity from padding ids.
    pub fn forward_example(
        &self,
        tape: &mut Tape,
        leaves: &ModelLeaves,
        example: &SplitExample,
        mode: Mode,
        rng: &mut impl Rng,
    ) -> Result<Forward> {
        let valid: Vec<bool> = example.items.iter().map(|&v| v != PAD).collect();
        self.forward_dual(tape, leaves, &example.items, &example.cats, &valid, mode, rng)
    }

    /// Gradient-free forward pass for evaluation; mirrors the tape path
    /// exactly, including operation order.
    pub fn forward_plain(
        &self,
        items: &[usize],
        cats: &[usize],
        valid: &[bool],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let start = suffix_start(valid)?;
        let len = items.len() - start;
        let d = self.d();
        let gather = |table: &Matrix, ids: &[usize]| -> Result<Matrix> {
            let mut out = Matrix::zeros(ids.len(), d);
            for (r, &id) in ids.iter().enumerate() {
                if id >= table.rows() {
                    return Err(Error::DataIntegrity(format!(
                        "index {id} outside table with {} rows",
                        table.rows()
                    )));
                }
                out.row_mut(r).copy_from_slice(table.row(id));
            }
            Ok(out)
        };
        let pos_ids: Vec<usize> = (start..items.len()).collect();
        let e_pos = gather(&self.position, &pos_ids)?;
        let e_item = gather(&self.tables.item, &items[start..])?;
        let x_item = if self.variant.single_stream() {
            let e_cat = gather(&self.tables.category, &cats[start..])?;
            e_item.add(&e_cat)?.add(&e_pos)?
        } else {
            e_item.add(&e_pos)?
        };
        let run = |input: Matrix, stack: &[LayerParams]| -> Result<Matrix> {
            let mut h = input;
            for layer in stack {
                h = plain_block(&h, layer, self.heads, len)?;
            }
            Ok(h)
        };
        let mean_rows = |h: &Matrix| -> Vec<f64> {
            let mut out = vec![0.0; d];
            for r in 0..h.rows() {
                for (o, &v) in out.iter_mut().zip(h.row(r)) {
                    *o += v / h.rows() as f64;
                }
            }
            out
        };
        let item_hidden = run(x_item, &self.item_stack)?;
        let v_f = mean_rows(&item_hidden);
        if self.variant.single_stream() {
            return Ok((v_f.clone(), v_f));
        }
        let e_cat = gather(&self.tables.category, &cats[start..])?;
        let x_cat = e_cat.add(&e_pos)?;
        let cat_hidden = run(x_cat, &self.category_stack)?;
        let c_f = mean_rows(&cat_hidden);
        Ok((v_f, c_f))
    }
}

fn plain_block(x: &Matrix, layer: &LayerParams, heads: usize, len: usize) -> Result<Matrix> {
    let d = x.cols();
    let dh = d / heads;
    let q = matmul(x, &layer.w_q)?;
    let k = matmul(x, &layer.w_k)?;
    let v = matmul(x, &layer.w_v)?;
    let slice = |m: &Matrix, h: usize| -> Matrix {
        let mut out = Matrix::zeros(len, dh);
        for r in 0..len {
            out.row_mut(r).copy_from_slice(&m.row(r)[h * dh..(h + 1) * dh]);
        }
        out
    };
    let mut concat = Matrix::zeros(len, d);
    for h in 0..heads {
        let qh = slice(&q, h);
        let kh = slice(&k, h);
        let vh = slice(&v, h);
        let mut scores = matmul(&qh, &kh.transpose())?.scale(1.0 / (dh as f64).sqrt());
        for i in 0..len {
            for j in i + 1..len {
                scores.set(i, j, f64::NEG_INFINITY);
            }
        }
        let attn = softmax_rows(&scores);
        let head = matmul(&attn, &vh)?;
        for r in 0..len {
            concat.row_mut(r)[h * dh..(h + 1) * dh].copy_from_slice(head.row(r));
        }
    }
    let proj = matmul(&concat, &layer.w_o)?;
    let mut a1 = matmul(&proj, &layer.w1)?;
    for r in 0..len {
        for (v, &b) in a1.row_mut(r).iter_mut().zip(layer.b1.row(0)) {
            *v += b;
        }
    }
    let a1 = a1.map(|v| v.max(0.0));
    let mut ffn = matmul(&a1, &layer.w2)?;
    for r in 0..len {
        for (v, &b) in ffn.row_mut(r).iter_mut().zip(layer.b2.row(0)) {
            *v += b;
        }
    }
    let resid = x.add(&ffn)?;
    crate::numeric::layer_norm(&resid, &layer.gamma, &layer.beta, LAYER_NORM_EPS)
}
