//! Loss functions: in-batch dual contrastive loss over cosine
//! similarities, pairwise ranking loss over two-level scores, and the
//! joint objective combining them.
//!
//! The contrastive loss treats each example's own enhanced target as the
//! positive and the other targets in the batch as negatives, with every
//! term exponentiated at unit temperature. The ranking loss is the
//! negative log-sigmoid of the score difference, evaluated in softplus
//! form so large differences cannot overflow. Both reduce by batch mean,
//! keeping the contrastive coefficient independent of batch size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{NodeId, Tape};

pub const COSINE_EPS: f64 = 1e-12;

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Cosine similarity with an epsilon-guarded denominator, so zero
/// vectors yield zero instead of dividing by zero.
pub fn cosine_sim(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let na: f64 = a.iter().map(|&x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&y| y * y).sum::<f64>().sqrt();
    dot / (na.max(COSINE_EPS) * nb.max(COSINE_EPS))
}

/// Two-level candidate score: item inner product plus category inner
/// product.
pub fn score(v_f: &[f64], c_f: &[f64], e_item: &[f64], e_cat: &[f64]) -> f64 {
    let item: f64 = v_f.iter().zip(e_item).map(|(&x, &y)| x * y).sum();
    let cat: f64 = c_f.iter().zip(e_cat).map(|(&x, &y)| x * y).sum();
    item + cat
}

/// Pairwise ranking loss -ln sigmoid(pos - neg) in softplus form.
pub fn bpr_loss(pos: f64, neg: f64) -> f64 {
    softplus(neg - pos)
}

/// Tape version of [`score`] for 1 x d row nodes.
pub fn score_node(
    tape: &mut Tape,
    v_f: NodeId,
    c_f: NodeId,
    e_item: NodeId,
    e_cat: NodeId,
) -> Result<NodeId> {
    let item_t = tape.transpose(e_item);
    let item = tape.matmul(v_f, item_t)?;
    let cat_t = tape.transpose(e_cat);
    let cat = tape.matmul(c_f, cat_t)?;
    tape.add(item, cat)
}

/// Tape version of [`bpr_loss`] for 1 x 1 score nodes.
pub fn bpr_node(tape: &mut Tape, pos: NodeId, neg: NodeId) -> Result<NodeId> {
    let diff = tape.sub(neg, pos)?;
    Ok(tape.softplus(diff))
}

/// In-batch contrastive loss at one level. `views` holds the pooled
/// user vectors, `targets` the enhanced target embeddings, both B x d
/// with row i belonging to example i; the other B-1 rows act as
/// negatives. Returns the batch mean as a 1 x 1 node.
pub fn dcl_node(tape: &mut Tape, views: NodeId, targets: NodeId) -> Result<NodeId> {
    let (b, d) = tape.value(views).shape();
    if tape.value(targets).shape() != (b, d) {
        return Err(Error::Shape(format!(
            "contrastive views are {b}x{d} but targets are {}x{}",
            tape.value(targets).rows(),
            tape.value(targets).cols()
        )));
    }
    if b == 0 {
        return Err(Error::Contract("contrastive loss over an empty batch".into()));
    }
    let vn = tape.row_normalize(views, COSINE_EPS);
    let tn = tape.row_normalize(targets, COSINE_EPS);
    let tt = tape.transpose(tn);
    let sims = tape.matmul(vn, tt)?;
    let lse = tape.log_sum_exp_rows(sims);
    let own = tape.diag_to_col(sims)?;
    let diff = tape.sub(lse, own)?;
    let total = tape.sum_all(diff);
    Ok(tape.scale_const(total, 1.0 / b as f64))
}

/// Scalar record of one batch's losses, as logged per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_rec: f64,
    pub l_cl_item: f64,
    pub l_cl_cate: f64,
    pub l_cl: f64,
    pub l_joint: f64,
    pub lambda: f64,
}

/// Combines the ranking and contrastive terms under coefficient lambda.
pub fn joint_loss(
    l_rec: f64,
    l_cl_item: f64,
    l_cl_cate: f64,
    lambda: f64,
) -> Result<LossBreakdown> {
    if !(lambda >= 0.0) {
        return Err(Error::Config(format!(
            "contrastive coefficient must be non-negative, got {lambda}"
        )));
    }
    let l_cl = l_cl_item + l_cl_cate;
    let l_joint = l_rec + lambda * l_cl;
    if !l_joint.is_finite() {
        return Err(Error::NonFinite(format!(
            "joint loss from rec {l_rec}, cl {l_cl}, lambda {lambda}"
        )));
    }
    Ok(LossBreakdown { l_rec, l_cl_item, l_cl_cate, l_cl, l_joint, lambda })
}
