//! Joint training: shuffled mini-batches, one sampled negative per
//! positive, Adam on the combined ranking and contrastive objective, and
//! early stopping on validation HR@5.
//!
//! Each batch builds a fresh tape. Every example contributes a dual
//! forward pass, an enhanced positive target, and an enhanced sampled
//! negative; the scores feed the pairwise ranking loss while the pooled
//! vectors and positive targets stack into the two in-batch contrastive
//! terms. Ablation variants change what reaches the joint node, never
//! what gets logged: a run without the contrastive objective still
//! reports its value at zero weight.
//!
//! All randomness descends from the config seed through named per-epoch
//! streams, so a rerun reproduces every shuffle, negative draw and
//! dropout mask exactly.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::data::splits::{sample_train_negative, Role, SplitExample};
use crate::error::{Error, Result};
use crate::eval::evaluate_split;
use crate::kge::{EmbeddingTables, Level};
use crate::model::{HpmModel, ModelLeaves, Variant};
use crate::numeric::{adam_step, AdamConfig, AdamState, Matrix, Mode, NodeId, Tape};
use crate::objective::{bpr_node, dcl_node, score_node, LossBreakdown};
use crate::rng::stream;
use crate::scel::{enhance_node, target_intensity_nodes, KernelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub pretrain_lr: f64,
    pub lambda: f64,
    pub d: usize,
    pub heads: usize,
    pub layers: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            patience: 10,
            batch_size: 64,
            lr: 1e-6,
            pretrain_lr: 1e-5,
            lambda: 1.0,
            d: 64,
            heads: 4,
            layers: 1,
            dropout: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("epochs", self.epochs),
            ("patience", self.patience),
            ("batch_size", self.batch_size),
            ("d", self.d),
            ("heads", self.heads),
            ("layers", self.layers),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.patience > self.epochs {
            return Err(Error::Config(format!(
                "patience {} exceeds the epoch budget {}",
                self.patience, self.epochs
            )));
        }
        for (name, v) in [("lr", self.lr), ("pretrain_lr", self.pretrain_lr)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout rate must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.d % self.heads != 0 {
            return Err(Error::Config(format!(
                "embedding size {} is not divisible into {} heads",
                self.d, self.heads
            )));
        }
        Ok(())
    }
}

/// One epoch's mean losses and validation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub batches: usize,
    pub l_rec: f64,
    pub l_cl_item: f64,
    pub l_cl_cate: f64,
    pub l_cl: f64,
    pub l_joint: f64,
    pub val_hr5: f64,
    pub best_val_hr5: f64,
    pub improved: bool,
}

/// Best checkpoint found plus the full epoch history.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: HpmModel,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_hr5: f64,
    pub stopped_early: bool,
}

/// Base or semantically enhanced target rows for one candidate.
#[allow(clippy::too_many_arguments)]
fn target_pair(
    tape: &mut Tape,
    leaves: &ModelLeaves,
    dataset: &Dataset,
    ex: &SplitExample,
    item: usize,
    cat: usize,
    scel: bool,
) -> Result<(NodeId, NodeId)> {
    let base_item = tape.gather(leaves.item_table, &[item])?;
    let base_cat = tape.gather(leaves.category_table, &[cat])?;
    if !scel {
        return Ok((base_item, base_cat));
    }
    let item_int = target_intensity_nodes(
        tape,
        &ex.items,
        &ex.times,
        item,
        ex.target_time,
        &dataset.graph,
        Level::Item,
        &leaves.kernels,
    )?;
    let e_item = enhance_node(tape, base_item, leaves.relation_table, &item_int)?;
    let cat_int = target_intensity_nodes(
        tape,
        &ex.cats,
        &ex.times,
        cat,
        ex.target_time,
        &dataset.graph,
        Level::Category,
        &leaves.kernels,
    )?;
    let e_cat = enhance_node(tape, base_cat, leaves.relation_table, &cat_int)?;
    Ok((e_item, e_cat))
}

pub(crate) struct BatchGraph {
    pub(crate) tape: Tape,
    pub(crate) joint: NodeId,
    pub(crate) breakdown: LossBreakdown,
    pub(crate) leaf_ids: Vec<(String, NodeId)>,
}

/// Builds the full loss graph for one batch and reads its values.
#[allow(clippy::too_many_arguments)]
pub(crate) fn build_batch(
    model: &HpmModel,
    dataset: &Dataset,
    histories: &[BTreeSet<usize>],
    batch: &[&SplitExample],
    lambda: f64,
    neg_rng: &mut impl Rng,
    drop_rng: &mut impl Rng,
    context: &str,
) -> Result<BatchGraph> {
    let mut tape = Tape::new();
    let leaves = model.leaves(&mut tape)?;
    let mut leaf_ids = Vec::new();
    leaves.visit(&mut |name, id| leaf_ids.push((name.to_string(), id)));

    let scel = model.variant.scel_active();
    let n_items = dataset.catalog.n_items();
    let mut v_rows = Vec::with_capacity(batch.len());
    let mut c_rows = Vec::with_capacity(batch.len());
    let mut ev_rows = Vec::with_capacity(batch.len());
    let mut ec_rows = Vec::with_capacity(batch.len());
    let mut bpr_terms = Vec::with_capacity(batch.len());
    for ex in batch {
        let fwd = model.forward_example(&mut tape, &leaves, ex, Mode::Train, drop_rng)?;
        let (pos_item, pos_cat) =
            target_pair(&mut tape, &leaves, dataset, ex, ex.target_item, ex.target_cat, scel)?;
        let neg = sample_train_negative(neg_rng, &histories[ex.user], n_items);
        let neg_cat = dataset.catalog.category_of(neg);
        let (neg_item, neg_cat) =
            target_pair(&mut tape, &leaves, dataset, ex, neg, neg_cat, scel)?;
        let pos_score = score_node(&mut tape, fwd.v_f, fwd.c_f, pos_item, pos_cat)?;
        let neg_score = score_node(&mut tape, fwd.v_f, fwd.c_f, neg_item, neg_cat)?;
        bpr_terms.push(bpr_node(&mut tape, pos_score, neg_score)?);
        v_rows.push(fwd.v_f);
        c_rows.push(fwd.c_f);
        ev_rows.push(pos_item);
        ec_rows.push(pos_cat);
    }

    let bpr_stack = tape.concat_rows(&bpr_terms)?;
    let bpr_sum = tape.sum_all(bpr_stack);
    let l_rec = tape.scale_const(bpr_sum, 1.0 / batch.len() as f64);

    let views_item = tape.concat_rows(&v_rows)?;
    let targets_item = tape.concat_rows(&ev_rows)?;
    let l_cl_item = dcl_node(&mut tape, views_item, targets_item)?;
    let views_cat = tape.concat_rows(&c_rows)?;
    let targets_cat = tape.concat_rows(&ec_rows)?;
    let l_cl_cate = dcl_node(&mut tape, views_cat, targets_cat)?;

    let lambda_eff = if model.variant.dcl_active() { lambda } else { 0.0 };
    let joint = if lambda_eff > 0.0 {
        let cl_sum = tape.add(l_cl_item, l_cl_cate)?;
        let weighted = tape.scale_const(cl_sum, lambda_eff);
        tape.add(l_rec, weighted)?
    } else {
        l_rec
    };

    let values = [
        tape.value(l_rec).item()?,
        tape.value(l_cl_item).item()?,
        tape.value(l_cl_cate).item()?,
        tape.value(joint).item()?,
    ];
    if values.iter().any(|v| !v.is_finite()) {
        let users: Vec<usize> = batch.iter().map(|ex| ex.user).collect();
        return Err(Error::NonFinite(format!(
            "loss diverged at {context}: rec {}, cl_item {}, cl_cate {}, joint {}, users {users:?}",
            values[0], values[1], values[2], values[3]
        )));
    }
    let breakdown = LossBreakdown {
        l_rec: values[0],
        l_cl_item: values[1],
        l_cl_cate: values[2],
        l_cl: values[1] + values[2],
        l_joint: values[3],
        lambda: lambda_eff,
    };
    Ok(BatchGraph { tape, joint, breakdown, leaf_ids })
}

fn apply_step(
    model: &mut HpmModel,
    graph: &BatchGraph,
    adam: &AdamConfig,
    states: &mut BTreeMap<String, AdamState>,
) -> Result<()> {
    let grads = graph.tape.backward(graph.joint)?;
    let mut k = 0;
    let mut failure = None;
    model.visit_params_mut(&mut |name, param| {
        if failure.is_some() {
            return;
        }
        let (leaf_name, leaf_id) = &graph.leaf_ids[k];
        k += 1;
        if leaf_name != name {
            failure = Some(Error::Contract(format!(
                "parameter walk order diverged: {leaf_name} vs {name}"
            )));
            return;
        }
        let state = states
            .entry(name.to_string())
            .or_insert_with(|| AdamState::new(param.rows(), param.cols()));
        let zero;
        let grad = match grads.get(*leaf_id) {
            Some(g) => g,
            None => {
                zero = Matrix::zeros(param.rows(), param.cols());
                &zero
            }
        };
        if let Err(e) = adam_step(adam, state, param, grad) {
            failure = Some(e);
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Runs the full training loop and returns the best-validation model.
pub fn train(
    cfg: &TrainConfig,
    dataset: &Dataset,
    variant: Variant,
    tables: EmbeddingTables,
    kernels: KernelParams,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if tables.d() != cfg.d {
        return Err(Error::Config(format!(
            "embedding tables carry d={} but the config says d={}",
            tables.d(),
            cfg.d
        )));
    }
    let mut init_rng = stream(cfg.seed, "model-init");
    let mut model = HpmModel::init(
        variant,
        tables,
        dataset.max_len,
        cfg.heads,
        cfg.layers,
        cfg.dropout,
        &mut init_rng,
    )?;
    model.kernels = kernels;
    model.validate()?;
    if model.tables.item.rows() != dataset.catalog.n_items() + 1
        || model.tables.category.rows() != dataset.catalog.n_categories() + 1
    {
        return Err(Error::Config(format!(
            "tables sized for {}x{} entities do not fit a catalog with {} items and {} categories",
            model.tables.item.rows(),
            model.tables.category.rows(),
            dataset.catalog.n_items(),
            dataset.catalog.n_categories()
        )));
    }

    let train_examples: Vec<&SplitExample> = dataset.examples(Role::Train).collect();
    if train_examples.is_empty() {
        return Err(Error::Contract("the training split is empty".into()));
    }
    let histories: Vec<BTreeSet<usize>> =
        (0..dataset.sequences.len()).map(|u| dataset.user_items(u)).collect();

    let adam = AdamConfig::with_lr(cfg.lr);
    let mut states: BTreeMap<String, AdamState> = BTreeMap::new();
    let mut log = Vec::new();
    let mut best_model = model.clone();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut stale = 0usize;
    let mut stopped_early = false;

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..train_examples.len()).collect();
        order.shuffle(&mut stream(cfg.seed, &format!("shuffle-{epoch}")));
        let mut neg_rng = stream(cfg.seed, &format!("trainneg-{epoch}"));
        let mut drop_rng = stream(cfg.seed, &format!("dropout-{epoch}"));

        let mut sums = LossBreakdown {
            l_rec: 0.0,
            l_cl_item: 0.0,
            l_cl_cate: 0.0,
            l_cl: 0.0,
            l_joint: 0.0,
            lambda: 0.0,
        };
        let mut seen = 0usize;
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&SplitExample> =
                chunk.iter().map(|&i| train_examples[i]).collect();
            let context = format!("epoch {epoch} batch {b}");
            let graph = build_batch(
                &model,
                dataset,
                &histories,
                &batch,
                cfg.lambda,
                &mut neg_rng,
                &mut drop_rng,
                &context,
            )?;
            apply_step(&mut model, &graph, &adam, &mut states)?;
            let w = batch.len() as f64;
            sums.l_rec += graph.breakdown.l_rec * w;
            sums.l_cl_item += graph.breakdown.l_cl_item * w;
            sums.l_cl_cate += graph.breakdown.l_cl_cate * w;
            sums.l_cl += graph.breakdown.l_cl * w;
            sums.l_joint += graph.breakdown.l_joint * w;
            sums.lambda = graph.breakdown.lambda;
            seen += batch.len();
            batches += 1;
        }

        let validation = evaluate_split(&model, dataset, Role::Validation, cfg.seed)?;
        let val_hr5 = validation.hr_at(5);
        let improved = val_hr5 > best_val;
        if improved {
            best_val = val_hr5;
            best_epoch = epoch;
            best_model = model.clone();
            stale = 0;
        } else {
            stale += 1;
        }
        let n = seen as f64;
        log.push(EpochLog {
            epoch,
            batches,
            l_rec: sums.l_rec / n,
            l_cl_item: sums.l_cl_item / n,
            l_cl_cate: sums.l_cl_cate / n,
            l_cl: sums.l_cl / n,
            l_joint: sums.l_joint / n,
            val_hr5,
            best_val_hr5: best_val,
            improved,
        });
        if stale >= cfg.patience {
            stopped_early = true;
            break;
        }
    }

    Ok(TrainOutcome {
        model: best_model,
        log,
        best_epoch,
        best_val_hr5: best_val,
        stopped_early,
    })
}
