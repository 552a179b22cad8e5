//! Finite-difference verification of the full training gradient.
//!
//! Builds the same loss graph the optimizer steps on, for a micro-batch
//! over a tiny synthetic dataset, then probes every entry of every named
//! parameter tensor with central differences and compares against the
//! backward pass. The batch is chosen so all parts of the model carry
//! gradient: examples with relation-linked history exercise the kernel
//! scales and the relation table on top of both encoder stacks.
//!
//! Padding rows of the item and category tables are excluded; nothing in
//! the forward pass reads them, so both sides of the comparison are zero
//! by construction.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::data::splits::{Role, SplitExample};
use crate::data::synth::{generate, SynthConfig};
use crate::error::{Error, Result};
use crate::kge::{EmbeddingTables, Level};
use crate::model::{HpmModel, Variant};
use crate::rng::stream;
use crate::scel::target_intensities;
use crate::train::build_batch;

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
pub const GRADCHECK_STEP: f64 = 1e-5;
const REL_ERR_FLOOR: f64 = 1e-4;

/// Worst finite-difference disagreement for one parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub name: String,
    pub entries: usize,
    pub max_rel_err: f64,
    pub grad_norm: f64,
}

/// Outcome of the sweep over every trainable tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub entries_checked: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(REL_ERR_FLOOR)
}

fn batch_loss(
    model: &HpmModel,
    dataset: &Dataset,
    histories: &[BTreeSet<usize>],
    batch: &[&SplitExample],
    lambda: f64,
    seed: u64,
) -> Result<f64> {
    let graph = build_batch(
        model,
        dataset,
        histories,
        batch,
        lambda,
        &mut stream(seed, "gradcheck-neg"),
        &mut stream(seed, "gradcheck-dropout"),
        "gradcheck batch",
    )?;
    Ok(graph.breakdown.l_joint)
}

/// Sweeps every entry of every named tensor in `model` against central
/// differences of the batch loss. Rows 0 of the item and category tables
/// are skipped as padding.
pub fn check_model(
    model: &HpmModel,
    dataset: &Dataset,
    batch: &[&SplitExample],
    lambda: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    if model.dropout != 0.0 {
        return Err(Error::Contract(
            "gradient checking requires dropout 0 so both loss probes see the same mask".into(),
        ));
    }
    let histories: Vec<BTreeSet<usize>> =
        (0..dataset.sequences.len()).map(|u| dataset.user_items(u)).collect();
    let graph = build_batch(
        model,
        dataset,
        &histories,
        batch,
        lambda,
        &mut stream(seed, "gradcheck-neg"),
        &mut stream(seed, "gradcheck-dropout"),
        "gradcheck batch",
    )?;
    let grads = graph.tape.backward(graph.joint)?;

    let mut tensors = Vec::new();
    let mut entries_checked = 0usize;
    let mut max_rel = 0.0f64;
    for (name, leaf) in &graph.leaf_ids {
        let shape = graph.tape.value(*leaf).shape();
        let analytic = match grads.get(*leaf) {
            Some(g) => g.clone(),
            None => crate::numeric::Matrix::zeros(shape.0, shape.1),
        };
        let skip_row0 = name == "tables.item" || name == "tables.category";
        let cols = shape.1;
        let mut tensor_max = 0.0f64;
        let mut grad_norm = 0.0f64;
        let mut checked = 0usize;
        for flat in 0..shape.0 * cols {
            if skip_row0 && flat < cols {
                continue;
            }
            let g = analytic.as_slice()[flat];
            grad_norm += g * g;
            let mut probe = model.clone();
            let mut offsets = Vec::new();
            probe.visit_params_mut(&mut |pname, param| {
                if pname == name {
                    offsets.push(param.as_slice()[flat]);
                }
            });
            let original = offsets[0];
            let set = |probe: &mut HpmModel, value: f64| {
                probe.visit_params_mut(&mut |pname, param| {
                    if pname == name {
                        param.as_mut_slice()[flat] = value;
                    }
                });
            };
            set(&mut probe, original + GRADCHECK_STEP);
            let plus = batch_loss(&probe, dataset, &histories, batch, lambda, seed)?;
            set(&mut probe, original - GRADCHECK_STEP);
            let minus = batch_loss(&probe, dataset, &histories, batch, lambda, seed)?;
            let fd = (plus - minus) / (2.0 * GRADCHECK_STEP);
            tensor_max = tensor_max.max(rel_err(g, fd));
            checked += 1;
        }
        entries_checked += checked;
        max_rel = max_rel.max(tensor_max);
        tensors.push(TensorCheck {
            name: name.clone(),
            entries: checked,
            max_rel_err: tensor_max,
            grad_norm: grad_norm.sqrt(),
        });
    }
    Ok(GradCheckReport {
        tensors,
        entries_checked,
        max_rel_err: max_rel,
        tolerance: GRADCHECK_TOLERANCE,
        pass: max_rel < GRADCHECK_TOLERANCE,
    })
}

/// Standard micro-batch sweep: a tiny synthetic dataset, a fresh model
/// with d=8, window length 6 and 2 heads, and four training examples
/// picked so relation intensities are active at both levels.
pub fn run_default(seed: u64) -> Result<GradCheckReport> {
    let synth = SynthConfig {
        users: 40,
        categories: 3,
        items_per_category: 12,
        ..Default::default()
    };
    let dataset = generate(&synth, seed, 6, 0.1)?;
    let tables = EmbeddingTables::init(
        dataset.catalog.n_items(),
        dataset.catalog.n_categories(),
        8,
        &mut stream(seed, "gradcheck-tables"),
    );
    let model = HpmModel::init(
        Variant::Full,
        tables,
        dataset.max_len,
        2,
        1,
        0.0,
        &mut stream(seed, "gradcheck-model"),
    )?;

    let kernels = &model.kernels;
    let related = |ex: &&SplitExample| -> bool {
        let item = target_intensities(
            &ex.items,
            &ex.times,
            ex.target_item,
            ex.target_time,
            &dataset.graph,
            Level::Item,
            kernels,
        );
        let cat = target_intensities(
            &ex.cats,
            &ex.times,
            ex.target_cat,
            ex.target_time,
            &dataset.graph,
            Level::Category,
            kernels,
        );
        item.iter().any(|&f| f != 0.0) && cat.iter().any(|&f| f != 0.0)
    };
    let batch: Vec<&SplitExample> =
        dataset.examples(Role::Train).filter(related).take(4).collect();
    if batch.len() < 4 {
        return Err(Error::Contract(format!(
            "only {} relation-active examples available for the micro-batch",
            batch.len()
        )));
    }
    check_model(&model, &dataset, &batch, 1.0, seed)
}
