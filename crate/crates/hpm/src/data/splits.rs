//! Leave-one-out split construction and negative sampling.
//!
//! Per user, the last interaction is the test target and the second-last
//! the validation target. Every position with at least one preceding
//! interaction except the last yields a training example, so the
//! validation position is also trained on; only the test target is held
//! out. Histories keep the latest `max_len` interactions, left-padded
//! with index 0.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::catalog::{Catalog, PAD};
use crate::data::dataset::InteractionSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Train,
    Validation,
    Test,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Validation => "validation",
            Role::Test => "test",
        }
    }
}

/// One (history window, target) pair. The three window vectors share
/// indexing: position i holds the item, its category, and its timestamp,
/// or all-zero padding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitExample {
    pub user: usize,
    pub items: Vec<usize>,
    pub cats: Vec<usize>,
    pub times: Vec<i64>,
    pub target_item: usize,
    pub target_cat: usize,
    pub target_time: i64,
    pub role: Role,
}

impl SplitExample {
    /// Number of non-padding positions.
    pub fn valid_len(&self) -> usize {
        self.items.iter().filter(|&&i| i != PAD).count()
    }
}

fn window(
    seq: &InteractionSequence,
    catalog: &Catalog,
    target_pos: usize,
    max_len: usize,
    user: usize,
    role: Role,
) -> SplitExample {
    let from = target_pos.saturating_sub(max_len);
    let src_items = &seq.items[from..target_pos];
    let src_times = &seq.times[from..target_pos];
    let pad = max_len - src_items.len();
    let mut items = vec![PAD; max_len];
    let mut cats = vec![PAD; max_len];
    let mut times = vec![0i64; max_len];
    for (k, (&it, &ts)) in src_items.iter().zip(src_times).enumerate() {
        items[pad + k] = it;
        cats[pad + k] = catalog.category_of(it);
        times[pad + k] = ts;
    }
    SplitExample {
        user,
        items,
        cats,
        times,
        target_item: seq.items[target_pos],
        target_cat: catalog.category_of(seq.items[target_pos]),
        target_time: seq.times[target_pos],
        role,
    }
}

/// Expands each sequence into train, validation and test examples.
pub fn build_splits(
    sequences: &[InteractionSequence],
    catalog: &Catalog,
    max_len: usize,
) -> Result<Vec<SplitExample>> {
    if max_len == 0 {
        return Err(Error::Config("max_len must be positive".into()));
    }
    let mut out = Vec::new();
    for (user, seq) in sequences.iter().enumerate() {
        let n = seq.items.len();
        if n < 5 {
            return Err(Error::DataIntegrity(format!(
                "user {} has only {n} interactions; run the five-core filter first",
                seq.user_id
            )));
        }
        for target_pos in 1..n - 1 {
            out.push(window(seq, catalog, target_pos, max_len, user, Role::Train));
        }
        out.push(window(seq, catalog, n - 2, max_len, user, Role::Validation));
        out.push(window(seq, catalog, n - 1, max_len, user, Role::Test));
    }
    Ok(out)
}

/// Uniform draw over items the user never interacted with.
pub fn sample_train_negative(
    rng: &mut impl Rng,
    history: &BTreeSet<usize>,
    n_items: usize,
) -> usize {
    loop {
        let candidate = rng.random_range(1..=n_items);
        if !history.contains(&candidate) {
            return candidate;
        }
    }
}

/// Draws `n` distinct non-interacted items for ranking evaluation.
/// Errors when the catalog cannot supply that many.
pub fn sample_eval_negatives(
    rng: &mut impl Rng,
    history: &BTreeSet<usize>,
    n_items: usize,
    n: usize,
) -> Result<Vec<usize>> {
    let available = n_items - history.iter().filter(|&&i| i >= 1 && i <= n_items).count();
    if available < n {
        return Err(Error::DataIntegrity(format!(
            "only {available} eval candidates available, need {n}"
        )));
    }
    if available == n {
        return Ok((1..=n_items).filter(|i| !history.contains(i)).collect());
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let candidate = rng.random_range(1..=n_items);
        if !history.contains(&candidate) && seen.insert(candidate) {
            out.push(candidate);
        }
    }
    Ok(out)
}
