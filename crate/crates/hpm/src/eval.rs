//! Leave-one-out ranking evaluation.
//!
//! Each user's held-out positive is ranked against 99 sampled negatives
//! the user never interacted with. Candidates are shuffled once with a
//! seeded generator before scoring so score ties carry no systematic
//! bias toward the positive, then scored with the gradient-free forward
//! pass and, when the variant calls for it, semantic enhancement of each
//! candidate embedding. Users run in parallel; every random draw comes
//! from a per-user named stream, so thread scheduling cannot change the
//! result.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::catalog::PAD;
use crate::data::dataset::Dataset;
use crate::data::splits::{sample_eval_negatives, Role};
use crate::error::{Error, Result};
use crate::model::HpmModel;
use crate::objective::score;
use crate::rng::stream;
use crate::scel::enhance_target;

pub const EVAL_KS: [usize; 4] = [5, 10, 20, 50];
pub const EVAL_NEGATIVES: usize = 99;

/// Hit indicator: 1 when the positive landed in the top K. `rank` is
/// 1-based.
pub fn hr_at_k(rank: usize, k: usize) -> f64 {
    debug_assert!(rank >= 1);
    if rank <= k {
        1.0
    } else {
        0.0
    }
}

/// Discounted gain of a single relevant item at the given 1-based rank;
/// the ideal ordering has gain 1, so no further normalization applies.
pub fn ndcg_at_k(rank: usize, k: usize) -> f64 {
    debug_assert!(rank >= 1);
    if rank <= k {
        1.0 / ((rank + 1) as f64).log2()
    } else {
        0.0
    }
}

/// 1-based rank of the candidate at `positive` under descending score,
/// with ties going to the earlier list position.
pub fn rank_of_positive(scores: &[f64], positive: usize) -> usize {
    let own = scores[positive];
    let better = scores.iter().filter(|&&s| s > own).count();
    let tied_before = scores[..positive].iter().filter(|&&s| s == own).count();
    1 + better + tied_before
}

/// Rank of one evaluated user's positive candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRank {
    pub user: usize,
    pub rank: usize,
}

/// Aggregated ranking metrics plus the per-user ranks they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEvaluation {
    pub role: Role,
    pub ranks: Vec<UserRank>,
    pub skipped_users: Vec<usize>,
    pub hr: BTreeMap<usize, f64>,
    pub ndcg: BTreeMap<usize, f64>,
}

impl RankedEvaluation {
    /// Means of HR@K and NDCG@K over the evaluated users.
    pub fn aggregate(role: Role, ranks: Vec<UserRank>, skipped_users: Vec<usize>) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::DataIntegrity(format!(
                "no user in the {} split could be evaluated; {} lacked enough negatives",
                role.name(),
                skipped_users.len()
            )));
        }
        let n = ranks.len() as f64;
        let mut hr = BTreeMap::new();
        let mut ndcg = BTreeMap::new();
        for k in EVAL_KS {
            hr.insert(k, ranks.iter().map(|r| hr_at_k(r.rank, k)).sum::<f64>() / n);
            ndcg.insert(k, ranks.iter().map(|r| ndcg_at_k(r.rank, k)).sum::<f64>() / n);
        }
        Ok(RankedEvaluation { role, ranks, skipped_users, hr, ndcg })
    }

    pub fn hr_at(&self, k: usize) -> f64 {
        self.hr.get(&k).copied().unwrap_or(0.0)
    }

    pub fn ndcg_at(&self, k: usize) -> f64 {
        self.ndcg.get(&k).copied().unwrap_or(0.0)
    }
}

fn candidate_scores(
    model: &HpmModel,
    dataset: &Dataset,
    v_f: &[f64],
    c_f: &[f64],
    candidates: &[usize],
    items: &[usize],
    cats: &[usize],
    times: &[i64],
    target_time: i64,
) -> Vec<f64> {
    candidates
        .iter()
        .map(|&cand| {
            let cand_cat = dataset.catalog.category_of(cand);
            if model.variant.scel_active() {
                let enhanced = enhance_target(
                    &model.tables,
                    &dataset.graph,
                    &model.kernels,
                    items,
                    cats,
                    times,
                    cand,
                    cand_cat,
                    target_time,
                );
                score(v_f, c_f, &enhanced.item, &enhanced.category)
            } else {
                score(
                    v_f,
                    c_f,
                    model.tables.item.row(cand),
                    model.tables.category.row(cand_cat),
                )
            }
        })
        .collect()
}

/// Ranks every example of `role` and aggregates HR@K / NDCG@K. Users
/// whose interaction history leaves fewer than 99 fresh negatives are
/// skipped and reported in `skipped_users`.
pub fn evaluate_split(
    model: &HpmModel,
    dataset: &Dataset,
    role: Role,
    seed: u64,
) -> Result<RankedEvaluation> {
    model.validate()?;
    let examples: Vec<_> = dataset.examples(role).collect();
    if examples.is_empty() {
        return Err(Error::Contract(format!("the {} split is empty", role.name())));
    }
    let n_items = dataset.catalog.n_items();
    let outcomes: Vec<Result<(usize, Option<usize>)>> = examples
        .par_iter()
        .map(|ex| {
            let history = dataset.user_items(ex.user);
            let label = format!("eval-{}-{}", role.name(), ex.user);
            let negatives =
                match sample_eval_negatives(&mut stream(seed, &label), &history, n_items, EVAL_NEGATIVES)
                {
                    Ok(n) => n,
                    Err(Error::DataIntegrity(_)) => return Ok((ex.user, None)),
                    Err(e) => return Err(e),
                };
            let mut candidates = Vec::with_capacity(EVAL_NEGATIVES + 1);
            candidates.push(ex.target_item);
            candidates.extend(negatives);
            let shuffle_label = format!("eval-shuffle-{}-{}", role.name(), ex.user);
            candidates.shuffle(&mut stream(seed, &shuffle_label));
            let positive = candidates
                .iter()
                .position(|&c| c == ex.target_item)
                .expect("positive survives the shuffle");
            let valid: Vec<bool> = ex.items.iter().map(|&i| i != PAD).collect();
            let (v_f, c_f) = model.forward_plain(&ex.items, &ex.cats, &valid)?;
            let scores = candidate_scores(
                model,
                dataset,
                &v_f,
                &c_f,
                &candidates,
                &ex.items,
                &ex.cats,
                &ex.times,
                ex.target_time,
            );
            Ok((ex.user, Some(rank_of_positive(&scores, positive))))
        })
        .collect();
    let mut ranks = Vec::new();
    let mut skipped_users = Vec::new();
    for outcome in outcomes {
        match outcome? {
            (user, Some(rank)) => ranks.push(UserRank { user, rank }),
            (user, None) => skipped_users.push(user),
        }
    }
    RankedEvaluation::aggregate(role, ranks, skipped_users)
}
