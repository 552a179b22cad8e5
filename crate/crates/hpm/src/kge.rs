//! Translation-based embedding pretraining over the relation graph.
//!
//! Entities live at two levels, items and categories, each with its own
//! embedding table; the four relation vectors are shared between levels.
//! A triple (h, r, t) is scored by f = ||e_h + e_r - e_t||^2, and
//! training minimizes the margin ranking loss
//! max(0, margin + f(positive) - f(corrupted)) with one corrupted triple
//! per positive. After every optimizer step entity rows are pulled back
//! onto the unit ball; relation vectors are left free.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::relations::{Relation, RelationGraph, RELATION_COUNT};
use crate::error::{Error, Result};
use crate::numeric::{adam_step, AdamConfig, AdamState, Matrix, Tape};
use crate::rng::stream;

pub const EMB_SCHEMA: &str = "hpm-emb-v1";

/// Which entity space a triple's head and tail index into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    Item,
    Category,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub level: Level,
    pub head: usize,
    pub relation: Relation,
    pub tail: usize,
}

/// Item, category, and relation embeddings. Row 0 of the item and
/// category tables is the padding embedding and stays all-zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTables {
    pub item: Matrix,
    pub category: Matrix,
    pub relation: Matrix,
}

impl EmbeddingTables {
    /// Uniform(-1/sqrt(d), 1/sqrt(d)) initialization with zeroed padding
    /// rows.
    pub fn init(
        n_items: usize,
        n_categories: usize,
        d: usize,
        rng: &mut impl Rng,
    ) -> EmbeddingTables {
        let bound = 1.0 / (d as f64).sqrt();
        let mut item = Matrix::uniform(n_items + 1, d, -bound, bound, rng);
        let mut category = Matrix::uniform(n_categories + 1, d, -bound, bound, rng);
        let relation = Matrix::uniform(RELATION_COUNT, d, -bound, bound, rng);
        item.row_mut(0).fill(0.0);
        category.row_mut(0).fill(0.0);
        EmbeddingTables { item, category, relation }
    }

    pub fn d(&self) -> usize {
        self.item.cols()
    }

    pub fn n_items(&self) -> usize {
        self.item.rows() - 1
    }

    pub fn n_categories(&self) -> usize {
        self.category.rows() - 1
    }

    fn entity_table(&self, level: Level) -> &Matrix {
        match level {
            Level::Item => &self.item,
            Level::Category => &self.category,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.item.validate()?;
        self.category.validate()?;
        self.relation.validate()?;
        let d = self.d();
        if self.category.cols() != d || self.relation.cols() != d {
            return Err(Error::DataIntegrity(
                "embedding tables disagree on dimension".into(),
            ));
        }
        if self.relation.rows() != RELATION_COUNT {
            return Err(Error::DataIntegrity(format!(
                "relation table has {} rows, expected {RELATION_COUNT}",
                self.relation.rows()
            )));
        }
        for table in [&self.item, &self.category] {
            if table.row(0).iter().any(|&v| v != 0.0) {
                return Err(Error::DataIntegrity(
                    "padding embedding row is not zero".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Artifact<'a> {
            schema: &'a str,
            tables: &'a EmbeddingTables,
        }
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let json = serde_json::to_string(&Artifact { schema: EMB_SCHEMA, tables: self })?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<EmbeddingTables> {
        #[derive(Deserialize)]
        struct Artifact {
            schema: String,
            tables: EmbeddingTables,
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let artifact: Artifact = serde_json::from_str(&text)?;
        if artifact.schema != EMB_SCHEMA {
            return Err(Error::DataIntegrity(format!(
                "embedding schema {} does not match expected {EMB_SCHEMA}",
                artifact.schema
            )));
        }
        artifact.tables.validate()?;
        Ok(artifact.tables)
    }
}

/// Squared L2 translation score; lower means the triple fits better.
pub fn transe_score(tables: &EmbeddingTables, triple: &Triple) -> f64 {
    let e = tables.entity_table(triple.level);
    let h = e.row(triple.head);
    let t = e.row(triple.tail);
    let r = tables.relation.row(triple.relation.index());
    h.iter()
        .zip(r)
        .zip(t)
        .map(|((&hv, &rv), &tv)| {
            let d = hv + rv - tv;
            d * d
        })
        .sum()
}

/// Flattens both levels of the relation graph into training triples.
pub fn collect_triples(graph: &RelationGraph) -> Vec<Triple> {
    let mut out = Vec::new();
    for rel in Relation::ALL {
        for (h, t) in graph.items(rel).iter() {
            out.push(Triple { level: Level::Item, head: h, relation: rel, tail: t });
        }
        for (h, t) in graph.categories(rel).iter() {
            out.push(Triple { level: Level::Category, head: h, relation: rel, tail: t });
        }
    }
    out
}

type TripleKey = (Level, usize, usize, usize);

fn key(t: &Triple) -> TripleKey {
    (t.level, t.head, t.relation.index(), t.tail)
}

/// Replaces the head or tail (fair coin) with a different entity of the
/// same level. Corruptions that collide with a known positive are
/// redrawn; if every alternative is positive the last draw stands.
pub fn corrupt_triple(
    rng: &mut impl Rng,
    triple: &Triple,
    n_entities: usize,
    positives: &BTreeSet<TripleKey>,
) -> Triple {
    debug_assert!(n_entities >= 2, "corruption needs at least two entities");
    let corrupt_head = rng.random::<f64>() < 0.5;
    let original = if corrupt_head { triple.head } else { triple.tail };
    let mut corrupted = *triple;
    for _ in 0..100 {
        let mut replacement = rng.random_range(1..=n_entities - 1);
        if replacement >= original {
            replacement += 1;
        }
        if corrupt_head {
            corrupted.head = replacement;
        } else {
            corrupted.tail = replacement;
        }
        if !positives.contains(&key(&corrupted)) {
            break;
        }
    }
    corrupted
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub margin: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig { lr: 1e-5, epochs: 100, batch_size: 32, margin: 1.0 }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr <= 0.0 || !self.lr.is_finite() {
            return Err(Error::Config(format!("pretrain lr must be positive, got {}", self.lr)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("pretrain epochs and batch_size must be positive".into()));
        }
        if self.margin <= 0.0 {
            return Err(Error::Config(format!("margin must be positive, got {}", self.margin)));
        }
        Ok(())
    }
}

fn renorm_entities(tables: &mut EmbeddingTables) {
    for table in [&mut tables.item, &mut tables.category] {
        for r in 1..table.rows() {
            let row = table.row_mut(r);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1.0 {
                for v in row {
                    *v /= norm;
                }
            }
        }
    }
}

/// Margin-ranking pretraining over the given triples. Both levels train
/// jointly in mixed batches and share the relation table. Returns the
/// mean margin loss after each epoch, measured on a fixed probe of
/// (positive, corrupted) pairs so the curve is comparable across epochs.
pub fn pretrain(
    tables: &mut EmbeddingTables,
    triples: &[Triple],
    cfg: &PretrainConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if triples.is_empty() {
        return Err(Error::DataIntegrity(
            "relation graph yields no triples to pretrain on".into(),
        ));
    }
    for t in triples {
        let rows = tables.entity_table(t.level).rows();
        if t.head == 0 || t.tail == 0 || t.head >= rows || t.tail >= rows {
            return Err(Error::DataIntegrity(format!(
                "triple ({}, {}, {}) outside entity table",
                t.head,
                t.relation.name(),
                t.tail
            )));
        }
    }
    let positives: BTreeSet<TripleKey> = triples.iter().map(key).collect();
    let mut probe_rng = stream(seed, "kge-probe");
    let probe: Vec<(Triple, Triple)> = triples
        .iter()
        .map(|t| {
            let n = tables.entity_table(t.level).rows() - 1;
            (*t, corrupt_triple(&mut probe_rng, t, n, &positives))
        })
        .collect();
    let probe_loss = |tables: &EmbeddingTables| -> f64 {
        probe
            .iter()
            .map(|(p, c)| {
                (cfg.margin + transe_score(tables, p) - transe_score(tables, c)).max(0.0)
            })
            .sum::<f64>()
            / probe.len() as f64
    };
    let adam = AdamConfig::with_lr(cfg.lr);
    let mut state_item = AdamState::new(tables.item.rows(), tables.item.cols());
    let mut state_cat = AdamState::new(tables.category.rows(), tables.category.cols());
    let mut state_rel = AdamState::new(tables.relation.rows(), tables.relation.cols());

    let mut order: Vec<usize> = (0..triples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut stream(seed, &format!("kge-shuffle-{epoch}")));
        let mut corrupt_rng = stream(seed, &format!("kge-corrupt-{epoch}"));
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(Triple, Triple)> = chunk
                .iter()
                .map(|&i| {
                    let pos = triples[i];
                    let n = tables.entity_table(pos.level).rows() - 1;
                    (pos, corrupt_triple(&mut corrupt_rng, &pos, n, &positives))
                })
                .collect();

            let mut tape = Tape::new();
            let item_leaf = tape.param(tables.item.clone());
            let cat_leaf = tape.param(tables.category.clone());
            let rel_leaf = tape.param(tables.relation.clone());
            let mut hinge_terms = Vec::new();
            for level in [Level::Item, Level::Category] {
                let entity_leaf = match level {
                    Level::Item => item_leaf,
                    Level::Category => cat_leaf,
                };
                let subset: Vec<&(Triple, Triple)> =
                    batch.iter().filter(|(p, _)| p.level == level).collect();
                if subset.is_empty() {
                    continue;
                }
                let heads: Vec<usize> = subset.iter().map(|(p, _)| p.head).collect();
                let tails: Vec<usize> = subset.iter().map(|(p, _)| p.tail).collect();
                let rels: Vec<usize> =
                    subset.iter().map(|(p, _)| p.relation.index()).collect();
                let c_heads: Vec<usize> = subset.iter().map(|(_, c)| c.head).collect();
                let c_tails: Vec<usize> = subset.iter().map(|(_, c)| c.tail).collect();

                let score = |t: &mut Tape, hs: &[usize], ts: &[usize]| -> Result<_> {
                    let h = t.gather(entity_leaf, hs)?;
                    let r = t.gather(rel_leaf, &rels)?;
                    let tl = t.gather(entity_leaf, ts)?;
                    let hr = t.add(h, r)?;
                    let diff = t.sub(hr, tl)?;
                    let sq = t.mul(diff, diff)?;
                    Ok(t.row_sum(sq))
                };
                let f_pos = score(&mut tape, &heads, &tails)?;
                let f_neg = score(&mut tape, &c_heads, &c_tails)?;
                let gap = tape.sub(f_pos, f_neg)?;
                let shifted = tape.add_const(gap, cfg.margin);
                hinge_terms.push(tape.relu(shifted));
            }
            let stacked = tape.concat_rows(&hinge_terms)?;
            let total = tape.sum_all(stacked);
            let loss = tape.scale_const(total, 1.0 / batch.len() as f64);
            let loss_value = tape.value(loss).item()?;
            if !loss_value.is_finite() {
                return Err(Error::NonFinite(format!(
                    "pretraining loss became {loss_value} in epoch {epoch}"
                )));
            }

            let grads = tape.backward(loss)?;
            if let Some(g) = grads.get(item_leaf) {
                adam_step(&adam, &mut state_item, &mut tables.item, g)?;
            }
            if let Some(g) = grads.get(cat_leaf) {
                adam_step(&adam, &mut state_cat, &mut tables.category, g)?;
            }
            if let Some(g) = grads.get(rel_leaf) {
                adam_step(&adam, &mut state_rel, &mut tables.relation, g)?;
            }
            renorm_entities(tables);
        }
        epoch_losses.push(probe_loss(tables));
    }
    Ok(epoch_losses)
}

/// Convenience wrapper: pretrain on every triple the graph holds.
pub fn pretrain_on_graph(
    tables: &mut EmbeddingTables,
    graph: &RelationGraph,
    cfg: &PretrainConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    pretrain(tables, &collect_triples(graph), cfg, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn tables_for(n_entities: usize, d: usize, seed: u64) -> EmbeddingTables {
        EmbeddingTables::init(n_entities, 3, d, &mut stream(seed, "kge-test-init"))
    }

    /// Triples whose entities follow a planted translation geometry, so
    /// the scoring function has a consistent solution to find.
    fn planted_triples(
        n_entities: usize,
        n_triples: usize,
        d: usize,
        seed: u64,
    ) -> Vec<Triple> {
        let mut rng = stream(seed, "planted-kg");
        let points: Vec<Vec<f64>> = (0..=n_entities)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let shifts: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..d).map(|_| rng.random_range(-0.6..0.6)).collect())
            .collect();
        let mut triples = Vec::new();
        let mut seen = BTreeSet::new();
        let mut attempts = 0;
        while triples.len() < n_triples {
            attempts += 1;
            assert!(
                attempts < 200 * n_triples,
                "planted KG cannot supply {n_triples} distinct triples"
            );
            let h = rng.random_range(1..=n_entities);
            let rel = if rng.random::<f64>() < 0.5 {
                Relation::AlsoBuy
            } else {
                Relation::AlsoView
            };
            let shift = &shifts[rel.index()];
            // Tail = entity nearest to head + shift + jitter; the jitter
            // lets one head reach a few different consistent tails.
            let target: Vec<f64> = points[h]
                .iter()
                .zip(shift)
                .map(|(&p, &s)| p + s + rng.random_range(-0.35..0.35))
                .collect();
            let tail = (1..=n_entities)
                .filter(|&t| t != h)
                .min_by(|&a, &b| {
                    let da: f64 = points[a]
                        .iter()
                        .zip(&target)
                        .map(|(&p, &q)| (p - q) * (p - q))
                        .sum();
                    let db: f64 = points[b]
                        .iter()
                        .zip(&target)
                        .map(|(&p, &q)| (p - q) * (p - q))
                        .sum();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            let t = Triple { level: Level::Item, head: h, relation: rel, tail };
            if seen.insert(key(&t)) {
                triples.push(t);
            }
        }
        triples
    }

    #[test]
    fn transe_score_known_value() {
        let mut tables = tables_for(2, 2, 1);
        tables.item.row_mut(1).copy_from_slice(&[1.0, 0.0]);
        tables.item.row_mut(2).copy_from_slice(&[0.0, 0.0]);
        tables.relation.row_mut(0).copy_from_slice(&[0.0, 1.0]);
        let triple = Triple {
            level: Level::Item,
            head: 1,
            relation: Relation::AlsoBuy,
            tail: 2,
        };
        assert!((transe_score(&tables, &triple) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn transe_score_symmetric_under_relation_negation() {
        let mut tables = tables_for(6, 8, 3);
        let mut rng = stream(3, "negation-fill");
        for row in 1..tables.item.rows() {
            for v in tables.item.row_mut(row) {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        for v in tables.relation.row_mut(0) {
            *v = rng.random_range(-1.0..1.0);
        }
        let mut negated = tables.clone();
        for v in negated.relation.row_mut(0) {
            *v = -*v;
        }
        let fwd = Triple {
            level: Level::Item,
            head: 2,
            relation: Relation::AlsoBuy,
            tail: 5,
        };
        let rev = Triple {
            level: Level::Item,
            head: 5,
            relation: Relation::AlsoBuy,
            tail: 2,
        };
        let a = transe_score(&tables, &fwd);
        let b = transe_score(&negated, &rev);
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn init_respects_bound_and_padding() {
        let tables = tables_for(20, 16, 2);
        let bound = 1.0 / 4.0;
        assert!(tables.item.as_slice().iter().all(|v| v.abs() <= bound));
        assert!(tables.item.row(0).iter().all(|&v| v == 0.0));
        assert!(tables.category.row(0).iter().all(|&v| v == 0.0));
        tables.validate().unwrap();
    }

    #[test]
    fn corrupt_flips_head_and_tail_evenly() {
        let triple = Triple {
            level: Level::Item,
            head: 3,
            relation: Relation::AlsoBuy,
            tail: 7,
        };
        let positives = BTreeSet::new();
        let mut rng = stream(3, "corrupt-balance");
        let n = 10_000;
        let mut heads = 0;
        for _ in 0..n {
            let c = corrupt_triple(&mut rng, &triple, 50, &positives);
            assert_ne!((c.head, c.tail), (triple.head, triple.tail));
            if c.head != triple.head {
                assert_eq!(c.tail, triple.tail);
                assert_ne!(c.head, 0, "padding must never be drawn");
                heads += 1;
            } else {
                assert_ne!(c.tail, triple.tail);
                assert_ne!(c.tail, 0);
            }
        }
        let sigma = (n as f64 * 0.25).sqrt();
        assert!(
            (heads as f64 - n as f64 / 2.0).abs() < 3.0 * sigma,
            "head corruptions: {heads}/{n}"
        );
    }

    #[test]
    fn corrupt_two_entity_vocabulary_is_forced() {
        let triple = Triple {
            level: Level::Item,
            head: 1,
            relation: Relation::AlsoBuy,
            tail: 2,
        };
        let positives = BTreeSet::new();
        let mut rng = stream(4, "corrupt-forced");
        for _ in 0..50 {
            let c = corrupt_triple(&mut rng, &triple, 2, &positives);
            // Either the head became 2 or the tail became 1; both describe
            // the single available replacement.
            assert!(
                (c.head == 2 && c.tail == 2) || (c.head == 1 && c.tail == 1),
                "unexpected corruption {c:?}"
            );
        }
    }

    #[test]
    fn corrupt_avoids_known_positives() {
        let triple = Triple {
            level: Level::Item,
            head: 1,
            relation: Relation::AlsoBuy,
            tail: 2,
        };
        // Tails 3 and 4 are also positives; only 5 remains as a valid
        // tail corruption, and heads 3,4,5 are free.
        let mut positives = BTreeSet::new();
        for t in [2, 3, 4] {
            positives.insert((Level::Item, 1, Relation::AlsoBuy.index(), t));
        }
        let mut rng = stream(5, "corrupt-avoid");
        for _ in 0..200 {
            let c = corrupt_triple(&mut rng, &triple, 5, &positives);
            assert!(!positives.contains(&key(&c)), "drew a positive {c:?}");
        }
    }

    #[test]
    fn pretrain_separates_planted_structure() {
        let n_entities = 30;
        let triples = planted_triples(n_entities, 120, 8, 6);
        let mut tables = tables_for(n_entities, 8, 7);
        let cfg = PretrainConfig { lr: 3e-3, epochs: 80, ..Default::default() };
        pretrain(&mut tables, &triples, &cfg, 8).unwrap();

        let positives: BTreeSet<TripleKey> = triples.iter().map(key).collect();
        let mut corrupt_rng = stream(9, "kge-sep-corrupt");
        let mean_pos = triples
            .iter()
            .map(|t| transe_score(&tables, t))
            .sum::<f64>()
            / triples.len() as f64;
        let mean_neg = triples
            .iter()
            .map(|t| {
                let c = corrupt_triple(&mut corrupt_rng, t, n_entities, &positives);
                transe_score(&tables, &c)
            })
            .sum::<f64>()
            / triples.len() as f64;
        assert!(
            mean_pos < mean_neg,
            "true triples ({mean_pos:.4}) should score below corrupted ({mean_neg:.4})"
        );
    }

    #[test]
    fn pretrain_loss_mostly_non_increasing() {
        let triples = planted_triples(30, 120, 8, 16);
        let mut tables = tables_for(30, 8, 17);
        let cfg = PretrainConfig { lr: 3e-3, epochs: 60, ..Default::default() };
        let losses = pretrain(&mut tables, &triples, &cfg, 18).unwrap();
        let pairs = losses.len() - 1;
        let non_increasing = losses.windows(2).filter(|w| w[1] <= w[0] + 1e-12).count();
        assert!(
            non_increasing as f64 >= 0.8 * pairs as f64,
            "only {non_increasing}/{pairs} epoch pairs non-increasing: {losses:?}"
        );
    }

    #[test]
    fn pretrain_keeps_entities_in_unit_ball_and_padding_zero() {
        let triples = planted_triples(20, 60, 6, 26);
        let mut tables = tables_for(20, 6, 27);
        let cfg = PretrainConfig { lr: 1e-2, epochs: 10, ..Default::default() };
        pretrain(&mut tables, &triples, &cfg, 28).unwrap();
        for r in 1..tables.item.rows() {
            let norm = tables.item.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm <= 1.0 + 1e-12, "row {r} has norm {norm}");
        }
        assert!(tables.item.row(0).iter().all(|&v| v == 0.0));
        assert!(tables.category.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn satisfied_margin_means_zero_loss_and_no_movement() {
        // Two entities, f(pos) = 0, and both forced corruptions are
        // self-loops scoring ||r||^2 = 1.44, past the margin of 1.
        let mut tables = tables_for(2, 4, 36);
        tables.item.row_mut(1).copy_from_slice(&[0.0, -0.6, 0.0, 0.0]);
        tables.item.row_mut(2).copy_from_slice(&[0.0, 0.6, 0.0, 0.0]);
        tables.relation.row_mut(0).copy_from_slice(&[0.0, 1.2, 0.0, 0.0]);
        let triples = vec![Triple {
            level: Level::Item,
            head: 1,
            relation: Relation::AlsoBuy,
            tail: 2,
        }];
        let before = tables.clone();
        let cfg = PretrainConfig { lr: 1e-2, epochs: 3, ..Default::default() };
        let losses = pretrain(&mut tables, &triples, &cfg, 37).unwrap();
        assert!(losses.iter().all(|&l| l == 0.0), "losses {losses:?}");
        assert_eq!(tables.item.row(1), before.item.row(1));
        assert_eq!(tables.item.row(2), before.item.row(2));
        assert_eq!(tables.relation, before.relation);
    }

    #[test]
    fn save_load_round_trip_bit_exact() {
        let triples = planted_triples(15, 40, 6, 46);
        let mut tables = tables_for(15, 6, 47);
        let cfg = PretrainConfig { lr: 1e-3, epochs: 3, ..Default::default() };
        pretrain(&mut tables, &triples, &cfg, 48).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.json");
        tables.save(&path).unwrap();
        let back = EmbeddingTables::load(&path).unwrap();
        assert_eq!(tables, back);
        let bytes_a = std::fs::read(&path).unwrap();
        back.save(&path).unwrap();
        let bytes_b = std::fs::read(&path).unwrap();
        assert_eq!(bytes_a, bytes_b);
    }

    #[test]
    fn empty_triples_are_rejected() {
        let mut tables = tables_for(5, 4, 56);
        let err =
            pretrain(&mut tables, &[], &PretrainConfig::default(), 57).unwrap_err();
        assert!(matches!(err, Error::DataIntegrity(_)));
    }
}
