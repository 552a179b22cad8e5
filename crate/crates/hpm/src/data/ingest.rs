//! Parsing of review and metadata files and dataset assembly.
//!
//! Both inputs are JSON-lines. Review lines need `reviewerID`, `asin`
//! and `unixReviewTime`; metadata lines need `asin` plus optional
//! `category`, `brand`, `price`, `also_buy` and `also_view`. Unknown
//! extra fields are ignored. A malformed line is skipped, but when more
//! than one percent of the lines are malformed the whole file is
//! rejected, naming the offending line numbers.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use crate::data::catalog::{Catalog, ItemAttrs};
use crate::data::dataset::{Dataset, GroundTruth, InteractionSequence, DATA_SCHEMA};
use crate::data::relations::{Relation, RelationGraph};
use crate::data::splits::build_splits;
use crate::error::{Error, Result};

/// Fraction of malformed lines above which parsing fails.
const MALFORMED_LIMIT: f64 = 0.01;

/// One user-item interaction from the reviews file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEvent {
    pub user: String,
    pub asin: String,
    pub time: i64,
}

/// Item metadata joined into the catalog and relation graph.
#[derive(Debug, Clone, Default)]
pub struct ItemMeta {
    pub asin: String,
    pub leaf_category: String,
    pub brand: Option<String>,
    pub price: Option<f64>,
    pub also_buy: Vec<String>,
    pub also_view: Vec<String>,
}

#[derive(Debug)]
pub struct Parsed<T> {
    pub records: T,
    pub skipped_lines: Vec<usize>,
    pub total_lines: usize,
}

#[derive(Deserialize)]
struct ReviewLine {
    #[serde(rename = "reviewerID")]
    reviewer_id: String,
    asin: String,
    #[serde(rename = "unixReviewTime")]
    unix_review_time: i64,
}

#[derive(Deserialize)]
struct MetaLine {
    asin: String,
    category: Option<Vec<String>>,
    brand: Option<String>,
    price: Option<f64>,
    also_buy: Option<Vec<String>>,
    also_view: Option<Vec<String>>,
}

fn enforce_malformed_limit(
    what: &str,
    skipped: &[usize],
    total: usize,
) -> Result<()> {
    if total > 0 && skipped.len() as f64 > MALFORMED_LIMIT * total as f64 {
        return Err(Error::Ingest {
            message: format!(
                "{} of {total} {what} lines are malformed",
                skipped.len()
            ),
            lines: skipped.to_vec(),
        });
    }
    Ok(())
}

/// Parses review events from JSON-lines text. Events come out sorted by
/// (user, timestamp), ties keeping file order.
pub fn parse_reviews_str(text: &str) -> Result<Parsed<Vec<RawEvent>>> {
    let mut events = Vec::new();
    let mut skipped = Vec::new();
    let mut total = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        total += 1;
        match serde_json::from_str::<ReviewLine>(line) {
            Ok(r) => events.push(RawEvent {
                user: r.reviewer_id,
                asin: r.asin,
                time: r.unix_review_time,
            }),
            Err(_) => skipped.push(lineno + 1),
        }
    }
    enforce_malformed_limit("review", &skipped, total)?;
    events.sort_by(|a, b| a.user.cmp(&b.user).then(a.time.cmp(&b.time)));
    Ok(Parsed { records: events, skipped_lines: skipped, total_lines: total })
}

pub fn parse_reviews(path: &Path) -> Result<Parsed<Vec<RawEvent>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_reviews_str(&text)
}

/// Parses item metadata from JSON-lines text. The leaf category is the
/// last entry of the category array; items without one get "unknown".
/// The first record wins when an asin repeats.
pub fn parse_metadata_str(text: &str) -> Result<Parsed<BTreeMap<String, ItemMeta>>> {
    let mut metas = BTreeMap::new();
    let mut skipped = Vec::new();
    let mut total = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        total += 1;
        match serde_json::from_str::<MetaLine>(line) {
            Ok(m) => {
                let leaf = m
                    .category
                    .as_ref()
                    .and_then(|c| c.last())
                    .cloned()
                    .unwrap_or_else(|| "unknown".to_string());
                let price = m.price.filter(|p| p.is_finite() && *p > 0.0);
                metas.entry(m.asin.clone()).or_insert(ItemMeta {
                    asin: m.asin,
                    leaf_category: leaf,
                    brand: m.brand.filter(|b| !b.is_empty()),
                    price,
                    also_buy: m.also_buy.unwrap_or_default(),
                    also_view: m.also_view.unwrap_or_default(),
                });
            }
            Err(_) => skipped.push(lineno + 1),
        }
    }
    enforce_malformed_limit("metadata", &skipped, total)?;
    Ok(Parsed { records: metas, skipped_lines: skipped, total_lines: total })
}

pub fn parse_metadata(path: &Path) -> Result<Parsed<BTreeMap<String, ItemMeta>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metadata_str(&text)
}

/// Repeatedly removes users and items with fewer than five events until
/// both constraints hold simultaneously. May return an empty vector.
pub fn five_core_filter(mut events: Vec<RawEvent>) -> Vec<RawEvent> {
    loop {
        let mut user_counts: BTreeMap<&str, usize> = BTreeMap::new();
        let mut item_counts: BTreeMap<&str, usize> = BTreeMap::new();
        for e in &events {
            *user_counts.entry(&e.user).or_default() += 1;
            *item_counts.entry(&e.asin).or_default() += 1;
        }
        let keep: Vec<bool> = events
            .iter()
            .map(|e| user_counts[e.user.as_str()] >= 5 && item_counts[e.asin.as_str()] >= 5)
            .collect();
        if keep.iter().all(|&k| k) {
            return events;
        }
        let mut idx = 0;
        events.retain(|_| {
            let k = keep[idx];
            idx += 1;
            k
        });
    }
}

/// Groups filtered events into per-user chronological sequences. Users
/// come out sorted by external id.
pub fn group_sequences(events: &[RawEvent], catalog: &Catalog) -> Vec<InteractionSequence> {
    let mut by_user: BTreeMap<&str, Vec<&RawEvent>> = BTreeMap::new();
    for e in events {
        by_user.entry(&e.user).or_default().push(e);
    }
    by_user
        .into_iter()
        .map(|(user, evs)| InteractionSequence {
            user_id: user.to_string(),
            items: evs
                .iter()
                .map(|e| catalog.item_index(&e.asin).expect("event item in catalog"))
                .collect(),
            times: evs.iter().map(|e| e.time).collect(),
        })
        .collect()
}

/// Builds the four-relation graph. Co-purchase and co-view edges come
/// straight from metadata, restricted to in-catalog endpoints. Shared
/// brand and same-category-similar-price edges are derived, restricted
/// to item pairs that co-occur within one history window of some user,
/// which keeps the derived relations from forming dense cliques.
pub fn build_relation_graph(
    metas: &BTreeMap<String, ItemMeta>,
    catalog: &Catalog,
    sequences: &[InteractionSequence],
    price_tolerance: f64,
    max_len: usize,
) -> RelationGraph {
    let mut graph = RelationGraph::default();
    let edge = |g: &mut RelationGraph, rel: Relation, h: usize, t: usize| {
        g.insert_item_edge(rel, h, t, catalog.category_of(h), catalog.category_of(t));
    };

    for meta in metas.values() {
        let Some(h) = catalog.item_index(&meta.asin) else { continue };
        for t_asin in &meta.also_buy {
            if let Some(t) = catalog.item_index(t_asin) {
                edge(&mut graph, Relation::AlsoBuy, h, t);
            }
        }
        for t_asin in &meta.also_view {
            if let Some(t) = catalog.item_index(t_asin) {
                edge(&mut graph, Relation::AlsoView, h, t);
            }
        }
    }

    let mut co_occurring: BTreeSet<(usize, usize)> = BTreeSet::new();
    for seq in sequences {
        for i in 0..seq.items.len() {
            for j in (i + 1)..seq.items.len().min(i + max_len) {
                let (a, b) = (seq.items[i], seq.items[j]);
                if a != b {
                    co_occurring.insert((a.min(b), a.max(b)));
                }
            }
        }
    }

    for &(a, b) in &co_occurring {
        if let (Some(ba), Some(bb)) = (catalog.brand_of(a), catalog.brand_of(b)) {
            if ba == bb {
                edge(&mut graph, Relation::SameBrand, a, b);
                edge(&mut graph, Relation::SameBrand, b, a);
            }
        }
        if catalog.category_of(a) == catalog.category_of(b) {
            if let (Some(pa), Some(pb)) = (catalog.price_of(a), catalog.price_of(b)) {
                if (pa - pb).abs() / pa.max(pb) <= price_tolerance {
                    edge(&mut graph, Relation::SameCatSimilarPrice, a, b);
                    edge(&mut graph, Relation::SameCatSimilarPrice, b, a);
                }
            }
        }
    }

    graph
}

/// Runs the whole assembly pipeline on parsed inputs: five-core filter,
/// catalog construction, sequence grouping, relation graph, splits.
pub fn assemble(
    events: Vec<RawEvent>,
    metas: &BTreeMap<String, ItemMeta>,
    max_len: usize,
    price_tolerance: f64,
    ground_truth: Option<GroundTruth>,
) -> Result<Dataset> {
    let events = five_core_filter(events);
    let retained: BTreeSet<&str> = events.iter().map(|e| e.asin.as_str()).collect();
    let mut attrs = BTreeMap::new();
    for asin in retained {
        let attr = metas
            .get(asin)
            .map(|m| ItemAttrs {
                leaf_category: m.leaf_category.clone(),
                brand: m.brand.clone(),
                price: m.price,
            })
            .unwrap_or_else(|| ItemAttrs {
                leaf_category: "unknown".to_string(),
                brand: None,
                price: None,
            });
        attrs.insert(asin.to_string(), attr);
    }
    let catalog = Catalog::build(&attrs);
    let sequences = group_sequences(&events, &catalog);
    let graph = build_relation_graph(metas, &catalog, &sequences, price_tolerance, max_len);
    let splits = build_splits(&sequences, &catalog, max_len)?;
    let dataset = Dataset {
        schema: DATA_SCHEMA.to_string(),
        max_len,
        price_tolerance,
        catalog,
        sequences,
        graph,
        splits,
        ground_truth,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Ingests review and metadata files into a ready dataset.
pub fn ingest(
    reviews_path: &Path,
    metadata_path: &Path,
    max_len: usize,
    price_tolerance: f64,
) -> Result<Dataset> {
    let reviews = parse_reviews(reviews_path)?;
    let metas = parse_metadata(metadata_path)?;
    assemble(reviews.records, &metas.records, max_len, price_tolerance, None)
}
