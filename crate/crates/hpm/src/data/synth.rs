//! Synthetic dataset generator.
//!
//! Each user follows a latent category Markov chain: at every step the
//! chain stays put with probability 1 - p_switch, otherwise it jumps to
//! a different category. Within the current category the user usually
//! picks an item uniformly, but right after buying an item with a
//! planted co-purchase partner the partner itself is bought with
//! probability `bundle_follow_prob`. That plants a short-horizon
//! complement pattern the relation kernels can pick up, while brands and
//! prices give the derived relations something to latch onto.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::dataset::{Dataset, GroundTruth};
use crate::data::ingest::{assemble, ItemMeta, RawEvent};
use crate::error::{Error, Result};
use crate::rng::stream;

const DAY_SECONDS: f64 = 86_400.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub users: usize,
    pub categories: usize,
    pub items_per_category: usize,
    pub len_min: usize,
    pub len_max: usize,
    /// Probability that the latent category changes between steps.
    pub p_switch: f64,
    /// Fraction of items that receive a planted co-purchase partner.
    pub partner_rate: f64,
    /// Probability of buying the partner right after its counterpart,
    /// given the latent category stayed put.
    pub bundle_follow_prob: f64,
    /// Items per brand within a category.
    pub brand_size: usize,
    /// Planted co-view edges per item.
    pub views_per_item: usize,
    /// Epoch seconds of the earliest possible interaction.
    pub start_time: i64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            users: 500,
            categories: 8,
            items_per_category: 25,
            len_min: 6,
            len_max: 12,
            p_switch: 0.1,
            partner_rate: 0.5,
            bundle_follow_prob: 0.5,
            brand_size: 5,
            views_per_item: 2,
            start_time: 1_500_000_000,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.items_per_category < 2 {
            return Err(Error::Config(format!(
                "items_per_category must be at least 2, got {}",
                self.items_per_category
            )));
        }
        if self.users == 0 || self.categories == 0 {
            return Err(Error::Config("users and categories must be positive".into()));
        }
        if self.len_min < 5 {
            return Err(Error::Config(format!(
                "len_min must be at least 5 so leave-one-out splits exist, got {}",
                self.len_min
            )));
        }
        if self.len_max < self.len_min {
            return Err(Error::Config(format!(
                "len_max {} is below len_min {}",
                self.len_max, self.len_min
            )));
        }
        for (name, p) in [
            ("p_switch", self.p_switch),
            ("partner_rate", self.partner_rate),
            ("bundle_follow_prob", self.bundle_follow_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.brand_size == 0 || self.views_per_item >= self.items_per_category {
            return Err(Error::Config(
                "brand_size must be positive and views_per_item below items_per_category"
                    .into(),
            ));
        }
        Ok(())
    }
}

fn item_asin(global: usize) -> String {
    format!("i{global:04}")
}

/// Generates a full dataset from the config and seed, running the same
/// assembly pipeline as real ingestion.
pub fn generate(
    cfg: &SynthConfig,
    seed: u64,
    max_len: usize,
    price_tolerance: f64,
) -> Result<Dataset> {
    cfg.validate()?;
    let n_items = cfg.categories * cfg.items_per_category;
    let category_of = |global: usize| global / cfg.items_per_category;
    let items_in =
        |cat: usize| cat * cfg.items_per_category..(cat + 1) * cfg.items_per_category;

    let mut price_rng = stream(seed, "synth-prices");
    let prices: Vec<f64> = (0..n_items)
        .map(|_| (price_rng.random_range(5.0_f64..50.0) * 100.0).round() / 100.0)
        .collect();

    let mut partner_rng = stream(seed, "synth-partners");
    let mut partners: BTreeMap<usize, usize> = BTreeMap::new();
    for g in 0..n_items {
        if partner_rng.random::<f64>() < cfg.partner_rate {
            let cat = category_of(g);
            loop {
                let p = partner_rng.random_range(items_in(cat));
                if p != g {
                    partners.insert(g, p);
                    break;
                }
            }
        }
    }

    let mut view_rng = stream(seed, "synth-views");
    let mut views: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for g in 0..n_items {
        let cat = category_of(g);
        let mut targets = Vec::new();
        while targets.len() < cfg.views_per_item {
            let v = view_rng.random_range(items_in(cat));
            if v != g && !targets.contains(&v) {
                targets.push(v);
            }
        }
        views.insert(g, targets);
    }

    let mut metas = BTreeMap::new();
    for g in 0..n_items {
        let cat = category_of(g);
        let within = g % cfg.items_per_category;
        metas.insert(
            item_asin(g),
            ItemMeta {
                asin: item_asin(g),
                leaf_category: format!("cat{cat:02}"),
                brand: Some(format!("b{cat:02}-{}", within / cfg.brand_size)),
                price: Some(prices[g]),
                also_buy: partners.get(&g).map(|&p| vec![item_asin(p)]).unwrap_or_default(),
                also_view: views[&g].iter().map(|&v| item_asin(v)).collect(),
            },
        );
    }

    let mut events = Vec::new();
    let mut latent_cats = Vec::with_capacity(cfg.users);
    for u in 0..cfg.users {
        let mut rng = stream(seed, &format!("synth-user-{u}"));
        let len = rng.random_range(cfg.len_min..=cfg.len_max);
        let mut cat = rng.random_range(0..cfg.categories);
        let mut t = cfg.start_time
            + (rng.random_range(0.0..365.0) * DAY_SECONDS) as i64;
        let mut prev: Option<usize> = None;
        let mut trace = Vec::with_capacity(len);
        for _ in 0..len {
            if rng.random::<f64>() < cfg.p_switch && cfg.categories > 1 {
                let mut next = rng.random_range(0..cfg.categories - 1);
                if next >= cat {
                    next += 1;
                }
                cat = next;
            }
            trace.push(cat);
            let followed = prev
                .filter(|&p| category_of(p) == cat)
                .and_then(|p| partners.get(&p).copied())
                .filter(|&w| Some(w) != prev && rng.random::<f64>() < cfg.bundle_follow_prob);
            let item = followed.unwrap_or_else(|| loop {
                let c = rng.random_range(items_in(cat));
                if Some(c) != prev || cfg.items_per_category == 1 {
                    break c;
                }
            });
            events.push(RawEvent {
                user: format!("u{u:04}"),
                asin: item_asin(item),
                time: t,
            });
            t += (rng.random_range(0.5..2.5) * DAY_SECONDS) as i64;
            prev = Some(item);
        }
        latent_cats.push(trace);
    }

    let ground_truth = GroundTruth {
        latent_cats,
        partners: partners
            .iter()
            .map(|(&h, &t)| (item_asin(h), item_asin(t)))
            .collect(),
    };
    assemble(events, &metas, max_len, price_tolerance, Some(ground_truth))
}
