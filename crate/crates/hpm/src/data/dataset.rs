//! The on-disk dataset bundle.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::catalog::{Catalog, PAD};
use crate::data::relations::RelationGraph;
use crate::data::splits::{Role, SplitExample};
use crate::error::{Error, Result};

pub const DATA_SCHEMA: &str = "hpm-data-v1";

/// A user's full chronological interaction history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionSequence {
    pub user_id: String,
    pub items: Vec<usize>,
    pub times: Vec<i64>,
}

/// Hidden state the synthetic generator worked from, kept so tests can
/// verify statistical properties of the generated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Latent category trace per user, in generator category space.
    pub latent_cats: Vec<Vec<usize>>,
    /// Planted co-purchase partner per item asin.
    pub partners: std::collections::BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: String,
    pub max_len: usize,
    pub price_tolerance: f64,
    pub catalog: Catalog,
    pub sequences: Vec<InteractionSequence>,
    pub graph: RelationGraph,
    pub splits: Vec<SplitExample>,
    pub ground_truth: Option<GroundTruth>,
}

impl Dataset {
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ds: Dataset = serde_json::from_str(&text)?;
        if ds.schema != DATA_SCHEMA {
            return Err(Error::DataIntegrity(format!(
                "dataset schema {} does not match expected {DATA_SCHEMA}",
                ds.schema
            )));
        }
        ds.validate()?;
        Ok(ds)
    }

    /// Set of items a user ever interacted with.
    pub fn user_items(&self, user: usize) -> BTreeSet<usize> {
        self.sequences[user].items.iter().copied().collect()
    }

    pub fn examples(&self, role: Role) -> impl Iterator<Item = &SplitExample> {
        self.splits.iter().filter(move |s| s.role == role)
    }

    /// Structural consistency of indices, window shapes and timestamps.
    pub fn validate(&self) -> Result<()> {
        self.catalog.validate()?;
        let n_items = self.catalog.n_items();
        for seq in &self.sequences {
            if seq.items.len() != seq.times.len() {
                return Err(Error::DataIntegrity(format!(
                    "user {}: items and times differ in length",
                    seq.user_id
                )));
            }
            if seq.items.iter().any(|&i| i == PAD || i > n_items) {
                return Err(Error::DataIntegrity(format!(
                    "user {}: item index outside catalog",
                    seq.user_id
                )));
            }
            if seq.times.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::DataIntegrity(format!(
                    "user {}: timestamps not sorted",
                    seq.user_id
                )));
            }
        }
        for (k, s) in self.splits.iter().enumerate() {
            if s.user >= self.sequences.len() {
                return Err(Error::DataIntegrity(format!(
                    "split {k} references unknown user {}",
                    s.user
                )));
            }
            if s.items.len() != self.max_len
                || s.cats.len() != self.max_len
                || s.times.len() != self.max_len
            {
                return Err(Error::DataIntegrity(format!(
                    "split {k} has window length {} instead of {}",
                    s.items.len(),
                    self.max_len
                )));
            }
            if s.target_item == PAD || s.target_item > n_items {
                return Err(Error::DataIntegrity(format!(
                    "split {k} target item outside catalog"
                )));
            }
            if s.target_cat != self.catalog.category_of(s.target_item) {
                return Err(Error::DataIntegrity(format!(
                    "split {k} target category disagrees with catalog"
                )));
            }
            for (&it, &ct) in s.items.iter().zip(&s.cats) {
                if it > n_items {
                    return Err(Error::DataIntegrity(format!(
                        "split {k} window item outside catalog"
                    )));
                }
                if ct != self.catalog.category_of(it) {
                    return Err(Error::DataIntegrity(format!(
                        "split {k} window category disagrees with catalog"
                    )));
                }
            }
            if s.items.iter().zip(&s.times).any(|(&it, &ts)| it != PAD && ts > s.target_time) {
                return Err(Error::DataIntegrity(format!(
                    "split {k} history reaches past its target time"
                )));
            }
        }
        Ok(())
    }
}
