//! Data ingestion, catalogs, relations, splits, and synthesis.

pub mod catalog;
pub mod dataset;
pub mod ingest;
pub mod relations;
pub mod splits;
pub mod synth;

pub use catalog::{Catalog, ItemAttrs, PAD};
pub use dataset::{Dataset, GroundTruth, InteractionSequence, DATA_SCHEMA};
pub use ingest::{ingest, ItemMeta, RawEvent};
pub use relations::{EdgeSet, Family, Relation, RelationGraph, RELATION_COUNT};
pub use splits::{
    build_splits, sample_eval_negatives, sample_train_negative, Role, SplitExample,
};
