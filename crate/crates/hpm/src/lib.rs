//! Sequential recommendation with hierarchical (item and category level)
//! preference modeling.
//!
//! The pipeline: ingest or synthesize interaction data, pretrain entity
//! embeddings on the co-purchase/co-view relation graph, train dual
//! transformer encoders over item and category sequences with temporal
//! relation-aware target enhancement and a contrastive auxiliary loss,
//! then evaluate leave-one-out ranking quality.

pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod kge;
pub mod model;
pub mod numeric;
pub mod objective;
pub mod rng;
pub mod scel;
pub mod train;

pub use error::{Error, Result};
