//! Tabular life-satisfaction prediction pipeline.
//!
//! The crate covers the whole path from survey CSV to served prediction:
//! [`tabular`] ingestion, [`preprocess`] cleaning, [`resample`] class
//! balancing, [`learners`] and their soft-voting ensemble, [`selection`]
//! (RFECV and PCA), [`tuning`], [`metrics`], local surrogate [`explain`]ations,
//! [`textgen`] sentence export, and the config-driven [`pipeline`].

pub mod error;
pub mod explain;
pub mod learners;
pub mod lifewell;
pub mod matrix;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod resample;
pub mod rng;
pub mod selection;
pub mod tabular;
pub mod textgen;
pub mod tuning;

pub use error::{Error, Result};
pub use matrix::Matrix;
