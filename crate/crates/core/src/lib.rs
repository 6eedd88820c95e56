//! County-level before/after analysis of state mask orders, plus a benchmark
//! of nine binary classifiers implemented from scratch.
//!
//! The pipeline ingests three CSV families (cumulative epidemic series,
//! census covariates, a mask-usage survey), joins them by county FIPS code,
//! computes each county's death-ratio change around its state's order date,
//! and trains/evaluates the classifiers on the resulting labeled dataset.
//! Everything is deterministic under a single seed; the CLI writes the
//! report artifacts as plain CSV/TOML files.

// Validation writes `!(x > 0.0)` so NaN fails closed, and the numeric
// kernels index several parallel arrays at once, where iterator chains
// read worse than the plain loops.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod learners;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod synth;

pub use error::Error;
