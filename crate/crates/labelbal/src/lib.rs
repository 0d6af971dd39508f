#![allow(clippy::needless_range_loop)]

//! Label-balanced multi-label learning at desk scale.
//!
//! Multi-label datasets with strongly skewed per-attribute label frequencies
//! break the usual re-sampling tricks: re-weighting the image sampling prior
//! for one attribute skews the prior of every attribute it co-occurs with.
//! This crate implements the pieces needed to study and work around that:
//!
//! - [`lir`]: a linear-program audit deciding whether a label-balanced
//!   image re-sampling distribution exists for a given label matrix.
//! - [`datagen`]: synthetic multi-label datasets with controllable label
//!   means and forced co-occurrence, plus CSV ingestion.
//! - [`model`] / [`trainer`]: a small MLP with per-attribute linear heads,
//!   two-stage decoupled training with per-attribute feature banks, balanced
//!   feature re-sampling, gradient-oriented feature augmentation, and a
//!   weighted-BCE baseline.
//! - [`augment`]: explicit gradient-oriented translation, Gaussian feature
//!   re-sampling with its closed-form margin loss, noise-rate estimation,
//!   and eigen-analysis of translation directions.
//! - [`metrics`]: label-based mean accuracy and instance-based F1, with
//!   label-mean bucket diagnostics.
//! - [`cli`]: the experiment runner behind the `labelbal` binary.

pub mod augment;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod lir;
pub mod metrics;
pub mod model;
pub mod numkit;
pub mod trainer;

pub use error::{Error, Result};

/// Version stamp carried by every JSON artifact this crate writes.
pub const SCHEMA_VERSION: u32 = 1;
