//! Deterministic desk-scale simulator of federated averaging over clients
//! holding variable-length sequence data.
//!
//! The crate provides the full pipeline: sequential-image dataset
//! construction (variable-length and fixed-length federations), a GRU
//! sequence classifier with exact backpropagation through time, Adam,
//! per-epoch batch planning (padded varying-length batches or
//! length-aligned batches), and FedAvg orchestration with the measurement
//! suite (test accuracy, average local training loss, per-client l2 model
//! divergence, temporal heterogeneity).
//!
//! Everything is seed-deterministic: a run is a pure function of its
//! configuration and root seed. The crate is `no_std` (with `alloc`);
//! file formats, configuration and the CLI live in the companion
//! `fedseq-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod batching;
pub mod error;
pub mod federation;
pub mod gru_model;
mod kernels;
pub mod numerics;
pub mod optimizer;
pub mod rng;
pub mod sequence_data;

pub use error::Error;

/// Convenience alias used across the crate.
pub type Result<T> = core::result::Result<T, Error>;
