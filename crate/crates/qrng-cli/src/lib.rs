//! Command-line driver, experiment runner, and file formats for the
//! self-testing QRNG engine.
//!
//! The engine crate is deliberately free of IO; everything that touches the
//! filesystem, parses configuration, or formats data for external tools
//! lives here:
//!
//! - [`config`] — the strict TOML schema and its lowering into the engine's
//!   pipeline configuration (unknown keys rejected, mandatory fields
//!   enforced, noise specified as a variance or a flip-probability target),
//! - [`report`] — the JSON run report, CSV emitters for the four analysis
//!   sweeps, and the packed-bits output file with its sidecar,
//! - [`experiments`] — the canned experiments (`fig4`, `fig5-stability`,
//!   `fig6-energy`, `fig7-net`) plus the headline end-to-end run.
//!
//! All outputs are deterministic functions of (config, seed): sweeps
//! parallelize only across independent points with order-preserving
//! collection, so `--workers` cannot change any output byte.

pub mod config;
pub mod experiments;
pub mod report;

pub use qrng_core;
